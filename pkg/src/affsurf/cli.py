"""``affsurf`` command-line front end.

Every subcommand builds an :class:`ExperimentReport` whose rows have the
fixed columns ``experiment, inputs, estimate, stderr, reference, ratio,
tolerance, provenance, passed``. Exit code 0 means every pass-flagged row
passed, 1 a numeric failure or module error, 2 a usage error.
"""
from __future__ import annotations

import argparse
import json
import math
import re
import sys
import traceback

import numpy as np

from . import checks
from .affine import affine_surface_area, bpn_asa_closed_form
from .bodies import (
    AffineImage,
    Ball,
    ConvexBody,
    HPolytope,
    LpBall,
    Polytope,
    VPolytope,
    cube,
    ellipsoid,
    regular_polygon,
    simplex,
)
from .curvature import (
    bpn_curvature,
    curvature_graph,
    curvature_implicit,
    dupin_curvature,
    graph_chart,
)
from .errors import GeometryError
from .floating import asa_via_floating, floating_body, sw1_profile
from .grids import SphereGrid, sphere_area
from .randpoly import (
    DEFAULT_N,
    BoundaryDensity,
    asa_density,
    cosine_density,
    disk_best_approx,
    ranpol1_estimate,
    ranpol2_estimate,
    ranpol2_reference,
)
from .report import ExperimentConfig, ExperimentReport

SUBCOMMANDS = ("asa", "curvature", "floating", "rolling", "randpoly", "bestapprox", "check")
SUITES = ("all", *checks.SUITES)


class BodySpecError(ValueError):
    """Malformed body specification; ``position`` is the offending character index."""

    def __init__(self, message: str, spec: str, position: int):
        self.spec, self.position = spec, position
        super().__init__(f"{message} at position {position}\n  {spec}\n  {' ' * position}^")


_NAME = re.compile(r"[a-z]+")


def _numbers(spec: str, start: int, count: tuple[int, int]) -> list[float]:
    text = spec[start:]
    parts = text.split(",")
    if not count[0] <= len(parts) <= count[1]:
        raise BodySpecError(f"expected {count[0]}..{count[1]} comma-separated numbers", spec, start)
    out, pos = [], start
    for part in parts:
        try:
            v = float(part)
        except ValueError:
            raise BodySpecError(f"not a number: {part!r}", spec, pos) from None
        if not math.isfinite(v):
            raise BodySpecError("numbers must be finite", spec, pos)
        out.append(v)
        pos += len(part) + 1
    return out


def load_polytope(path: str) -> Polytope:
    """Polytope from JSON ``{"dim", "vertices"}`` or ``{"dim", "halfspaces"}``."""
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    dim = int(data["dim"])
    if "vertices" in data:
        P = VPolytope(data["vertices"])
    elif "halfspaces" in data:
        P = HPolytope([(h["normal"], h["offset"]) for h in data["halfspaces"]])
    else:
        raise GeometryError("polytope file needs 'vertices' or 'halfspaces'")
    if P.dim != dim:
        raise GeometryError(f"declared dim {dim} but coordinates have dim {P.dim}")
    return P


def parse_body(spec: str, dim: int | None = None) -> ConvexBody:
    """Build a body from ``ball``, ``cube``, ``simplex``, ``bpn:<p>``,
    ``ellipsoid:<a>,<b>[,<c>]``, ``polygon:<m>`` or ``poly:@<path>``.

    ``dim`` (default 2) applies to the first four; ellipsoids take their
    dimension from the number of semi-axes.
    """
    m = _NAME.match(spec)
    if not m:
        raise BodySpecError("expected a body name", spec, 0)
    name, pos = m.group(), m.end()
    has_args = pos < len(spec)
    if has_args and spec[pos] != ":":
        raise BodySpecError("expected ':' after body name", spec, pos)
    arg_start = pos + 1
    n = 2 if dim is None else int(dim)
    if name in ("ball", "cube", "simplex"):
        if has_args:
            raise BodySpecError(f"{name} takes no arguments", spec, pos)
        return {"ball": lambda: Ball(n), "cube": lambda: cube(n), "simplex": lambda: simplex(n)}[name]()
    if not has_args or arg_start >= len(spec):
        if name in ("bpn", "ellipsoid", "polygon", "poly"):
            raise BodySpecError(f"{name} needs arguments", spec, len(spec))
        raise BodySpecError(f"unknown body {name!r}", spec, 0)
    if name == "bpn":
        (p,) = _numbers(spec, arg_start, (1, 1))
        if p <= 1:
            raise BodySpecError("need p > 1", spec, arg_start)
        return LpBall(p, n)
    if name == "ellipsoid":
        axes = _numbers(spec, arg_start, (2, 3))
        if min(axes) <= 0:
            raise BodySpecError("semi-axes must be positive", spec, arg_start)
        if dim is not None and len(axes) != dim:
            raise BodySpecError(f"{len(axes)} semi-axes but --dim {dim}", spec, arg_start)
        return ellipsoid(*axes)
    if name == "polygon":
        (k,) = _numbers(spec, arg_start, (1, 1))
        if k != int(k) or k < 3:
            raise BodySpecError("polygon needs an integer m >= 3", spec, arg_start)
        return regular_polygon(int(k))
    if name == "poly":
        if spec[arg_start] != "@":
            raise BodySpecError("expected '@<path>'", spec, arg_start)
        try:
            return load_polytope(spec[arg_start + 1:])
        except (OSError, KeyError, TypeError, json.JSONDecodeError) as exc:
            raise BodySpecError(f"cannot read polytope file ({exc})", spec, arg_start + 1) from None
    raise BodySpecError(f"unknown body {name!r}", spec, 0)


def reference_asa(K: ConvexBody) -> tuple[float, str] | None:
    """Closed-form affine surface area when one is known."""
    if isinstance(K, Polytope):
        return 0.0, "closed_form"
    n = K.dim
    if isinstance(K, Ball):
        return sphere_area(n) * (K.r ** n) ** ((n - 1) / (n + 1)), "closed_form"
    if isinstance(K, LpBall):
        return bpn_asa_closed_form(K.p, n), "closed_form"
    if isinstance(K, AffineImage):
        base = reference_asa(K.base)
        if base is not None:
            return base[0] * abs(K.det) ** ((n - 1) / (n + 1)), base[1]
    return None


def _grid(dim: int, size: int | None) -> SphereGrid | None:
    return None if size is None else SphereGrid.default(dim, size)


def _cmd_asa(cfg: ExperimentConfig, K: ConvexBody, rep: ExperimentReport):
    res = affine_surface_area(K, _grid(K.dim, cfg.grid))
    ref = reference_asa(K)
    inputs = f"body={cfg.body} n={K.dim} method={res.method} resolution={res.resolution}"
    if ref is None:
        rep.add("asa", inputs, res.value, res.error_estimate)
        return
    tol = 1e-4 * abs(ref[0])
    rep.add("asa", inputs, res.value, res.error_estimate, ref[0], tolerance="rel 1e-4",
            provenance=ref[1], passed=abs(res.value - ref[0]) <= max(tol, 1e-12))
    if cfg.closed_form:
        rep.add("asa.closed_form", f"body={cfg.body} n={K.dim}", ref[0])


def _cmd_curvature(cfg: ExperimentConfig, K: ConvexBody, rep: ExperimentReport):
    if not cfg.point:
        raise GeometryError("curvature needs --point")
    p = np.asarray(cfg.point, dtype=float)
    if p.shape != (K.dim,):
        raise GeometryError(f"--point has {p.size} coordinates, body has dim {K.dim}")
    # project radially from the centre onto the boundary
    d = p - K.center
    if np.linalg.norm(d) == 0:
        raise GeometryError("--point must differ from the body centre")
    xi = d / np.linalg.norm(d)
    x = K.center + float(K.radial(xi[None])[0]) * xi
    inputs = f"body={cfg.body} x={[round(float(v), 12) for v in x]}"
    ref = curvature_implicit(K, x, tol=1e-8)
    rep.add("curvature.implicit", inputs, ref)
    for label, v in (("graph", curvature_graph(*graph_chart(K, x))),
                     ("dupin", dupin_curvature(K, x, deltas=[1e-3, 1e-4, 1e-5, 1e-6]).curvature)):
        rep.add(f"curvature.{label}", inputs, v, reference=ref, tolerance="rel 1e-2",
                provenance="oracle", passed=abs(v - ref) <= 1e-2 * abs(ref))
    if isinstance(K, LpBall) and np.all(x != 0):
        v = bpn_curvature(K.p, x)
        rep.add("curvature.bpn_closed_form", inputs, v, reference=ref, tolerance="rel 1e-6",
                provenance="oracle", passed=abs(v - ref) <= 1e-6 * abs(ref))


def _cmd_floating(cfg: ExperimentConfig, K: ConvexBody, rep: ExperimentReport):
    default = (1e-3, 1e-5, 1e-7, 1e-9) if isinstance(K, Polytope) else (1e-3, 1e-4, 1e-5, 1e-6)
    t_list = sorted(cfg.t_list or default, reverse=True)
    ref = reference_asa(K)
    if isinstance(K, Polytope):
        # as(P) = 0: the normalized deficit must fall towards 0
        first, prev = None, math.inf
        for t in t_list:
            res = floating_body(K, t, _grid(K.dim, cfg.grid))
            first = res.normalized if first is None else first
            rep.add("floating.deficit", f"t={t!r}", res.deficit)
            rep.add("floating.normalized", f"t={t!r}", res.normalized, tolerance="decreasing",
                    passed=res.normalized < prev)
            prev = res.normalized
        if len(t_list) > 1:
            rep.add("floating.normalized_drop", f"t={t_list[-1]!r} vs t={t_list[0]!r}",
                    prev / first, tolerance="< 0.05", passed=prev / first < 0.05)
        return
    ests = asa_via_floating(K, t_list, cfg.grid)
    for i, e in enumerate(ests):
        rep.add("floating.deficit", f"t={e.t!r}", e.deficit)
        rep.add("floating.normalized", f"t={e.t!r}", e.normalized)
        last = i == len(ests) - 1
        if ref is None:
            rep.add("floating.asa", f"t={e.t!r}", e.estimate, e.bias)
        else:
            rep.add("floating.asa", f"t={e.t!r}", e.estimate, e.bias, ref[0],
                    tolerance="rel 3e-2" if last else "", provenance=ref[1],
                    passed=abs(e.estimate / ref[0] - 1) <= 3e-2 if last else None)


def _cmd_rolling(cfg: ExperimentConfig, K: ConvexBody, rep: ExperimentReport):
    t = np.linspace(0.0, 1.0, cfg.tgrid or 21)
    prof = sw1_profile(K, t, samples=cfg.samples or 100_000, seed=cfg.seed)
    ok = prof.holds
    for i in range(len(t)):
        rep.add("rolling.m", f"t={float(t[i])!r}", prof.measure[i], prof.stderr[i],
                prof.reference[i], tolerance="m >= ref - 3 stderr", provenance="closed_form",
                passed=ok[i])


def _density(mode: str, K: ConvexBody) -> BoundaryDensity | None:
    kind, _, rest = mode.partition(":")
    if kind == "interior":
        if rest:
            raise GeometryError("interior mode takes no density")
        return None
    if kind != "boundary":
        raise GeometryError(f"unknown mode {mode!r}")
    if rest in ("", "uniform"):
        return BoundaryDensity.uniform(K)
    if rest == "asa":
        return asa_density(K)
    if rest.startswith("cos:"):
        parts = rest[4:].split(":")
        return cosine_density(K, float(parts[0]), int(parts[1]) if len(parts) > 1 else 1)
    raise GeometryError(f"unknown boundary density {rest!r}")


def _cmd_randpoly(cfg: ExperimentConfig, K: ConvexBody, rep: ExperimentReport):
    N_list = cfg.N_list or DEFAULT_N
    reps = cfg.replicates or 2000
    dens = _density(cfg.mode, K)
    n = K.dim
    if dens is None:
        ref = reference_asa(K)
        curve = ranpol1_estimate(K, N_list, reps, cfg.seed, cfg.workers,
                                 None if ref is None else ref[0])
        slope_ref, lim_tol = -2 / (n + 1), 0.15
        ref_val = None if ref is None else ref
    else:
        curve = ranpol2_estimate(dens, N_list, reps, cfg.seed, cfg.workers)
        slope_ref, lim_tol = -2 / (n - 1), 0.20
        ref_val = (ranpol2_reference(dens), "closed_form")
    for i, N in enumerate(curve.N):
        inputs = f"N={int(N)} reps={reps}"
        rep.add("randpoly.deficit", inputs, curve.mean_deficit[i], curve.stderr[i])
        rep.add("randpoly.normalized", inputs, curve.normalized[i], curve.normalized_stderr[i])
    inputs = f"mode={cfg.mode} reps={reps}"
    rep.add("randpoly.slope", inputs, curve.slope, curve.slope_stderr, slope_ref,
            tolerance="abs 0.05", provenance="closed_form",
            passed=abs(curve.slope - slope_ref) <= 0.05)
    if ref_val is None:
        rep.add("randpoly.limit", inputs, curve.limit, curve.limit_stderr)
    else:
        rep.add("randpoly.limit", inputs, curve.limit, curve.limit_stderr, ref_val[0],
                tolerance=f"rel {lim_tol}", provenance=ref_val[1],
                passed=abs(curve.limit / ref_val[0] - 1) <= lim_tol)


def _cmd_bestapprox(cfg: ExperimentConfig, rep: ExperimentReport):
    b = disk_best_approx(cfg.N_list or (3, 10, 100, 1000, 10_000))
    for N, d, e in zip(b.N, b.deficit, b.del1):
        final = N >= 10_000
        rep.add("bestapprox.deficit", f"N={int(N)}", d)
        rep.add("bestapprox.del1", f"N={int(N)}", e, reference=1 / 6,
                tolerance="abs 1e-4" if final else "", provenance="closed_form",
                passed=abs(e - 1 / 6) <= 1e-4 if final else None)


def run(cfg: ExperimentConfig) -> ExperimentReport:
    """Execute one configuration; module errors become an ``error`` row."""
    rep = ExperimentReport(cfg.command, cfg.seed)
    try:
        if cfg.command == "check":
            checks.run_suite(cfg.suite, rep, cfg.seed)
        elif cfg.command == "bestapprox":
            _cmd_bestapprox(cfg, rep)
        else:
            K = parse_body(cfg.body, cfg.dim)
            {"asa": _cmd_asa, "curvature": _cmd_curvature, "floating": _cmd_floating,
             "rolling": _cmd_rolling, "randpoly": _cmd_randpoly}[cfg.command](cfg, K, rep)
    except BodySpecError:
        raise
    except (GeometryError, ValueError, ArithmeticError) as exc:
        rep.add("error", f"{type(exc).__name__}: {exc}", math.nan, passed=False)
    return rep


def _floats(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _ints(text: str) -> tuple[int, ...]:
    vals = _floats(text)
    if any(v != int(v) or v <= 0 for v in vals):
        raise argparse.ArgumentTypeError(f"expected positive integers, got {text!r}")
    return tuple(int(v) for v in vals)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--body", default="ball", help="body spec, e.g. ball, bpn:3, ellipsoid:2,1, poly:@f.json")
    common.add_argument("--dim", type=int, choices=(2, 3), default=None)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--grid", type=int, default=None, help="sphere grid size")
    common.add_argument("--out", default=None, help="output path (default stdout)")
    common.add_argument("--format", choices=("csv", "json"), default="csv")
    common.add_argument("--workers", type=int, default=1)

    parser = argparse.ArgumentParser(prog="affsurf", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("asa", parents=[common], help="affine surface area")
    p.add_argument("--closed-form", dest="closed_form", action="store_true")
    p = sub.add_parser("curvature", parents=[common], help="Gauss curvature at a boundary point")
    p.add_argument("--point", type=_floats, required=True)
    p = sub.add_parser("floating", parents=[common], help="floating-body volume deficits")
    p.add_argument("--t", dest="t_list", type=_floats, default=None)
    p = sub.add_parser("rolling", parents=[common], help="rolling-radius distribution")
    p.add_argument("--tgrid", type=int, default=None)
    p.add_argument("--samples", type=int, default=None)
    p = sub.add_parser("randpoly", parents=[common], help="random polytope deficits")
    p.add_argument("--mode", default="interior", help="interior | boundary[:uniform|asa|cos:a[:k]]")
    p.add_argument("--N", dest="N_list", type=_ints, default=None)
    p.add_argument("--reps", dest="replicates", type=int, default=None)
    p = sub.add_parser("bestapprox", parents=[common], help="best-approximation polygons of the disk")
    p.add_argument("--N", dest="N_list", type=_ints, default=None)
    p = sub.add_parser("check", parents=[common], help="invariant suites")
    p.add_argument("suite", nargs="?", default="all", choices=SUITES)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    cfg = ExperimentConfig.from_args(ns)
    try:
        rep = run(cfg)
    except BodySpecError as exc:
        print(f"affsurf: invalid body spec: {exc}", file=sys.stderr)
        return 2
    except Exception:
        traceback.print_exc()
        rep = ExperimentReport(cfg.command, cfg.seed)
        rep.add("error", "internal error", math.nan, passed=False)
    if cfg.out:
        rep.write(cfg.out, cfg.format)
    else:
        sys.stdout.write(rep.render(cfg.format))
    return 0 if rep.ok else 1


if __name__ == "__main__":
    sys.exit(main())
