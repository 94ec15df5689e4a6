"""Invariant suites run by ``affsurf check``; each adds pass-flagged rows to a report."""
from __future__ import annotations

import math

import numpy as np

from .affine import (
    affine_surface_area,
    bpn_asa_closed_form,
    ghsw_candidate,
    isoperimetric_bound,
    lutwak_candidates,
    lutwak_functional,
    petty_ratio,
    psd_root_inequality,
    random_psd_pair,
    slab_defect,
    steiner_asa,
)
from .bodies import Ball, LpBall, cube, ellipsoid, regular_polygon, simplex
from .curvature import curvature_graph, curvature_implicit, dupin_curvature, graph_chart
from .floating import asa_via_floating, random_containing_polygon, sw1_profile
from .grids import sphere_area
from .randpoly import disk_best_approx, triangle_check
from .report import ExperimentReport
from .rng import stream


def inequalities(rep: ExperimentReport, seed: int):
    bodies = {
        "disk": Ball(2), "ellipse(2,1)": ellipsoid(2, 1), "bpn:1.5": LpBall(1.5, 2),
        "bpn:4": LpBall(4, 2), "ellipsoid(2,1,0.5)": ellipsoid(2, 1, 0.5), "bpn:3 (3d)": LpBall(3, 3),
        "square": cube(2), "simplex(3)": simplex(3),
    }
    for name, K in bodies.items():
        a = affine_surface_area(K).value
        bound, ratio = isoperimetric_bound(K, a)
        is_ellipsoid = name.startswith(("disk", "ellipse"))
        if is_ellipsoid:
            rep.add("isoperimetric.ratio", name, ratio, reference=1.0, tolerance="abs 1e-4",
                    provenance="closed_form", passed=abs(ratio - 1) <= 1e-4)
        else:
            rep.add("isoperimetric.ratio", name, ratio, tolerance="<= 1+1e-3",
                    passed=ratio <= 1 + 1e-3)
    for name, K, equal in (("disk", Ball(2), True), ("ellipse(2,1)", ellipsoid(2, 1), True),
                           ("bpn:4", LpBall(4, 2), False), ("square", cube(2), False)):
        r = petty_ratio(K)
        if equal:
            rep.add("petty.ratio", name, r, reference=1.0, tolerance="rel 2e-2",
                    provenance="closed_form", passed=abs(r - 1) <= 2e-2)
        else:
            rep.add("petty.ratio", name, r, tolerance="<= 1", passed=r <= 1 + 1e-9)
    for name, K in (("disk", Ball(2)), ("bpn:3", LpBall(3, 2)), ("square", cube(2))):
        a = affine_surface_area(K).value
        worst = min(lutwak_functional(K, L) - a for L in lutwak_candidates(K, 6, seed))
        rep.add("lutwak.min_gap", name, worst, tolerance=">= -1e-3", passed=worst >= -1e-3)
    lw = lutwak_functional(Ball(2), Ball(2))
    rep.add("lutwak.ball", "K=L=disk", lw, reference=2 * math.pi, tolerance="abs 1e-9",
            provenance="closed_form", passed=abs(lw - 2 * math.pi) <= 1e-9)
    rng = stream(seed, 71)
    worst = -math.inf
    for _ in range(1000):
        m = int(rng.integers(1, 4))
        A, B = random_psd_pair(m, rng)
        lhs, rhs = psd_root_inequality(A, B)
        worst = max(worst, lhs - rhs)
    rep.add("psd.det_root", "1000 pairs", worst, tolerance="<= 1e-12", passed=worst <= 1e-12)
    worst = math.inf
    for K in (ellipsoid(2, 1), LpBall(3, 2), LpBall(4, 2)):
        for _ in range(3):
            ang = rng.uniform(0, math.pi)
            a, s = steiner_asa(K, [math.cos(ang), math.sin(ang)])
            worst = min(worst, s / a - 1)
    rep.add("steiner.asa_gain", "9 body/direction pairs", worst, tolerance=">= -1e-2",
            passed=worst >= -1e-2)
    for name, E, a, b in (("disk", Ball(2), 0.3, -0.3), ("ellipse(2,1)", ellipsoid(2, 1), 0.5, -0.5)):
        d = slab_defect(E, a, b)
        rep.add("valuation.defect", f"{name} a={a} b={b}", d, reference=0.0, tolerance="abs 1e-3",
                provenance="closed_form", passed=abs(d) <= 1e-3)
    C = cube(2)
    G = ghsw_candidate(C, 1.2 / math.sqrt(2))
    g = affine_surface_area(G).value
    bound = isoperimetric_bound(C, 0.0)[0]
    rep.add("ghsw.candidate", "square c*sqrt2=1.2", g, tolerance="0 < as <= bound",
            passed=0 < g <= bound)


def curvature_suite(rep: ExperimentReport, seed: int):
    cases = [
        ("ellipse(2,1)", ellipsoid(2, 1), [2.0, 0.0]),
        ("ellipse(2,1)", ellipsoid(2, 1), [math.sqrt(2), math.sqrt(0.5)]),
        ("bpn:2", LpBall(2, 2), [0.6, 0.8]),
        ("bpn:3", LpBall(3, 2), [0.5 ** (1 / 3), 0.5 ** (1 / 3)]),
        ("bpn:4", LpBall(4, 2), [2 ** -0.25, 2 ** -0.25]),
        ("ellipsoid(2,1.5,1)", ellipsoid(2, 1.5, 1), [1.2, 0.6, math.sqrt(1 - 0.36 - 0.16)]),
        ("bpn:4 (3d)", LpBall(4, 3), [3 ** -0.25] * 3),
    ]
    for name, K, x in cases:
        x = np.asarray(x, dtype=float)
        ref = curvature_implicit(K, x, tol=1e-8)
        g = curvature_graph(*graph_chart(K, x))
        d = dupin_curvature(K, x, deltas=[1e-3, 1e-4, 1e-5, 1e-6]).curvature
        for label, v in (("graph", g), ("dupin", d)):
            rep.add(f"curvature.{label}", f"{name} x={[round(float(c), 6) for c in x]}", v, reference=ref,
                    tolerance="rel 1e-2", provenance="oracle", passed=abs(v / ref - 1) <= 1e-2)
    s = curvature_implicit(Ball(3), np.array([0.6, 0.0, 0.8]))
    rep.add("curvature.sphere", "implicit", s, reference=1.0, tolerance="abs 1e-9",
            provenance="closed_form", passed=abs(s - 1) <= 1e-9)
    d = dupin_curvature(Ball(3), np.array([0.6, 0.0, 0.8]), deltas=[1e-4]).curvature
    rep.add("curvature.sphere", "dupin delta=1e-4", d, reference=1.0, tolerance="rel 5e-3",
            provenance="closed_form", passed=abs(d - 1) <= 5e-3)


def floating_suite(rep: ExperimentReport, seed: int):
    for name, K, ref in (("disk", Ball(2), 2 * math.pi),
                         ("ellipse(2,1)", ellipsoid(2, 1), 2 * math.pi * 2 ** (1 / 3))):
        est = asa_via_floating(K, [1e-4, 1e-6])[-1]
        rep.add("floating.asa", f"{name} t=1e-6", est.estimate, est.bias, ref,
                tolerance="rel 3e-2", provenance="closed_form",
                passed=abs(est.estimate / ref - 1) <= 3e-2)


def rolling_suite(rep: ExperimentReport, seed: int):
    for name, K in (("disk", Ball(2)), ("square", cube(2)),
                    ("random polygon", random_containing_polygon(seed))):
        prof = sw1_profile(K, samples=100_000, seed=seed)
        worst = float(np.min((prof.measure - prof.reference) / np.maximum(prof.stderr, 1e-12)))
        rep.add("rolling.sw1", name, worst, tolerance="m(t) >= ref - 3 stderr",
                passed=bool(prof.holds.all()))


def bestapprox_suite(rep: ExperimentReport, seed: int):
    b = disk_best_approx([10_000])
    rep.add("bestapprox.del1", "N=10000", b.del1[0], reference=1 / 6, tolerance="abs 1e-4",
            provenance="closed_form", passed=abs(b.del1[0] - 1 / 6) <= 1e-4)
    m, s, ref = triangle_check(20_000, seed)
    rep.add("randpoly.triangle", "N=3", m, s, ref, tolerance="3 stderr", provenance="closed_form",
            passed=abs(m - ref) <= 3 * s)


def asa_suite(rep: ExperimentReport, seed: int):
    for p in (1.5, 2.0, 3.0, 4.0):
        q = affine_surface_area(LpBall(p, 2)).value
        cf = bpn_asa_closed_form(p, 2)
        rep.add("asa.bpn", f"p={p} n=2", q, reference=cf, tolerance="rel 1e-4",
                provenance="closed_form", passed=abs(q / cf - 1) <= 1e-4)
    for name, K in (("square", cube(2)), ("hexagon", regular_polygon(6))):
        v = affine_surface_area(K).value
        rep.add("asa.polytope", name, v, reference=0.0, tolerance="exact", provenance="closed_form",
                passed=v == 0.0)
    v = affine_surface_area(Ball(3)).value
    rep.add("asa.sphere", "n=3", v, reference=sphere_area(3), tolerance="rel 1e-4",
            provenance="closed_form", passed=abs(v / sphere_area(3) - 1) <= 1e-4)


SUITES = {
    "asa": asa_suite,
    "inequalities": inequalities,
    "curvature": curvature_suite,
    "floating": floating_suite,
    "rolling": rolling_suite,
    "bestapprox": bestapprox_suite,
}


def run_suite(name: str, rep: ExperimentReport, seed: int):
    names = list(SUITES) if name == "all" else [name]
    for n in names:
        SUITES[n](rep, seed)
