"""Experiment configuration and machine-readable reports."""
from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
import time
from dataclasses import asdict, dataclass, field, fields

from . import __version__

COLUMNS = ("experiment", "inputs", "estimate", "stderr", "reference", "ratio",
           "tolerance", "provenance", "passed")
PROVENANCE = ("closed_form", "oracle", "trend")


def _join(values) -> str:
    return ",".join(repr(float(v)) if isinstance(v, float) else str(v) for v in values)


@dataclass
class ExperimentConfig:
    command: str
    body: str = "ball"
    dim: int | None = None
    grid: int | None = None
    t_list: tuple[float, ...] = ()
    N_list: tuple[int, ...] = ()
    replicates: int | None = None
    seed: int = 0
    out: str | None = None
    format: str = "csv"
    point: tuple[float, ...] = ()
    mode: str = "interior"
    samples: int | None = None
    tgrid: int | None = None
    closed_form: bool = False
    suite: str = "all"
    workers: int = 1

    def to_argv(self) -> list[str]:
        """Command-line flags reproducing this configuration."""
        argv = [self.command]
        if self.command == "check":
            argv.append(self.suite)
        for f in fields(self):
            if f.name in ("command", "suite"):
                continue
            v = getattr(self, f.name)
            # defaults coincide with the parser's, so only changed fields are emitted
            if v == f.default:
                continue
            flag = "--" + {"t_list": "t", "N_list": "N", "replicates": "reps",
                           "closed_form": "closed-form"}.get(f.name, f.name)
            if v is True:
                argv.append(flag)
            elif isinstance(v, tuple):
                argv += [flag, _join(v)]
            else:
                argv += [flag, str(v)]
        return argv

    @classmethod
    def from_args(cls, ns) -> "ExperimentConfig":
        kw = {f.name: getattr(ns, f.name) for f in fields(cls) if hasattr(ns, f.name)}
        for name in ("t_list", "N_list", "point"):
            if kw.get(name) is None:
                kw[name] = ()
            else:
                kw[name] = tuple(kw[name])
        return cls(**kw)


@dataclass
class Row:
    experiment: str
    inputs: str
    estimate: float
    stderr: float = math.nan
    reference: float = math.nan
    ratio: float = math.nan
    tolerance: str = ""
    provenance: str = ""
    passed: bool | None = None

    def __post_init__(self):
        for name in ("estimate", "stderr", "reference", "ratio"):
            setattr(self, name, float(getattr(self, name)))
        if self.passed is not None:
            self.passed = bool(self.passed)
        if not math.isnan(self.reference) and self.provenance not in PROVENANCE:
            raise ValueError(f"row {self.experiment!r} has a reference but no provenance")
        if math.isnan(self.ratio) and not math.isnan(self.reference) and self.reference != 0:
            self.ratio = self.estimate / self.reference


@dataclass
class ExperimentReport:
    command: str
    seed: int
    rows: list[Row] = field(default_factory=list)
    version: str = __version__
    timestamp: str = field(default_factory=lambda: time.strftime("%Y-%m-%dT%H:%M:%S%z"))

    def add(self, *args, **kwargs) -> Row:
        row = Row(*args, **kwargs)
        self.rows.append(row)
        return row

    @property
    def ok(self) -> bool:
        return all(r.passed is not False for r in self.rows)

    def metadata(self) -> dict:
        return {"version": self.version, "command": self.command, "seed": self.seed,
                "timestamp": self.timestamp}

    def to_json(self) -> str:
        rows = [{k: _jsonable(v) for k, v in asdict(r).items()} for r in self.rows]
        return json.dumps({"metadata": self.metadata(), "rows": rows}, indent=2) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        for k, v in self.metadata().items():
            buf.write(f"# {k}={v}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(COLUMNS)
        for r in self.rows:
            d = asdict(r)
            w.writerow([_fmt(d[c]) for c in COLUMNS])
        return buf.getvalue()

    def render(self, fmt: str) -> str:
        if fmt == "json":
            return self.to_json()
        if fmt == "csv":
            return self.to_csv()
        raise ValueError(f"unknown format {fmt!r}")

    def write(self, path: str, fmt: str):
        """Write atomically: temporary file in the target directory, then rename."""
        text = self.render(fmt)
        folder = os.path.dirname(os.path.abspath(path))
        fd, tmp = tempfile.mkstemp(dir=folder, prefix=".report-", suffix=".tmp")
        try:
            with os.fdopen(fd, "w", encoding="utf-8") as fh:
                fh.write(text)
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return "" if math.isnan(v) else repr(v)
    return str(v)


def _jsonable(v):
    if isinstance(v, float) and not math.isfinite(v):
        return None
    return v
