"""Command-line driver for the multibaker experiments.

Usage::

    multibaker run quantum-trace --dim 32 --d1 30 --out trace.csv
    multibaker run sweep-dim --rule d1=D-2 --dims 16 32 64 --parallel 4
    multibaker run classical-trace --s 0.6 --region square:0.125,0.5,0.25

Every table is written as CSV whose first line is ``#`` followed by a JSON
metadata object (the full config, versions and a result summary), or as a
single JSON document with ``--format json``.

Exit codes: 0 success, 2 invalid configuration, 3 I/O failure,
4 runtime invariant violation.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import platform
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from multibaker import __version__
from multibaker.classical import Region, simulate_ensemble
from multibaker.errors import InvalidParameterError, InvariantViolation
from multibaker.hilbert import MapParams
from multibaker.observables import (
    average_current,
    check_s1_antisymmetry,
    run_quantum,
    smooth,
    stationarity,
)

log = logging.getLogger("multibaker")

KINDS = (
    "quantum-trace",
    "quantum-snapshot",
    "classical-trace",
    "sweep-dim",
    "sweep-s",
    "symmetry-check",
)
RULES = {
    "d1=D-2": lambda d: d - 2,
    "d1=D/2+1": lambda d: d // 2 + 1,
    "d1=D/2-1": lambda d: d // 2 - 1,
}
FORMATS = ("csv", "json")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_INVARIANT = 4

TELESCOPE_TOL = 1e-10
PROB_TOL = 1e-10
SYMMETRY_TOL = 1e-10


@dataclass
class ExperimentConfig:
    """One experiment; defaults follow the figures being reproduced."""

    kind: str = "quantum-trace"
    dim: int = 32
    d1: int = 30
    s: float | None = None
    steps: int = 450
    smooth: int = 20
    avg_from: int = 100
    avg_to: int = 450
    time: int = 200
    rule: str = "d1=D-2"
    dims: list[int] = field(default_factory=lambda: [16, 32, 64])
    d1_values: list[int] | None = None
    samples: int = 1_000_000
    seed: int = 1234
    region: str = "strip"
    parallel: int = 1
    out: str | None = None
    format: str = "csv"
    record_timing: bool = False

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> ExperimentConfig:
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise InvalidParameterError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    def to_dict(self) -> dict[str, Any]:
        return dataclasses.asdict(self)

    @property
    def params(self) -> MapParams:
        return MapParams(self.dim, self.d1)

    def classical_s(self) -> float:
        return self.s if self.s is not None else self.d1 / self.dim

    def validate(self) -> None:
        if self.kind not in KINDS:
            raise InvalidParameterError(f"unknown kind {self.kind!r}")
        if self.format not in FORMATS:
            raise InvalidParameterError(f"unknown format {self.format!r}")
        for name in ("steps", "smooth", "samples", "parallel"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, int) or value < 1:
                raise InvalidParameterError(f"{name} must be a positive integer, got {value!r}")
        if self.kind in ("quantum-trace", "quantum-snapshot", "symmetry-check"):
            MapParams(self.dim, self.d1)
        if self.kind == "quantum-trace" and self.smooth > self.steps:
            raise InvalidParameterError("smoothing window longer than the run")
        if self.kind == "quantum-snapshot" and not 0 <= self.time:
            raise InvalidParameterError(f"snapshot time must be >= 0, got {self.time}")
        if self.kind in ("sweep-dim", "sweep-s", "classical-trace"):
            if not 1 <= self.avg_from <= self.avg_to <= self.steps:
                raise InvalidParameterError(
                    f"averaging window [{self.avg_from}, {self.avg_to}] not inside [1, {self.steps}]"
                )
        if self.kind == "sweep-dim":
            if self.rule not in RULES:
                raise InvalidParameterError(f"unknown rule {self.rule!r}; choose from {list(RULES)}")
            if not self.dims:
                raise InvalidParameterError("sweep-dim needs at least one dimension")
            for d in self.dims:
                if d < 4 or d % 2:
                    raise InvalidParameterError(f"sweep dimensions must be even and >= 4, got {d}")
                MapParams(d, RULES[self.rule](d))
        if self.kind == "sweep-s":
            for d1 in self.sweep_d1_values():
                MapParams(self.dim, d1)
        if self.kind == "classical-trace":
            if not 0.0 < self.classical_s() < 1.0:
                raise InvalidParameterError(f"s must lie in (0, 1), got {self.classical_s()}")
            Region.parse(self.region, self.dim)
            if not 0 <= self.seed < 2**64:
                raise InvalidParameterError(f"seed must be a 64-bit unsigned integer, got {self.seed}")

    def sweep_d1_values(self) -> list[int]:
        if self.d1_values is not None:
            return list(self.d1_values)
        return list(range(self.dim // 2, self.dim))


@dataclass
class Table:
    columns: list[str]
    rows: list[tuple]
    summary: dict[str, Any] = field(default_factory=dict)


def _check_telescoping(values: np.ndarray, means: np.ndarray) -> None:
    gap = abs(float(np.sum(values)) - float(means[-1] - means[0]))
    if gap > TELESCOPE_TOL:
        raise InvariantViolation(f"current does not telescope (gap {gap:.3e})")


def run_quantum_trace(config: ExperimentConfig) -> Table:
    """Columns ``t, J, J_smooth, mean_x`` for ``t = 1..steps``.

    ``J_smooth`` is the trailing average and is empty before it is defined.
    """
    traj = run_quantum(config.params, config.steps, keep_distributions=False)
    series = traj.current
    _check_telescoping(series.values, traj.means)
    smoothed = smooth(series, config.smooth)
    rows = []
    for t in range(1, config.steps + 1):
        js = smoothed.at(t) if t >= smoothed.start else None
        rows.append((t, series.at(t), js, float(traj.means[t])))

    summary: dict[str, Any] = {"smoothing": "trailing", "smoothing_window": config.smooth}
    if 1 <= config.avg_from <= config.avg_to <= config.steps:
        summary["J_avg"] = average_current(series, config.avg_from, config.avg_to)
        if config.avg_to - config.avg_from >= 3:
            st = stationarity(series, config.avg_from, config.avg_to)
            summary["stationarity"] = st._asdict()
    return Table(["t", "J", "J_smooth", "mean_x"], rows, summary)


def run_quantum_snapshot(config: ExperimentConfig, t: int | None = None) -> Table:
    """Columns ``m, P`` over the light cone ``-t <= m <= t`` at time ``t``."""
    t = config.time if t is None else t
    if t < 0:
        raise InvalidParameterError(f"snapshot time must be >= 0, got {t}")
    traj = run_quantum(config.params, t)
    dist = traj.distribution(t)
    rows = [(int(m), dist.at(int(m))) for m in range(-t, t + 1)]
    total = sum(p for _, p in rows)
    if abs(total - 1.0) > PROB_TOL:
        raise InvariantViolation(f"snapshot probabilities sum to {total!r}")
    summary = {"time": t, "mean_x": float(traj.means[t])}
    return Table(["m", "P"], rows, summary)


def _average_for(args: tuple[int, int, int, int, int]) -> float:
    dim, d1, steps, t0, t1 = args
    traj = run_quantum(MapParams(dim, d1), steps, keep_distributions=False)
    series = traj.current
    _check_telescoping(series.values, traj.means)
    return average_current(series, t0, t1)


def _sweep(points: list[tuple[int, int]], config: ExperimentConfig) -> Table:
    tasks = [(d, d1, config.steps, config.avg_from, config.avg_to) for d, d1 in points]
    if config.parallel > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=config.parallel) as pool:
            values = list(pool.map(_average_for, tasks))
    else:
        values = [_average_for(task) for task in tasks]
    rows = sorted(
        ((d, d1, d1 / d, j) for (d, d1), j in zip(points, values)), key=lambda r: (r[0], r[1])
    )
    summary = {"average_window": [config.avg_from, config.avg_to]}
    return Table(["D", "D1", "s", "J_avg"], rows, summary)


def run_sweep_dim(config: ExperimentConfig) -> Table:
    """Averaged current for each ``D`` in ``config.dims`` with ``D1`` given by ``config.rule``."""
    rule = RULES[config.rule]
    return _sweep([(d, rule(d)) for d in config.dims], config)


def run_sweep_s(config: ExperimentConfig) -> Table:
    """Averaged current against ``s = D1/D`` at fixed ``D``."""
    return _sweep([(config.dim, d1) for d1 in config.sweep_d1_values()], config)


def run_classical_trace(config: ExperimentConfig) -> Table:
    """Columns ``t, J_class, stderr`` from a Monte Carlo ensemble."""
    region = Region.parse(config.region, config.dim)
    window = (config.avg_from, config.avg_to)
    run = simulate_ensemble(
        config.classical_s(),
        region,
        config.samples,
        config.seed,
        config.steps,
        workers=config.parallel,
        window=window,
    )
    series = run.current
    _check_telescoping(series.values, run.mean_m)
    stderr = run.current_stderr
    rows = [(t, series.at(t), float(stderr[t - 1])) for t in range(1, config.steps + 1)]
    mean_j, mean_se = run.window_current()
    summary = {
        "s": run.s,
        "region": region.describe(),
        "J_avg": mean_j,
        "J_avg_stderr": mean_se,
    }
    return Table(["t", "J_class", "stderr"], rows, summary)


def run_symmetry_check(config: ExperimentConfig) -> Table:
    """Max ``|P_s(m,t) - P_{1-s}(-m,t)|`` over the run; raises past ``1e-10``."""
    dev = check_s1_antisymmetry(config.params, config.steps)
    if dev > SYMMETRY_TOL:
        raise InvariantViolation(f"S_I reflection identity violated by {dev:.3e}")
    return Table(
        ["D", "D1", "steps", "max_deviation"],
        [(config.dim, config.d1, config.steps, dev)],
    )


RUNNERS = {
    "quantum-trace": run_quantum_trace,
    "quantum-snapshot": run_quantum_snapshot,
    "classical-trace": run_classical_trace,
    "sweep-dim": run_sweep_dim,
    "sweep-s": run_sweep_s,
    "symmetry-check": run_symmetry_check,
}


def run_experiment(config: ExperimentConfig) -> Table:
    config.validate()
    return RUNNERS[config.kind](config)


def build_metadata(config: ExperimentConfig, table: Table, wall_time: float | None = None):
    meta = {
        "kind": config.kind,
        "config": config.to_dict(),
        "seed": config.seed,
        "versions": {
            "multibaker": __version__,
            "numpy": np.__version__,
            "python": platform.python_version(),
        },
        "summary": table.summary,
    }
    if wall_time is not None:
        meta["wall_time_s"] = wall_time
    return meta


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def format_table(table: Table, metadata: dict, fmt: str = "csv") -> str:
    if fmt == "json":
        doc = {"metadata": metadata, "columns": table.columns, "rows": [list(r) for r in table.rows]}
        return json.dumps(doc, sort_keys=True, indent=1) + "\n"
    lines = ["# " + json.dumps(metadata, sort_keys=True), ",".join(table.columns)]
    lines.extend(",".join(_cell(v) for v in row) for row in table.rows)
    return "\n".join(lines) + "\n"


def read_table(path: str) -> tuple[dict, list[str], list[list[str]]]:
    """Parse a CSV written by this tool into ``(metadata, columns, rows)``."""
    with open(path) as fh:
        first = fh.readline()
        if not first.startswith("# "):
            raise ValueError(f"{path} has no metadata header")
        meta = json.loads(first[2:])
        columns = fh.readline().strip().split(",")
        rows = [line.rstrip("\n").split(",") for line in fh if line.strip()]
    return meta, columns, rows


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="multibaker", description="Classical and quantum asymmetric multibaker experiments."
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run one experiment", argument_default=argparse.SUPPRESS)
    run.add_argument("kind", choices=KINDS)
    run.add_argument("--config", help="JSON config file; flags override its values")
    run.add_argument("--dim", type=int, help="internal Hilbert dimension D (even)")
    run.add_argument("--d1", type=int, help="left block size D1, s = D1/D")
    run.add_argument("--s", type=float, help="classical asymmetry (defaults to D1/D)")
    run.add_argument("--steps", type=int)
    run.add_argument("--smooth", type=int, help="trailing smoothing window")
    run.add_argument("--avg-from", type=int, dest="avg_from")
    run.add_argument("--avg-to", type=int, dest="avg_to")
    run.add_argument("--time", type=int, help="snapshot time")
    run.add_argument("--rule", choices=list(RULES))
    run.add_argument("--dims", type=int, nargs="+")
    run.add_argument("--d1-values", type=int, nargs="+", dest="d1_values")
    run.add_argument("--samples", type=int, help="classical ensemble size")
    run.add_argument("--seed", type=int)
    run.add_argument("--region", help="full | strip | square:QC,PC,SIDE | box:Q0,Q1,P0,P1")
    run.add_argument("--parallel", type=int, help="worker processes")
    run.add_argument("--out", help="output path (default stdout)")
    run.add_argument("--format", choices=FORMATS)
    run.add_argument(
        "--record-timing",
        action="store_true",
        dest="record_timing",
        help="store wall time in the metadata (output is then not byte-reproducible)",
    )
    return parser


def config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    data: dict[str, Any] = {}
    overrides = vars(args).copy()
    path = overrides.pop("config", None)
    overrides.pop("command", None)
    overrides.pop("verbose", None)
    if path is not None:
        with open(path) as fh:
            loaded = json.load(fh)
        if not isinstance(loaded, dict):
            raise InvalidParameterError(f"config file {path} must hold a JSON object")
        data.update(loaded)
    data.update(overrides)
    return ExperimentConfig.from_dict(data)


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        config = config_from_args(args)
    except (InvalidParameterError, TypeError, json.JSONDecodeError) as exc:
        print(f"multibaker: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"multibaker: cannot read config {exc.filename}: {exc.strerror}", file=sys.stderr)
        return EXIT_IO

    try:
        start = time.perf_counter()
        table = run_experiment(config)
        elapsed = time.perf_counter() - start
    except InvalidParameterError as exc:
        print(f"multibaker: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InvariantViolation as exc:
        print(f"multibaker: invariant violated: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    log.info("%s finished in %.2f s", config.kind, elapsed)

    meta = build_metadata(config, table, elapsed if config.record_timing else None)
    text = format_table(table, meta, config.format)
    if config.out is None:
        sys.stdout.write(text)
        return EXIT_OK
    try:
        with open(config.out, "w") as fh:
            fh.write(text)
    except OSError as exc:
        print(f"multibaker: cannot write {config.out}: {exc.strerror}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
