"""Grid experiments over benchmark x environment x algorithm x seed, with CSV output."""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .benchmarks import BENCHMARKS, ENVIRONMENTS, environment_config, make_problem, sample_reference_pof
from .core import ConfigurationError
from .metrics import dmigd, igd, migd
from .optimizers import MOPSO, NSGA2, OptimizerConfig
from .seeding import SeedingConfig, isvm_dmoea_run

log = logging.getLogger(__name__)

ALGORITHMS = ("NSGA2", "MOPSO", "ISVM-NSGA2", "ISVM-MOPSO")
DESK_CONFIGS = ("C1", "C5")
DESK_PROBLEMS = ("FDA4", "FDA5", "dMOP2")


@dataclass(frozen=True)
class ExperimentSpec:
    problems: tuple = DESK_PROBLEMS
    configs: tuple = DESK_CONFIGS
    algorithms: tuple = ("NSGA2", "ISVM-NSGA2")
    seeds: int = 5
    base_seed: int = 0
    pop_size: int = 100
    gens_per_change: int = 50
    candidate_mult: int = 10
    svm_penalty: float = 10.0
    ref_points: Optional[int] = None
    record_wallclock: bool = False
    jobs: int = 1

    def __post_init__(self):
        # store canonical names so that spelling does not change seeds or files
        object.__setattr__(self, "problems", tuple(_canonical(p, BENCHMARKS, "benchmark") for p in self.problems))
        object.__setattr__(self, "configs", tuple(_canonical(c, ENVIRONMENTS, "environment") for c in self.configs))
        algos = []
        for a in self.algorithms:
            if a.upper() not in ALGORITHMS:
                raise ConfigurationError(f"unknown algorithm {a!r}; choose from {', '.join(ALGORITHMS)}")
            algos.append(a.upper())
        object.__setattr__(self, "algorithms", tuple(algos))
        if not (self.problems and self.configs and self.algorithms):
            raise ConfigurationError("problems, configs and algorithms must be nonempty")
        if self.seeds < 1:
            raise ConfigurationError("at least one seed is required")
        if self.pop_size < 4 or self.gens_per_change < 1 or self.candidate_mult < 1:
            raise ConfigurationError("pop >= 4, gens-per-change >= 1 and candidate-mult >= 1 required")
        if self.svm_penalty <= 0:
            raise ConfigurationError("svm regularization must be positive")
        if self.ref_points is not None and self.ref_points < 1:
            raise ConfigurationError("ref-points must be positive")

    def cells(self) -> list[tuple[str, str, str, int]]:
        return [(p, c, a, s) for p in self.problems for c in self.configs
                for a in self.algorithms for s in range(self.seeds)]


def _canonical(name: str, table: dict, what: str) -> str:
    for key in table:
        if key.lower() == str(name).lower():
            return key
    raise ConfigurationError(f"unknown {what} {name!r}")


def cell_seed(base_seed: int, function: str, config: str, algorithm: str, seed_index: int) -> int:
    """Stable 63-bit seed of one cell; independent of which other cells exist."""
    key = f"{base_seed}|{function}|{config}|{algorithm}|{seed_index}".encode()
    return int.from_bytes(hashlib.sha256(key).digest()[:8], "little") >> 1


@dataclass
class RunRecord:
    function: str
    config: str
    algorithm: str
    seed: int
    times: list = field(default_factory=list)
    igd: list = field(default_factory=list)
    wallclock_s: float = 0.0
    classifier_sizes: list = field(default_factory=list)

    @property
    def key(self):
        return (self.function, self.config, self.algorithm, self.seed)

    @property
    def migd(self) -> float:
        return migd(self.igd)


def run_cell(spec: ExperimentSpec, cell) -> RunRecord:
    function, config, algorithm, seed_index = cell
    problem = make_problem(function)
    env = environment_config(config)
    opt = OptimizerConfig(pop_size=spec.pop_size, generations=spec.gens_per_change)
    kind = MOPSO if algorithm.endswith("MOPSO") else NSGA2
    seeding = None
    if algorithm.startswith("ISVM"):
        seeding = SeedingConfig(candidate_mult=spec.candidate_mult, penalty=spec.svm_penalty)
    start = time.perf_counter()
    res = isvm_dmoea_run(problem, env, kind, opt, seeding,
                         cell_seed(spec.base_seed, function, config, algorithm, seed_index))
    elapsed = time.perf_counter() - start
    series = [igd(sample_reference_pof(function, t, spec.ref_points), P.F) for t, P in zip(res.times, res.pos)]
    return RunRecord(function, config, algorithm, seed_index, list(res.times), series, elapsed,
                     list(res.classifier_sizes) if seeding is not None else [])


def run_experiment(spec: ExperimentSpec) -> list[RunRecord]:
    cells = spec.cells()
    if spec.jobs > 1:
        with ProcessPoolExecutor(spec.jobs) as pool:
            records = list(pool.map(run_cell, [spec] * len(cells), cells))
    else:
        records = []
        for cell in cells:
            records.append(run_cell(spec, cell))
            log.info("%s %s %s seed %d: MIGD %.4f (%.1fs)", *cell, records[-1].migd, records[-1].wallclock_s)
    return sorted(records, key=lambda r: r.key)


def _fmt(x: float) -> str:
    return repr(float(x))


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def aggregate(records: Sequence[RunRecord]) -> list[tuple[str, str, float]]:
    """DMIGD per (function, algorithm): mean over configs of the median MIGD over seeds."""
    groups: dict = {}
    for r in records:
        groups.setdefault((r.function, r.algorithm), {}).setdefault(r.config, []).append(r.migd)
    out = []
    for (f, a) in sorted(groups):
        per_cfg = groups[(f, a)]
        out.append((f, a, dmigd([float(np.median(sorted(per_cfg[c]))) for c in sorted(per_cfg)])))
    return out


def write_results(records: Sequence[RunRecord], out_dir, spec: Optional[ExperimentSpec] = None,
                  record_wallclock: bool = False) -> list[Path]:
    if not records:
        raise ValueError("no records to write")
    records = sorted(records, key=lambda r: r.key)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "traces").mkdir(exist_ok=True)
    written = []
    for r in records:
        path = out / "traces" / f"{r.function}_{r.config}_{r.algorithm}_s{r.seed}.csv"
        _write_csv(path, ["change_index", "t", "igd"],
                   [[k, _fmt(t), _fmt(v)] for k, (t, v) in enumerate(zip(r.times, r.igd))])
        written.append(path)
    path = out / "summary.csv"
    # wall-clock time is machine noise; it is only written on request so reruns stay byte-identical
    _write_csv(path, ["function", "config", "algorithm", "seed", "migd", "wallclock_s"],
               [[r.function, r.config, r.algorithm, r.seed, _fmt(r.migd),
                 _fmt(r.wallclock_s) if record_wallclock else ""] for r in records])
    written.append(path)
    path = out / "aggregate.csv"
    _write_csv(path, ["function", "algorithm", "dmigd"], [[f, a, _fmt(v)] for f, a, v in aggregate(records)])
    written.append(path)
    if spec is not None:
        path = out / "spec.json"
        path.write_text(json.dumps(asdict(spec), indent=2, sort_keys=True) + "\n")
        written.append(path)
    return written


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="isvm-dmoea", description="Run seeded dynamic multi-objective experiments.")
    ap.add_argument("--problems", nargs="+", default=list(DESK_PROBLEMS))
    ap.add_argument("--configs", nargs="+", default=list(DESK_CONFIGS))
    ap.add_argument("--algos", nargs="+", default=["NSGA2", "ISVM-NSGA2"])
    ap.add_argument("--seeds", type=int, default=5, help="independent runs per cell")
    ap.add_argument("--base-seed", type=int, default=0)
    ap.add_argument("--pop", type=int, default=100)
    ap.add_argument("--gens-per-change", type=int, default=50)
    ap.add_argument("--candidate-mult", type=int, default=10)
    ap.add_argument("--svm-l", type=float, default=10.0, help="SVM regularization l")
    ap.add_argument("--ref-points", type=int, default=None, help="reference front size (default 500 / 990)")
    ap.add_argument("--out", default="results")
    ap.add_argument("--full-paper-scale", action="store_true", help="pop 200 over all eight configs")
    ap.add_argument("--wallclock", action="store_true", help="fill wallclock_s (breaks byte-identical reruns)")
    ap.add_argument("--jobs", type=int, default=1)
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    pop, configs = args.pop, args.configs
    if args.full_paper_scale:
        pop, configs = 200, list(ENVIRONMENTS)
    try:
        spec = ExperimentSpec(tuple(args.problems), tuple(configs), tuple(args.algos), args.seeds,
                              args.base_seed, pop, args.gens_per_change, args.candidate_mult, args.svm_l,
                              args.ref_points, args.wallclock, args.jobs)
    except (ConfigurationError, ValueError) as err:
        print(f"configuration error: {err}", file=sys.stderr)
        return 2
    try:
        Path(args.out).mkdir(parents=True, exist_ok=True)
    except OSError as err:
        print(f"cannot write to {args.out}: {err}", file=sys.stderr)
        return 3
    records = run_experiment(spec)
    try:
        write_results(records, args.out, spec, record_wallclock=spec.record_wallclock)
    except OSError as err:
        print(f"cannot write results: {err}", file=sys.stderr)
        return 3
    for f, a, v in aggregate(records):
        print(f"{f:6s} {a:11s} DMIGD {v:.4f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
