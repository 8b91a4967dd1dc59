import csv
import json
import random

import numpy as np
import pytest

from isvm_dmoea.core import ConfigurationError
from isvm_dmoea.experiment import ExperimentSpec, aggregate, cell_seed, main, run_experiment, write_results
from isvm_dmoea.metrics import dmigd

SMALL = dict(problems=("dMOP2",), configs=("C1",), algorithms=("NSGA2", "ISVM-NSGA2"), seeds=3,
             pop_size=8, gens_per_change=2, ref_points=50)


@pytest.fixture(scope="module")
def records():
    return run_experiment(ExperimentSpec(**SMALL))


def test_grid_cardinality_and_order(records):
    assert len(records) == 6
    assert [r.key for r in records] == sorted(r.key for r in records)
    assert all(len(r.igd) == 20 for r in records)
    isvm = [r for r in records if r.algorithm == "ISVM-NSGA2"]
    assert all(len(r.classifier_sizes) == 20 for r in isvm)


def test_full_paper_grid_shape():
    spec = ExperimentSpec(problems=("FDA4", "FDA5", "DIMP2", "dMOP2", "HE7", "HE9"),
                          configs=tuple(f"C{i}" for i in range(1, 9)), algorithms=("NSGA2", "ISVM-NSGA2"))
    assert len(spec.cells()) == 6 * 8 * 2 * 5


def test_spec_validation():
    with pytest.raises(ConfigurationError):
        ExperimentSpec(problems=("FDA9",))
    with pytest.raises(ConfigurationError):
        ExperimentSpec(configs=("C0",))
    with pytest.raises(ConfigurationError):
        ExperimentSpec(algorithms=("RM-MEDA",))
    with pytest.raises(ConfigurationError):
        ExperimentSpec(seeds=0)
    assert ExperimentSpec(problems=("dmop2",), algorithms=("isvm-nsga2",)).problems == ("dMOP2",)


def test_cell_seed_is_stable():
    a = cell_seed(0, "FDA4", "C1", "NSGA2", 2)
    assert a == cell_seed(0, "FDA4", "C1", "NSGA2", 2)
    assert a != cell_seed(0, "FDA4", "C1", "NSGA2", 3) and a != cell_seed(1, "FDA4", "C1", "NSGA2", 2)
    # adding cells to a spec does not change existing ones
    small = ExperimentSpec(**SMALL)
    big = ExperimentSpec(**{**SMALL, "seeds": 4, "configs": ("C1", "C5")})
    assert set(small.cells()) <= set(big.cells())


def _read(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_written_files(records, tmp_path):
    spec = ExperimentSpec(**SMALL)
    write_results(records, tmp_path, spec)
    summary = _read(tmp_path / "summary.csv")
    assert len(summary) == len(records)
    assert list(summary[0]) == ["function", "config", "algorithm", "seed", "migd", "wallclock_s"]
    agg = _read(tmp_path / "aggregate.csv")
    assert len(agg) == 2
    for row in agg:
        per_cfg = {}
        for s in summary:
            if s["algorithm"] == row["algorithm"]:
                per_cfg.setdefault(s["config"], []).append(float(s["migd"]))
        assert float(row["dmigd"]) == pytest.approx(dmigd([np.median(v) for v in per_cfg.values()]), abs=1e-15)
    traces = sorted((tmp_path / "traces").glob("*.csv"))
    assert len(traces) == len(records)
    for path in traces:
        rows = _read(path)
        assert len(rows) == 20 and list(rows[0]) == ["change_index", "t", "igd"]
        assert b"\r" not in path.read_bytes()
    echo = json.loads((tmp_path / "spec.json").read_text())
    assert echo["problems"] == ["dMOP2"] and echo["pop_size"] == 8


def test_shuffled_records_give_identical_files(records, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    write_results(records, a)
    shuffled = list(records)
    random.Random(1).shuffle(shuffled)
    write_results(shuffled, b)
    for f in ["summary.csv", "aggregate.csv"] + [f"traces/{p.name}" for p in (a / "traces").iterdir()]:
        assert (a / f).read_bytes() == (b / f).read_bytes()


def test_wallclock_only_on_request(records, tmp_path):
    write_results(records, tmp_path, record_wallclock=True)
    assert all(float(r["wallclock_s"]) > 0 for r in _read(tmp_path / "summary.csv"))
    with pytest.raises(ValueError):
        write_results([], tmp_path)


def test_aggregate_rows(records):
    rows = aggregate(records)
    assert [(f, a) for f, a, _ in rows] == [("dMOP2", "ISVM-NSGA2"), ("dMOP2", "NSGA2")]


def test_cli(tmp_path, capsys):
    out = tmp_path / "run"
    args = ["--problems", "HE9", "--configs", "C5", "--algos", "MOPSO", "--seeds", "1", "--pop", "6",
            "--gens-per-change", "1", "--ref-points", "20", "--out", str(out)]
    assert main(args) == 0
    assert (out / "summary.csv").exists() and "DMIGD" in capsys.readouterr().out
    assert main(args[:2] + ["--problems", "nope"]) == 2
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert main(args[:-1] + [str(blocker / "sub")]) == 3
