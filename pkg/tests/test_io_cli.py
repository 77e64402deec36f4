import csv
import json

import numpy as np
import pytest

from cfunhddc.cli import RunConfig, main, parse_range, report_schema, run
from cfunhddc.errors import ConfigError, IngestionError
from cfunhddc.funbasis import CurveSet
from cfunhddc.io import ingest_csv, normalize_time, write_curves_csv
from cfunhddc.simulate import SimSpec, simulate

jsonschema = pytest.importorskip("jsonschema")


def _write(path, rows, header="curve_id,component,time,value"):
    path.write_text(header + "\n" + "\n".join(rows) + "\n")
    return path


def test_ingest_small_file(tmp_path):
    rows = [f"{cid},{j},{t},{t * j}" for cid in ("a", "b") for j in (1, 2) for t in (0.0, 0.5, 1.0)]
    curves = ingest_csv(_write(tmp_path / "c.csv", rows))
    assert (curves.n, curves.p) == (2, 2)
    assert curves.ids == ["a", "b"]
    assert all(len(t) == 3 for ts in curves.times for t in ts)
    np.testing.assert_array_equal(curves.values[1][1], [0.0, 1.0, 2.0])
    assert curves.domain == (0.0, 1.0)


def test_ingest_sorts_times_and_accepts_interleaved_rows(tmp_path):
    rows = ["x,1,2.0,20", "y,1,0.0,0", "x,1,1.0,10", "y,1,1.0,1", "x,1,0.0,0"]
    curves = ingest_csv(_write(tmp_path / "c.csv", rows))
    assert curves.ids == ["x", "y"]
    np.testing.assert_array_equal(curves.times[0][0], [0.0, 1.0, 2.0])
    np.testing.assert_array_equal(curves.values[0][0], [0.0, 10.0, 20.0])


def test_ingest_missing_component_names_curve(tmp_path):
    rows = ["a,1,0,1", "a,1,1,1", "a,2,0,1", "a,2,1,1", "b,1,0,1", "b,1,1,1"]
    with pytest.raises(IngestionError, match="'b'"):
        ingest_csv(_write(tmp_path / "c.csv", rows))


def test_ingest_bad_cell_reports_row(tmp_path):
    rows = ["a,1,0,1", "a,1,oops,1"]
    with pytest.raises(IngestionError, match="row 3") as info:
        ingest_csv(_write(tmp_path / "c.csv", rows))
    assert info.value.row == 3
    with pytest.raises(IngestionError, match="row 2"):
        ingest_csv(_write(tmp_path / "d.csv", ["a,1,0,nan"]))


def test_ingest_missing_columns(tmp_path):
    with pytest.raises(IngestionError, match="missing columns"):
        ingest_csv(_write(tmp_path / "c.csv", ["a,1,0"], header="curve_id,component,time"))


def test_round_trip_simulated(tmp_path):
    sample = simulate(SimSpec("dataset1", per_class=20, seed=4))
    write_curves_csv(sample.curves, tmp_path / "s.csv")
    back = ingest_csv(tmp_path / "s.csv", domain=sample.curves.domain)
    assert back.equals(sample.curves)


def test_normalize_time_examples():
    t = [np.array([2.0, 4.0, 6.0])]
    c = CurveSet(["a"], [t], [[np.ones(3)]], (0.0, 10.0))
    np.testing.assert_array_equal(normalize_time(c).times[0][0], [0.0, 0.5, 1.0])
    unit = np.linspace(0, 1, 7)
    c = CurveSet(["a"], [[unit]], [[unit]], (0.0, 1.0))
    np.testing.assert_array_equal(normalize_time(c).times[0][0], unit)


def test_normalize_time_varying_lengths():
    rng = np.random.default_rng(0)
    t1 = np.sort(rng.uniform(3.0, 1000.0, 2199))
    t2 = np.sort(rng.uniform(-50.0, 7e4, 10675))
    c = CurveSet(["short", "long"], [[t1], [t2]], [[t1], [t2]], (-50.0, 7e4))
    out = normalize_time(c)
    for ts in out.times:
        assert ts[0][0] == 0.0 and ts[0][-1] == 1.0
        assert np.all(np.diff(ts[0]) >= 0)
    assert out.domain == (0.0, 1.0)


def test_normalize_constant_time_names_curve():
    c = CurveSet(["flat"], [[np.array([1.0, 1.0])]], [[np.array([0.0, 1.0])]], (0.0, 2.0))
    with pytest.raises(IngestionError, match="'flat'"):
        normalize_time(c)


def test_parse_range():
    assert parse_range("2:4") == [2, 3, 4]
    assert parse_range("2,3,5") == [2, 3, 5]
    assert parse_range("7") == [7]
    with pytest.raises(ConfigError):
        parse_range("a:b")


def _small_run_args(out, seed=7):
    return ["run", "--simulate", "dataset1", "--per-class", "25", "--K", "4", "--d", "2",
            "--init", "trimmed", "--nb-init", "2", "--seed", str(seed), "--out", str(out)]


@pytest.fixture(scope="module")
def small_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("run1")
    assert main(_small_run_args(out)) == 0
    return out


def test_run_outputs_and_schema(small_run):
    report = json.loads((small_run / "report.json").read_text())
    jsonschema.validate(report, report_schema())
    assert report["schema_version"] == "1.0"
    assert report["model"]["K"] == 4 and len(report["curves"]) == 105
    with (small_run / "assignments.csv").open() as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["curve_id", "cluster", "outlier", "t_max", "s"]
    assert len(rows) == 106
    with (small_run / "plotdata.csv").open() as fh:
        reader = csv.reader(fh)
        assert next(reader) == ["curve_id", "component", "t", "value", "cluster", "outlier"]
        n_rows = sum(1 for _ in reader)
    assert n_rows == 105 * 2 * 200
    timing = json.loads((small_run / "timing.json").read_text())
    assert timing["total"] > 0
    assert not [p for p in small_run.iterdir() if p.name.startswith(".partial")]


def test_run_is_byte_deterministic(small_run, tmp_path):
    assert main(_small_run_args(tmp_path)) == 0
    for name in ("report.json", "assignments.csv", "plotdata.csv"):
        assert (tmp_path / name).read_bytes() == (small_run / name).read_bytes()


def test_run_from_csv_with_sweep(tmp_path):
    sample = simulate(SimSpec("dataset1", per_class=15, seed=1))
    write_curves_csv(sample.curves, tmp_path / "curves.csv")
    cfg = RunConfig(out_dir=str(tmp_path / "out"), input_path=str(tmp_path / "curves.csv"),
                    K_range=[3, 4], d_grid=[2, 3], nb_init=1, normalize_time=True, n_basis=12)
    report = run(cfg)
    assert len(report["selection"]["candidates"]) == 4
    assert report["data"]["domain"] == [0.0, 1.0]
    jsonschema.validate(report, report_schema())


def test_run_cattell_strategy(tmp_path):
    report = run(RunConfig(out_dir=str(tmp_path), simulate="dataset2", per_class=15, K_range=[4],
                           d_grid=None, cattell_thresholds=[0.2], nb_init=1, n_basis=10))
    assert report["selection"]["chosen"]["strategy"] == "cattell"
    jsonschema.validate(report, report_schema())


def test_structured_error_and_no_partial_outputs(tmp_path, capsys):
    bad = _write(tmp_path / "bad.csv", ["a,1,0,1", "a,1,1,x"])
    out = tmp_path / "out"
    code = main(["run", "--input", str(bad), "--K", "2", "--d", "1", "--out", str(out)])
    assert code != 0
    err = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert err["error"] == "IngestionError" and err["module"] == "cli" and err["row"] == 3
    assert not out.exists()


def test_selection_failure_is_reported(tmp_path, capsys):
    out = tmp_path / "out"
    code = main(["run", "--simulate", "dataset1", "--per-class", "2", "--K", "6", "--d", "5",
                 "--nb-init", "1", "--basis", "8", "--out", str(out)])
    assert code == 2
    err = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert err["module"] == "selection"
    assert not out.exists() or not any(out.iterdir())


def test_simulate_subcommand_round_trip(tmp_path):
    assert main(["simulate", "--kind", "dataset2", "--per-class", "5", "--seed", "3",
                 "--out", str(tmp_path / "c.csv"), "--truth", str(tmp_path / "t.csv")]) == 0
    curves = ingest_csv(tmp_path / "c.csv")
    sample = simulate(SimSpec("dataset2", per_class=5, seed=3))
    assert curves.equals(sample.curves)
    with (tmp_path / "t.csv").open() as fh:
        rows = list(csv.DictReader(fh))
    assert sum(int(r["outlier"]) for r in rows) == 5


def test_benchmark_subcommand(tmp_path, capsys):
    out = tmp_path / "bench.csv"
    assert main(["benchmark", "--reps", "1", "--per-class", "40", "--nb-init", "3", "--out", str(out)]) == 0
    assert "ARI_c=" in capsys.readouterr().out
    assert out.read_text().startswith("seed,ari_c,ari_o")


def test_threads_env_var(tmp_path, monkeypatch):
    monkeypatch.setenv("CFUNHDDC_THREADS", "2")
    args = ["run", "--simulate", "dataset1", "--per-class", "10", "--K-range", "3:4", "--d", "2",
            "--nb-init", "1", "--basis", "10", "--out", str(tmp_path / "par")]
    assert main(args) == 0
    monkeypatch.setenv("CFUNHDDC_THREADS", "1")
    args[-1] = str(tmp_path / "ser")
    assert main(args) == 0
    assert (tmp_path / "par" / "report.json").read_bytes() == (tmp_path / "ser" / "report.json").read_bytes()
