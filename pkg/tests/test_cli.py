import json

import numpy as np
import pytest

from scfcq.cli import load_dataset, main, parse_config
from scfcq.errors import ConfigError
from scfcq.estimator import ScfcqConfig, estimate_path, trim
from scfcq.first_stage import fit_control
from scfcq.simulation import generate
from scfcq.tables import numeric_columns, read_table, write_rows

GRID = ["--tau0", "0.95", "--tau-l", "0.5", "--step", "0.05"]


@pytest.fixture(scope="module")
def data_csv(tmp_path_factory, dgp1):
    ds, _ = generate(400, dgp1, np.random.default_rng(77))
    path = tmp_path_factory.mktemp("data") / "d.csv"
    rows = [dict(y=ds.y[i], x=ds.X[i, 1], r=ds.R[i], z1=ds.Z[i, 1]) for i in range(ds.n)]
    write_rows(path, ("y", "x", "r", "z1"), rows)
    return path


def cols(path):
    return ["--input", str(path), "--y", "y", "--x", "x", "--r", "r", "--z", "z1"]


def error_record(capsys):
    return json.loads(capsys.readouterr().err.strip().splitlines()[-1])


def test_missing_column_is_config_error(data_csv, tmp_path, capsys):
    argv = ["estimate", "--input", str(data_csv), "--y", "nope", "--x", "x", "--r", "r", "--z", "z1"]
    assert main(argv + ["--out", str(tmp_path)]) == 2
    rec = error_record(capsys)
    assert rec["error"] == "ConfigError" and rec["field"] == "columns.y"


def test_q_order_is_config_error(capsys):
    assert main(["simulate", "--q0", "0.01", "--q1", "0.05"]) == 2
    assert error_record(capsys)["field"] == "scfcq.q1"
    with pytest.raises(ConfigError):
        parse_config(["estimate", "--y", "y", "--r", "r", "--z", "z"])  # no input


def test_invalid_dgp(capsys):
    assert main(["simulate", "--dgp", "DGP-IX"]) == 2
    assert error_record(capsys)["field"] == "simulate.dgp"


@pytest.mark.parametrize(
    "doc,field",
    [
        ({"scfcq": {"bogus": 1}}, "scfcq.bogus"),
        ({"scfcq": {"basis": "wavelet:2"}}, "scfcq.basis"),
        ({"first_stage": {"mode": "kernel"}}, "first_stage.mode"),
        ({"seed": -1}, "seed"),
        ({"transforms": ["cube:r"]}, "transforms"),
    ],
)
def test_config_file_errors(tmp_path, doc, field):
    path = tmp_path / "c.json"
    path.write_text(json.dumps(doc))
    with pytest.raises(ConfigError) as err:
        parse_config(["simulate", "--config", str(path)])
    assert err.value.field == field


def test_empty_file_plus_flags_equals_file(tmp_path, data_csv):
    empty = tmp_path / "empty.json"
    empty.write_text("")
    flags = ["--seed", "4", "--q0", "0.2", "--basis", "bspline:3", "--out", "o"] + cols(data_csv)
    a = parse_config(["estimate", "--config", str(empty)] + flags)
    full = tmp_path / "full.json"
    full.write_text(
        json.dumps(
            {
                "seed": 4,
                "out": "o",
                "input": str(data_csv),
                "columns": {"y": "y", "x": ["x"], "r": "r", "z": ["z1"]},
                "scfcq": {"q0": 0.2, "basis": "bspline:3"},
            }
        )
    )
    b = parse_config(["estimate", "--config", str(full)])
    assert a == b
    # flags override file values
    c = parse_config(["estimate", "--config", str(full), "--q0", "0.15"])
    assert c.scfcq.q0 == 0.15 and c.scfcq.m_basis.label() == "bspline:3"


def test_default_tuning_values():
    cfg = parse_config(["simulate"])
    assert (cfg.scfcq.tau0, cfg.scfcq.tauL, cfg.scfcq.step) == (0.99, 0.3, 0.01)
    assert (cfg.scfcq.q0, cfg.scfcq.q1, cfg.scfcq.trim_fraction) == (0.1, 0.03, 0.01)
    assert cfg.first_stage.v_pair == (0.25, 0.75)
    assert cfg.bootstrap.draws == 999


def test_estimate_round_trip(data_csv, tmp_path):
    out = tmp_path / "est"
    assert main(["estimate", "--out", str(out)] + GRID + cols(data_csv)) == 0
    cfg = parse_config(["estimate"] + GRID + cols(data_csv))
    ds = load_dataset(cfg)
    v = fit_control(ds.R, ds.Z).v_hat
    path = estimate_path(trim(ds, 0.01), v, ScfcqConfig(tau0=0.95, tauL=0.5, step=0.05))
    table = numeric_columns(out / "path.csv", ["tau", "estimate"])
    header, rows = read_table(out / "path.csv")
    assert header == ["tau", "coef", "estimate"]
    names = [r[1] for _, r in rows]
    alpha = table["estimate"][[n == "alpha" for n in names]]
    assert np.array_equal(alpha, path.alpha)  # bit-for-bit through repr round trip
    header, diag = read_table(out / "diagnostics.csv")
    assert header[:4] == ["tau", "threshold", "subsample_size", "status"]
    assert len(diag) == path.grid.size
    assert (out / "path.svg").read_text().startswith("<svg")


def test_estimate_is_byte_reproducible(data_csv, tmp_path):
    for name in ("a", "b"):
        assert main(["estimate", "--out", str(tmp_path / name)] + GRID + cols(data_csv)) == 0
    for f in ("path.csv", "diagnostics.csv", "path.svg"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()


def test_square_adds_one_column(data_csv, tmp_path):
    base = load_dataset(parse_config(["estimate"] + cols(data_csv)))
    sq = load_dataset(parse_config(["estimate", "--square", "r"] + cols(data_csv)))
    assert sq.k_x == base.k_x + 1
    assert sq.x_names[-1] == "r_sq"
    assert np.array_equal(sq.X[:, -1], base.R**2)
    assert sq.Z.shape == base.Z.shape
    assert main(["estimate", "--square", "r", "--out", str(tmp_path)] + GRID + cols(data_csv)) == 0
    header, rows = read_table(tmp_path / "path.csv")
    assert "r_sq" in {r[1] for _, r in rows}


@pytest.mark.parametrize(
    "body,line",
    [("y,x,r,z1\n1,2,3,4\n1,2,3\n", 3), ("y,x,r,z1\n1,2,3,4\n1,2,,4\n", 3), ("y,x,r,z1\n1,2,3,4\n1,2,3,abc\n", 3)],
)
def test_malformed_csv_names_line(tmp_path, capsys, body, line):
    path = tmp_path / "bad.csv"
    path.write_text(body)
    assert main(["estimate", "--out", str(tmp_path)] + cols(path)) == 3
    rec = error_record(capsys)
    assert rec["line"] == line and f"line {line}" in rec["message"]


def test_negative_outcome_is_runtime_error(tmp_path, capsys):
    path = tmp_path / "neg.csv"
    write_rows(path, ("y", "x", "r", "z1"), [dict(y=-1.0, x=0.0, r=0.0, z1=0.0)])
    assert main(["estimate", "--out", str(tmp_path)] + cols(path)) == 3


def test_simulate_smoke_and_reproducible(tmp_path, capsys):
    argv = ["simulate", "--G", "2", "--n", "300", "--seed", "3"] + GRID
    assert main(argv + ["--out", str(tmp_path / "a")]) == 0
    assert "alpha" in capsys.readouterr().out
    assert main(argv + ["--out", str(tmp_path / "b")]) == 0
    header, rows = read_table(tmp_path / "a" / "mc_report.csv")
    assert len(rows) >= 8
    assert (tmp_path / "a" / "mc_report.csv").read_bytes() == (tmp_path / "b" / "mc_report.csv").read_bytes()


def test_bootstrap_smoke(data_csv, tmp_path):
    out = tmp_path / "bs"
    assert main(["bootstrap", "--draws", "5", "--out", str(out)] + GRID + cols(data_csv)) == 0
    header, rows = read_table(out / "bootstrap_summary.csv")
    assert header == ["tau", "coef", "estimate", "se", "ci_lo", "ci_hi"]
    assert (out / "bootstrap.svg").exists()


def test_bootstrap_unit_weights_reproduce_estimates(data_csv, tmp_path):
    assert main(["estimate", "--out", str(tmp_path / "e")] + GRID + cols(data_csv)) == 0
    assert main(["bootstrap", "--draws", "2", "--unit-weights", "--out", str(tmp_path / "b")] + GRID + cols(data_csv)) == 0
    est = {(r[0], r[1]): r[2] for _, r in read_table(tmp_path / "e" / "path.csv")[1]}
    for _, r in read_table(tmp_path / "b" / "bootstrap_summary.csv")[1]:
        assert r[2] == est[(r[0], r[1])]
        assert r[4] == r[5] == r[2]


def test_bootstrap_ci_level_nesting(data_csv, tmp_path):
    spans = {}
    for level in ("0.95", "0.5"):
        out = tmp_path / level
        argv = ["bootstrap", "--draws", "20", "--seed", "8", "--ci-level", level, "--out", str(out)]
        assert main(argv + GRID + cols(data_csv)) == 0
        t = numeric_columns(out / "bootstrap_summary.csv", ["ci_lo", "ci_hi"])
        spans[level] = t["ci_hi"] - t["ci_lo"]
    assert np.all(spans["0.5"] <= spans["0.95"])
    assert np.any(spans["0.5"] < spans["0.95"])
