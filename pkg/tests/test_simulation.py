import math

import numpy as np
import pytest
from scipy.special import ndtri

import scfcq.simulation as simulation
from conftest import BETA0_DGP_I
from scfcq.errors import TooManyFailures
from scfcq.estimator import ScfcqConfig
from scfcq.quantile_core import rq
from scfcq.simulation import (
    DGP_I,
    DGP_II,
    MC_COLUMNS,
    DgpSpec,
    calibrate_beta0,
    censoring_share,
    generate,
    latent_quantile,
    run_mc,
    true_effects,
)
from scfcq.tables import read_table

FAST = ScfcqConfig(tau0=0.95, tauL=0.3, step=0.05)


def test_spec_validation():
    with pytest.raises(ValueError):
        DgpSpec("DGP-III")
    with pytest.raises(ValueError):
        DgpSpec(rho=1.0)
    with pytest.raises(ValueError):
        generate(5, DgpSpec(beta0=0.0), np.random.default_rng(0))


def test_pinned_calibration(dgp1):
    assert dgp1.beta0 == pytest.approx(BETA0_DGP_I, abs=1e-5)
    assert abs(censoring_share(dgp1, dgp1.beta0) - 0.30) <= 0.002


def test_calibration_stable_across_seeds(dgp1):
    assert abs(calibrate_beta0(DgpSpec(DGP_I), seed=99) - dgp1.beta0) < 0.01


def test_censoring_decreases_in_beta0():
    spec = DgpSpec(DGP_I)
    shares = [censoring_share(spec, b, n=10**5) for b in (-1.0, 0.5, 2.0)]
    assert shares[0] > shares[1] > shares[2]
    with pytest.raises(ValueError):
        calibrate_beta0(spec, tolerance=0.0)


@pytest.mark.parametrize("variant", [DGP_I, DGP_II])
def test_censoring_share_at_1e5(variant):
    spec = DgpSpec(variant).calibrated()
    ds, _ = generate(10**5, spec, np.random.default_rng(3))
    assert 0.29 <= np.mean(ds.y == 0) <= 0.31


def test_latent_outcome_is_quantile_at_u(dgp1):
    ds, tr = generate(2000, dgp1, np.random.default_rng(1))
    assert np.allclose(tr.ystar, latent_quantile(tr, dgp1, tr.U), atol=1e-12)
    assert np.array_equal(ds.y, np.maximum(tr.ystar, 0))
    # U = 0.5 removes the heteroskedastic term
    eps = dgp1.rho / math.sqrt(2) * ndtri(tr.V)
    at_median = latent_quantile(tr, dgp1, 0.5)
    assert np.allclose(at_median - dgp1.beta0 - tr.R - tr.X, eps)


def test_conditional_median_regression(dgp1):
    _, tr = generate(10**5, dgp1, np.random.default_rng(8))
    D = np.column_stack([np.ones(tr.R.size), tr.R, tr.X, ndtri(tr.V)])
    coef = rq(tr.ystar, D, 0.5).coef
    expected = [dgp1.beta0, 1.0, 1.0, dgp1.rho / math.sqrt(2)]
    assert np.max(np.abs(coef - expected)) <= 0.02


def test_dgp2_regressor_equation():
    spec = DgpSpec(DGP_II).calibrated()
    _, tr = generate(500, spec, np.random.default_rng(2))
    scale = 0.5 * (2 + 0.5 * tr.X + 0.5 * tr.Z1)
    assert np.allclose(tr.R, 1 + tr.Z1 + tr.X + scale * ndtri(tr.V))


def test_true_effects():
    assert true_effects(0.5) == (1.0, 1.0)
    a, b = true_effects(0.9)
    assert a == b == pytest.approx(1 + 1.2815515655446004 / (5 * math.sqrt(2)), abs=1e-15)
    assert a == pytest.approx(1.18126, abs=1e-4)  # 1.181239 before rounding
    assert true_effects(0.2)[0] + true_effects(0.8)[0] == pytest.approx(2.0)
    with pytest.raises(ValueError):
        true_effects(1.0)


@pytest.fixture(scope="module")
def small_report(dgp1):
    return run_mc(6, 300, dgp1, FAST, seed=5, workers=1)


def test_rmse_decomposition(small_report):
    est = small_report.estimates
    for j, tau in enumerate((0.9, 0.7, 0.5, 0.3)):
        truth = true_effects(tau)
        for c, name in enumerate(("alpha", "beta1")):
            row = small_report.lookup(tau, name)
            dev = est[:, j, c] - truth[c]
            assert row["rmse"] ** 2 == pytest.approx(row["bias"] ** 2 + dev.var(), rel=1e-12)
            assert row["rmse"] >= abs(row["bias"])


def test_mc_determinism_across_workers(dgp1, small_report, tmp_path):
    again = run_mc(6, 300, dgp1, FAST, seed=5, workers=2)
    assert np.array_equal(again.estimates, small_report.estimates)
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    small_report.to_csv(a)
    again.to_csv(b)
    assert a.read_bytes() == b.read_bytes()
    header, rows = read_table(a)
    assert tuple(header) == MC_COLUMNS and len(rows) == 8


def test_same_seed_hook(dgp1):
    rep = run_mc(2, 300, dgp1, FAST, seed=5, workers=1, same_seed=True)
    est = rep.estimates
    assert np.array_equal(est[0], est[1])
    for j, tau in enumerate((0.9, 0.7, 0.5, 0.3)):
        dev = est[0, j, 0] - true_effects(tau)[0]
        row = rep.lookup(tau, "alpha")
        assert row["bias"] == pytest.approx(dev, rel=1e-15, abs=1e-15)
        assert row["rmse"] == pytest.approx(abs(dev), rel=1e-15)


def test_too_many_failures(dgp1, monkeypatch):
    monkeypatch.setattr(simulation, "_one_replication", lambda job: (job[0], None))
    with pytest.raises(TooManyFailures):
        run_mc(4, 300, dgp1, FAST, workers=1)
    with pytest.raises(ValueError):
        run_mc(1, 300, dgp1, FAST)
