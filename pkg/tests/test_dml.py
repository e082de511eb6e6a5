import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import greedydml.dml as dml
from greedydml.dml import (
    iv_estimate,
    make_folds,
    median_adjust,
    plr_estimate,
    plr_estimate_nocf,
    score_iv,
    score_plr,
)
from greedydml.errors import (
    DegenerateTreatmentVariation,
    EmptyList,
    TooFewObservations,
    WeakIdentification,
)
from greedydml.oga import fit_nuisance
from greedydml.types import (
    DmlConfig,
    EstimateResult,
    NuisanceFit,
    SelectionConfig,
    confidence_interval,
    validate_dataset,
)
from oracles import replay_iv, replay_plr, scores_at_estimate


def zero_fitter(X, target, cfg):
    p = X.shape[1]
    return NuisanceFit([], np.zeros(p), 0, np.zeros(1), np.zeros(1))


def full_support(p):
    # tiny penalty and a full-length path: HDAIC picks every column
    return SelectionConfig(c_star=1e-12, max_steps_override=p)


def plr_data(rng, n=200, p=10, theta=0.5):
    X = rng.standard_normal((n, p))
    d = X[:, :3] @ [1.0, 0.5, -0.5] + rng.standard_normal(n)
    y = theta * d + X[:, 2:5] @ [0.3, 1.0, -1.0] + rng.standard_normal(n)
    return validate_dataset(X, y, d)


def iv_data(rng, n=200, p=10, theta=0.5):
    X = rng.standard_normal((n, p))
    z = X[:, 0] * 0.5 + rng.standard_normal(n)
    u = rng.standard_normal(n)
    d = z + X[:, 1] + 0.5 * u + rng.standard_normal(n)
    y = theta * d + X[:, 2] + u
    return validate_dataset(X, y, d, z)


# folds

def test_folds_balanced():
    assert list(make_folds(10, 5, 1).sizes()) == [2] * 5
    assert sorted(make_folds(11, 5, 1).sizes()) == [2, 2, 2, 2, 3]


def test_folds_deterministic():
    a = make_folds(97, 5, 123).assignments
    assert np.array_equal(a, make_folds(97, 5, 123).assignments)
    assert not np.array_equal(a, make_folds(97, 5, 124).assignments)


def test_folds_too_few():
    with pytest.raises(TooFewObservations):
        make_folds(9, 5, 0)


# scores

def test_score_plr_examples():
    assert score_plr(1, 1, 0, 0, 1) == 0
    assert score_plr(2, 1, 0.5, 0.25, 0.5) == pytest.approx(0.84375, abs=1e-15)
    y, d, g, b = 1.3, -0.7, 0.2, 0.1
    assert score_plr(y, d, g, b, 0.0) == (y - g) * (d - b)


def test_score_iv_examples():
    assert score_iv(1, 2, 3, 0.1, 0.2, 0.3, 1) == pytest.approx(-2.43, abs=1e-12)
    assert score_iv(1.5, 2.0, -3.0, 0, 0, 0, 0) == 1.5 * -3.0
    y, d, g, b = 1.3, -0.7, 0.2, 0.1
    assert score_iv(y, d, d, g, b, b, 0.8) == score_plr(y, d, g, b, 0.8)


# estimators

def test_noiseless_exact_relation(rng):
    n = 100
    d = rng.standard_normal(n)
    data = validate_dataset(rng.standard_normal((n, 3)), 0.5 * d, d)
    res = plr_estimate(data, DmlConfig(k_folds=2), fitter=zero_fitter)
    assert res.theta_hat == 0.5
    assert res.omega_hat == 0.0


def test_plr_matches_algorithm_replay():
    for seed in range(5):
        r = np.random.default_rng(seed)
        X = r.standard_normal((40, 3))
        d = X @ [1.0, 0.0, 0.5] + r.standard_normal(40)
        y = 0.5 * d + X @ [0.0, 1.0, 1.0] + r.standard_normal(40)
        data = validate_dataset(X, y, d)
        cfg = DmlConfig(k_folds=2, seed=seed)
        res = plr_estimate(data, cfg)
        folds = make_folds(40, 2, seed)
        theta, omega = replay_plr(X, y, d, folds.assignments, 2)
        assert res.theta_hat == pytest.approx(theta, rel=1e-10, abs=1e-12)
        assert res.omega_hat == pytest.approx(omega, rel=1e-8)


def test_iv_matches_algorithm_replay():
    for seed in range(5):
        r = np.random.default_rng(50 + seed)
        X = r.standard_normal((40, 3))
        z = r.standard_normal(40) + 0.3 * X[:, 0]
        d = z + X[:, 1] + r.standard_normal(40)
        y = 0.5 * d + X[:, 2] + r.standard_normal(40)
        data = validate_dataset(X, y, d, z)
        res = iv_estimate(data, DmlConfig(k_folds=2, seed=seed))
        theta, omega = replay_iv(X, y, d, z, make_folds(40, 2, seed).assignments, 2)
        assert res.theta_hat == pytest.approx(theta, rel=1e-10, abs=1e-12)
        assert res.omega_hat == pytest.approx(omega, rel=1e-8)


def test_iv_collapses_to_plr(rng):
    base = plr_data(rng)
    data_iv = validate_dataset(base.X, base.y, base.d, base.d)
    cfg = DmlConfig(seed=11)
    a = plr_estimate(base, cfg)
    b = iv_estimate(data_iv, cfg)
    assert a.theta_hat == b.theta_hat
    assert a.omega_hat == b.omega_hat


def test_nocf_full_support_is_frisch_waugh(rng):
    data = plr_data(rng)
    res = plr_estimate_nocf(data, DmlConfig(selection=full_support(data.p)))
    assert res.m_hats == {"treatment": [10], "outcome": [10]}
    long = np.linalg.lstsq(np.column_stack([data.d, data.X]), data.y, rcond=None)[0]
    assert res.theta_hat == pytest.approx(long[0], abs=1e-8)


def test_nocf_ignores_seed(rng):
    data = plr_data(rng)
    a = plr_estimate_nocf(data, DmlConfig(seed=1))
    b = plr_estimate_nocf(data, DmlConfig(seed=2))
    assert a == b


def test_degenerate_treatment(rng):
    X = rng.standard_normal((100, 5))
    data = validate_dataset(X, rng.standard_normal(100), X[:, 0] - 2 * X[:, 3])
    with pytest.raises(DegenerateTreatmentVariation):
        plr_estimate_nocf(data, DmlConfig(selection=full_support(5)))


def test_weak_identification():
    n = 40
    d = np.tile([1.0, 0.0], n // 2)
    z = np.tile([0.0, 1.0], n // 2)
    data = validate_dataset(np.ones((n, 2)), np.ones(n), d, z)
    with pytest.raises(WeakIdentification):
        iv_estimate(data, DmlConfig(k_folds=2), fitter=zero_fitter)


def test_fold_size_constraints(rng):
    data = plr_data(rng, n=90)
    with pytest.raises(TooFewObservations):
        plr_estimate(data, DmlConfig(k_folds=5))  # folds of 18 < 20
    small_nc = validate_dataset(rng.standard_normal((40, 30)), np.ones(40), rng.standard_normal(40))
    with pytest.raises(TooFewObservations):
        plr_estimate(small_nc, DmlConfig(k_folds=2))  # 20 < 2 * M*


def test_instrument_required(rng):
    from greedydml.errors import GreedyDMLError

    with pytest.raises(GreedyDMLError):
        iv_estimate(plr_data(rng))


# median adjustment

def _res(theta, omega, n=100):
    return EstimateResult.from_moments(theta, omega, n)


def test_median_single_unchanged():
    r = _res(0.3, 2.0)
    assert median_adjust([r]) is r


def test_median_hand_values():
    out = median_adjust([_res(1, 0), _res(2, 0), _res(3, 0)])
    assert out.theta_hat == 2.0
    assert out.omega_hat == 1.0
    assert (out.std_err, out.ci_low, out.ci_high) == confidence_interval(2.0, 1.0, 100, 0.05)


def test_median_even_count_and_identical():
    out = median_adjust([_res(1, 0), _res(2, 0), _res(4, 1), _res(8, 0)])
    assert out.theta_hat == 3.0
    # omega + (theta - 3)^2 = [4, 1, 2, 25] -> median 3
    assert out.omega_hat == 3.0
    same = [_res(0.5, 1.5)] * 4
    assert median_adjust(same) == same[0]


def test_median_empty():
    with pytest.raises(EmptyList):
        median_adjust([])


def test_repetitions_use_median(rng):
    data = plr_data(rng)
    cfg = DmlConfig(seed=3, repetitions=3)
    res = plr_estimate(data, cfg)
    runs = [plr_estimate(data, DmlConfig(seed=dml.repetition_seed(3, s))) for s in range(3)]
    assert res == median_adjust(runs)
    assert len(res.m_hats["treatment"]) == 15


# invariants

@pytest.mark.parametrize("kind", ["plr", "iv", "nocf"])
def test_score_zero_at_estimate(rng, kind):
    data = iv_data(rng) if kind == "iv" else plr_data(rng)
    est = {"plr": plr_estimate, "iv": iv_estimate, "nocf": plr_estimate_nocf}[kind]
    res = est(data, DmlConfig(seed=5))
    psi = scores_at_estimate(data, res, kind)
    assert abs(psi.mean()) <= 1e-10 * np.abs(psi).mean()
    assert res.omega_hat >= 0
    assert res.std_err == np.sqrt(res.omega_hat / data.n)


def test_fold_exclusivity(rng, monkeypatch):
    n = 150
    data = iv_data(rng, n=n)
    # a unique id hidden in the last regressor identifies rows
    X = np.column_stack([data.X, np.arange(n) / 1000.0])
    data = validate_dataset(X, data.y, data.d, data.z)
    seen = []

    def spy(Xtr, target, cfg):
        seen.append(np.rint(Xtr[:, -1] * 1000).astype(int))
        return fit_nuisance(Xtr, target, cfg)

    monkeypatch.setattr(dml, "fit_nuisance", spy)
    res = iv_estimate(data, DmlConfig(seed=9), fitter=dml.fit_nuisance)
    assert len(seen) == 15
    for k in range(5):
        held_out = set(np.flatnonzero(res.fold_assignments == k))
        for rows in seen[3 * k: 3 * k + 3]:
            assert held_out.isdisjoint(rows)
            assert len(rows) == n - len(held_out)


def test_seed_determinism(rng):
    data = plr_data(rng)
    raw = validate_dataset(np.array(data.X), np.array(data.y), np.array(data.d))
    a = plr_estimate(data, DmlConfig(seed=77))
    b = plr_estimate(raw, DmlConfig(seed=77))
    assert a == b
    assert np.array_equal(a.fold_assignments, b.fold_assignments)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**31), shift=st.floats(-50, 50))
def test_location_equivariance_with_intercept(seed, shift):
    r = np.random.default_rng(seed)
    n, p = 120, 6
    X = np.column_stack([np.ones(n), r.standard_normal((n, p - 1))])
    d = X[:, 1] + r.standard_normal(n)
    y = 0.5 * d + X[:, 2] + r.standard_normal(n)
    cfg = DmlConfig(k_folds=3, seed=seed, selection=full_support(p))
    for est in (plr_estimate, plr_estimate_nocf):
        a = est(validate_dataset(X, y, d), cfg)
        b = est(validate_dataset(X, y + shift, d), cfg)
        assert b.theta_hat == pytest.approx(a.theta_hat, abs=1e-8)
        assert b.omega_hat == pytest.approx(a.omega_hat, rel=1e-6, abs=1e-10)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**31))
def test_treatment_shift_invariance(seed):
    r = np.random.default_rng(seed)
    data = plr_data(r)
    b = r.standard_normal(data.p)
    shifted = validate_dataset(data.X, data.y, data.d + data.X @ b)
    cfg = DmlConfig(selection=full_support(data.p))
    assert plr_estimate_nocf(shifted, cfg).theta_hat == pytest.approx(
        plr_estimate_nocf(data, cfg).theta_hat, abs=1e-8
    )
