import json
from fractions import Fraction

import numpy as np
import pytest

from freeconv.convolve import cfree_conv, monotone_conv
from freeconv.cumulants import MatrixTuple, mixed_moment_exact
from freeconv.measures import named_measure
from freeconv.rmt import (
    ExperimentConfig,
    ResidualModel,
    default_residual_model,
    freeness_scaling_probe,
    gue,
    haar_orthogonal,
    haar_unitary,
    independence_residuals,
    matrix_from_measure,
    mc_mixed_moment,
    outlier_experiment,
    parse_word,
    rotate,
    run_trials,
    sample_rotation,
    sum_experiment,
    trial_rng,
)

SC = named_measure("semicircle")
BE = named_measure("bernoulli")
D0 = named_measure("dirac", {"theta": 0})


def within(est, target, k=3.0, floor=0.0):
    return abs(est.mean - target) <= max(k * est.stderr, floor)


def mean_se(x):
    x = np.asarray(x)
    return x.mean(), x.std(ddof=1) / np.sqrt(x.size)


def bern_diag(N):
    return np.diag(matrix_from_measure(BE, N, diagonal_only=True))


# -- samplers --


def test_haar_unitary_is_unitary():
    U = haar_unitary(16, trial_rng(1, 0))
    assert np.max(np.abs(U @ U.conj().T - np.eye(16))) < 1e-12


def test_haar_unitary_moments():
    N, T = 8, 10_000
    trU, u11 = [], []
    for t in range(T):
        U = haar_unitary(N, trial_rng(3, t))
        trU.append(np.trace(U) / N)
        u11.append(abs(U[0, 0]) ** 2)
    m, se = mean_se(np.real(trU))
    assert abs(m) < 3 * se
    m, se = mean_se(np.imag(trU))
    assert abs(m) < 3 * se
    m, se = mean_se(u11)
    assert abs(m - 1 / N) < 3 * se


def test_haar_left_invariance():
    # trace polynomials of U and VU have the same law for fixed V
    N, T = 8, 10_000
    V = haar_unitary(N, np.random.default_rng(99))
    stats_u, stats_vu = [], []
    for t in range(T):
        U = haar_unitary(N, trial_rng(5, t))
        W = V @ haar_unitary(N, trial_rng(6, t))
        for store, X in ((stats_u, U), (stats_vu, W)):
            t1 = np.trace(X)
            store.append([abs(t1) ** 2, np.trace(X @ X).real, abs(t1) ** 2 * t1.real, abs(np.trace(X @ X @ X)) ** 2])
    a, b = np.array(stats_u), np.array(stats_vu)
    for j in range(a.shape[1]):
        (ma, sa), (mb, sb) = mean_se(a[:, j]), mean_se(b[:, j])
        assert abs(ma - mb) < 3 * np.hypot(sa, sb) + 1e-12
    # and both agree with the exact values E|tr U|^2 = 1, E|tr U^3|^2 = 3 (N >= 3)
    assert abs(a[:, 0].mean() - 1) < 3 * mean_se(a[:, 0])[1]
    assert abs(a[:, 3].mean() - 3) < 3 * mean_se(a[:, 3])[1]


def test_haar_orthogonal():
    Q = haar_orthogonal(12, trial_rng(0, 0))
    assert np.max(np.abs(Q @ Q.T - np.eye(12))) < 1e-12
    dets = [np.linalg.det(haar_orthogonal(5, trial_rng(0, t), special=True)) for t in range(50)]
    assert np.allclose(dets, 1.0)
    signs = {np.sign(np.linalg.det(haar_orthogonal(5, trial_rng(0, t)))) for t in range(50)}
    assert signs == {-1.0, 1.0}


def test_gue_normalisation():
    N = 400
    H = gue(N, trial_rng(2, 0))
    assert np.allclose(H, H.conj().T)
    off = H[np.triu_indices(N, 1)]
    assert np.mean(np.abs(off) ** 2) * N == pytest.approx(1, abs=0.02)
    ev = np.linalg.eigvalsh(H)
    assert np.mean(ev**2) == pytest.approx(1, abs=0.02)
    assert np.mean(ev**4) == pytest.approx(2, abs=0.1)


def test_sample_rotation_dispatch():
    rng = trial_rng(0, 0)
    assert sample_rotation("haar-unitary", 3, rng).dtype.kind == "c"
    assert sample_rotation("haar-orthogonal", 3, rng).dtype.kind == "f"
    with pytest.raises(ValueError):
        sample_rotation("gue", 3, rng)


def test_rotate_diagonal_shortcut():
    U = haar_unitary(5, trial_rng(0, 1))
    d = np.arange(5.0)
    assert np.allclose(rotate(U, d), U @ np.diag(d) @ U.conj().T)


def test_streams_are_reproducible_and_distinct():
    a = trial_rng(7, 3).standard_normal(4)
    assert np.array_equal(a, trial_rng(7, 3).standard_normal(4))
    assert not np.array_equal(a, trial_rng(7, 4).standard_normal(4))
    assert not np.array_equal(a, trial_rng(8, 3).standard_normal(4))


def test_run_trials_independent_of_threads():
    f = lambda t, rng: (t, float(rng.standard_normal()))
    serial = run_trials(f, 40, 11)
    assert run_trials(f, 40, 11, threads=4) == serial
    assert [r[0] for r in serial] == list(range(40))


def test_matrix_from_measure_examples():
    assert np.array_equal(matrix_from_measure(named_measure("dirac", {"theta": 1.5}), 4), 1.5 * np.eye(4))
    d = matrix_from_measure(BE, 10, diagonal_only=True)
    assert sorted(d.tolist()) == [-1.0] * 5 + [1.0] * 5
    s = matrix_from_measure(SC, 512, diagonal_only=True)
    mo = [np.mean(s**k) for k in (1, 2, 3, 4)]
    assert np.max(np.abs(np.array(mo) - [0, 1, 0, 2])) < 5e-3


# -- configs --


def test_config_validation_and_round_trip():
    cfg = ExperimentConfig.from_dict({"dims": [8, 16, 32], "trials": 3, "seed": 1, "extra": 5})
    assert cfg.params == {"extra": 5}
    again = ExperimentConfig.from_json(json.dumps(cfg.to_dict()))
    assert again == cfg
    for bad in ({"dims": [16, 8], "trials": 1, "seed": 0}, {"dims": [8], "trials": 0, "seed": 0},
                {"dims": [8], "trials": 1, "seed": -1}, {"dims": [8], "trials": 1, "seed": 0, "ensemble": "goe"}):
        with pytest.raises(ValueError):
            ExperimentConfig.from_dict(bad)


def test_parse_word():
    assert parse_word("XYXY") == 2
    assert parse_word("xy") == 1
    for bad in ("XX", "YX", "XYX", ""):
        with pytest.raises(ValueError):
            parse_word(bad)


# -- mixed moments --


def test_mc_word_xy_is_product_of_traces():
    rng = np.random.default_rng(0)
    A = np.diag(rng.standard_normal(6))
    B = np.diag(rng.standard_normal(6))
    est, = mc_mixed_moment(ExperimentConfig(dims=[6], trials=2000, seed=1, word="XY"), lambda N: A, lambda N: B)
    assert within(est, np.trace(A) * np.trace(B) / 36)


def test_mc_worked_example_n2():
    A, B = np.diag([1.0, 0.0]), np.diag([1.0, -1.0])
    est, = mc_mixed_moment(ExperimentConfig(dims=[2], trials=100_000, seed=4, word="XYXY"), lambda N: A, lambda N: B)
    assert within(est, 1 / 6)


def test_mc_matches_exact_weingarten():
    rng = np.random.default_rng(3)
    A = [np.diag(rng.integers(-2, 3, 4)) for _ in range(3)]
    B = [np.diag(rng.integers(-2, 3, 4)) for _ in range(3)]
    exact = mixed_moment_exact(MatrixTuple(A), MatrixTuple(B))
    est, = mc_mixed_moment(ExperimentConfig(dims=[4], trials=20_000, seed=2, word="XYXYXY"), lambda N: A, lambda N: B)
    assert within(est, float(exact))


def test_mc_concentration():
    cfg = ExperimentConfig(dims=[16, 64], trials=400, seed=3, word="XYXY")
    e16, e64 = mc_mixed_moment(cfg, bern_diag, bern_diag)
    var_ratio = (e16.stderr / e64.stderr) ** 2
    # variance ~ N^-2: a factor 16 from N = 16 to N = 64
    assert 6 < var_ratio < 40


def test_scaling_probe_unitary():
    cfg = ExperimentConfig(dims=[8, 16, 32, 64], trials=1, seed=0)
    rep = freeness_scaling_probe(cfg, bern_diag, bern_diag)
    assert rep.method == "exact"
    assert rep.exponent == pytest.approx(-2, abs=0.3)
    scaled = [v * N**2 for v, N in zip(rep.values, rep.dims)]
    assert max(scaled) / min(scaled) <= 1.5
    # exact values at N = 8: Wg-based result is rational
    exact = mixed_moment_exact(MatrixTuple.repeat(bern_diag(8).astype(int), 2),
                               MatrixTuple.repeat(bern_diag(8).astype(int), 2))
    assert isinstance(exact, Fraction) and float(abs(exact)) == pytest.approx(rep.values[0])


def test_scaling_probe_constant_letter():
    cfg = ExperimentConfig(dims=[8, 16, 32], trials=1, seed=0)
    rep = freeness_scaling_probe(cfg, lambda N: np.eye(N, dtype=int), bern_diag)
    assert rep.values == [0.0, 0.0, 0.0] and rep.exponent is None


def test_scaling_probe_needs_three_dims():
    with pytest.raises(ValueError):
        freeness_scaling_probe(ExperimentConfig(dims=[8, 16], trials=1, seed=0), bern_diag, bern_diag)


def test_scaling_probe_orthogonal_small():
    cfg = ExperimentConfig(dims=[16, 32, 64], trials=300, seed=5, ensemble="haar-orthogonal")
    rep = freeness_scaling_probe(cfg, bern_diag, bern_diag)
    assert rep.method == "monte-carlo" and len(rep.estimates) == 3
    assert all(s > 0 for s in rep.stderr)
    # at these sizes the O(1/N) bias dominates the noise
    assert rep.values[0] > 3 * rep.stderr[0]


# -- residuals --


def test_type_b_residuals_bounded():
    model = lambda N: default_residual_model("type-B", N)
    a = independence_residuals("type-B", model, 64, 30, seed=1).summary()["abs_residual_mean"]
    b = independence_residuals("type-B", model, 256, 30, seed=1).summary()["abs_residual_mean"]
    assert b <= 2 * a


def test_cfree_b_only_word_matches_trace():
    # phi and tau agree on the B side: the residual shrinks with N
    res = []
    for N in (64, 256):
        m = default_residual_model("c-free", N, word=["b2"])
        res.append(independence_residuals("c-free", m, N, 30, seed=2).summary()["abs_residual_mean"])
    assert res[1] < res[0]
    assert res[1] < 0.1


@pytest.mark.parametrize("kind", ["c-free", "monotone"])
def test_vector_state_residuals_decay(kind):
    res = [independence_residuals(kind, lambda N: default_residual_model(kind, N), N, 30, seed=3).summary()
           for N in (64, 256)]
    assert res[1]["abs_residual_mean"] < res[0]["abs_residual_mean"]


def test_cyclic_monotone_scaled_residuals_do_not_grow():
    res = [independence_residuals("cyclic-monotone", lambda N: default_residual_model("cyclic-monotone", N), N, 30,
                                  seed=4).summary() for N in (64, 256)]
    assert res[0]["scaled_by_N"]
    assert res[1]["abs_residual_mean"] <= 2 * res[0]["abs_residual_mean"]


def test_residual_model_validation():
    N = 8
    m = default_residual_model("type-B", N)
    with pytest.raises(ValueError):
        independence_residuals("type-B", ResidualModel(m.a, m.b, ["b", "a", "a"], None, ("p",)), N, 2, 0)
    with pytest.raises(ValueError):
        # inner letter b2 is not centred
        independence_residuals("type-B", ResidualModel(m.a, m.b, ["b", "p", "b2", "a", "b"], None, ("p",)), N, 2, 0)
    with pytest.raises(ValueError):
        independence_residuals("monotone", ResidualModel(m.a, m.b, ["b2", "q", "b2"], None, ()), N, 2, 0)
    with pytest.raises(ValueError):
        independence_residuals("bogus", m, N, 2, 0)
    with pytest.raises(KeyError):
        independence_residuals("type-B", ResidualModel(m.a, m.b, ["b", "zz", "b"], None, ("zz",)), N, 2, 0)


# -- sums and outliers --


def test_sum_zero_a_gives_mu2_moments():
    r = sum_experiment(D0, SC, 300, 8, seed=1, v="last", kmax=4)
    target = SC.moments(4)
    for k in range(4):
        assert abs(r.vesd_mean[k] - target[k]) <= max(3 * r.vesd_stderr[k], 0.05)


def test_sum_spiked_vesd_is_monotone_convolution():
    r = sum_experiment(D0, SC, 400, 8, seed=2, v="last", spike=2.0, kmax=3)
    target = monotone_conv(named_measure("dirac", {"theta": 2}), SC, grid=(-3, 4, 1401)).moments(3)
    for k in range(3):
        assert abs(r.vesd_mean[k] - target[k]) <= max(3 * r.vesd_stderr[k], 0.05)


def test_sum_eigenspace_vesd_is_cfree():
    r = sum_experiment(BE, SC, 300, 6, seed=3, v="eigenspace:1", kmax=4)
    target = cfree_conv(named_measure("dirac", {"theta": 1}), SC, BE, SC).moments(4)
    for k in range(4):
        assert abs(r.vesd_mean[k] - target[k]) <= max(3 * r.vesd_stderr[k], 0.05)
    # and the ESD follows the free convolution: m2 = 2, m4 = 7
    assert abs(r.esd_mean[1] - 2) <= max(3 * r.esd_stderr[1], 0.05)
    assert abs(r.esd_mean[3] - 7) <= max(3 * r.esd_stderr[3], 0.1)


def test_vector_specs():
    from freeconv.rmt.experiments import _resolve_v

    d = np.array([1.0, -1.0, 1.0, -1.0])
    assert _resolve_v("eigenspace:1", d).shape == (4, 2)
    assert np.array_equal(_resolve_v("eigenvector:1", d)[:, 0], [0, 0, 1, 0])
    assert np.allclose(_resolve_v("uniform", d), 0.5)
    assert np.array_equal(_resolve_v("basis:1", d)[:, 0], [0, 1, 0, 0])
    for bad in ("eigenvector:3", "nope", [1, 2]):
        with pytest.raises(ValueError):
            _resolve_v(bad, d)


def test_outlier_experiment_gue_small():
    rep = outlier_experiment(2.0, D0, "gue", 300, 6, seed=4)
    assert rep.predicted == [(pytest.approx(2.5), pytest.approx(0.75))]
    assert np.all(np.abs(rep.observed[:, 0] - 2.5) < 0.15)
    assert np.all(np.abs(rep.overlaps[:, 0] - 0.75) < 0.15)
    assert np.all(rep.n_outside == 1)


def test_outlier_experiment_subcritical():
    rep = outlier_experiment(0.5, D0, "gue", 300, 4, seed=5)
    assert rep.predicted == []
    assert np.all(rep.top < 2.05 + 0.1)


def test_outlier_experiment_bernoulli_planted():
    rep = outlier_experiment(3.0, BE, SC, 300, 4, seed=6)
    (rho, _), = rep.predicted
    assert rho == pytest.approx(3.375, abs=1e-8)
    assert np.all(np.abs(rep.observed[:, 0] - rho) < 0.1)


def test_gue_ensemble_requires_gue_b():
    with pytest.raises(ValueError):
        sum_experiment(D0, SC, 10, 1, seed=0, ensemble="gue")
