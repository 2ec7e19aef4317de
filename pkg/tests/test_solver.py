import json
import math
import pathlib
import sys

import numpy as np
import pytest
from scipy.optimize import minimize

from omniplace.errors import SingularityError, ValidationError
from omniplace.model import (
    FeatureMatrix,
    Hyperparams,
    ModalityLayout,
    ScenarioLabels,
    WeightMatrix,
    objective,
    objective_values,
)
from omniplace.solver import (
    SolverConfig,
    group_prox,
    group_prox_values,
    smooth_gradient,
    smoothed_objective,
    solve,
)

from conftest import random_problem, two_by_two

HERE = pathlib.Path(__file__).resolve().parent
sys.path.insert(0, str(HERE / "oracles"))
from subgradient import make_instance  # noqa: E402

ORACLE = json.loads((HERE / "data" / "solver_oracle.json").read_text())["instances"]


def oracle_problem(seed):
    inst = make_instance(seed)
    layout = two_by_two(inst["dims"])
    n, c = inst["B"].shape
    A = FeatureMatrix(layout, inst["A"], [str(j) for j in range(n)])
    B = ScenarioLabels(inst["B"], [f"c{j}" for j in range(c)])
    return A, B, Hyperparams(inst["lambda1"], inst["lambda2"])


@pytest.mark.parametrize("record", ORACLE, ids=lambda r: f"seed{r['seed']}")
@pytest.mark.parametrize("backend", ["irls", "prox_grad"])
def test_matches_subgradient_oracle(record, backend):
    A, B, h = oracle_problem(record["seed"])
    result = solve(A, B, h, SolverConfig(backend=backend))
    f = objective(A, B, result.W, h)
    assert abs(f - record["objective"]) <= 1e-4 * abs(record["objective"])


@pytest.mark.parametrize("seed", range(25))
def test_backends_agree(seed):
    A, B, h = oracle_problem(seed)
    f_irls = objective(A, B, solve(A, B, h).W, h)
    f_fista = objective(A, B, solve(A, B, h, SolverConfig(backend="prox_grad")).W, h)
    assert abs(f_irls - f_fista) <= 1e-5 * abs(f_fista)


@pytest.mark.parametrize("seed", range(10))
def test_gradient_matches_central_differences(seed):
    A, B = random_problem(seed, dims=((2, 2), (1, 2)), n=7, c=2)
    rng = np.random.default_rng(100 + seed)
    W = rng.standard_normal((A.layout.total_dim, 2))
    g = smooth_gradient(A, B, WeightMatrix(A.layout, W), Hyperparams())
    loss = lambda V: objective_values(A.layout, A.values, B.values, V, Hyperparams(0.0, 0.0))
    fd = np.zeros_like(W)
    step = 1e-6
    for idx in np.ndindex(*W.shape):
        E = np.zeros_like(W)
        E[idx] = step
        fd[idx] = (loss(W + E) - loss(W - E)) / (2 * step)
    assert np.linalg.norm(g - fd) <= 1e-5 * np.linalg.norm(g)


def test_gradient_special_cases():
    layout = ModalityLayout.from_spec([("s", [("f", 3)])])
    A = FeatureMatrix(layout, np.eye(3), ["a", "b", "c"])
    B = ScenarioLabels(np.array([[1.0, 0], [0, 1], [1, 0]]), ["x", "y"])
    # A = I: gradient is W - B
    W = np.arange(6.0).reshape(3, 2)
    np.testing.assert_array_equal(smooth_gradient(A, B, WeightMatrix(layout, W), Hyperparams()), W - B.values)
    exact = WeightMatrix(layout, B.values)
    np.testing.assert_allclose(smooth_gradient(A, B, exact, Hyperparams()), 0.0, atol=1e-12)
    with pytest.raises(ValidationError):
        smooth_gradient(A, B, exact, Hyperparams(loss_variant="unsquared"))


def test_unregularized_exact_fit():
    rng = np.random.default_rng(3)
    layout = two_by_two(((2, 2), (1, 1)))
    A = FeatureMatrix(layout, rng.standard_normal((6, 6)), list("abcdef"))
    B = ScenarioLabels.from_assignments([0, 1, 0, 1, 2, 2], ["x", "y", "z"])
    W = solve(A, B, Hyperparams(0.0, 0.0)).W.values
    r = A.values.T @ W - B.values
    assert np.linalg.norm(r) <= 1e-6 * np.linalg.norm(B.values)


def test_rank_deficient_unregularized_raises():
    layout = two_by_two(((1, 1), (1, 1)))
    rng = np.random.default_rng(0)
    X = rng.standard_normal((4, 6))
    X[3] = X[2]
    A = FeatureMatrix(layout, X, list("abcdef"))
    B = ScenarioLabels.from_assignments([0, 1, 0, 1, 0, 1], ["x", "y"])
    with pytest.raises(SingularityError):
        solve(A, B, Hyperparams(0.0, 0.0))
    wide = FeatureMatrix(two_by_two(((2, 2), (2, 2))), rng.standard_normal((8, 6)), list("abcdef"))
    with pytest.raises(SingularityError):
        solve(wide, B, Hyperparams(0.0, 0.0))


def test_large_penalties_give_zero():
    A, B = random_problem(5)
    bound = float(np.max(np.linalg.norm(A.values @ B.values, axis=1))) * 10
    for backend in ("irls", "prox_grad"):
        W = solve(A, B, Hyperparams(bound, bound), SolverConfig(backend=backend)).W.values
        assert np.max(np.abs(W)) <= 1e-6


@pytest.mark.parametrize("seed", range(5))
def test_irls_trace_is_monotone(seed):
    A, B, h = oracle_problem(seed)
    cfg = SolverConfig()
    result = solve(A, B, h, cfg)
    trace = np.array(result.objective_trace)
    assert result.converged
    assert np.all(np.diff(trace) <= 1e-12 * (1 + np.abs(trace[:-1])))
    assert trace[-1] == pytest.approx(
        smoothed_objective(A.layout, A.values, B.values, result.W.values, h, cfg.epsilon), rel=1e-12
    )


def test_column_permutation_equivariance():
    A, B = random_problem(11, n=15)
    perm = np.random.default_rng(0).permutation(15)
    A2 = A.select(perm)
    B2 = ScenarioLabels(B.values[perm], B.scenario_names)
    W1 = solve(A, B).W.values
    W2 = solve(A2, B2).W.values
    np.testing.assert_allclose(W1, W2, rtol=1e-6, atol=1e-9)


def test_noise_sensor_is_pruned():
    rng = np.random.default_rng(7)
    n, c = 60, 3
    labels = np.arange(n) % c
    B = ScenarioLabels.from_assignments(labels, ["a", "b", "c"])
    signal = np.vstack([np.eye(c)[labels].T, np.eye(c)[labels].T[:1]]) + 0.05 * rng.standard_normal((c + 1, n))
    noise = rng.standard_normal((4, n))
    layout = two_by_two(((2, 2), (2, 2)))
    A = FeatureMatrix(layout, np.vstack([signal, noise]), [str(j) for j in range(n)])
    W = solve(A, B, Hyperparams(1.0, 2.0)).W.values
    noise_norm = np.linalg.norm(W[layout.sensor_slice(1)])
    signal_norm = np.linalg.norm(W[layout.sensor_slice(0)])
    assert noise_norm <= 1e-6 * signal_norm


def test_unsquared_loss_is_a_local_minimum():
    A, B = random_problem(2, n=10, c=2)
    h = Hyperparams(0.2, 0.1, "unsquared")
    W = solve(A, B, h, SolverConfig(tol=1e-12, max_iters=5000)).W.values
    f = lambda v: objective_values(A.layout, A.values, B.values, v.reshape(W.shape), h)
    polished = minimize(f, W.ravel(), method="Powell", options={"xtol": 1e-10, "ftol": 1e-12})
    assert f(W.ravel()) <= polished.fun + 1e-6 * abs(polished.fun)
    with pytest.raises(ValidationError):
        solve(A, B, h, SolverConfig(backend="prox_grad"))


# --------------------------------------------------------------------------
# proximal map


def test_prox_single_block_halves():
    layout = ModalityLayout.from_spec([("s", [("f", 2)])])
    v = np.array([[1.2], [1.6]])  # norm 2
    out = group_prox(WeightMatrix(layout, v), 1.0, Hyperparams(1.0, 0.0)).values
    np.testing.assert_allclose(out, v / 2, rtol=1e-15)
    # the closed form is the minimizer of 0.5||x - v||^2 + ||x||
    f = lambda x: 0.5 * np.sum((x - v.ravel()) ** 2) + np.linalg.norm(x)
    ref = minimize(f, np.ones(2), method="Nelder-Mead", options={"xatol": 1e-10, "fatol": 1e-14})
    np.testing.assert_allclose(out.ravel(), ref.x, atol=1e-6)


def test_prox_full_shrinkage_and_identity(rng):
    layout = two_by_two()
    V = rng.standard_normal((layout.total_dim, 2))
    big = max(np.linalg.norm(V[s]) for s in layout.feature_slices())
    np.testing.assert_array_equal(group_prox_values(layout, V, 1.0, Hyperparams(big, 0.0)), 0.0)
    np.testing.assert_array_equal(group_prox_values(layout, V, 1.0, Hyperparams(0.0, 0.0)), V)
    with pytest.raises(ValidationError):
        group_prox(WeightMatrix(layout, V), 0.0, Hyperparams())


def test_prox_tree_matches_numerical_minimizer(rng):
    layout = two_by_two(((1, 2), (2, 1)))
    V = rng.standard_normal((layout.total_dim, 1))
    h = Hyperparams(0.3, 0.4)

    def f(x):
        x = x.reshape(V.shape)
        return 0.5 * np.sum((x - V) ** 2) + objective_values(
            layout, np.zeros((layout.total_dim, 1)), np.zeros((1, 1)), x, h
        )

    out = group_prox_values(layout, V, 1.0, h)
    ref = minimize(f, V.ravel(), method="Powell", options={"xtol": 1e-12, "ftol": 1e-15})
    assert f(out.ravel()) <= ref.fun + 1e-10


def test_solver_config_validation():
    for bad in ({"max_iters": 0}, {"tol": 0.0}, {"epsilon": -1.0}, {"backend": "admm"}):
        with pytest.raises(ValidationError):
            SolverConfig(**bad)


def test_solver_rejects_mismatched_rows():
    A, B = random_problem(0, n=10)
    B_short = ScenarioLabels(B.values[:9], B.scenario_names)
    with pytest.raises(ValidationError):
        solve(A, B_short)


def test_lambda_defaults_reach_objective():
    A, B = random_problem(4)
    result = solve(A, B)
    assert math.isfinite(objective(A, B, result.W, Hyperparams()))
    assert result.iterations >= 1
