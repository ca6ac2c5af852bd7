import numpy as np
import pytest

from nucdiff.errors import ShapeError
from nucdiff.proxops import nuclear_norm
from nucdiff.rpca import (
    RpcaConfig,
    rpca_log_posterior,
    rpca_objective,
    rpca_solve,
)
from nucdiff.tensors import CasoratiMatrix


def planted(seed, n=400, p=50, rank=2, density=0.05, amp=5.0):
    r = np.random.default_rng(seed)
    L = r.standard_normal((n, rank)) @ r.standard_normal((rank, p))
    X = (r.random((n, p)) < density) * (amp * r.standard_normal((n, p)))
    return L, X, L + X


def test_planted_recovery_ten_seeds():
    cfg = RpcaConfig(rel_tol=1e-8, max_iters=2000)
    for seed in range(10):
        L0, X0, Y = planted(seed)
        dec = rpca_solve(Y, cfg)
        rel = np.linalg.norm(dec.L.values - L0) / np.linalg.norm(L0)
        assert rel <= 1e-2, f"seed {seed}: relative error {rel}"
        assert dec.converged


def test_objective_monotone():
    _, _, Y = planted(3)
    dec = rpca_solve(Y)
    tr = np.asarray(dec.objective_trace)
    assert len(tr) > 1
    assert np.all(np.diff(tr) <= 1e-9)


def test_zero_input_zero_output():
    dec = rpca_solve(np.zeros((20, 4)))
    assert np.all(dec.L.values == 0)
    assert np.all(dec.X.values == 0)
    assert dec.converged


def test_objective_value_formula(rng):
    y = rng.standard_normal((10, 5))
    l = rng.standard_normal((10, 5))
    x = rng.standard_normal((10, 5))
    cfg = RpcaConfig(lam=0.2, mu=3.0)
    expect = (nuclear_norm(l) + 0.2 * np.abs(x).sum()
              + 1.5 * np.linalg.norm(y - l - x) ** 2)
    assert abs(rpca_objective(y, l, x, cfg) - expect) < 1e-10


def test_log_posterior_is_negative_weighted_objective(rng):
    y = rng.standard_normal((8, 4))
    l = rng.standard_normal((8, 4))
    x = rng.standard_normal((8, 4))
    cfg = RpcaConfig(lam=0.3, mu=2.0)
    gamma = 1.7
    expect = -(gamma * nuclear_norm(l) + 0.3 * np.abs(x).sum()
               + 1.0 * np.linalg.norm(y - l - x) ** 2)
    assert abs(rpca_log_posterior(y, l, x, cfg, gamma) - expect) < 1e-10


def test_lam_default_resolution():
    cfg = RpcaConfig()
    assert abs(cfg.resolve_lam(400, 50) - 1.0 / np.sqrt(400)) < 1e-15


def test_single_frame_warns(rng):
    y = rng.standard_normal((30, 1))
    with pytest.warns(UserWarning):
        rpca_solve(y)


def test_solver_accepts_casorati(rng):
    y = rng.standard_normal((12, 3))
    dec = rpca_solve(CasoratiMatrix(y, 3, 4))
    assert dec.L.values.shape == (12, 3)
    assert dec.L.frame_height == 3


def test_shape_mismatch_rejected(rng):
    with pytest.raises(ShapeError):
        rpca_objective(np.zeros((3, 3)), np.zeros((3, 3)), np.zeros((2, 3)),
                       RpcaConfig(lam=0.1))


def test_config_validation():
    with pytest.raises(ValueError):
        RpcaConfig(lam=-1.0)
    with pytest.raises(ValueError):
        RpcaConfig(mu=0.0)
    with pytest.raises(ValueError):
        RpcaConfig(rel_tol=0.0)


def test_decreasing_objective_against_perturbation(rng):
    # the solution should beat nearby candidate decompositions
    _, _, Y = planted(5, n=60, p=12)
    dec = rpca_solve(Y)
    cfg = RpcaConfig()
    cfg_r = RpcaConfig(lam=cfg.resolve_lam(60, 12))
    base = rpca_objective(Y, dec.L.values, dec.X.values, cfg_r)
    for _ in range(10):
        dl = 0.05 * rng.standard_normal((60, 12))
        val = rpca_objective(Y, dec.L.values + dl, dec.X.values - dl, cfg_r)
        assert val >= base - 1e-6
