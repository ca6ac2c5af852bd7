import numpy as np
import pytest

from nucdiff.diffusion import make_schedule
from nucdiff.errors import NumericalError, ShapeError
from nucdiff.proxops import nuclear_norm, nuclear_subgradient, svt
from nucdiff.sampler import (
    NucDiffConfig,
    background_update,
    dps_sample,
    nuclear_diffusion_sample,
    stacked_score,
)
from nucdiff.score_models import GaussianPrior, ScoreModel
from nucdiff.synth import SynthSpec, foreground_prior, generate
from nucdiff.tensors import CasoratiMatrix

T200 = make_schedule("variance-preserving-linear", 200)


def small_problem(seed):
    prior = GaussianPrior(np.zeros(64), 0.5)
    y = np.random.default_rng(seed).standard_normal((64, 7))
    return prior, y


# ---------------------------------------------------------------------------
# guidance-weight grid: stronger mu must track the measurement more closely


@pytest.mark.parametrize("mode", ["subgradient", "proximal"])
def test_residual_decreases_along_mu_grid(mode):
    for seed in range(6):
        prior, y = small_problem(seed)
        resid = []
        for mu in (0.5, 1.0, 2.0, 4.0, 8.0):
            cfg = NucDiffConfig(gamma=1.0, mu=mu, steps=25, schedule=T200,
                                background_update=mode,
                                warm_start_fraction=0.0, seed=1000 + seed)
            dec, _ = nuclear_diffusion_sample(y, prior, cfg)
            resid.append(np.mean((y - dec.L.values - dec.X.values) ** 2))
        assert all(a > b for a, b in zip(resid, resid[1:])), \
            f"seed {seed} mode {mode}: {resid}"


def test_dominant_likelihood_recovers_measurement():
    # Prior centered on the measurement itself with tiny variance, heavy
    # guidance, background clamped at zero by an enormous penalty: every
    # frame must land on the shared measurement column.
    worst = 0.0
    for s in range(4):
        m = np.random.default_rng(100 + s).standard_normal((64, 1))
        y = np.tile(m, (1, 7))
        prior = GaussianPrior(m.ravel(), np.sqrt(0.05))
        cfg = NucDiffConfig(gamma=1e6, mu=8.0, steps=50, schedule=T200,
                            background_update="proximal",
                            warm_start_fraction=0.0, seed=2000 + s)
        dec, _ = nuclear_diffusion_sample(y, prior, cfg)
        assert np.all(dec.L.values == 0.0)
        rel = np.linalg.norm(dec.X.values - y) / np.linalg.norm(y)
        worst = max(worst, rel)
    assert worst <= 0.05, worst


def test_huge_gamma_reduces_to_plain_posterior_sampling():
    # svt threshold eta * gamma dwarfs any attainable singular value, so L
    # never leaves zero and the chain must match the L-free path bitwise.
    spec = SynthSpec(seed=0, motion_level=0.1)
    inst = generate(spec)
    prior = foreground_prior(spec)
    cfg = NucDiffConfig(gamma=1e12, mu=2.0, steps=200, schedule=T200,
                        background_step_size=0.25,
                        background_update="proximal",
                        warm_start_fraction=0.5, seed=1000)
    dec, _ = nuclear_diffusion_sample(inst.observed, prior, cfg)
    plain = dps_sample(inst.observed, prior, cfg)
    assert np.all(dec.L.values == 0.0)
    np.testing.assert_array_equal(dec.X.values, plain.values)
    assert plain.frame_height == inst.observed.frame_height


# ---------------------------------------------------------------------------
# chain mechanics


class _Affine(ScoreModel):
    """Deterministic per-frame model for structural tests."""

    def predict_noise(self, x, tau, sched):
        return 0.1 * np.asarray(x) + tau / sched.total_steps


def test_stacked_score_is_per_column():
    m = np.random.default_rng(3).standard_normal((5, 4))
    out = stacked_score(m, 7, T200, _Affine())
    for t in range(4):
        np.testing.assert_array_equal(out[:, t],
                                      _Affine().predict_noise(m[:, t], 7, T200))


def test_stacked_score_rejects_tau_zero():
    with pytest.raises(ValueError):
        stacked_score(np.zeros((4, 2)), 0, T200, _Affine())


def test_stacked_score_names_offending_frame():
    class Bad(ScoreModel):
        def predict_noise(self, x, tau, sched):
            raise ValueError("model failure")

    with pytest.raises(ValueError, match="frame 0"):
        stacked_score(np.zeros((4, 2)), 5, T200, Bad())


def test_background_update_subgradient_formula(rng):
    l = rng.standard_normal((6, 4))
    g = rng.standard_normal((6, 4))
    cfg = NucDiffConfig(gamma=0.7, mu=2.0, background_step_size=0.3,
                        background_update="subgradient")
    got = background_update(l, g, cfg)
    expect = l - 0.3 * (g + 0.7 * nuclear_subgradient(l))
    np.testing.assert_allclose(got, expect, atol=1e-12)


def test_background_update_proximal_formula(rng):
    l = rng.standard_normal((6, 4))
    g = rng.standard_normal((6, 4))
    cfg = NucDiffConfig(gamma=0.7, mu=2.0, background_step_size=0.3,
                        background_update="proximal")
    np.testing.assert_allclose(background_update(l, g, cfg),
                               svt(l - 0.3 * g, 0.3 * 0.7), atol=1e-12)


def test_background_update_default_step_is_reciprocal_mu(rng):
    l = rng.standard_normal((5, 3))
    g = rng.standard_normal((5, 3))
    cfg = NucDiffConfig(gamma=1.0, mu=4.0, background_update="subgradient")
    assert cfg.resolve_eta() == 0.25
    np.testing.assert_allclose(
        background_update(l, g, cfg),
        l - 0.25 * (g + nuclear_subgradient(l)), atol=1e-12)


def test_background_update_shape_mismatch():
    cfg = NucDiffConfig()
    with pytest.raises(ShapeError):
        background_update(np.zeros((3, 2)), np.zeros((2, 3)), cfg)


def test_trace_binds_penalty_to_entering_background():
    prior, y = small_problem(0)
    cfg = NucDiffConfig(gamma=1.3, mu=2.0, steps=12, schedule=T200, seed=5)
    dec, trace = nuclear_diffusion_sample(y, prior, cfg,
                                          record_backgrounds=True)
    assert len(trace.backgrounds) == len(trace)
    assert np.all(trace.backgrounds[0] == 0.0)
    for snap, pen, rank in zip(trace.backgrounds, trace.low_rank_penalty,
                               trace.rank):
        assert abs(pen - 1.3 * nuclear_norm(snap)) < 1e-8
        assert rank == np.linalg.matrix_rank(snap)
    np.testing.assert_allclose(
        dec.objective_trace,
        [e + p for e, p in zip(trace.measurement_error,
                               trace.low_rank_penalty)], atol=0)


def test_trace_covers_every_executed_level():
    prior, y = small_problem(1)
    cfg = NucDiffConfig(steps=25, schedule=T200, seed=2)
    _, trace = nuclear_diffusion_sample(y, prior, cfg)
    grid = np.unique(np.round(np.linspace(0, 200, 26)).astype(int))[::-1]
    expected = [int(t) for t in grid if t >= 1]
    assert trace.taus == expected
    assert len(trace) == 25


def test_warm_start_truncates_level_grid():
    prior, y = small_problem(2)
    cfg = NucDiffConfig(steps=25, schedule=T200, warm_start_fraction=0.5,
                        seed=3)
    _, trace = nuclear_diffusion_sample(y, prior, cfg)
    assert trace.taus[0] == 100        # ceil(0.5 * 200)
    assert all(1 <= t <= 100 for t in trace.taus)
    assert trace.taus == sorted(trace.taus, reverse=True)


def test_tiny_warm_start_still_executes_one_level():
    prior, y = small_problem(2)
    cfg = NucDiffConfig(steps=10, schedule=T200, warm_start_fraction=1e-9,
                        seed=3)
    _, trace = nuclear_diffusion_sample(y, prior, cfg)
    assert trace.taus == [1]


def test_single_step_chain():
    prior, y = small_problem(4)
    cfg = NucDiffConfig(steps=1, schedule=T200, seed=9)
    dec, trace = nuclear_diffusion_sample(y, prior, cfg)
    assert trace.taus == [200]
    assert np.all(np.isfinite(dec.X.values))
    assert dec.iterations == 1 and dec.converged


def test_same_seed_bitwise_identical():
    prior, y = small_problem(5)
    cfg = NucDiffConfig(steps=20, schedule=T200, warm_start_fraction=0.25,
                        seed=77)
    a, ta = nuclear_diffusion_sample(y, prior, cfg)
    b, tb = nuclear_diffusion_sample(y, prior, cfg)
    np.testing.assert_array_equal(a.L.values, b.L.values)
    np.testing.assert_array_equal(a.X.values, b.X.values)
    assert ta.measurement_error == tb.measurement_error
    c, _ = nuclear_diffusion_sample(
        y, prior, NucDiffConfig(steps=20, schedule=T200,
                                warm_start_fraction=0.25, seed=78))
    assert not np.array_equal(a.X.values, c.X.values)


def test_literal_indexing_changes_the_path():
    prior, y = small_problem(6)
    base = dict(steps=15, schedule=T200, seed=11)
    dec_d, _ = nuclear_diffusion_sample(y, prior, NucDiffConfig(**base))
    dec_l, _ = nuclear_diffusion_sample(
        y, prior, NucDiffConfig(literal_paper_indexing=True, **base))
    assert np.all(np.isfinite(dec_l.X.values))
    assert not np.array_equal(dec_d.X.values, dec_l.X.values)


# ---------------------------------------------------------------------------
# failure modes


class _NanModel(ScoreModel):
    def predict_noise(self, x, tau, sched):
        return np.full(np.asarray(x).size, np.nan)


def test_nan_iterate_reports_step():
    y = np.random.default_rng(0).standard_normal((8, 3))
    cfg = NucDiffConfig(steps=5, schedule=T200, seed=1)
    with pytest.raises(NumericalError) as exc:
        nuclear_diffusion_sample(y, _NanModel(), cfg)
    assert exc.value.step == 0
    assert "tau=" in str(exc.value)


def test_nonfinite_observation_rejected():
    prior, y = small_problem(0)
    y[3, 2] = np.inf
    with pytest.raises(ValueError):
        nuclear_diffusion_sample(y, prior, NucDiffConfig(schedule=T200))


def test_model_frame_size_mismatch():
    prior = GaussianPrior(np.zeros(32), 0.5)
    y = np.zeros((64, 4))
    with pytest.raises(ShapeError):
        nuclear_diffusion_sample(y, prior, NucDiffConfig(schedule=T200))


def test_model_output_size_mismatch():
    class Wide(ScoreModel):
        def predict_noise(self, x, tau, sched):
            return np.zeros(np.asarray(x).size + 1)

    y = np.zeros((8, 2))
    with pytest.raises(ShapeError):
        nuclear_diffusion_sample(y, Wide(), NucDiffConfig(schedule=T200))


def test_steps_beyond_schedule_rejected():
    prior, y = small_problem(0)
    with pytest.raises(ValueError):
        nuclear_diffusion_sample(
            y, prior, NucDiffConfig(steps=201, schedule=T200))


@pytest.mark.parametrize("bad", [
    dict(gamma=0.0),
    dict(mu=-1.0),
    dict(steps=0),
    dict(background_step_size=0.0),
    dict(background_update="newton"),
    dict(warm_start_fraction=1.5),
])
def test_config_validation(bad):
    with pytest.raises(ValueError):
        NucDiffConfig(**bad)


def test_dps_on_plain_matrix_wraps_result():
    y = np.random.default_rng(12).standard_normal((16, 3))
    out = dps_sample(y, GaussianPrior(np.zeros(16), 1.0),
                     NucDiffConfig(steps=10, schedule=T200, seed=4))
    assert isinstance(out, CasoratiMatrix)
    assert out.frame_height == 16 and out.frame_width == 1
    assert np.all(np.isfinite(out.values))
