import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from preavg.errors import ConfigError
from preavg.estimators import SamplingGrid
from preavg.kernels import psi_matrices
from preavg.simulate import (
    CompoundPoissonJumps,
    ConstantVol,
    FixedJumps,
    GaussianNoise,
    HestonVol,
    MixtureNoise,
    ModelSpec,
    PiecewiseVol,
    RoundingNoise,
    SimTruth,
    noise_moments,
    replication_seed,
    sample_jump_limit,
    simulate_path,
)

GRID = SamplingGrid.from_horizon(1.0, 1600)


def test_same_seed_same_path():
    spec = ModelSpec(HestonVol(0.04, 5.0, 0.04, 0.5, -0.5), noise=GaussianNoise(0.005),
                     jumps=CompoundPoissonJumps(3.0, 0.1, 0.02))
    a, ta = simulate_path(spec, GRID, 11)
    b, tb = simulate_path(spec, GRID, 11)
    c, _ = simulate_path(spec, GRID, 12)
    assert np.array_equal(a.values, b.values)
    assert ta.jumps == tb.jumps
    assert not np.array_equal(a.values, c.values)


def test_replication_seeds_are_distinct_streams():
    x = np.random.default_rng(replication_seed(7, 0, 1)).random(4)
    y = np.random.default_rng(replication_seed(7, 1, 0)).random(4)
    z = np.random.default_rng(replication_seed(7, 0, 1)).random(4)
    assert np.array_equal(x, z)
    assert not np.array_equal(x, y)


def test_zero_model_is_flat():
    s, truth = simulate_path(ModelSpec(ConstantVol(0.0), x0=1.5), GRID, 0)
    assert np.all(s.values == 1.5)
    assert truth.quadratic_variation() == 0.0


def test_constant_vol_truths():
    s, truth = simulate_path(ModelSpec(ConstantVol(0.3), substeps=4), GRID, 1)
    assert truth.integrated_power(2) == pytest.approx(0.09)
    assert truth.integrated_power(4, 0.5) == pytest.approx(0.5 * 0.3**4)
    assert truth.integrated_power(3) == pytest.approx(0.027)
    assert np.var(np.diff(s.values)) == pytest.approx(0.09 / 1600, rel=0.15)


def test_piecewise_vol():
    spec = ModelSpec(PiecewiseVol((0.5,), (0.1, 0.3)))
    _, truth = simulate_path(spec, GRID, 2)
    assert truth.integrated_power(2) == pytest.approx(0.5 * 0.01 + 0.5 * 0.09)


def test_heston_stays_nonnegative():
    spec = ModelSpec(HestonVol(0.01, 1.0, 0.01, 1.5, 0.0), substeps=2)
    _, truth = simulate_path(spec, GRID, 3)
    assert np.all(truth.sigma_fine >= 0.0)
    assert np.all(np.isfinite(truth.sigma_fine))


def test_fixed_jump_enters_at_first_node_after_arrival():
    spec = ModelSpec(ConstantVol(0.0), jumps=FixedJumps((0.30001,), (2.0,)))
    s, truth = simulate_path(spec, GRID, 0)
    node = math.ceil(0.30001 * 1600)
    assert s.values[node - 1] == 0.0 and s.values[node] == 2.0
    (j,) = truth.jumps
    assert j.time == pytest.approx(node / 1600) and j.arrival == 0.30001
    assert truth.jump_power(4) == 16.0
    assert truth.quadratic_variation() == 4.0
    assert truth.n_jumps(0.3) == 0


def test_jumps_on_same_node_merge():
    spec = ModelSpec(ConstantVol(0.0), jumps=FixedJumps((0.50001, 0.50002), (1.0, -0.25)))
    _, truth = simulate_path(spec, GRID, 0)
    assert len(truth.jumps) == 1 and truth.jumps[0].size == 0.75


def test_compound_poisson_rate():
    spec = ModelSpec(ConstantVol(0.1), jumps=CompoundPoissonJumps(5.0, 0.3, 0.05))
    counts = [simulate_path(spec, GRID, s)[1].n_jumps() for s in range(200)]
    assert np.mean(counts) == pytest.approx(5.0, abs=4 * math.sqrt(5.0 / 200))
    sizes = [abs(j.size) for s in range(30) for j in simulate_path(spec, GRID, s)[1].jumps]
    assert np.mean(sizes) == pytest.approx(0.3, abs=0.02)


# -- noise -------------------------------------------------------------------------------


@given(st.floats(-10, 10), st.floats(0.01, 1.0))
def test_rounding_noise_is_centred(x, a):
    b1, b2, _, _ = noise_moments(ModelSpec(ConstantVol(0.1), noise=RoundingNoise(a)), x)
    assert abs(b1) < 1e-12 * max(1.0, a)
    assert 0.0 <= b2 <= a * a / 4 + 1e-15


def test_rounding_noise_empirical_moments():
    a, x = 0.01, 0.0437
    spec = ModelSpec(ConstantVol(0.0), noise=RoundingNoise(a), x0=x)
    grid = SamplingGrid.from_horizon(1.0, 40000)
    s, _ = simulate_path(spec, grid, 5)
    chi = s.values - x
    b1, b2, b3, _ = noise_moments(spec, x)
    assert chi.mean() == pytest.approx(b1, abs=4 * math.sqrt(b2 / chi.size))
    assert np.mean(chi**2) == pytest.approx(b2, rel=0.03)


def test_gaussian_noise_moments_follow_sigma():
    spec = ModelSpec(ConstantVol(0.2), noise=GaussianNoise(0.001, 0.5))
    b = noise_moments(spec, 0.0, 0.2)
    assert b[1] == pytest.approx(0.101**2)
    assert b[3] == pytest.approx(3 * 0.101**4)
    s, truth = simulate_path(spec, GRID, 0)
    assert np.allclose(truth.alpha_path, 0.101)


def test_mixture_moments_are_weighted():
    mix = MixtureNoise(0.25, GaussianNoise(0.002), RoundingNoise(0.01))
    spec = ModelSpec(ConstantVol(0.0), noise=mix)
    g = noise_moments(ModelSpec(ConstantVol(0.0), noise=mix.gaussian), 0.003)
    r = noise_moments(ModelSpec(ConstantVol(0.0), noise=mix.rounding), 0.003)
    m = noise_moments(spec, 0.003)
    for a, b, c in zip(m, g, r):
        assert a == pytest.approx(0.25 * b + 0.75 * c)


# -- spec serialization ------------------------------------------------------------------


def test_spec_dict_roundtrip():
    spec = ModelSpec(HestonVol(0.04, 5.0, 0.04, 0.5, -0.5), drift=0.01,
                     jumps=FixedJumps((0.2, 0.7), (0.5, -0.1)),
                     noise=MixtureNoise(0.5, GaussianNoise(0.001), RoundingNoise(0.01)), substeps=3)
    assert ModelSpec.from_dict(spec.to_dict()) == spec


@pytest.mark.parametrize("d", [
    {"volatility": {"type": "garch"}},
    {"volatility": {"type": "constant", "sigma": 0.1}, "extra": 1},
    {"noise": {"type": "gaussian", "c0": 0.1}},
    {"volatility": {"type": "constant", "sigma": 0.1}, "jumps": {"type": "fixed", "times": [0.1], "sizes": []}},
])
def test_spec_errors(d):
    with pytest.raises(ConfigError):
        ModelSpec.from_dict(d)


def test_truth_json_roundtrip(tmp_path):
    spec = ModelSpec(HestonVol(0.04, 5.0, 0.04, 0.5, -0.5), noise=GaussianNoise(0.005),
                     jumps=CompoundPoissonJumps(4.0, 0.1, 0.02))
    _, truth = simulate_path(spec, GRID, 9)
    path = tmp_path / "truth.json"
    truth.save(path)
    back = SimTruth.load(path)
    assert back.jumps == truth.jumps
    assert back.quadratic_variation() == truth.quadratic_variation()
    assert back.integrated_power(4) == truth.integrated_power(4)
    assert np.array_equal(back.sigma_fine, truth.sigma_fine)


# -- jump limit variable ----------------------------------------------------------------


def _one_jump_truth(size, sigma=0.2, alpha=0.005):
    spec = ModelSpec(ConstantVol(sigma), noise=GaussianNoise(alpha), jumps=FixedJumps((0.5,), (size,)))
    return simulate_path(spec, GRID, 0)[1]


def test_jump_limit_scales_with_jump_size():
    """Each summand carries p |dX|^(p-1) sign(dX): doubling the jump scales draws by 2^(p-1)."""
    for p in (2, 4):
        a = sample_jump_limit(_one_jump_truth(0.5), ["triangle"], p, seed=3, size=50)
        b = sample_jump_limit(_one_jump_truth(1.0), ["triangle"], p, seed=3, size=50)
        assert np.allclose(b, 2 ** (p - 1) * a, rtol=1e-12)


def test_jump_limit_variance_matches_display():
    truth = _one_jump_truth(0.8)
    draws = sample_jump_limit(truth, ["triangle"], 2, seed=4, size=40000)[:, 0]
    pm, pp, pbm, pbp = (m[0, 0] for m in psi_matrices(["triangle"], 2))
    j = truth.jumps[0]
    var = 4 * j.size**2 * (j.sigma_minus**2 * (pm + pp) + j.alpha_minus**2 * (pbm + pbp))
    se = var * math.sqrt(2 / draws.size)
    assert draws.var() == pytest.approx(var, abs=4 * se)


def test_jump_limit_zero_without_jumps():
    _, truth = simulate_path(ModelSpec(ConstantVol(0.2)), GRID, 0)
    assert np.all(sample_jump_limit(truth, ["triangle", "sine"], 4, seed=1, size=5) == 0.0)
