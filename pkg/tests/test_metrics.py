import math

import numpy as np
import pytest

from irsofdm.common import DomainError
from irsofdm.channel import (
    FrequencyChannels, effective_channel, effective_channels, sample_taps, to_frequency,
)
from irsofdm.metrics import (
    BeamformerSet, PhaseVector, phase_step, sinr, sinr_matrix, sum_rate,
    per_user_rates, mse, mse_matrix, wmmse_objective,
)
from irsofdm.optimizer import update_varpi, update_rho, initialize


def random_beamformers(rng, shape, tx_power=1.):
    w = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    return BeamformerSet(w).normalized(tx_power)

@pytest.fixture
def beamformers(small_config, rng):
    shape = (small_config.n_subcarriers, small_config.n_users, small_config.n_tx)
    return random_beamformers(rng, shape, small_config.tx_power)

@pytest.fixture
def phases(small_config, rng):
    return PhaseVector.random(small_config.n_irs, rng)


def test_phase_step():
    assert phase_step(None) is None
    assert phase_step(math.inf) is None
    assert phase_step(1) == pytest.approx(math.pi)
    assert phase_step(3) == pytest.approx(math.pi / 4)
    with pytest.raises(DomainError):
        phase_step(0)

def test_phase_vector(rng, faker):
    for _ in range(10):
        M = faker.pyint(min_value=1, max_value=16)
        phi = PhaseVector.random(M, rng)
        assert phi.n_elements == M
        assert phi.modulus_residual() <= 1e-12
        assert not phi.is_quantized

        b = faker.pyint(min_value=1, max_value=6)
        phi = PhaseVector.random(M, rng, b)
        assert phi.is_quantized
        assert phi.delta == pytest.approx(2 * math.pi / 2 ** b)
        assert phi.grid_residual() <= 1e-12
        idx = phi.grid_indices()
        assert np.all((idx >= 0) & (idx < 2 ** b))
        assert np.allclose(np.exp(1j * idx * phi.delta), phi.phi)

    with pytest.raises(DomainError):
        PhaseVector(np.array([1., 1.1]))
    with pytest.raises(DomainError):
        PhaseVector(np.exp(1j * np.array([0., .3])), quant_bits=2)
    with pytest.raises(DomainError):
        PhaseVector.ones(3).grid_indices()

def test_phase_vector_from_angles():
    phi = PhaseVector.from_angles([0., .8, 3.], 2)
    assert np.allclose(phi.phi, [1, 1j, -1])
    assert np.array_equal(phi.grid_indices(), [0, 1, 2])

    phi = PhaseVector.from_angles([.1, -.2], math.inf)
    assert np.allclose(phi.angles, [.1, -.2])

    phi = PhaseVector.ones(2).with_element(1, -1j)
    assert np.allclose(phi.phi, [1, -1j])

def test_beamformer_set(rng, faker):
    with pytest.raises(DomainError):
        BeamformerSet(np.zeros((2, 3)))
    W = BeamformerSet.zeros(4, 2, 3)
    assert W.total_power() == 0
    with pytest.raises(DomainError):
        W.normalized(1.)
    for _ in range(10):
        P = faker.pyfloat(min_value=.01, max_value=100)
        W = random_beamformers(rng, (4, 2, 3), P)
        assert W.power_residual(P) <= 1e-12 * P

def test_sinr_single_user(rng):
    N, Nt, M = 3, 2, 2
    cn = lambda *s: rng.standard_normal(s) + 1j * rng.standard_normal(s)
    fc = FrequencyChannels(direct=cn(N, 1, Nt), bs_irs=cn(N, M, Nt), irs_user=cn(N, 1, M))
    phi = PhaseVector.random(M, rng)
    W = random_beamformers(rng, (N, 1, Nt))
    sigma2 = .5
    for i in range(N):
        h = effective_channel(fc, phi, 0, i)
        expected = abs(np.vdot(h, W.w[i, 0])) ** 2 / sigma2
        assert sinr(fc, phi, W, 0, i, sigma2) == pytest.approx(expected)

def test_sinr_two_users(freq_channels, phases, beamformers, small_config):
    fc, phi, W = freq_channels, phases, beamformers
    sigma2 = small_config.noise_power
    gamma = sinr_matrix(fc, phi, W, sigma2)
    for i in range(fc.n_subcarriers):
        h0 = effective_channel(fc, phi, 0, i)
        h1 = effective_channel(fc, phi, 1, i)
        a = abs(np.vdot(h0, W.w[i, 0])) ** 2
        b = abs(np.vdot(h0, W.w[i, 1])) ** 2
        c = abs(np.vdot(h1, W.w[i, 1])) ** 2
        d = abs(np.vdot(h1, W.w[i, 0])) ** 2
        assert sinr(fc, phi, W, 0, i, sigma2) == pytest.approx(a / (b + sigma2))
        assert sinr(fc, phi, W, 1, i, sigma2) == pytest.approx(c / (d + sigma2))
        assert gamma[i, 0] == pytest.approx(a / (b + sigma2))
        assert gamma[i, 1] == pytest.approx(c / (d + sigma2))

def test_zero_beamformers(freq_channels, phases, small_config, beamformers):
    fc, phi = freq_channels, phases
    sigma2 = small_config.noise_power
    w = np.array(beamformers.w)
    w[:, 1] = 0
    gamma = sinr_matrix(fc, phi, w, sigma2)
    assert np.all(gamma[:, 1] == 0)
    assert sinr(fc, phi, w, 1, 0, sigma2) == 0

    W = BeamformerSet.zeros(fc.n_subcarriers, fc.n_users, fc.n_tx)
    assert sum_rate(fc, phi, W, sigma2) == 0

def test_sum_rate_unit_sinr():
    fc = FrequencyChannels(
        direct=np.array([[[1.]]]), bs_irs=np.zeros((1, 1, 1)), irs_user=np.zeros((1, 1, 1)),
    )
    W = BeamformerSet(np.array([[[1.]]]))
    assert sum_rate(fc, PhaseVector.ones(1), W, 1.) == pytest.approx(1.)

def test_sum_rate_average(freq_channels, phases, beamformers, small_config):
    fc, phi, W = freq_channels, phases, beamformers
    sigma2 = small_config.noise_power
    rates = per_user_rates(fc, phi, W, sigma2)
    assert rates.shape == (fc.n_subcarriers, fc.n_users)
    assert np.all(rates >= 0)
    assert sum_rate(fc, phi, W, sigma2) == pytest.approx(np.sum(rates) / fc.n_subcarriers)

def test_sum_rate_scale_invariance(freq_channels, phases, beamformers, small_config):
    fc, phi, W = freq_channels, phases, beamformers
    sigma2 = small_config.noise_power
    alpha = 3.2 - 1.7j
    # scaling h^d and h^r scales every effective channel by alpha
    scaled = FrequencyChannels(
        direct=fc.direct * alpha, bs_irs=fc.bs_irs, irs_user=fc.irs_user * alpha,
    )
    assert np.allclose(effective_channels(scaled, phi), alpha * effective_channels(fc, phi))
    expected = sum_rate(fc, phi, W, sigma2)
    assert sum_rate(scaled, phi, W, sigma2 * abs(alpha) ** 2) == pytest.approx(expected, rel=1e-10)

def test_sum_rate_rotation_invariance(freq_channels, phases, beamformers, small_config, rng):
    fc, phi, W = freq_channels, phases, beamformers
    sigma2 = small_config.noise_power
    w = np.array(W.w)
    w[2, 1] *= np.exp(1j * rng.uniform(0, 2 * np.pi))
    assert sum_rate(fc, phi, w, sigma2) == pytest.approx(sum_rate(fc, phi, W, sigma2), rel=1e-12)

def test_mse_examples(freq_channels, phases, beamformers, small_config):
    fc, phi, W = freq_channels, phases, beamformers
    sigma2 = small_config.noise_power
    assert mse(fc, phi, W, 0, 0, 0, sigma2) == 1
    Z = BeamformerSet.zeros(fc.n_subcarriers, fc.n_users, fc.n_tx)
    assert mse(fc, phi, Z, 1, 1, 3, sigma2) == pytest.approx(1 + sigma2, rel=1e-15)

    varpi = np.zeros((fc.n_subcarriers, fc.n_users), dtype=complex)
    assert np.all(mse_matrix(fc, phi, W, varpi, sigma2) == 1)

def test_mse_at_optimal_receiver(init_state, freq_channels, small_config):
    fc, state = freq_channels, init_state
    sigma2 = small_config.noise_power
    varpi = update_varpi(state, fc, sigma2)
    m = mse_matrix(fc, state.phi, state.W, varpi, sigma2)
    gamma = sinr_matrix(fc, state.phi, state.W, sigma2)
    assert np.allclose(m * (1 + gamma), 1, rtol=0, atol=1e-9)
    for i in range(fc.n_subcarriers):
        for k in range(fc.n_users):
            value = mse(fc, state.phi, state.W, varpi[i, k], k, i, sigma2)
            assert value == pytest.approx(m[i, k], rel=1e-9)

def test_wmmse_objective_zero():
    fc = FrequencyChannels(
        direct=np.ones((2, 1, 1)), bs_irs=np.zeros((2, 1, 1)), irs_user=np.zeros((2, 1, 1)),
    )
    W = BeamformerSet.zeros(2, 1, 1)
    value = wmmse_objective(fc, PhaseVector.ones(1), W, np.ones((2, 1)), np.zeros((2, 1)), 1e-3)
    assert value == 0

def test_wmmse_equals_sum_rate(config_factory, geometry, rng):
    for config in config_factory(10):
        fc = to_frequency(sample_taps(config, geometry, rng), config.n_subcarriers)
        state = initialize(config, fc, rng)
        sigma2 = config.noise_power
        W = random_beamformers(rng, state.W.w.shape, config.tx_power)
        state.W = W
        state.varpi = update_varpi(state, fc, sigma2)
        state.rho = update_rho(state, fc, sigma2)
        gamma = sinr_matrix(fc, state.phi, W, sigma2)
        assert np.allclose(state.rho, 1 + gamma, rtol=1e-9)
        obj = wmmse_objective(fc, state.phi, W, state.rho, state.varpi, sigma2)
        rate = sum_rate(fc, state.phi, W, sigma2)
        assert obj == pytest.approx(rate, rel=1e-9)

def test_wmmse_rho_errors(init_state, freq_channels, small_config):
    state = init_state
    rho = state.rho.copy()
    rho[0, 0] = 0
    with pytest.raises(DomainError):
        wmmse_objective(freq_channels, state.phi, state.W, rho, state.varpi, small_config.noise_power)

def test_wmmse_concave_in_rho(init_state, freq_channels, small_config):
    state = init_state
    sigma2 = small_config.noise_power
    h = 1e-3
    for i, k in [(0, 0), (3, 1), (7, 0)]:
        def f(x):
            rho = state.rho.copy()
            rho[i, k] = x
            return wmmse_objective(freq_channels, state.phi, state.W, rho, state.varpi, sigma2)
        x = state.rho[i, k]
        assert f(x + h) - 2 * f(x) + f(x - h) <= 1e-12
        # rho = 1 / MSE maximizes the objective
        assert f(x) >= f(x * 1.01) and f(x) >= f(x * .99)
