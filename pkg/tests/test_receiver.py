import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate, stats

from afdm_lab.channel import DsChannel, EffectiveChannel, effective_channel_ideal, sample_realization
from afdm_lab.receiver import (RxConfig, binomial_ci, chirp_filter_response, chirped_pulse_aft,
                               count_bit_errors, covering_rx_bandwidth, ct_pipeline, default_rx_bandwidth,
                               detect, lmmse_matrix, mismatched_sinr, monte_carlo_ber, nominal_rx_bandwidth, qam_demap, qam_map,
                               sinr_per_symbol, theoretical_ber)
from afdm_lab.transforms import DaftParams
from afdm_lab.waveform import PulseShape, WaveformConfig, pulse_spectrum, pulse_time, synthesize_td

from conftest import qpsk


def config(n=16, lam=None, **kw):
    lam = 1 / (2 * n) if lam is None else lam
    return WaveformConfig(DaftParams(n, lam, lam), pulse=PulseShape("rrc", 0.25), **kw)


def random_matrix(rng, n):
    return (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / np.sqrt(2 * n)


# ---------------------------------------------------------------- bandwidth and pipeline

def test_rx_bandwidths():
    cfg = config(64, 0.007)
    assert nominal_rx_bandwidth(cfg) == 160 * cfg.delta_f
    assert covering_rx_bandwidth(cfg) == 190 * cfg.delta_f
    assert default_rx_bandwidth(config(64, 0.0)) == 160 * cfg.delta_f
    with pytest.raises(ValueError):
        RxConfig(cfg, noise_var=-1.0)


@pytest.mark.parametrize("n,lam", [(16, 0.0), (16, 1 / 32), (64, 0.007)])
def test_ideal_recovery(rng, n, lam):
    cfg = config(n, lam)
    act = cfg.active_set()
    c = act.embed(qpsk(rng, act.n_u))
    y = ct_pipeline(synthesize_td(cfg, c), DsChannel.identity(), RxConfig(cfg))
    assert np.max(np.abs(y - c)[act.mask()]) < 1e-6


def test_nominal_bandwidth_is_too_narrow_for_canonical_chirp(rng):
    # The printed receive bandwidth clips the swept chirp; recovery then degrades.
    cfg = config(64, 1 / 128)
    act = cfg.active_set()
    c = act.embed(qpsk(rng, act.n_u))
    rx = RxConfig(cfg, rx_bandwidth=nominal_rx_bandwidth(cfg))
    y = ct_pipeline(synthesize_td(cfg, c), DsChannel.identity(), rx)
    assert np.max(np.abs(y - c)[act.mask()]) > 1e-2


def test_pipeline_rejects_long_delays(rng):
    cfg = config(16)
    act = cfg.active_set()
    fr = synthesize_td(cfg, act.embed(qpsk(rng, act.n_u)))
    with pytest.raises(ValueError):
        ct_pipeline(fr, DsChannel.from_arrays([1, 1], [0, 5 * cfg.t_s]), RxConfig(cfg))


def test_noise_calibration():
    cfg = config(16)
    rx = RxConfig(cfg, noise_var=0.3)
    fr = synthesize_td(cfg, np.zeros(16))
    ys = np.concatenate([ct_pipeline(fr, DsChannel.identity(), rx, noise_seed=i) for i in range(700)])
    assert ys.size >= 10_000
    assert abs(np.var(ys) / 0.3 - 1) < 0.05


# ---------------------------------------------------------------- chirp filter

def test_chirp_filter_time_invariant_case():
    cfg = config(16, 0.0)
    t = np.linspace(0, 5 * cfg.t_s, 7)
    out = chirp_filter_response(cfg.pulse, cfg, 3, t)
    expected = np.exp(2j * np.pi * 3 * t / cfg.period) * np.conj(pulse_spectrum(cfg.pulse, cfg.t_s, 3 / cfg.period))
    np.testing.assert_allclose(out, expected, atol=1e-15)


def test_chirp_filter_at_origin():
    cfg = config(64, 0.007)
    val = chirp_filter_response(cfg.pulse, cfg, 0, 0.0)
    assert val == pytest.approx(np.conj(chirped_pulse_aft(cfg.pulse, cfg, 0.0)))


def test_chirp_filter_matches_direct_convolution():
    cfg = config(64, 0.007)
    t_s, lb, m = cfg.t_s, cfg.chirp_rate, 5
    t0 = 3 * t_s
    u = lambda t: np.exp(2j * np.pi * (lb * t * t + m * t / cfg.period))

    def integrand(s, part):
        v = pulse_time(cfg.pulse, t_s, s) * u(t0 - s)
        return v.real if part == 0 else v.imag

    lim = 400 * t_s
    direct = sum((1j ** part) * integrate.quad(integrand, -lim, lim, args=(part,), limit=4000,
                                               points=np.arange(-400, 401, 20) * t_s)[0]
                 for part in (0, 1))
    closed = chirp_filter_response(cfg.pulse, cfg, m, t0)
    assert abs(closed - direct) / abs(closed) < 1e-4


# ---------------------------------------------------------------- LMMSE and SINR

def test_lmmse_identity():
    np.testing.assert_allclose(lmmse_matrix(np.eye(4), 1.0), 0.5 * np.eye(4), atol=1e-15)


def test_lmmse_zero_forcing_limit(rng):
    h = random_matrix(rng, 16) + np.eye(16)
    g = lmmse_matrix(h, 1e-12)
    inv = np.linalg.inv(h)
    assert np.linalg.norm(g - inv) / np.linalg.norm(inv) < 1e-6


def test_lmmse_normal_equations(rng):
    h = random_matrix(rng, 16)
    s2 = 0.3
    g = lmmse_matrix(h, s2)
    res = (h.conj().T @ h + s2 * np.eye(16)) @ g - h.conj().T
    assert np.linalg.norm(res) < 1e-10


def test_lmmse_uses_active_columns():
    cfg = config(16)
    h = effective_channel_ideal(DsChannel.identity(), cfg)
    assert lmmse_matrix(h, 0.1).shape == (cfg.active_set().n_u, 16)


def test_sinr_identity():
    np.testing.assert_allclose(sinr_per_symbol(np.eye(4), 1.0), 1.0)
    np.testing.assert_allclose(sinr_per_symbol(np.eye(4), 0.1), 10.0)


def test_non_finite_channel_is_reported():
    with pytest.raises(ArithmeticError):
        lmmse_matrix(np.full((2, 2), np.nan), 0.1)


def test_sinr_flags_gain_outside_unit_interval(monkeypatch):
    import afdm_lab.receiver as rx
    monkeypatch.setattr(rx, "lmmse_matrix", lambda h, s2: 2 * np.linalg.inv(h))
    with pytest.raises(ArithmeticError):
        rx.sinr_per_symbol(np.eye(3), 0.1)


def test_sinr_matches_monte_carlo(rng):
    n, s2 = 12, 0.2
    h = random_matrix(rng, n) + 0.5 * np.eye(n)
    g = lmmse_matrix(h, s2)
    gbar = g @ h
    draws = 100_000
    c = (rng.choice([-1, 1], (n, draws)) + 1j * rng.choice([-1, 1], (n, draws))) / np.sqrt(2)
    w = np.sqrt(s2 / 2) * (rng.standard_normal((n, draws)) + 1j * rng.standard_normal((n, draws)))
    est = g @ (h @ c + w)
    # Scale each estimate by the unbiasing factor, then compare signal to residual power.
    d = np.real(np.diag(gbar))
    resid = est / d[:, None] - c
    empirical = 1 / np.mean(np.abs(resid) ** 2, axis=1)
    np.testing.assert_allclose(empirical, sinr_per_symbol(h, s2), rtol=0.03)


@given(st.integers(0, 2**31 - 1), st.floats(0.01, 10.0))
def test_sinr_grows_as_noise_falls(seed, s2):
    rng = np.random.default_rng(seed)
    h = random_matrix(rng, 8) + np.eye(8)
    assert np.all(sinr_per_symbol(h, s2 / 2) >= sinr_per_symbol(h, s2) - 1e-9)
    assert np.all(sinr_per_symbol(h, s2) >= 0)


# ---------------------------------------------------------------- BER theory

def test_theoretical_ber_values():
    assert theoretical_ber(np.full(5, 4.0), 4) == pytest.approx(stats.norm.sf(2.0), rel=1e-12)
    assert theoretical_ber(np.full(5, 4.0), 4) == pytest.approx(0.02275, abs=1e-5)
    assert theoretical_ber(np.full(3, 1e9), 16) < 1e-12
    with pytest.raises(ValueError):
        theoretical_ber(np.ones(2), 8)


@given(st.lists(st.floats(0, 1e4), min_size=1, max_size=20), st.sampled_from([4, 16, 64]))
def test_theoretical_ber_range(sinr, m_c):
    assert 0.0 <= theoretical_ber(np.array(sinr), m_c) <= 0.5 + 1e-12


def test_detect_report():
    y = np.array([1 + 1j, -1 - 1j]) / np.sqrt(2)
    rep = detect(EffectiveChannel(np.eye(2)), y, 0.1)
    np.testing.assert_allclose(rep.sinr, 10.0)
    np.testing.assert_allclose(rep.symbol_estimates, y / 1.1)


@given(st.integers(0, 2**31 - 1), st.floats(1e-3, 1.0))
def test_mismatched_sinr_reduces_to_matched(seed, nv):
    h = random_matrix(np.random.default_rng(seed), 12)
    np.testing.assert_allclose(mismatched_sinr(h, h, nv), sinr_per_symbol(h, nv), rtol=1e-8)


def test_mismatched_sinr_penalizes_unknown_phase(rng):
    h = random_matrix(rng, 12)
    assert np.all(mismatched_sinr(h * np.exp(0.3j), h, 0.05) < sinr_per_symbol(h, 0.05))
    # a rotation past 90 degrees leaves no useful in-phase signal
    assert np.all(mismatched_sinr(-h, h, 0.05) == 0.0)


# ---------------------------------------------------------------- QAM

def test_qam_corner_convention():
    assert qam_map([0, 0], 4)[0] == pytest.approx((1 + 1j) / np.sqrt(2))
    assert qam_map([1, 1], 4)[0] == pytest.approx((-1 - 1j) / np.sqrt(2))


def test_qam_unit_energy():
    for m_c in (4, 16, 64):
        k = int(math.log2(m_c))
        words = np.arange(m_c)
        bits = ((words[:, None] >> np.arange(k - 1, -1, -1)) & 1).ravel()
        pts = qam_map(bits, m_c)
        assert len(set(np.round(pts, 12))) == m_c
        assert np.mean(np.abs(pts) ** 2) == pytest.approx(1.0)


def test_qam_gray_neighbours_differ_by_one_bit():
    k = 4
    words = np.arange(16)
    bits = ((words[:, None] >> np.arange(k - 1, -1, -1)) & 1)
    pts = qam_map(bits.ravel(), 16)
    step = 2 / np.sqrt(10)
    for i in range(16):
        for j in range(16):
            if abs(abs(pts[i] - pts[j]) - step) < 1e-9:
                assert np.sum(bits[i] != bits[j]) == 1


@given(st.sampled_from([4, 16, 64]), st.integers(0, 2**31 - 1))
def test_qam_round_trip(m_c, seed):
    rng = np.random.default_rng(seed)
    bits = rng.integers(0, 2, int(math.log2(m_c)) * 50)
    np.testing.assert_array_equal(qam_demap(qam_map(bits, m_c), m_c), bits)


def test_qam_rejects_partial_symbol():
    with pytest.raises(ValueError):
        qam_map([0, 1, 1], 4)


# ---------------------------------------------------------------- Monte Carlo

def test_binomial_ci():
    lo, hi = binomial_ci(10, 1000)
    assert lo < 0.01 < hi
    assert binomial_ci(0, 0) == (0.0, 1.0)


def test_noiseless_identity_has_no_errors(rng):
    e, b = count_bit_errors(np.eye(8), 1e-12, 50, rng)
    assert e == 0 and b == 800


def test_awgn_ber_matches_closed_form(rng):
    snr = stats.norm.isf(0.01) ** 2
    e, b = count_bit_errors(np.eye(16), 1 / snr, 20_000, rng)
    lo, hi = binomial_ci(e, b)
    assert lo <= 0.01 <= hi


def test_monte_carlo_ber_mobility_trend():
    cfg = config(64, 0.007)
    act = cfg.active_set()

    def factory(v):
        return lambda i: effective_channel_ideal(sample_realization((7, i), 3, v_max_kmh=v), cfg, act)

    slow = monte_carlo_ber(factory(50), [20.0], 100, seed=1, frames_per_trial=0)[0]
    fast = monte_carlo_ber(factory(450), [20.0], 100, seed=1, frames_per_trial=0)[0]
    assert fast.ber_theory_mean > slow.ber_theory_mean


def test_monte_carlo_is_deterministic():
    h = lambda i: EffectiveChannel(np.eye(4) * (1 + 0.1 * i))
    a = monte_carlo_ber(h, [0.0, 5.0], 3, seed=9, frames_per_trial=5)
    b = monte_carlo_ber(h, [0.0, 5.0], 3, seed=9, frames_per_trial=5)
    assert a == b
