import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from afdm_lab.transforms import DaftParams, afs_coefficient_numeric, chirp_extend, idaft
from afdm_lab.waveform import (ActiveSet, PulseShape, WaveformConfig, active_subcarriers, afs_closed_form,
                               frame_grid, pulse_spectrum, pulse_time, synthesize_fd, synthesize_td)

from conftest import qpsk

T_S = 1.0 / (64 * 15e3)


def config(n=64, lam=0.007, pulse=None, **kw):
    return WaveformConfig(DaftParams(n, lam, lam), pulse=pulse or PulseShape("rrc", 0.25), **kw)


def test_pulse_validation():
    with pytest.raises(ValueError):
        PulseShape("sinc")
    with pytest.raises(ValueError):
        PulseShape("rrc", rolloff=0.0)
    with pytest.raises(ValueError):
        PulseShape("gaussian")
    with pytest.raises(ValueError):
        PulseShape("rrc", truncation=16)
    with pytest.raises(ValueError):
        WaveformConfig(DaftParams(8), oversample=1)


def test_rrc_spectrum_flat_top_and_band_limit():
    p = PulseShape("rrc", 0.25)
    assert pulse_spectrum(p, T_S, 0.0) == pytest.approx(np.sqrt(T_S))
    edge = 1.25 / (2 * T_S)
    assert abs(pulse_spectrum(p, T_S, edge * 1.001)) == 0.0


def test_truncated_rrc_leaks_outside_band():
    p = PulseShape("rrc", 0.25, truncation=17)
    f = 1.25 / (2 * T_S) * 1.05
    val = pulse_spectrum(p, T_S, f)
    assert abs(val) > 0
    # Oracle: Riemann sum of the windowed impulse response on a fine grid.
    step = T_S / 400
    t = np.arange(-8.5 * 400, 8.5 * 400 + 1) * step
    w = pulse_time(p, T_S, t)
    w[[0, -1]] *= 0.5
    ref = np.sum(w * np.exp(-2j * np.pi * f * t)) * step
    assert abs(val - ref) < 1e-6 * np.sqrt(T_S)


def test_rrc_time_and_spectrum_are_a_pair():
    p = PulseShape("rrc", 0.25)
    t = np.linspace(-400, 400, 400 * 64 + 1) * T_S
    pt = pulse_time(p, T_S, t)
    for f in (0.0, 0.3 / T_S, 0.55 / T_S):
        num = np.trapezoid(pt * np.exp(-2j * np.pi * f * t), t)
        assert abs(num - pulse_spectrum(p, T_S, f)) < 2e-3 * np.sqrt(T_S)


def test_rrc_active_sets():
    act = active_subcarriers(PulseShape("rrc", 0.25), 64)
    assert act.n_u == 49
    assert act.indices == tuple(range(-24, 25))
    assert active_subcarriers(PulseShape("rrc", 0.15), 64).n_u == 55


def scan_active(pulse, n, eps, t_s):
    df = 1 / (n * t_s)
    peak = abs(pulse_spectrum(pulse, t_s, 0.0))
    out = []
    for m in range(-n // 2, n // 2):
        if abs(pulse_spectrum(pulse, t_s, m * df)) < eps * peak:
            continue
        if all(abs(pulse_spectrum(pulse, t_s, (m + k * n) * df)) < (1 - eps) * eps * peak for k in (-2, -1, 1, 2)):
            out.append(m)
    return tuple(out)


@pytest.mark.parametrize("pulse,expected", [
    (PulseShape("gaussian", bandwidth=0.6 / T_S), 51),
    (PulseShape("rect", duration=T_S), 27),
])
def test_non_rrc_active_sets(pulse, expected):
    act = active_subcarriers(pulse, 64, 0.4, T_S)
    assert act.indices == scan_active(pulse, 64, 0.4, T_S)
    assert act.n_u == expected
    assert act.n_u < 64


def test_active_set_helpers(rng):
    act = ActiveSet((-1, 0, 1), 8)
    np.testing.assert_array_equal(act.natural, [7, 0, 1])
    assert act.mask().sum() == 3
    v = act.embed(np.array([1, 2, 3]))
    assert v[7] == 1 and v[0] == 2 and v[1] == 3
    with pytest.raises(ValueError):
        act.embed(np.ones(4))
    with pytest.raises(ValueError):
        ActiveSet((4,), 8)
    assert ActiveSet.full(8).n_u == 8


def test_frame_grid_and_zero_input():
    cfg = config(16)
    t = frame_grid(cfg)
    assert t.size == (cfg.n + cfg.n_cpp) * cfg.oversample
    assert t[cfg.n_cpp * cfg.oversample] == 0.0
    fr = synthesize_td(cfg, np.zeros(16))
    assert np.all(fr.samples == 0)
    assert np.all(synthesize_fd(cfg, np.zeros(16)).samples == 0)


def test_suppressed_carriers_are_rejected():
    cfg = config(16)
    c = np.zeros(16, dtype=complex)
    c[8] = 1.0
    with pytest.raises(ValueError, match="suppressed"):
        synthesize_td(cfg, c)


def test_ofdm_special_case_is_pulse_shaped_ofdm(rng):
    cfg = config(16, lam=0.0, pulse=PulseShape("rect", duration=1 / (16 * 15e3)))
    act = cfg.active_set()
    c = act.embed(qpsk(rng, act.n_u))
    fr = synthesize_td(cfg, c)
    x = idaft(c, cfg.daft)
    # Rect pulse of one sample: the signal holds x_k (times the pulse height) on each sample slot.
    height = np.sqrt(cfg.t_s) / cfg.t_s
    k = np.floor(fr.t / cfg.t_s + 0.5 + 1e-9).astype(int)
    inner = np.abs(fr.t / cfg.t_s - np.round(fr.t / cfg.t_s)) < 0.45
    np.testing.assert_allclose(fr.samples[inner], height * x[np.mod(k[inner], 16)], atol=1e-12 * height)


def test_td_and_fd_synthesis_agree(rng):
    cfg = config(64, pulse=PulseShape("rrc", 0.15))
    act = cfg.active_set()
    c = act.embed(qpsk(rng, act.n_u))
    td, fd = synthesize_td(cfg, c).samples, synthesize_fd(cfg, c).samples
    assert np.max(np.abs(td - fd)) / np.max(np.abs(td)) < 1e-3


def test_rect_pulse_without_suppression_self_interferes(rng):
    cfg = config(16, pulse=PulseShape("rect", duration=1 / (16 * 15e3)))
    full = ActiveSet.full(16)
    c = full.embed(qpsk(rng, 16))
    td = synthesize_td(cfg, c, active=full).samples
    fd = synthesize_fd(cfg, c, active=full).samples
    assert np.max(np.abs(td - fd)) / np.max(np.abs(td)) > 0.1


def test_single_symbol_afs_coefficient_matches_closed_form():
    cfg = config(16, lam=1 / 32)
    act = cfg.active_set()
    for m in (-3, 0, 5):
        c = np.zeros(16, dtype=complex)
        c[m % 16] = 1.0
        fr = synthesize_td(cfg, c)
        sel = (fr.t >= 0) & (fr.t < cfg.period - 0.5 * fr.step)
        num = afs_coefficient_numeric(fr.t[sel], fr.samples[sel], m, cfg.chirp_rate, cfg.period)
        closed = afs_closed_form(cfg, c, np.array([m]))[0]
        assert abs(num - closed) < 1e-9 * abs(closed)
    assert act.n_u == 13


def test_frame_is_chirp_periodic(rng):
    cfg = config(16, lam=1 / 32)
    act = cfg.active_set()
    c = act.embed(qpsk(rng, act.n_u))
    fr = synthesize_td(cfg, c, n_periods=2)
    nc, period = cfg.oversample, cfg.period
    i0 = cfg.n_cpp * nc
    t = fr.t[i0:i0 + 16 * nc]
    s0 = fr.samples[i0:i0 + 16 * nc]
    s1 = fr.samples[i0 + 16 * nc:i0 + 32 * nc]
    factor = np.exp(2j * np.pi * cfg.chirp_rate * (period ** 2 + 2 * period * t))
    assert np.max(np.abs(s1 - s0 * factor)) < 1e-9 * np.max(np.abs(s0))


def test_truncated_synthesis_approaches_untruncated(rng):
    cfg = config(16, lam=1 / 32)
    act = cfg.active_set()
    c = act.embed(qpsk(rng, act.n_u))
    ref = synthesize_td(cfg, c).samples
    errs = []
    for lp in (17, 101, 401):
        cfg_t = config(16, lam=1 / 32, pulse=PulseShape("rrc", 0.25, truncation=lp))
        errs.append(np.max(np.abs(synthesize_td(cfg_t, c).samples - ref)) / np.max(np.abs(ref)))
    assert errs[0] > errs[1] > errs[2]
    assert errs[2] < 1e-3


@given(st.integers(0, 2**31 - 1), st.sampled_from([0.0, 1 / 32, 0.011]))
def test_synthesis_is_linear(seed, lam):
    rng = np.random.default_rng(seed)
    cfg = config(16, lam=lam)
    act = cfg.active_set()
    a, b = act.embed(qpsk(rng, act.n_u)), act.embed(qpsk(rng, act.n_u))
    lhs = synthesize_td(cfg, 2 * a - 1j * b).samples
    rhs = 2 * synthesize_td(cfg, a).samples - 1j * synthesize_td(cfg, b).samples
    assert np.max(np.abs(lhs - rhs)) < 1e-10 * max(1.0, np.max(np.abs(lhs)))
