"""Continuous-time receiver, LMMSE detection and BER evaluation."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import linalg as sla
from scipy import special, stats

from .channel import DsChannel, EffectiveChannel, PnCfoParams, SjParams
from .transforms import daft
from .waveform import (_GL_NODES, _GL_WEIGHTS, ActiveSet, Frame, PulseShape, WaveformConfig,
                       _untruncated_time, pulse_spectrum)


def nominal_rx_bandwidth(config: WaveformConfig) -> float:
    """``ceil(2 N (1 + alpha)) delta_f`` (RRC) or ``ceil(4 N) delta_f`` otherwise."""
    alpha = config.pulse.rolloff if config.pulse.kind == "rrc" else 1.0
    return math.ceil(2 * config.n * (1 + alpha) - 1e-9) * config.delta_f


def covering_rx_bandwidth(config: WaveformConfig, margin_bins: float = 2.0) -> float:
    """Smallest flat band that passes every dechirped component at every sample.

    A component at subcarrier ``m`` is seen by the chirp-compensating filter
    at ``m delta_f + 2 lb t`` plus Doppler and offsets. Over the sampling
    window ``t <= (N - 1 + N_cpp) T_s`` the sweep spans
    ``2 |lambda1| N (N - 1 + N_cpp)`` bins, added to the half-band ``N / 2``
    and a margin for Doppler and carrier offsets.
    """
    n = config.n
    sweep = 2 * abs(config.daft.lambda1) * n * (n - 1 + config.n_cpp)
    half = sweep + n / 2 + margin_bins
    return 2 * math.ceil(half) * config.delta_f


def default_rx_bandwidth(config: WaveformConfig) -> float:
    return max(nominal_rx_bandwidth(config), covering_rx_bandwidth(config))


@dataclass(frozen=True)
class RxConfig:
    """Receiver parameters.

    Attributes:
        waveform: Waveform configuration shared with the transmitter.
        rx_bandwidth: Width ``B_rx`` of the flat receive spectrum
            ``U(f) = sqrt(T_s) rect(f / B_rx)``. ``None`` selects
            :func:`default_rx_bandwidth`.
        noise_var: Noise variance per DAFT-domain sample.
        a: Chirp-slope index used to describe ``lambda1 = a / (2N)``.
    """

    waveform: WaveformConfig
    rx_bandwidth: Optional[float] = None
    noise_var: float = 0.0
    a: int = 1

    def __post_init__(self):
        if self.noise_var < 0:
            raise ValueError("noise_var must be non-negative")
        if self.rx_bandwidth is None:
            object.__setattr__(self, "rx_bandwidth", default_rx_bandwidth(self.waveform))
        elif self.rx_bandwidth <= 0:
            raise ValueError("rx_bandwidth must be positive")

    def rx_spectrum(self, f) -> np.ndarray:
        f = np.abs(np.asarray(f, dtype=float))
        half = 0.5 * self.rx_bandwidth
        val = np.where(f < half, 1.0, np.where(np.isclose(f, half, rtol=1e-12, atol=0), 0.5, 0.0))
        return np.sqrt(self.waveform.t_s) * val


@dataclass
class DetectionReport:
    sinr: np.ndarray
    ber_theory: float
    symbol_estimates: Optional[np.ndarray] = None


# ----------------------------------------------------------------------------
# Continuous-time pipeline
# ----------------------------------------------------------------------------

def _frame_main_period(frame: Frame, config: WaveformConfig):
    nc = config.oversample
    expected = config.n_total * nc
    if frame.samples.shape[0] < expected:
        raise ValueError("frame is shorter than one prefixed period")
    if frame.config.oversample != nc or frame.config.n != config.n:
        raise ValueError("frame oversampling or order does not match the receiver")
    step = frame.t[1] - frame.t[0]
    if not np.isclose(step, config.t_s / nc, rtol=1e-9):
        raise ValueError("frame grid step does not match T_s / N_c")
    start = int(np.argmin(np.abs(frame.t)))
    if abs(frame.t[start]) > 1e-6 * step:
        raise ValueError("frame grid does not contain t = 0")
    stop = start + config.n * nc
    return frame.t[start:stop], frame.samples[start:stop]


def ct_pipeline(frame: Frame, channel: DsChannel, rx: RxConfig, noise_seed=None,
                pn_cfo: Optional[PnCfoParams] = None, sj: Optional[SjParams] = None) -> np.ndarray:
    """Propagate a frame through the continuous-time link and return the DAFT output.

    The transmit frame is represented by the Fourier coefficients of its
    dechirped main period, i.e. as a sum of chirps
    ``Q_k exp(j 2 pi (lb t^2 + k t / T))``. Each path delays every chirp by a
    linear phase ``exp(-j 2 pi f tau)`` in that frequency domain, applies its
    Doppler shift and gain, and the receive filter
    ``g(t) = u(-t) exp(-j 2 pi lb t^2)`` maps a chirp of base frequency ``F``
    to itself times ``U*(F + 2 lb t)``. The filter output is sampled at
    ``tau_max + n T_s`` (optionally perturbed by sampling jitter) and passed
    through the DAFT. Noise, if any, is added after the DAFT.

    Args:
        frame: Transmit frame from :func:`synthesize_td`.
        channel: Multipath channel.
        rx: Receiver configuration; ``rx.noise_var`` sets the noise level.
        noise_seed: Seed for the noise generator; ignored when the noise
            variance is zero.
        pn_cfo: Optional linear phase noise and carrier offset.
        sj: Optional linear sampling jitter applied to the sampling instants.

    Returns:
        Length-N DAFT-domain observation.
    """
    cfg = rx.waveform
    if channel.delays[-1] > cfg.n_cpp * cfg.t_s * (1 + 1e-12):
        raise ValueError("channel delay exceeds the prefix duration")
    t, s = _frame_main_period(frame, cfg)
    n, t_s, lb = cfg.n, cfg.t_s, cfg.chirp_rate
    period = cfg.period
    m_fine = t.size
    q = s * np.exp(-2j * np.pi * lb * t * t)
    coef = np.fft.fft(q) / m_fine
    k = np.fft.fftfreq(m_fine, d=1.0 / m_fine)
    keep = np.abs(coef) > 1e-15 * max(np.abs(coef).max(), 1e-300)
    coef, fk = coef[keep], k[keep] / period

    ref = channel.delays[-1]
    n_idx = np.arange(n)
    t_samp = ref + n_idx * t_s
    if sj is not None:
        t_samp = t_samp + sj.delta0 + sj.delta1 * n_idx * t_s
    extra_f, extra_phase = 0.0, 0.0
    if pn_cfo is not None:
        extra_f = pn_cfo.cfo + pn_cfo.phi1 / (2 * np.pi)
        extra_phase = pn_cfo.phi0 - pn_cfo.phi1 * ref

    r = np.zeros(n, dtype=complex)
    for path in channel.paths:
        tau, nu = path.delay, path.doppler
        amp = (path.gain * coef * np.exp(-2j * np.pi * fk * tau) * np.exp(2j * np.pi * lb * tau * tau)
               * np.exp(-2j * np.pi * nu * tau) * np.exp(1j * extra_phase))
        base = fk - 2 * lb * tau + nu + extra_f
        phase = lb * t_samp[:, None] ** 2 + base[None, :] * t_samp[:, None]
        gain = np.conj(rx.rx_spectrum(base[None, :] + 2 * lb * t_samp[:, None]))
        r += (np.exp(2j * np.pi * phase) * gain) @ amp
    y = daft(r, cfg.daft)
    if rx.noise_var > 0:
        rng = np.random.default_rng(noise_seed)
        y = y + np.sqrt(rx.noise_var / 2) * (rng.standard_normal(n) + 1j * rng.standard_normal(n))
    return y


def chirped_pulse_aft(pulse: PulseShape, config: WaveformConfig, f) -> np.ndarray:
    """Affine Fourier transform ``int p(s) exp(-j 2 pi (lb s^2 + f s)) ds`` of the pulse.

    For the untruncated RRC pulse the integral is evaluated in the frequency
    domain as ``P`` convolved with the closed-form spectrum of
    ``exp(-j 2 pi lb s^2)``, which is exact because ``P`` has compact
    support. Other pulses are integrated over their time support.
    """
    f = np.asarray(f, dtype=float)
    t_s, lb = config.t_s, config.chirp_rate
    if lb == 0:
        return np.asarray(pulse_spectrum(pulse, t_s, f), dtype=complex)
    if pulse.kind == "rrc" and pulse.truncation is None:
        edge = (1 + pulse.rolloff) / (2 * t_s)
        n_seg = 64
        edges = np.linspace(-edge, edge, n_seg + 1)
        mid = 0.5 * (edges[1:] + edges[:-1])
        rad = 0.5 * (edges[1:] - edges[:-1])
        vq = (mid[:, None] + rad[:, None] * _GL_NODES[None, :]).ravel()
        wq = (rad[:, None] * _GL_WEIGHTS[None, :]).ravel()
        pv = pulse_spectrum(pulse, t_s, vq) * wq
        pref = (1 - 1j) / (2 * np.sqrt(lb))
        kern = np.exp(1j * np.pi * (f.ravel()[:, None] - vq[None, :]) ** 2 / (2 * lb))
        return (pref * kern @ pv).reshape(f.shape)
    half = pulse.support_halfwidth(t_s)
    if half is None:
        # Gaussian: integrate far enough into the tails.
        a = 2.0 * np.log(2.0) / pulse.bandwidth ** 2
        half = np.sqrt(a * np.log(1e20)) / np.pi
    n_seg = max(32, int(np.ceil(8 * half / t_s)))
    edges = np.linspace(-half, half, n_seg + 1)
    mid = 0.5 * (edges[1:] + edges[:-1])
    rad = 0.5 * (edges[1:] - edges[:-1])
    tq = (mid[:, None] + rad[:, None] * _GL_NODES[None, :]).ravel()
    wq = (rad[:, None] * _GL_WEIGHTS[None, :]).ravel()
    g = _untruncated_time(pulse, t_s, tq) * np.exp(-2j * np.pi * lb * tq * tq) * wq
    return (np.exp(-2j * np.pi * f.ravel()[:, None] * tq[None, :]) @ g).reshape(f.shape)


def chirp_filter_response(pulse: PulseShape, config: WaveformConfig, m: int, t):
    """Output of the filter matched to ``p`` for the chirp ``exp(j 2 pi (lb t^2 + m t / T))``.

    The response equals the input chirp times ``conj(P_lb(2 lb t + m / T))``,
    where ``P_lb`` is the affine Fourier transform of the (real) pulse. With
    a zero chirp rate this is ordinary filtering by ``P*(m / T)``.
    """
    t = np.asarray(t, dtype=float)
    lb = config.chirp_rate
    u = np.exp(2j * np.pi * (lb * t * t + m * t / config.period))
    inst = 2 * lb * t + m / config.period
    return u * np.conj(chirped_pulse_aft(pulse, config, inst))


# ----------------------------------------------------------------------------
# Detection
# ----------------------------------------------------------------------------

def _as_matrix(h) -> np.ndarray:
    return h.submatrix() if isinstance(h, EffectiveChannel) else np.asarray(h, dtype=complex)


def lmmse_matrix(h, noise_var: float) -> np.ndarray:
    """LMMSE equalizer ``(H^H H + s2 I)^{-1} H^H`` via a Hermitian positive-definite solve.

    For an :class:`EffectiveChannel` only the active columns are used, so the
    result maps the N observations to the ``N_u`` active symbols.
    """
    hm = _as_matrix(h)
    if not np.all(np.isfinite(hm)):
        raise ArithmeticError("channel matrix has non-finite entries")
    gram = hm.conj().T @ hm
    k = gram.shape[0]
    if noise_var > 0:
        g = sla.solve(gram + noise_var * np.eye(k), hm.conj().T, assume_a="pos")
    else:
        g = np.linalg.solve(gram, hm.conj().T)
    if not np.all(np.isfinite(g)):
        raise ArithmeticError("LMMSE matrix has non-finite entries (ill-conditioned channel)")
    return g


def sinr_per_symbol(h, noise_var: float) -> np.ndarray:
    """Post-LMMSE SINR ``Gbar_nn / (1 - Gbar_nn)`` with ``Gbar = G H``."""
    hm = _as_matrix(h)
    g = lmmse_matrix(hm, noise_var)
    diag = np.real(np.einsum("ij,ji->i", g, hm))
    if np.any(diag < -1e-9) or np.any(diag > 1 + 1e-9):
        raise ArithmeticError("diagonal of G H left [0, 1]; the channel matrix is inconsistent")
    diag = np.clip(diag, 0.0, None)
    with np.errstate(divide="ignore"):
        return np.where(diag < 1.0, diag / np.maximum(1.0 - diag, 1e-300), np.inf)


def mismatched_sinr(h, detector_h, noise_var: float) -> np.ndarray:
    """SINR when the LMMSE filter is built from ``detector_h`` but the data see ``h``.

    Only the in-phase part of ``(G H)_nn`` counts as useful signal; its
    quadrature part, the off-diagonal leakage and the filtered noise are
    lumped into a Gaussian residual. Symbols whose gain is rotated by more
    than 90 degrees get SINR 0.
    """
    hm = _as_matrix(h)
    g = lmmse_matrix(_as_matrix(detector_h), noise_var)
    gh = g @ hm
    d = np.diag(gh)
    leak = np.sum(np.abs(gh) ** 2, axis=1) - np.abs(d) ** 2 + np.imag(d) ** 2
    resid = leak + noise_var * np.sum(np.abs(g) ** 2, axis=1)
    sig = np.where(np.real(d) > 0, np.real(d) ** 2, 0.0)
    with np.errstate(divide="ignore"):
        return np.where(resid > 0, sig / np.maximum(resid, 1e-300), np.inf)


def _qfunc(x):
    return 0.5 * special.erfc(np.asarray(x) / np.sqrt(2))


def theoretical_ber(sinr, m_c: int = 4) -> float:
    """Average Gray-coded square-QAM BER under a Gaussian residual.

    ``(1/K) (4 / log2 M) (1 - 1/sqrt(M)) sum_n Q(sqrt(3 SINR_n / (M - 1)))``
    averaged over the ``K`` entries of ``sinr`` (the active carriers).
    """
    sinr = np.asarray(sinr, dtype=float)
    bits = math.log2(m_c)
    root = math.isqrt(m_c)
    if root * root != m_c or bits != int(bits):
        raise ValueError("constellation size must be an even power of two")
    pref = 4.0 / bits * (1 - 1 / root)
    return float(pref * np.mean(_qfunc(np.sqrt(3 * sinr / (m_c - 1)))))


def detect(h: EffectiveChannel, y, noise_var: float, m_c: int = 4) -> DetectionReport:
    g = lmmse_matrix(h, noise_var)
    sinr = sinr_per_symbol(h, noise_var)
    return DetectionReport(sinr=sinr, ber_theory=theoretical_ber(sinr, m_c), symbol_estimates=g @ np.asarray(y))


# ----------------------------------------------------------------------------
# Gray-coded square QAM
# ----------------------------------------------------------------------------

def _pam_levels(bits_per_axis: int):
    size = 1 << bits_per_axis
    gray = np.arange(size) ^ (np.arange(size) >> 1)
    # Level index i carries the Gray word gray[i]; level 0 is the most negative.
    word_to_level = np.empty(size, dtype=int)
    word_to_level[gray] = np.arange(size)
    amps = 2 * np.arange(size) - (size - 1)
    return word_to_level, amps


def qam_map(bits, m_c: int = 4) -> np.ndarray:
    """Map bits to unit-energy Gray-coded square QAM symbols.

    Each symbol takes ``log2(M)`` bits: the first half selects the in-phase
    level and the second half the quadrature level. A zero bit maps to the
    positive half-plane, so for 4-QAM ``00 -> (1 + 1j) / sqrt(2)``.
    """
    bits = np.asarray(bits, dtype=int).ravel()
    k = int(math.log2(m_c))
    half = k // 2
    if bits.size % k:
        raise ValueError(f"number of bits must be a multiple of {k}")
    word_to_level, amps = _pam_levels(half)
    b = bits.reshape(-1, k)
    weights = 1 << np.arange(half - 1, -1, -1)
    wi = b[:, :half] @ weights
    wq = b[:, half:] @ weights
    # Flip so that the all-zero word sits on the positive side.
    size = 1 << half
    re = -amps[word_to_level[wi]] if size > 1 else amps
    im = -amps[word_to_level[wq]]
    scale = np.sqrt(2 * (m_c - 1) / 3)
    return (re + 1j * im) / scale


def qam_demap(symbols, m_c: int = 4) -> np.ndarray:
    """Hard-decision inverse of :func:`qam_map`."""
    s = np.asarray(symbols, dtype=complex).ravel()
    k = int(math.log2(m_c))
    half = k // 2
    size = 1 << half
    scale = np.sqrt(2 * (m_c - 1) / 3)
    word_to_level, amps = _pam_levels(half)
    level_to_word = np.empty(size, dtype=int)
    level_to_word[word_to_level] = np.arange(size)

    def axis(v):
        lvl = np.clip(np.rint(((-v * scale) + (size - 1)) / 2), 0, size - 1).astype(int)
        w = level_to_word[lvl]
        return (w[:, None] >> np.arange(half - 1, -1, -1)) & 1

    return np.concatenate([axis(s.real), axis(s.imag)], axis=1).ravel()


# ----------------------------------------------------------------------------
# Monte Carlo
# ----------------------------------------------------------------------------

@dataclass
class BerPoint:
    snr_db: float
    ber_theory_mean: float
    ber_empirical_mean: float
    ci_low: float
    ci_high: float
    trials: int
    errors: int = 0
    bits: int = 0


def binomial_ci(errors: int, n_bits: int, level: float = 0.95):
    """Wilson score interval for an error probability."""
    if n_bits == 0:
        return 0.0, 1.0
    ci = stats.binomtest(int(errors), int(n_bits)).proportion_ci(confidence_level=level, method="wilson")
    return float(ci.low), float(ci.high)


def count_bit_errors(h, noise_var: float, n_frames: int, rng, m_c: int = 4,
                     detector_h=None, batch: int = 4096):
    """Simulate ``n_frames`` LMMSE-detected frames and count bit errors.

    Args:
        h: True channel (matrix over the active columns or EffectiveChannel).
        noise_var: Noise variance per observation.
        n_frames: Number of frames to simulate.
        rng: numpy Generator.
        m_c: Constellation size.
        detector_h: Channel assumed by the detector (defaults to ``h``).

    Returns:
        ``(errors, bits)``.
    """
    hm = _as_matrix(h)
    g = lmmse_matrix(_as_matrix(detector_h) if detector_h is not None else hm, noise_var)
    n_obs, n_u = hm.shape
    k = int(math.log2(m_c))
    errors = bits = 0
    done = 0
    while done < n_frames:
        nb = min(batch, n_frames - done)
        b = rng.integers(0, 2, size=n_u * nb * k)
        c = qam_map(b, m_c).reshape(nb, n_u).T
        w = np.sqrt(noise_var / 2) * (rng.standard_normal((n_obs, nb)) + 1j * rng.standard_normal((n_obs, nb)))
        est = g @ (hm @ c + w)
        bh = qam_demap(est.T.ravel(), m_c)
        errors += int(np.count_nonzero(bh != b))
        bits += b.size
        done += nb
    return errors, bits


def monte_carlo_ber(channel_factory: Callable[[int], EffectiveChannel], snr_grid_db: Sequence[float],
                    n_trials: int, seed: int, frames_per_trial: int = 1, m_c: int = 4,
                    sigma_c2: float = 1.0) -> list:
    """BER versus SNR averaged over channel realizations.

    ``channel_factory(trial)`` returns the effective channel of one
    realization; it must be deterministic in ``trial``. For every SNR the
    Gaussian-approximation BER is averaged over realizations and, when
    ``frames_per_trial > 0``, bits are counted over that many frames per
    realization. SNR is ``sigma_c2 / noise_var``.
    """
    chans = [channel_factory(i) for i in range(n_trials)]
    out = []
    for si, snr_db in enumerate(snr_grid_db):
        noise_var = sigma_c2 / 10 ** (snr_db / 10)
        theory = []
        errors = bits = 0
        for i, ch in enumerate(chans):
            theory.append(theoretical_ber(sinr_per_symbol(ch, noise_var), m_c))
            if frames_per_trial > 0:
                rng = np.random.default_rng([seed, si, i])
                e, b = count_bit_errors(ch, noise_var, frames_per_trial, rng, m_c)
                errors += e
                bits += b
        lo, hi = binomial_ci(errors, bits)
        emp = errors / bits if bits else float("nan")
        out.append(BerPoint(float(snr_db), float(np.mean(theory)), emp, lo, hi, n_trials, errors, bits))
    return out
