"""Power spectral density of the transmit signal and out-of-band energy."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import signal as sps

from .waveform import ActiveSet, WaveformConfig, _GL_NODES, _GL_WEIGHTS, _untruncated_time, pulse_spectrum

OOB_FLOOR_DB = -120.0


@dataclass(frozen=True)
class PsdGrid:
    """PSD samples on a uniform frequency grid.

    Attributes:
        freqs: Frequencies in Hz, increasing and uniformly spaced.
        values: Non-negative PSD values (linear scale).
        normalized: True when the constant ``sigma_c2 / (N N_T)`` has been
            divided out of ``values``.
    """

    freqs: np.ndarray
    values: np.ndarray
    normalized: bool = False

    def __post_init__(self):
        f = np.asarray(self.freqs, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if f.shape != v.shape or f.ndim != 1:
            raise ValueError("freqs and values must be 1-D arrays of equal length")
        if np.any(v < 0):
            raise ValueError("PSD values must be non-negative")
        object.__setattr__(self, "freqs", f)
        object.__setattr__(self, "values", v)

    def db(self, reference: Optional[float] = None) -> np.ndarray:
        """Values in dB relative to ``reference`` (the peak by default)."""
        ref = float(self.values.max()) if reference is None else reference
        with np.errstate(divide="ignore"):
            return 10 * np.log10(np.maximum(self.values, 1e-300) / ref)


def frequency_grid(config: WaveformConfig, span: Optional[float] = None,
                   step: Optional[float] = None) -> np.ndarray:
    """Symmetric grid; defaults to a span of ``4 / T_s`` with spacing ``delta_f / 8``."""
    span = 4.0 / config.t_s if span is None else span
    step = config.delta_f / 8 if step is None else step
    half = int(np.floor(0.5 * span / step + 1e-9))
    return np.arange(-half, half + 1) * step


def data_psd(config: WaveformConfig, sigma_c2: float, f, active: Optional[ActiveSet] = None):
    """Average PSD of the chirp-periodic sequence over one frame.

    ``(sigma_c2 / (N N_T)) sum_l sin^2(pi N_T (f - f_l) T_s) / sin^2(pi (f - f_l) T_s)``
    summed over the active subcarrier frequencies ``f_l = l delta_f``.
    """
    active = active or config.active_set()
    f = np.asarray(f, dtype=float)
    n_t = config.n_total
    x = (f[..., None] - active.centered * config.delta_f) * config.t_s
    den = np.sin(np.pi * x)
    num = np.sin(np.pi * n_t * x)
    small = np.abs(den) < 1e-9
    ratio = np.where(small, float(n_t) ** 2, num ** 2 / np.where(small, 1.0, den) ** 2)
    out = sigma_c2 / (config.n * n_t) * ratio.sum(axis=-1)
    return out[()] if out.ndim == 0 else out


def chirp_spectrum_analytic(lambda1_bar: float, f):
    """Stationary-phase spectrum of the unlimited chirp ``exp(j 2 pi lb t^2)``.

    ``W(f) = (1 + j) / (2 sqrt(lb)) exp(-j pi f^2 / (2 lb))``. The zero chirp
    rate corresponds to a Dirac delta, which has no pointwise value; callers
    handle that case by skipping the convolution.
    """
    if lambda1_bar < 0:
        raise ValueError("chirp rate must be non-negative")
    if lambda1_bar == 0:
        raise ValueError("zero chirp rate: W is a Dirac delta, use P directly")
    f = np.asarray(f, dtype=float)
    return (1 + 1j) / (2 * np.sqrt(lambda1_bar)) * np.exp(-1j * np.pi * f * f / (2 * lambda1_bar))


def chirped_pulse_spectrum(config: WaveformConfig, f, window: Optional[float] = None) -> np.ndarray:
    """Spectrum of the chirped pulse, i.e. ``P * W`` with a frame-limited chirp.

    The chirp is limited to ``|t| <= window / 2`` (one frame ``N_T T_s`` by
    default), so the convolution is the Fourier transform of
    ``p(t) exp(j 2 pi lb t^2)`` over that window, computed by composite
    Gauss-Legendre quadrature. With zero chirp rate the pulse spectrum is
    returned unchanged.
    """
    f = np.asarray(f, dtype=float)
    lb = config.chirp_rate
    if lb == 0:
        return np.asarray(pulse_spectrum(config.pulse, config.t_s, f), dtype=complex)
    t_s = config.t_s
    half = 0.5 * (config.n_total * t_s if window is None else window)
    sup = config.pulse.support_halfwidth(t_s)
    if sup is not None:
        half = min(half, sup)
    n_seg = max(16, int(np.ceil(4 * half / t_s)))
    edges = np.linspace(-half, half, n_seg + 1)
    mid = 0.5 * (edges[1:] + edges[:-1])
    rad = 0.5 * (edges[1:] - edges[:-1])
    tq = (mid[:, None] + rad[:, None] * _GL_NODES[None, :]).ravel()
    wq = (rad[:, None] * _GL_WEIGHTS[None, :]).ravel()
    g = _untruncated_time(config.pulse, t_s, tq) * np.exp(2j * np.pi * lb * tq * tq) * wq
    flat = f.ravel()
    out = np.empty(flat.shape, dtype=complex)
    chunk = max(1, 4_000_000 // tq.size)
    for s in range(0, flat.size, chunk):
        fs = flat[s:s + chunk]
        out[s:s + chunk] = np.exp(-2j * np.pi * fs[:, None] * tq[None, :]) @ g
    return out.reshape(f.shape)


def analytic_psd(config: WaveformConfig, sigma_c2: float, freqs=None,
                 active: Optional[ActiveSet] = None, normalized: bool = False) -> PsdGrid:
    """Analytic transmit PSD ``(1 / T_s) S_x(f) |(P * W)(f)|^2``."""
    freqs = frequency_grid(config) if freqs is None else np.asarray(freqs, dtype=float)
    active = active or config.active_set()
    if normalized:
        sx = data_psd(config, config.n * config.n_total, freqs, active)
    else:
        sx = data_psd(config, sigma_c2, freqs, active)
    pw = chirped_pulse_spectrum(config, freqs)
    return PsdGrid(freqs, sx * np.abs(pw) ** 2 / config.t_s, normalized)


def welch_psd(samples, sample_rate: float, segment_len: int, overlap: float = 0.5) -> PsdGrid:
    """Two-sided Hann-window averaged periodogram (density scaling)."""
    x = np.asarray(samples, dtype=complex)
    if x.size == 0:
        raise ValueError("empty input")
    if segment_len > x.size:
        raise ValueError("segment_len exceeds the number of samples")
    if not 0.0 <= overlap < 1.0:
        raise ValueError("overlap must lie in [0, 1)")
    f, pxx = sps.welch(x, fs=sample_rate, window="hann", nperseg=segment_len,
                       noverlap=int(round(overlap * segment_len)), detrend=False,
                       return_onesided=False, scaling="density")
    return PsdGrid(np.fft.fftshift(f), np.fft.fftshift(pxx))


def _integral_between(freqs, values, lo, hi):
    """Trapezoidal integral of the sampled PSD over ``[lo, hi]``."""
    inner = (freqs > lo) & (freqs < hi)
    xs = np.concatenate(([lo], freqs[inner], [hi]))
    ys = np.concatenate(([np.interp(lo, freqs, values)], values[inner], [np.interp(hi, freqs, values)]))
    return float(np.trapezoid(ys, xs))


def oob_energy(psd: PsdGrid, band: float) -> float:
    """Fraction of power outside ``[-band/2, band/2]`` in dB (floored at -120 dB)."""
    f, v = psd.freqs, psd.values
    if band <= 0:
        raise ValueError("band must be positive")
    if band / 2 >= min(-f[0], f[-1]):
        raise ValueError("band exceeds the frequency grid extent")
    total = float(np.trapezoid(v, f))
    if total <= 0:
        raise ValueError("PSD has no power")
    inside = _integral_between(f, v, -band / 2, band / 2)
    ratio = max(total - inside, 0.0) / total
    if ratio <= 10 ** (OOB_FLOOR_DB / 10):
        return OOB_FLOOR_DB
    return float(10 * np.log10(ratio))
