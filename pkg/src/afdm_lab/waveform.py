"""Pulse shapes, active-subcarrier selection and continuous-time frame synthesis.

A frame is represented by its samples on a uniform grid of step
``T_s / N_c`` covering ``[-N_cpp T_s, N T_s)``. Two synthesis routes are
provided: a time-domain pulse-amplitude-modulation sum over the
chirp-periodic sequence, and a frequency-domain sum over chirped
subcarriers. They agree whenever the pulse spectrum has no overlapping
replicas on the active carriers.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .transforms import DaftParams, chirp_extend, idaft

PULSE_KINDS = ("rrc", "gaussian", "rect")

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(48)


@dataclass(frozen=True)
class PulseShape:
    """Transmit pulse description.

    Attributes:
        kind: ``"rrc"``, ``"gaussian"`` or ``"rect"``.
        rolloff: Roll-off factor of the root-raised-cosine pulse.
        bandwidth: Two-sided 3-dB bandwidth (Hz) of ``|P(f)|^2`` for the
            Gaussian pulse.
        duration: Duration (s) of the rectangular pulse.
        truncation: Optional odd number of symbol periods ``L_p``; the pulse is
            then limited to ``|t| <= L_p T_s / 2``.
    """

    kind: str = "rrc"
    rolloff: float = 0.25
    bandwidth: Optional[float] = None
    duration: Optional[float] = None
    truncation: Optional[int] = None

    def __post_init__(self):
        if self.kind not in PULSE_KINDS:
            raise ValueError(f"unknown pulse kind {self.kind!r}; expected one of {PULSE_KINDS}")
        if self.kind == "rrc" and not 0.0 < self.rolloff <= 1.0:
            raise ValueError(f"rolloff must lie in (0, 1], got {self.rolloff}")
        if self.kind == "gaussian" and (self.bandwidth is None or self.bandwidth <= 0):
            raise ValueError("gaussian pulse needs a positive bandwidth")
        if self.kind == "rect" and (self.duration is None or self.duration <= 0):
            raise ValueError("rectangular pulse needs a positive duration")
        if self.truncation is not None:
            if int(self.truncation) != self.truncation or self.truncation < 1 or self.truncation % 2 == 0:
                raise ValueError(f"truncation L_p must be a positive odd integer, got {self.truncation}")

    def support_halfwidth(self, t_s: float) -> Optional[float]:
        """Half-width of the time support, or ``None`` for infinite support."""
        half = None
        if self.kind == "rect":
            half = 0.5 * self.duration
        if self.truncation is not None:
            lim = 0.5 * self.truncation * t_s
            half = lim if half is None else min(half, lim)
        return half


@dataclass(frozen=True)
class ActiveSet:
    """Active subcarriers in centered indexing ``m in [-N/2, N/2)``."""

    indices: tuple
    n: int

    def __post_init__(self):
        idx = tuple(sorted(int(i) for i in self.indices))
        if len(set(idx)) != len(idx):
            raise ValueError("duplicate active indices")
        if idx and (idx[0] < -self.n // 2 or idx[-1] >= self.n // 2):
            raise ValueError("active indices must lie in [-N/2, N/2)")
        object.__setattr__(self, "indices", idx)

    @property
    def n_u(self) -> int:
        return len(self.indices)

    @property
    def centered(self) -> np.ndarray:
        return np.asarray(self.indices, dtype=int)

    @property
    def natural(self) -> np.ndarray:
        """Positions of the active carriers in the DAFT vector (0..N-1)."""
        return np.mod(self.centered, self.n)

    def mask(self) -> np.ndarray:
        """Boolean mask over natural DAFT indices."""
        out = np.zeros(self.n, dtype=bool)
        out[self.natural] = True
        return out

    def embed(self, values) -> np.ndarray:
        """Place ``n_u`` values (ordered by centered index) into a length-N vector."""
        values = np.asarray(values, dtype=complex)
        if values.shape[0] != self.n_u:
            raise ValueError(f"expected {self.n_u} values, got {values.shape[0]}")
        out = np.zeros((self.n,) + values.shape[1:], dtype=complex)
        out[self.natural] = values
        return out

    @classmethod
    def full(cls, n: int) -> "ActiveSet":
        return cls(tuple(range(-n // 2, n // 2)), n)


@dataclass(frozen=True)
class WaveformConfig:
    """Parameters of a continuous-time AFDM frame.

    The sample period is derived as ``T_s = 1 / (N delta_f)``.
    """

    daft: DaftParams
    delta_f: float = 15e3
    n_cpp: int = 4
    oversample: int = 10
    pulse: PulseShape = field(default_factory=PulseShape)
    tolerance: float = 0.4

    def __post_init__(self):
        if not self.delta_f > 0:
            raise ValueError("delta_f must be positive")
        if int(self.n_cpp) != self.n_cpp or self.n_cpp < 0:
            raise ValueError("n_cpp must be a non-negative integer")
        if int(self.oversample) != self.oversample or self.oversample < 2:
            raise ValueError("oversample must be an integer >= 2")
        if not 0.0 < self.tolerance < 1.0:
            raise ValueError("tolerance must lie in (0, 1)")

    @property
    def n(self) -> int:
        return self.daft.n

    @property
    def t_s(self) -> float:
        return 1.0 / (self.daft.n * self.delta_f)

    @property
    def period(self) -> float:
        """Chirp period ``T = N T_s``."""
        return self.daft.n * self.t_s

    @property
    def n_total(self) -> int:
        return self.daft.n + self.n_cpp

    @property
    def chirp_rate(self) -> float:
        """Continuous chirp rate ``lambda1 / T_s^2`` in Hz^2."""
        return self.daft.lambda1 / self.t_s ** 2

    def active_set(self) -> ActiveSet:
        return active_subcarriers(self.pulse, self.n, self.tolerance, self.t_s)


@dataclass(frozen=True)
class Frame:
    """Oversampled baseband frame."""

    t: np.ndarray
    samples: np.ndarray
    config: WaveformConfig = field(repr=False)

    @property
    def step(self) -> float:
        return self.config.t_s / self.config.oversample


# ----------------------------------------------------------------------------
# Pulses
# ----------------------------------------------------------------------------

def _rrc_time(t, t_s, alpha):
    x = np.asarray(t, dtype=float) / t_s
    out = np.empty_like(x)
    at_zero = np.abs(x) < 1e-12
    at_sing = np.abs(np.abs(x) - 1.0 / (4 * alpha)) < 1e-9
    reg = ~(at_zero | at_sing)
    xr = x[reg]
    num = np.sin(np.pi * xr * (1 - alpha)) + 4 * alpha * xr * np.cos(np.pi * xr * (1 + alpha))
    den = np.pi * xr * (1 - (4 * alpha * xr) ** 2)
    out[reg] = num / den
    out[at_zero] = 1 - alpha + 4 * alpha / np.pi
    out[at_sing] = alpha / np.sqrt(2) * (
        (1 + 2 / np.pi) * np.sin(np.pi / (4 * alpha)) + (1 - 2 / np.pi) * np.cos(np.pi / (4 * alpha))
    )
    return out / np.sqrt(t_s)


def _rrc_spectrum(f, t_s, alpha):
    af = np.abs(np.asarray(f, dtype=float))
    lo = (1 - alpha) / (2 * t_s)
    hi = (1 + alpha) / (2 * t_s)
    out = np.zeros_like(af)
    out[af <= lo] = 1.0
    roll = (af > lo) & (af <= hi)
    out[roll] = np.cos(np.pi * t_s / (2 * alpha) * (af[roll] - lo))
    return np.sqrt(t_s) * out


def _gauss_coeff(pulse: PulseShape) -> float:
    # |P(f)|^2 drops by 3 dB at f = bandwidth / 2.
    return 2.0 * np.log(2.0) / pulse.bandwidth ** 2


def _untruncated_time(pulse: PulseShape, t_s: float, t) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    if pulse.kind == "rrc":
        return _rrc_time(t, t_s, pulse.rolloff)
    if pulse.kind == "gaussian":
        a = _gauss_coeff(pulse)
        return np.sqrt(t_s) * np.sqrt(np.pi / a) * np.exp(-np.pi ** 2 * t * t / a)
    half = 0.5 * pulse.duration
    val = np.sqrt(t_s) / pulse.duration
    out = np.where(np.abs(t) < half, val, 0.0)
    return np.where(np.isclose(np.abs(t), half, rtol=0, atol=1e-15 * max(half, 1e-300)), 0.5 * val, out)


def _untruncated_spectrum(pulse: PulseShape, t_s: float, f) -> np.ndarray:
    f = np.asarray(f, dtype=float)
    if pulse.kind == "rrc":
        return _rrc_spectrum(f, t_s, pulse.rolloff).astype(complex)
    if pulse.kind == "gaussian":
        return (np.sqrt(t_s) * np.exp(-_gauss_coeff(pulse) * f * f)).astype(complex)
    return (np.sqrt(t_s) * np.sinc(f * pulse.duration)).astype(complex)


def pulse_time(pulse: PulseShape, t_s: float, t) -> np.ndarray:
    """Pulse impulse response ``p(t)``, including truncation if requested."""
    t = np.asarray(t, dtype=float)
    out = _untruncated_time(pulse, t_s, t)
    if pulse.truncation is not None:
        out = np.where(np.abs(t) <= 0.5 * pulse.truncation * t_s, out, 0.0)
    return out


def _numeric_spectrum(pulse: PulseShape, t_s: float, f, half: float) -> np.ndarray:
    """Fourier transform of the time-limited pulse by composite Gauss-Legendre."""
    f = np.asarray(f, dtype=float)
    n_seg = max(8, int(np.ceil(2 * half / t_s)) * 2)
    edges = np.linspace(-half, half, n_seg + 1)
    mid = 0.5 * (edges[1:] + edges[:-1])
    rad = 0.5 * (edges[1:] - edges[:-1])
    tq = (mid[:, None] + rad[:, None] * _GL_NODES[None, :]).ravel()
    wq = (rad[:, None] * _GL_WEIGHTS[None, :]).ravel()
    pq = _untruncated_time(pulse, t_s, tq) * wq
    flat = f.ravel()
    out = np.empty(flat.shape, dtype=complex)
    chunk = max(1, 4_000_000 // tq.size)
    for s in range(0, flat.size, chunk):
        fs = flat[s:s + chunk]
        out[s:s + chunk] = np.exp(-2j * np.pi * fs[:, None] * tq[None, :]) @ pq
    return out.reshape(f.shape)


def pulse_spectrum(pulse: PulseShape, t_s: float, f) -> np.ndarray:
    """Pulse spectrum ``P(f)`` normalized so that ``P(0) = sqrt(T_s)`` before truncation.

    Analytic for untruncated pulses; truncated pulses are transformed
    numerically from their windowed impulse response.
    """
    if pulse.truncation is None:
        out = _untruncated_spectrum(pulse, t_s, f)
    else:
        half = pulse.support_halfwidth(t_s)
        if pulse.kind == "rect" and half >= 0.5 * pulse.duration:
            out = _untruncated_spectrum(pulse, t_s, f)
        else:
            out = _numeric_spectrum(pulse, t_s, f, half)
    return out[()] if np.ndim(out) == 0 else out


def active_subcarriers(pulse: PulseShape, n: int, tolerance: float = 0.4,
                       t_s: float = 1.0) -> ActiveSet:
    """Select the usable subcarriers for a pulse.

    For the RRC pulse the tolerance is ignored and the ``2 N_a + 1`` centered
    carriers with ``N_a = floor(N (1 - alpha) / 2)`` are returned. For other
    pulses a carrier ``m`` is kept when ``|P(m df)| >= eps * max|P|`` and every
    replica ``|P((m + kN) df)|`` for ``|k|`` in {1, 2} stays below
    ``(1 - eps) * eps * max|P|``.

    Args:
        pulse: Pulse shape.
        n: Transform order N (even).
        tolerance: Tolerance ``eps`` in (0, 1).
        t_s: Sample period; only matters for pulses whose spectrum is not a
            function of ``f T_s`` alone.
    """
    if n % 2:
        raise ValueError("n must be even")
    if not 0.0 < tolerance < 1.0:
        raise ValueError(f"tolerance must lie in (0, 1), got {tolerance}")
    if pulse.kind == "rrc" and pulse.truncation is None:
        n_alpha = int(np.floor(n * (1 - pulse.rolloff) / 2 + 1e-9))
        n_alpha = min(n_alpha, n // 2 - 1)
        return ActiveSet(tuple(range(-n_alpha, n_alpha + 1)), n)
    if pulse.kind == "rrc":
        # Truncation perturbs the spectrum only slightly; keep the nominal set.
        return active_subcarriers(PulseShape("rrc", pulse.rolloff), n, tolerance, t_s)
    df = 1.0 / (n * t_s)
    m = np.arange(-n // 2, n // 2)
    mag = np.abs(pulse_spectrum(pulse, t_s, m * df))
    peak = float(np.abs(pulse_spectrum(pulse, t_s, 0.0)))
    peak = max(peak, float(mag.max()))
    keep = mag >= tolerance * peak
    floor = (1 - tolerance) * tolerance * peak
    for k in (-2, -1, 1, 2):
        keep &= np.abs(pulse_spectrum(pulse, t_s, (m + k * n) * df)) < floor
    return ActiveSet(tuple(int(v) for v in m[keep]), n)


# ----------------------------------------------------------------------------
# Synthesis
# ----------------------------------------------------------------------------

def frame_grid(config: WaveformConfig, n_periods: int = 1) -> np.ndarray:
    """Uniform grid ``i T_s / N_c`` covering ``[-N_cpp T_s, n_periods N T_s)``."""
    nc = config.oversample
    i = np.arange(-config.n_cpp * nc, n_periods * config.n * nc)
    return i * (config.t_s / nc)


def check_active(config: WaveformConfig, c, active: Optional[ActiveSet] = None) -> np.ndarray:
    """Validate a symbol vector against the active set and return it as an array."""
    c = np.asarray(c, dtype=complex)
    if c.shape != (config.n,):
        raise ValueError(f"symbol vector must have length {config.n}")
    active = active or config.active_set()
    off = ~active.mask()
    scale = max(1.0, float(np.max(np.abs(c))) if c.size else 1.0)
    if np.any(np.abs(c[off]) > 1e-12 * scale):
        bad = np.flatnonzero(off & (np.abs(c) > 1e-12 * scale))
        raise ValueError(f"nonzero symbols on suppressed carriers at indices {bad.tolist()}")
    return c


def _periodized_pulse(pulse: PulseShape, config: WaveformConfig, tau) -> np.ndarray:
    """``sum_i p(tau - i T)`` evaluated from the pulse spectrum (Poisson summation)."""
    period = config.period
    if pulse.kind == "rrc":
        n_max = int(np.ceil(period * (1 + pulse.rolloff) / (2 * config.t_s))) + 1
    else:
        a = _gauss_coeff(pulse)
        n_max = int(np.ceil(period * np.sqrt(np.log(1e40) / a))) + 1
    harm = np.arange(-n_max, n_max + 1)
    coef = _untruncated_spectrum(pulse, config.t_s, harm / period) / period
    tau = np.asarray(tau, dtype=float)
    return np.exp(2j * np.pi * np.multiply.outer(tau, harm) / period) @ coef


def synthesize_td(config: WaveformConfig, c, n_periods: int = 1,
                  active: Optional[ActiveSet] = None) -> Frame:
    """Time-domain synthesis as a pulse-amplitude-modulated chirp-periodic sequence.

    ``s(t) = exp(j 2 pi lb t^2) sum_k xbar_k exp(-j 2 pi lambda1 k^2) p(t - k T_s)``,
    where ``xbar`` is the chirp-periodic extension of the IDAFT output.

    Time-limited pulses use the direct sum over every index whose pulse
    overlaps the grid, including the negative indices of the prefix.
    Pulses with unbounded support are summed in closed form by periodizing
    the pulse, which is exact because the modulating sequence is N-periodic
    once the inner chirp is removed.
    """
    c = check_active(config, c, active)
    p = config.daft
    nc, t_s = config.oversample, config.t_s
    t = frame_grid(config, n_periods)
    x = idaft(c, p)
    half = config.pulse.support_halfwidth(t_s)
    if half is not None:
        k_lo = int(np.floor((t[0] - half) / t_s)) - 1
        k_hi = int(np.ceil((t[-1] + half) / t_s)) + 1
        k = np.arange(k_lo, k_hi + 1)
        xbar = chirp_extend(x, p, k)
        d = xbar * np.exp(-2j * np.pi * p.lambda1 * (k.astype(float) ** 2))
        q = np.zeros(t.size, dtype=complex)
        for kk, dk in zip(k, d):
            lo = np.searchsorted(t, kk * t_s - half - 1e-12 * t_s)
            hi = np.searchsorted(t, kk * t_s + half + 1e-12 * t_s, side="right")
            if hi > lo:
                q[lo:hi] += dk * pulse_time(config.pulse, t_s, t[lo:hi] - kk * t_s)
    else:
        k = np.arange(config.n)
        d = x * np.exp(-2j * np.pi * p.lambda1 * (k.astype(float) ** 2))
        # The periodized pulse only needs one period of offsets on the fine grid.
        offsets = np.arange(config.n * nc) * (t_s / nc)
        pt = _periodized_pulse(config.pulse, config, offsets)
        idx = np.arange(t.size) - config.n_cpp * nc
        q = np.zeros(t.size, dtype=complex)
        for kk in range(config.n):
            q += d[kk] * pt[np.mod(idx - kk * nc, config.n * nc)]
    s = np.exp(2j * np.pi * config.chirp_rate * t * t) * q
    return Frame(t=t, samples=s, config=config)


def afs_closed_form(config: WaveformConfig, c, m) -> np.ndarray:
    """Affine Fourier series coefficient of the synthesized frame at subcarrier ``m``.

    ``S_m = c_q exp(j 2 pi lambda2 q^2) P(m df) / (sqrt(N) T_s)`` with
    ``q = m mod N``; ``m`` is a physical (centered) subcarrier index, so the
    pulse is evaluated at the physical frequency while the outer chirp phase
    uses the DAFT index.
    """
    c = np.asarray(c, dtype=complex)
    m = np.asarray(m)
    q = np.mod(m, config.n)
    lam2 = config.daft.lambda2
    pm = pulse_spectrum(config.pulse, config.t_s, m * config.delta_f)
    return c[q] * np.exp(2j * np.pi * lam2 * q.astype(float) ** 2) * pm / (np.sqrt(config.n) * config.t_s)


def synthesize_fd(config: WaveformConfig, c, n_periods: int = 1,
                  active: Optional[ActiveSet] = None) -> Frame:
    """Frequency-domain synthesis as a sum of chirped subcarriers.

    Only the active carriers, each at its own physical frequency, are summed;
    spectral replicas of the pulse are ignored. The result equals
    :func:`synthesize_td` exactly when the pulse is strictly band-limited
    and the active set excludes all overlapping replicas.
    """
    active = active or config.active_set()
    c = check_active(config, c, active)
    t = frame_grid(config, n_periods)
    m = active.centered
    coef = afs_closed_form(config, c, m)
    q = np.exp(2j * np.pi * np.outer(t, m) / config.period) @ coef
    s = np.exp(2j * np.pi * config.chirp_rate * t * t) * q
    return Frame(t=t, samples=s, config=config)
