"""Doubly-selective channels and their effective DAFT-domain matrices.

Index conventions: matrices are indexed ``H[p, q]`` with ``p`` the output
(observation) position and ``q`` the input (symbol) position, both in the
natural DAFT order 0..N-1. A symbol position ``q`` corresponds to the
physical subcarrier ``m`` in [-N/2, N/2) with ``q = m mod N``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from .transforms import build_daft_matrix, chirp_vector
from .waveform import ActiveSet, WaveformConfig, pulse_spectrum

SPEED_OF_LIGHT = 299_792_458.0
_KERNEL_EPS = 1e-12


@dataclass(frozen=True)
class ChannelPath:
    gain: complex
    delay: float
    doppler: float = 0.0

    def __post_init__(self):
        if not self.delay >= 0:
            raise ValueError(f"path delay must be non-negative, got {self.delay}")
        if not np.isfinite(complex(self.gain)):
            raise ValueError("path gain must be finite")
        object.__setattr__(self, "gain", complex(self.gain))
        object.__setattr__(self, "delay", float(self.delay))
        object.__setattr__(self, "doppler", float(self.doppler))


@dataclass(frozen=True)
class DsChannel:
    """Multipath channel with paths sorted by increasing delay."""

    paths: tuple

    def __post_init__(self):
        paths = tuple(self.paths)
        if not paths:
            raise ValueError("a channel needs at least one path")
        delays = [p.delay for p in paths]
        if any(b < a for a, b in zip(delays, delays[1:])):
            raise ValueError("paths must be sorted by ascending delay")
        object.__setattr__(self, "paths", paths)

    @classmethod
    def from_arrays(cls, gains, delays, dopplers=None) -> "DsChannel":
        gains = np.atleast_1d(np.asarray(gains, dtype=complex))
        delays = np.atleast_1d(np.asarray(delays, dtype=float))
        dopplers = np.zeros_like(delays) if dopplers is None else np.atleast_1d(np.asarray(dopplers, dtype=float))
        order = np.argsort(delays, kind="stable")
        return cls(tuple(ChannelPath(gains[i], delays[i], dopplers[i]) for i in order))

    @classmethod
    def identity(cls) -> "DsChannel":
        return cls((ChannelPath(1.0, 0.0, 0.0),))

    @property
    def n_paths(self) -> int:
        return len(self.paths)

    @property
    def gains(self) -> np.ndarray:
        return np.array([p.gain for p in self.paths])

    @property
    def delays(self) -> np.ndarray:
        return np.array([p.delay for p in self.paths])

    @property
    def dopplers(self) -> np.ndarray:
        return np.array([p.doppler for p in self.paths])

    def csv_rows(self) -> List[str]:
        """Rows ``l,gain_re,gain_im,delay_s,doppler_hz`` (header first)."""
        rows = ["l,gain_re,gain_im,delay_s,doppler_hz"]
        for i, p in enumerate(self.paths):
            rows.append(f"{i},{p.gain.real:.17g},{p.gain.imag:.17g},{p.delay:.17g},{p.doppler:.17g}")
        return rows


@dataclass(frozen=True)
class PnCfoParams:
    """Linear phase-noise model ``phi0 + phi1 (t - tau_ref)`` plus a carrier offset in Hz."""

    phi0: float = 0.0
    phi1: float = 0.0
    cfo: float = 0.0

    def __post_init__(self):
        if not all(np.isfinite([self.phi0, self.phi1, self.cfo])):
            raise ValueError("impairment parameters must be finite")


@dataclass(frozen=True)
class SjParams:
    """Linear sampling-jitter model: offset ``delta0`` (s) and clock skew ``delta1``."""

    delta0: float = 0.0
    delta1: float = 0.0

    def __post_init__(self):
        if not np.isfinite(self.delta0) or not abs(self.delta1) < 1:
            raise ValueError("delta0 must be finite and |delta1| < 1")


@dataclass(frozen=True)
class EffectiveChannel:
    h: np.ndarray
    variant: str = "ideal"
    active: Optional[ActiveSet] = field(default=None, repr=False)

    def __post_init__(self):
        h = np.asarray(self.h, dtype=complex)
        if h.ndim != 2 or h.shape[0] != h.shape[1]:
            raise ValueError("effective channel must be a square matrix")
        if not np.all(np.isfinite(h)):
            raise ValueError("effective channel has non-finite entries")
        object.__setattr__(self, "h", h)

    @property
    def n(self) -> int:
        return self.h.shape[0]

    def active_mask(self) -> np.ndarray:
        if self.active is None:
            return np.ones(self.n, dtype=bool)
        return self.active.mask()

    def submatrix(self) -> np.ndarray:
        """Columns of the active carriers (all rows are observed)."""
        return self.h[:, self.active_mask()]


@dataclass(frozen=True)
class NormalizedPath:
    gain: complex      # complex gain referred to the sampling origin
    f_tau: float       # (tau_ref - tau_l) / (N T_s)
    f_nu: float        # nu_l / delta_f


def dirichlet_kernel(order: int, theta):
    """``G_X(theta) = (1/X) sum_{x<X} exp(-j 2 pi theta x)`` with the limit value 1 at integers."""
    if order < 1:
        raise ValueError("kernel order must be >= 1")
    theta = np.asarray(theta, dtype=float)
    # The kernel has period 1; reducing theta first keeps the ratio below
    # well conditioned near integers, where the plain quotient of
    # exponentials loses digits.
    red = theta - np.rint(theta)
    small = np.abs(np.exp(-2j * np.pi * red) - 1.0) < _KERNEL_EPS
    safe = np.where(small, 0.5, red)
    ratio = np.sin(np.pi * safe * order) / (order * np.sin(np.pi * safe))
    out = np.where(small, 1.0 + 0j, np.exp(-1j * np.pi * safe * (order - 1)) * ratio)
    return out[()] if out.ndim == 0 else out


def _check_bounds(f_tau, f_nu, n):
    if np.any(np.abs(n * np.asarray(f_tau)) > n) or np.any(np.abs(n * np.asarray(f_nu)) > n):
        raise ValueError("channel violates |N F| <= N for the normalized delay or Doppler")


def normalize_paths(channel: DsChannel, config: WaveformConfig) -> List[NormalizedPath]:
    """Normalized delays, Dopplers and sampling-referred gains.

    The largest delay is the timing reference. The gain of path ``l`` is
    ``a_l exp(j 2 pi lb tau_l^2) exp(-j 2 pi nu_l tau_l)`` rotated by the
    reference phases ``exp(j 2 pi lb tau_ref^2) exp(j 2 pi (nu_l - 2 lb tau_l) tau_ref)``.
    """
    t_s, n = config.t_s, config.n
    lb = config.chirp_rate
    tau = channel.delays
    nu = channel.dopplers
    ref = tau[-1]
    a_tilde = channel.gains * np.exp(2j * np.pi * lb * tau ** 2) * np.exp(-2j * np.pi * nu * tau)
    a_breve = a_tilde * np.exp(2j * np.pi * lb * ref ** 2) * np.exp(2j * np.pi * (nu - 2 * lb * tau) * ref)
    f_tau = (ref - tau) / (n * t_s)
    f_nu = nu / config.delta_f
    _check_bounds(f_tau, f_nu, n)
    return [NormalizedPath(complex(a), float(ft), float(fn)) for a, ft, fn in zip(a_breve, f_tau, f_nu)]


def carrier_weights(config: WaveformConfig, active: ActiveSet) -> np.ndarray:
    """Per-column pulse factor ``P(m df) U*(m df) / T_s`` over natural indices.

    The receive filter is flat (``U = sqrt(T_s)``) across the band it is
    designed to cover, so the factor reduces to ``P(m df) / sqrt(T_s)``,
    equal to one on the flat top of the RRC pulse. Suppressed columns are 0.
    """
    w = np.zeros(config.n, dtype=complex)
    m = active.centered
    w[active.natural] = pulse_spectrum(config.pulse, config.t_s, m * config.delta_f) / np.sqrt(config.t_s)
    return w


def _assemble(config: WaveformConfig, active: ActiveSet, gains, eps, phase_tau):
    """Sum of per-path Dirichlet-kernel matrices.

    ``H[p, q] = w_q exp(j 2 pi lambda2 (q^2 - p^2)) sum_l g_l exp(j 2 pi m_q phase_tau_l)
    G_N((p - q)/N - eps_l)``.
    """
    n = config.n
    p_idx = np.arange(n)
    q_idx = np.arange(n)
    m_c = np.where(q_idx >= n // 2, q_idx - n, q_idx)
    diff = (p_idx[:, None] - q_idx[None, :]) / n
    acc = np.zeros((n, n), dtype=complex)
    for g, e, ft in zip(gains, eps, phase_tau):
        acc += g * np.exp(2j * np.pi * m_c * ft)[None, :] * dirichlet_kernel(n, diff - e)
    l2 = chirp_vector(n, config.daft.lambda2)
    outer = l2[:, None] * np.conj(l2)[None, :]
    return outer * acc * carrier_weights(config, active)[None, :]


def _eps(config: WaveformConfig, f_tau, f_nu):
    n = config.n
    return np.asarray(f_nu) / n + 2 * config.daft.lambda1 * n * np.asarray(f_tau)


def effective_channel_ideal(channel: DsChannel, config: WaveformConfig,
                            active: Optional[ActiveSet] = None) -> EffectiveChannel:
    """Effective DAFT-domain channel of the continuous-time link without impairments."""
    active = active or config.active_set()
    paths = normalize_paths(channel, config)
    gains = [p.gain for p in paths]
    f_tau = np.array([p.f_tau for p in paths])
    f_nu = np.array([p.f_nu for p in paths])
    h = _assemble(config, active, gains, _eps(config, f_tau, f_nu), f_tau)
    return EffectiveChannel(h, "ideal", active)


def effective_channel_pn_cfo(channel: DsChannel, config: WaveformConfig,
                             active: Optional[ActiveSet] = None,
                             imp: PnCfoParams = PnCfoParams()) -> EffectiveChannel:
    """Effective channel with linear phase noise and a carrier frequency offset.

    The phase ramp ``phi1`` and the offset ``cfo`` both act as an extra
    frequency ``cfo + phi1 / (2 pi)`` that shifts every kernel by
    ``(cfo + phi1 / (2 pi)) T_s``. The constant phase ``phi0`` and the offset
    accrued up to the sampling origin multiply all gains.
    """
    active = active or config.active_set()
    paths = normalize_paths(channel, config)
    ref = channel.delays[-1]
    common = np.exp(1j * imp.phi0) * np.exp(2j * np.pi * imp.cfo * ref)
    gains = [p.gain * common for p in paths]
    f_tau = np.array([p.f_tau for p in paths])
    f_nu = np.array([p.f_nu for p in paths])
    shift = imp.cfo / config.delta_f / config.n + imp.phi1 * config.t_s / (2 * np.pi)
    h = _assemble(config, active, gains, _eps(config, f_tau, f_nu) + shift, f_tau)
    return EffectiveChannel(h, "pn_cfo", active)


def effective_channel_sj(channel: DsChannel, config: WaveformConfig,
                         active: Optional[ActiveSet] = None,
                         imp: SjParams = SjParams()) -> EffectiveChannel:
    """Effective channel under the linear sampling-jitter approximation.

    The skew scales the normalized Doppler and the path delays inside the
    kernel argument, while the offset rotates each gain by
    ``exp(j 2 pi (nu_l - 2 lb tau_l) delta0)``. The subcarrier phase
    ``exp(j 2 pi m F_tau)`` keeps the unperturbed delay.
    """
    active = active or config.active_set()
    paths = normalize_paths(channel, config)
    lb = config.chirp_rate
    tau, nu = channel.delays, channel.dopplers
    ref = tau[-1]
    gains = [p.gain * np.exp(2j * np.pi * (v - 2 * lb * t) * imp.delta0)
             for p, v, t in zip(paths, nu, tau)]
    f_tau = np.array([p.f_tau for p in paths])
    f_nu_sj = np.array([p.f_nu for p in paths]) * (1 + imp.delta1)
    f_tau_sj = (ref - tau * (1 + imp.delta1)) / (config.n * config.t_s)
    h = _assemble(config, active, gains, _eps(config, f_tau_sj, f_nu_sj), f_tau)
    return EffectiveChannel(h, "sj", active)


def dt_reference_channel(channel: DsChannel, config: WaveformConfig) -> EffectiveChannel:
    """Discrete-time reference model with delays rounded to whole samples.

    The received samples are
    ``r_n = sum_l a_l exp(j 2 pi nu_l (n + D - d_l) T_s) xbar_{n + D - d_l}``
    with ``d_l = round(tau_l / T_s)``, ``D = max d_l`` and ``xbar`` the
    chirp-periodic extension of the transmitted sequence. All N carriers are
    active and no pulse shaping is modelled.
    """
    n, t_s = config.n, config.t_s
    lam1 = config.daft.lambda1
    d = np.rint(channel.delays / t_s).astype(int)
    big_d = int(d.max())
    if big_d > config.n_cpp:
        raise ValueError("rounded delay exceeds the prefix length")
    h_time = np.zeros((n, n), dtype=complex)
    rows = np.arange(n)
    for a, dl, nu in zip(channel.gains, d, channel.dopplers):
        j = rows + big_d - dl
        wrap = j >= n
        src = np.where(wrap, j - n, j)
        # Chirp-periodic wrap: xbar_{k+N} = x_k exp(j 2 pi lambda1 (N^2 + 2 k N)).
        phase = np.where(wrap, np.exp(2j * np.pi * lam1 * (n * n + 2.0 * src * n)), 1.0)
        dop = np.exp(2j * np.pi * nu * (rows + big_d - dl) * t_s)
        h_time[rows, src] += a * dop * phase
    amat = build_daft_matrix(config.daft)
    return EffectiveChannel(amat @ h_time @ amat.conj().T, "dt_reference", ActiveSet.full(n))


def impulse_response(h_eff: EffectiveChannel) -> np.ndarray:
    """Response to a unit symbol on the central subcarrier, in centered order.

    The input is the subcarrier ``m = 0`` (natural index 0), which is active
    for every pulse considered here, and the output is reordered so that the
    excited carrier sits at position ``N // 2``.
    """
    return np.fft.fftshift(h_eff.h[:, 0])


def count_clusters(h_ir, rel_threshold: float = 0.2, min_gap: int = 1) -> int:
    """Number of separated energy clusters in an impulse response.

    A cluster is a maximal circular run of taps whose magnitude exceeds
    ``rel_threshold`` times the peak; runs closer than ``min_gap`` taps are
    merged. Runs separated by a single dip below threshold therefore count
    as distinct clusters.
    """
    mag = np.abs(np.asarray(h_ir))
    above = mag >= rel_threshold * mag.max()
    if above.all():
        return 1
    # Rotate so that the sequence starts below threshold.
    start = int(np.flatnonzero(~above)[0])
    seq = np.roll(above, -start)
    runs = []
    i = 0
    while i < seq.size:
        if seq[i]:
            j = i
            while j < seq.size and seq[j]:
                j += 1
            runs.append((i, j))
            i = j
        else:
            i += 1
    merged = []
    for r in runs:
        if merged and r[0] - merged[-1][1] < min_gap:
            merged[-1] = (merged[-1][0], r[1])
        else:
            merged.append(r)
    return len(merged)


def max_doppler(v_kmh: float, f_c: float) -> float:
    """Maximum Doppler shift in Hz for a speed in km/h."""
    return v_kmh / 3.6 * f_c / SPEED_OF_LIGHT


def sample_realization(rng_seed, n_paths: int, delay_spread: float = 0.5e-6,
                       pdp_decay_db: float = 10.0, v_max_kmh: float = 0.0,
                       f_c: float = 5.8e9, delays: Optional[Sequence[float]] = None) -> DsChannel:
    """Random tapped-delay-line channel with an exponential power profile.

    The first tap sits at zero delay and the others are uniform in
    ``[0, delay_spread]`` unless ``delays`` is given. Mean tap power falls
    linearly in dB with delay, reaching ``-pdp_decay_db`` at
    ``delay_spread``. Gains are complex Gaussian and rescaled to unit total
    power; each tap gets one Doppler shift ``nu_max cos(theta)`` with a
    uniform angle.

    Args:
        rng_seed: Anything accepted by :func:`numpy.random.default_rng`,
            e.g. an integer or a tuple ``(seed, trial)``.
        n_paths: Number of taps L.
        delay_spread: Maximum excess delay in seconds.
        pdp_decay_db: Power decay across the delay spread in dB.
        v_max_kmh: Maximum speed in km/h.
        f_c: Carrier frequency in Hz.
        delays: Optional explicit tap delays in seconds.
    """
    if n_paths < 1:
        raise ValueError("n_paths must be >= 1")
    seed = list(rng_seed) if isinstance(rng_seed, (tuple, list)) else rng_seed
    rng = np.random.default_rng(seed)
    if delays is None:
        tau = np.sort(np.concatenate(([0.0], rng.uniform(0.0, delay_spread, n_paths - 1))))
    else:
        tau = np.sort(np.asarray(delays, dtype=float))
        if tau.size != n_paths:
            raise ValueError("len(delays) must equal n_paths")
    span = delay_spread if delay_spread > 0 else 1.0
    power = 10 ** (-pdp_decay_db * tau / span / 10)
    g = (rng.standard_normal(n_paths) + 1j * rng.standard_normal(n_paths)) * np.sqrt(power / 2)
    g = g / np.sqrt(np.sum(np.abs(g) ** 2))
    theta = rng.uniform(0.0, 2 * np.pi, n_paths)
    nu = max_doppler(v_max_kmh, f_c) * np.cos(theta)
    return DsChannel.from_arrays(g, tau, nu)
