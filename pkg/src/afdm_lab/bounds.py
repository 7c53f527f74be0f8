"""Fisher information and Cramer-Rao bounds for single-path delay/Doppler estimation.

The observation model is ``y = a H(F_tau, F_nu) c + w`` with a single path,
known symbols of per-carrier power ``sigma_c2`` on ``N_u`` centered active
carriers, flat pulse factors and ``SNR = |a|^2 / sigma_w^2``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import dirichlet_kernel
from .transforms import DaftParams, chirp_vector

_R_LIMIT = 1e-8


@dataclass(frozen=True)
class CrbConfig:
    daft: DaftParams
    n_u: int
    sigma_c2: float = 1.0
    snr: float = 1.0
    f_tau: float = 0.0
    f_nu: float = 0.0

    def __post_init__(self):
        if self.n_u < 1 or self.n_u > self.daft.n or self.n_u % 2 == 0:
            raise ValueError("n_u must be odd and lie in [1, N]")
        if self.sigma_c2 <= 0 or self.snr <= 0:
            raise ValueError("sigma_c2 and snr must be positive")

    @property
    def n(self) -> int:
        return self.daft.n

    def centered_active(self) -> np.ndarray:
        half = (self.n_u - 1) // 2
        return np.arange(-half, half + 1)


def crb_validity_bound(n: int, n_u: int) -> float:
    """Largest ``lambda1`` for which the closed-form denominators stay positive."""
    return float(np.sqrt(n_u) / (np.sqrt(6) * (n - 2)))


def _channel(cfg: CrbConfig, f_tau: float, f_nu: float) -> np.ndarray:
    """Single-path effective channel restricted to the active columns."""
    n = cfg.n
    m = cfg.centered_active()
    q = np.mod(m, n)
    p = np.arange(n)
    eps = f_nu / n + 2 * cfg.daft.lambda1 * n * f_tau
    kern = dirichlet_kernel(n, (p[:, None] - q[None, :]) / n - eps)
    l2 = chirp_vector(n, cfg.daft.lambda2)
    outer = l2[:, None] * np.conj(l2[q])[None, :]
    return outer * np.exp(2j * np.pi * m * f_tau)[None, :] * kern


def _geometric_sums(r: np.ndarray, n: int):
    """``S = sum_{x<N} r^x`` and ``T = sum_{x<N} x r^x`` with their limits at ``r = 1``."""
    near = np.abs(1 - r) < _R_LIMIT
    rs = np.where(near, 0.5, r)
    s = (1 - rs ** n) / (1 - rs)
    t = rs * (1 - n * rs ** (n - 1) + (n - 1) * rs ** n) / (1 - rs) ** 2
    s = np.where(near, n, s)
    t = np.where(near, n * (n - 1) / 2, t)
    return s, t


def channel_derivatives(cfg: CrbConfig):
    """Analytic derivatives of the single-path channel with respect to ``(F_tau, F_nu)``.

    With ``theta = (p - q)/N - eps`` and ``r = exp(-j 2 pi theta)`` the kernel is
    ``S(r) / N`` and its theta-derivative is ``-j 2 pi T(r) / N``; the chain
    rule uses ``d eps / d F_tau = 2 lambda1 N`` and ``d eps / d F_nu = 1 / N``.
    """
    n = cfg.n
    m = cfg.centered_active()
    q = np.mod(m, n)
    p = np.arange(n)
    lam1 = cfg.daft.lambda1
    eps = cfg.f_nu / n + 2 * lam1 * n * cfg.f_tau
    theta = (p[:, None] - q[None, :]) / n - eps
    r = np.exp(-2j * np.pi * theta)
    s, t = _geometric_sums(r, n)
    l2 = chirp_vector(n, cfg.daft.lambda2)
    base = l2[:, None] * np.conj(l2[q])[None, :] * np.exp(2j * np.pi * m * cfg.f_tau)[None, :]
    d_tau = 2j * np.pi * base * (m[None, :] * s / n + 2 * lam1 * t)
    d_nu = 2j * np.pi * base * t / n ** 2
    return d_tau, d_nu


def _fim_from(derivs, cfg: CrbConfig) -> np.ndarray:
    scale = 2 * (cfg.n_u / cfg.n) * cfg.sigma_c2 * cfg.snr
    fim = np.empty((2, 2))
    for i, di in enumerate(derivs):
        for j, dj in enumerate(derivs):
            fim[i, j] = scale * np.real(np.vdot(dj, di))
    return 0.5 * (fim + fim.T)


def fim_analytic(cfg: CrbConfig) -> np.ndarray:
    """FIM ``2 (N_u/N) sigma_c2 SNR Re tr(dH_i dH_j^H)`` from analytic derivatives."""
    return _fim_from(channel_derivatives(cfg), cfg)


def fim_finite_difference(cfg: CrbConfig, step: float = 1e-6) -> np.ndarray:
    """Same FIM with central finite differences of the channel matrix."""
    ft, fn = cfg.f_tau, cfg.f_nu
    d_tau = (_channel(cfg, ft + step, fn) - _channel(cfg, ft - step, fn)) / (2 * step)
    d_nu = (_channel(cfg, ft, fn + step) - _channel(cfg, ft, fn - step)) / (2 * step)
    return _fim_from((d_tau, d_nu), cfg)


def fim_numeric(cfg: CrbConfig, rtol: float = 1e-6) -> np.ndarray:
    """FIM evaluated analytically and checked against finite differences.

    Raises:
        ArithmeticError: if the two evaluations differ by more than ``rtol``
            relative to the largest entry.
    """
    fa = fim_analytic(cfg)
    fd = fim_finite_difference(cfg)
    gap = np.max(np.abs(fa - fd)) / np.max(np.abs(fa))
    if gap > rtol:
        raise ArithmeticError(f"analytic and finite-difference FIM differ by {gap:.3e}")
    return fa


def crb_numeric(cfg: CrbConfig):
    """Diagonal of the inverse FIM: ``(CRB_Ftau, CRB_Fnu)``."""
    inv = np.linalg.inv(fim_numeric(cfg))
    return float(inv[0, 0]), float(inv[1, 1])


def _afdm_denominator(cfg: CrbConfig) -> float:
    n, n_u = cfg.n, cfg.n_u
    lam1 = cfg.daft.lambda1
    return n_u * (n_u / 3 - 2 * lam1 ** 2 * (n - 2) ** 2)


def crb_closed_afdm(cfg: CrbConfig):
    """Dominant-term closed forms for AFDM.

    ``CRB_Ftau = 1 / (2 pi^2 sigma_c2 SNR D)`` and
    ``CRB_Fnu = N_u / (3 pi^2 sigma_c2 SNR D)`` with
    ``D = N_u (N_u / 3 - 2 lambda1^2 (N - 2)^2)``.
    """
    lam1 = cfg.daft.lambda1
    if not 0 <= lam1 <= crb_validity_bound(cfg.n, cfg.n_u):
        raise ValueError("lambda1 lies outside the validity range of the closed forms")
    den = _afdm_denominator(cfg)
    k = np.pi ** 2 * cfg.sigma_c2 * cfg.snr
    return float(1 / (2 * k * den)), float(cfg.n_u / (3 * k * den))


def crb_closed_ofdm(cfg: CrbConfig):
    """OFDM limits ``3 / (2 pi^2 sigma_c2 SNR N_u^2)`` and ``1 / (2 pi^2 sigma_c2 SNR N_u)``."""
    k = np.pi ** 2 * cfg.sigma_c2 * cfg.snr
    return float(3 / (2 * k * cfg.n_u ** 2)), float(1 / (2 * k * cfg.n_u))
