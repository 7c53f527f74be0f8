"""Discrete affine Fourier transform and chirp-periodic sequence helpers.

The DAFT of order N with chirp parameters (lambda1, lambda2) is the unitary
matrix ``A = L2 @ F @ L1`` where ``F`` is the unitary DFT and ``L1``, ``L2``
are diagonal chirp matrices with entries ``exp(-j 2 pi lambda n^2)``.
The continuous-time counterparts (affine Fourier series and transform) are
evaluated here by quadrature on sampled signals.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np


@dataclass(frozen=True)
class DaftParams:
    """Transform order and chirp parameters.

    Attributes:
        n: Transform order N, a positive even integer.
        lambda1: Inner chirp parameter (dimensionless).
        lambda2: Outer chirp parameter (dimensionless).
    """

    n: int
    lambda1: float = 0.0
    lambda2: float = 0.0

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 2 or self.n % 2:
            raise ValueError(f"n must be a positive even integer, got {self.n!r}")
        object.__setattr__(self, "n", int(self.n))
        for name in ("lambda1", "lambda2"):
            val = float(getattr(self, name))
            if not np.isfinite(val):
                raise ValueError(f"{name} must be finite, got {val!r}")
            object.__setattr__(self, name, val)

    @classmethod
    def canonical(cls, n: int, a: int = 1, lambda2: float = 0.0) -> "DaftParams":
        """Parameters with the canonical slope ``lambda1 = a / (2 n)``."""
        if int(a) != a:
            raise ValueError("the slope index a must be an integer")
        return cls(n=n, lambda1=a / (2.0 * n), lambda2=lambda2)

    @property
    def is_ofdm(self) -> bool:
        return self.lambda1 == 0.0 and self.lambda2 == 0.0


@dataclass(frozen=True)
class ChirpFrame:
    """A length-N vector tied to the DAFT parameters it belongs to."""

    samples: np.ndarray
    params: DaftParams = field(repr=False)

    def __post_init__(self):
        arr = np.asarray(self.samples, dtype=complex)
        if arr.ndim != 1 or arr.shape[0] != self.params.n:
            raise ValueError(
                f"samples must be a vector of length {self.params.n}, got shape {arr.shape}"
            )
        object.__setattr__(self, "samples", arr)


def chirp_vector(n: int, lam: float) -> np.ndarray:
    """Diagonal of the chirp matrix, ``exp(-j 2 pi lam k^2)`` for k in [0, n)."""
    k = np.arange(n, dtype=float)
    return np.exp(-2j * np.pi * lam * k * k)


def build_daft_matrix(params: DaftParams) -> np.ndarray:
    """Dense N x N DAFT matrix.

    Only intended for tests and for building effective channel matrices;
    use :func:`daft` for transforming vectors.
    """
    n = params.n
    idx = np.arange(n)
    # Reducing m k modulo N keeps the phase argument small and exact.
    dft = np.exp(-2j * np.pi * (np.outer(idx, idx) % n) / n) / np.sqrt(n)
    return chirp_vector(n, params.lambda2)[:, None] * dft * chirp_vector(n, params.lambda1)[None, :]


def daft(r, params: DaftParams) -> np.ndarray:
    """Forward DAFT ``y = A r`` in O(N log N).

    ``r`` may be a vector or a 2-D array whose first axis has length N, in
    which case every column is transformed.
    """
    r = np.asarray(r, dtype=complex)
    n = params.n
    if r.shape[0] != n:
        raise ValueError(f"expected leading dimension {n}, got {r.shape[0]}")
    shape = (n,) + (1,) * (r.ndim - 1)
    l1 = chirp_vector(n, params.lambda1).reshape(shape)
    l2 = chirp_vector(n, params.lambda2).reshape(shape)
    return l2 * np.fft.fft(l1 * r, axis=0, norm="ortho")


def idaft(c: Union[ChirpFrame, np.ndarray], params: Optional[DaftParams] = None) -> np.ndarray:
    """Inverse DAFT ``x = A^H c``.

    Accepts either a :class:`ChirpFrame` or a raw array together with
    ``params``.
    """
    if isinstance(c, ChirpFrame):
        params = c.params
        c = c.samples
    if params is None:
        raise TypeError("params is required when c is not a ChirpFrame")
    c = np.asarray(c, dtype=complex)
    n = params.n
    if c.shape[0] != n:
        raise ValueError(f"expected leading dimension {n}, got {c.shape[0]}")
    shape = (n,) + (1,) * (c.ndim - 1)
    l1 = chirp_vector(n, params.lambda1).reshape(shape)
    l2 = chirp_vector(n, params.lambda2).reshape(shape)
    return np.conj(l1) * np.fft.ifft(np.conj(l2) * c, axis=0, norm="ortho")


def chirp_extend(x, params: DaftParams, k):
    """Chirp-periodic extension of a length-N time sequence.

    For ``k = n + l N`` with ``n`` in [0, N) the extension is
    ``x_n exp(j 2 pi lambda1 (l^2 N^2 + 2 n l N))``. Indices inside [0, N)
    return the stored samples unchanged. ``k`` may be a scalar or an
    integer array.
    """
    x = np.asarray(x, dtype=complex)
    n_ord = params.n
    k_arr = np.asarray(k)
    if not np.issubdtype(k_arr.dtype, np.integer):
        if np.any(k_arr != np.round(k_arr)):
            raise ValueError("k must be integer valued")
        k_arr = k_arr.astype(np.int64)
    n_idx = np.mod(k_arr, n_ord)
    ell = (k_arr - n_idx) // n_ord
    # Exact integer arithmetic before the float product keeps the phase accurate.
    expo = ell * ell * n_ord * n_ord + 2 * n_idx * ell * n_ord
    out = x[n_idx] * np.exp(2j * np.pi * params.lambda1 * expo.astype(float))
    out = np.where(ell == 0, x[n_idx], out)
    return out[()] if out.ndim == 0 else out


def symbol_extend(c, params: DaftParams, m):
    """Extension of the symbol vector, ``c_{q+lN} = c_q exp(-j 2 pi lambda2 (l^2 N^2 + 2 q l N))``."""
    c = np.asarray(c, dtype=complex)
    n_ord = params.n
    m_arr = np.asarray(m).astype(np.int64)
    q = np.mod(m_arr, n_ord)
    ell = (m_arr - q) // n_ord
    expo = ell * ell * n_ord * n_ord + 2 * q * ell * n_ord
    out = c[q] * np.exp(-2j * np.pi * params.lambda2 * expo.astype(float))
    out = np.where(ell == 0, c[q], out)
    return out[()] if out.ndim == 0 else out


def _uniform_step(t: np.ndarray) -> float:
    if t.ndim != 1 or t.size < 2:
        raise ValueError("time grid must be a 1-D array with at least two points")
    dt = np.diff(t)
    step = float(np.mean(dt))
    if step <= 0 or np.max(np.abs(dt - step)) > 1e-6 * step:
        raise ValueError("time grid must be uniform and increasing")
    return step


def afs_coefficient_numeric(t, samples, m, chirp_rate: float, period: float):
    """Affine Fourier series coefficient by quadrature over one chirp period.

    Computes ``(1/T) int_0^T s(t) exp(-j 2 pi (chirp_rate t^2 + m t / T)) dt``
    with the trapezoidal rule on the supplied uniform grid.

    The grid must start at or before 0 and reach T. A half-open grid that
    stops one step short of T (the natural output of frame synthesis) is
    accepted too; the missing end point is then supplied by the
    chirp-periodic continuation of the first sample, which makes the rule
    identical to the trapezoid on the closed interval for chirp-periodic
    signals.

    Args:
        t: Uniform time grid in seconds.
        samples: Signal values on ``t``.
        m: Coefficient index, scalar or array.
        chirp_rate: Chirp rate in Hz^2 (``lambda1 / T_s^2``).
        period: Chirp period T in seconds.

    Returns:
        Complex coefficient(s) with the shape of ``m``.
    """
    t = np.asarray(t, dtype=float)
    s = np.asarray(samples, dtype=complex)
    dt = _uniform_step(t)
    tol = 1e-6 * dt
    if t[0] > tol:
        raise ValueError("grid does not cover the start of the period")
    sel = (t >= -tol) & (t <= period + tol)
    ts, ss = t[sel], s[sel]
    if ts.size < 2 or ts[0] > tol:
        raise ValueError("grid does not cover the period")
    if abs(ts[-1] - period) <= tol:
        closed = True
    elif abs(ts[-1] + dt - period) <= tol:
        closed = False
    else:
        raise ValueError("grid does not cover the full period")
    m_arr = np.atleast_1d(np.asarray(m, dtype=float))
    basis_phase = chirp_rate * ts[None, :] ** 2 + m_arr[:, None] * ts[None, :] / period
    integrand = ss[None, :] * np.exp(-2j * np.pi * basis_phase)
    if closed:
        total = np.trapezoid(integrand, dx=dt, axis=1)
    else:
        # Periodic integrand: the rectangle rule over [0, T) equals the trapezoid.
        total = np.sum(integrand, axis=1) * dt
    out = total / period
    return out[0] if np.ndim(m) == 0 else out.reshape(np.shape(m))


def aft_numeric(t, samples, chirp_rate: float, f):
    """Affine Fourier transform ``int s(t) exp(-j 2 pi (chirp_rate t^2 + f t)) dt``.

    The integral is approximated by the trapezoidal rule on the sampled
    support; the signal is assumed to vanish outside the grid.
    """
    t = np.asarray(t, dtype=float)
    s = np.asarray(samples, dtype=complex)
    dt = _uniform_step(t)
    f_arr = np.atleast_1d(np.asarray(f, dtype=float))
    out = np.empty(f_arr.shape, dtype=complex)
    base = s * np.exp(-2j * np.pi * chirp_rate * t * t)
    # Chunk over frequencies to bound memory for long grids.
    chunk = max(1, 2_000_000 // max(t.size, 1))
    flat = f_arr.ravel()
    res = out.ravel()
    for start in range(0, flat.size, chunk):
        fs = flat[start:start + chunk]
        kern = np.exp(-2j * np.pi * fs[:, None] * t[None, :])
        res[start:start + chunk] = np.trapezoid(base[None, :] * kern, dx=dt, axis=1)
    out = res.reshape(f_arr.shape)
    return out[0] if np.ndim(f) == 0 else out.reshape(np.shape(f))
