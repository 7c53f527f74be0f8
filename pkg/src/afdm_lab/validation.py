"""Fast numerical self-checks run by ``afdm-lab validate``.

Each check returns a :class:`CheckResult`; none of them takes more than a
few seconds. They exercise the same code paths as the experiments so that a
broken installation (or a regression) shows up before a long sweep.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, List

import numpy as np

from .bounds import CrbConfig, fim_analytic, fim_finite_difference
from .channel import (DsChannel, PnCfoParams, SjParams, dirichlet_kernel, dt_reference_channel,
                      effective_channel_ideal, effective_channel_pn_cfo, effective_channel_sj,
                      sample_realization)
from .receiver import RxConfig, ct_pipeline, qam_demap, qam_map, sinr_per_symbol
from .transforms import DaftParams, build_daft_matrix, daft, idaft
from .waveform import PulseShape, WaveformConfig, afs_closed_form, synthesize_fd, synthesize_td


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    value: float
    limit: float

    @property
    def detail(self) -> str:
        return f"{self.value:.3e} (limit {self.limit:.0e})"


def _qpsk(rng, n):
    return (rng.choice([-1.0, 1.0], n) + 1j * rng.choice([-1.0, 1.0], n)) / np.sqrt(2)


def check_unitarity() -> float:
    worst = 0.0
    for n in (2, 4, 8, 64, 256):
        a = build_daft_matrix(DaftParams(n, 0.007, 0.007))
        worst = max(worst, np.max(np.abs(a @ a.conj().T - np.eye(n))))
    return worst


def check_round_trip() -> float:
    rng = np.random.default_rng(0)
    p = DaftParams(64, 0.007, 0.011)
    c = rng.standard_normal(64) + 1j * rng.standard_normal(64)
    return float(np.max(np.abs(daft(idaft(c, p), p) - c)))


def check_dirichlet_parseval() -> float:
    rng = np.random.default_rng(1)
    n = 64
    x = np.arange(n)
    worst = 0.0
    for theta in rng.uniform(-2, 2, 100):
        worst = max(worst, abs(np.sum(np.abs(dirichlet_kernel(n, theta - x / n)) ** 2) - 1))
    return worst


def _waveform(n=16, lam=None):
    lam = 1.0 / (2 * n) if lam is None else lam
    return WaveformConfig(DaftParams(n, lam, lam), pulse=PulseShape("rrc", 0.25))


def check_synthesis_paths() -> float:
    """Relative gap between the time-domain and AFS synthesis routes."""
    cfg = _waveform(16)
    act = cfg.active_set()
    c = act.embed(_qpsk(np.random.default_rng(2), act.n_u))
    td = synthesize_td(cfg, c).samples
    fd = synthesize_fd(cfg, c).samples
    return float(np.max(np.abs(td - fd)) / np.max(np.abs(td)))


def check_ideal_recovery() -> float:
    cfg = _waveform(16)
    act = cfg.active_set()
    c = act.embed(_qpsk(np.random.default_rng(3), act.n_u))
    y = ct_pipeline(synthesize_td(cfg, c), DsChannel.identity(), RxConfig(cfg))
    return float(np.max(np.abs(y - c)[act.mask()]))


def check_matrix_vs_pipeline() -> float:
    cfg = _waveform(16)
    act = cfg.active_set()
    rng = np.random.default_rng(4)
    worst = 0.0
    for trial in range(3):
        c = act.embed(_qpsk(rng, act.n_u))
        ch = sample_realization((4, trial), 3, delay_spread=cfg.n_cpp * cfg.t_s, v_max_kmh=300)
        hc = effective_channel_ideal(ch, cfg, act).h @ c
        y = ct_pipeline(synthesize_td(cfg, c), ch, RxConfig(cfg))
        worst = max(worst, np.linalg.norm(hc - y) / np.linalg.norm(hc))
    return worst


def check_dt_integer_delays() -> float:
    """CT and DT matrices coincide on active columns when delays are whole samples."""
    cfg = _waveform(16)
    act = cfg.active_set()
    ch = sample_realization((5, 0), 3, delay_spread=cfg.n_cpp * cfg.t_s, v_max_kmh=300)
    ch = DsChannel.from_arrays(ch.gains, np.round(ch.delays / cfg.t_s) * cfg.t_s, ch.dopplers)
    gap = effective_channel_ideal(ch, cfg, act).h - dt_reference_channel(ch, cfg).h
    return float(np.max(np.abs(gap[:, act.mask()])))


def check_impairment_off() -> float:
    cfg = _waveform(16)
    act = cfg.active_set()
    ch = sample_realization((6, 0), 3, delay_spread=cfg.n_cpp * cfg.t_s, v_max_kmh=300)
    base = sinr_per_symbol(effective_channel_ideal(ch, cfg, act), 0.1)
    pn = sinr_per_symbol(effective_channel_pn_cfo(ch, cfg, act, PnCfoParams()), 0.1)
    sj = sinr_per_symbol(effective_channel_sj(ch, cfg, act, SjParams()), 0.1)
    return float(max(np.max(np.abs(pn - base)), np.max(np.abs(sj - base))) / np.max(base))


def check_afs_coefficients() -> float:
    cfg = _waveform(16)
    act = cfg.active_set()
    c = act.embed(_qpsk(np.random.default_rng(7), act.n_u))
    m = np.arange(-cfg.n, cfg.n)
    coef = afs_closed_form(cfg, c, m)
    fr = synthesize_td(cfg, c)
    t, s = fr.t, fr.samples
    sel = (t >= 0) & (t < cfg.period - 0.5 * fr.step)
    q = s[sel] * np.exp(-2j * np.pi * cfg.chirp_rate * t[sel] ** 2)
    num = np.array([np.mean(q * np.exp(-2j * np.pi * mm * t[sel] / cfg.period)) for mm in m])
    return float(np.max(np.abs(num - coef)) / np.max(np.abs(coef)))


def check_qam() -> float:
    rng = np.random.default_rng(8)
    bad = 0
    for m_c in (4, 16, 64):
        bits = rng.integers(0, 2, 6 * 200)
        bad += int(np.count_nonzero(qam_demap(qam_map(bits, m_c), m_c) != bits))
    return float(bad)


def check_fim_methods() -> float:
    worst = 0.0
    for lam in (0.0, 0.003, 0.007):
        cfg = CrbConfig(DaftParams(64, lam, lam), 49, snr=10.0)
        fa, fd = fim_analytic(cfg), fim_finite_difference(cfg)
        worst = max(worst, np.max(np.abs(fa - fd)) / np.max(np.abs(fa)))
    return worst


CHECKS: List[tuple] = [
    ("daft_unitarity", check_unitarity, 1e-12),
    ("daft_round_trip", check_round_trip, 1e-12),
    ("dirichlet_parseval", check_dirichlet_parseval, 1e-10),
    ("synthesis_td_vs_afs", check_synthesis_paths, 1e-8),
    ("afs_coefficients", check_afs_coefficients, 1e-8),
    ("ideal_recovery", check_ideal_recovery, 1e-6),
    ("matrix_vs_pipeline", check_matrix_vs_pipeline, 1e-3),
    ("dt_matches_ct_integer_delays", check_dt_integer_delays, 1e-10),
    ("impairment_off_baseline", check_impairment_off, 1e-12),
    ("qam_round_trip", check_qam, 0.5),
    ("fim_dual_method", check_fim_methods, 1e-6),
]


def run_all(checks=None) -> List[CheckResult]:
    out = []
    for name, fn, limit in checks or CHECKS:
        fn: Callable[[], float]
        value = float(fn())
        out.append(CheckResult(name, bool(np.isfinite(value) and value <= limit), value, limit))
    return out
