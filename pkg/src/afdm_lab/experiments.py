"""Configuration-driven experiments that produce BER, PSD, CRB and impulse-response data as CSV files.

Config files are plain ``key = value`` lines with dotted section names,
for example::

    # mobility sweep
    waveform.n = 64
    channel.n_paths = 3
    sweep.v_max_kmh = 0, 50, 150, 300, 450
    run.trials = 100

Every experiment starts from a complete table of defaults; a config file may
only override known keys. The resolved table is echoed into each CSV header
together with its SHA-256 hash and the seed.
"""

from __future__ import annotations

import hashlib
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Optional

import numpy as np

from .bounds import CrbConfig, crb_closed_afdm, crb_closed_ofdm, crb_validity_bound, fim_numeric
from .channel import (SPEED_OF_LIGHT, DsChannel, PnCfoParams, SjParams, count_clusters,
                      dt_reference_channel, effective_channel_ideal, effective_channel_pn_cfo,
                      effective_channel_sj, impulse_response, max_doppler, sample_realization)
from .receiver import BerPoint, binomial_ci, count_bit_errors, mismatched_sinr, sinr_per_symbol, theoretical_ber
from .spectrum import analytic_psd, frequency_grid, oob_energy
from .transforms import DaftParams
from .waveform import PulseShape, WaveformConfig

EXPERIMENTS = ("psd", "ber_mobility", "ber_paths", "ber_pn", "ber_cfo", "ber_sj", "crb",
               "impulse_response", "validate")

SNR_GRID = [0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0]

COMMON_DEFAULTS: Dict[str, object] = {
    "waveform.n": 64,
    "waveform.lambda1": 0.007,
    "waveform.lambda2": 0.007,
    "waveform.delta_f": 15e3,
    "waveform.n_cpp": 4,
    "waveform.oversample": 10,
    "pulse.kind": "rrc",
    "pulse.rolloff": 0.25,
    "pulse.bandwidth_ts": 0.6,
    "pulse.duration_ts": 1.0,
    "pulse.truncation": 0,
    "pulse.tolerance": 0.4,
    "run.trials": 100,
    "run.seed": 1,
}

_BER_DEFAULTS: Dict[str, object] = {
    "channel.n_paths": 3,
    "channel.delay_spread": 0.5e-6,
    "channel.pdp_decay_db": 10.0,
    "channel.v_max_kmh": 250.0,
    "channel.f_c": 5.8e9,
    "run.frames_per_trial": 20,
    "run.m_c": 4,
    "sweep.snr_db": SNR_GRID,
}

# "matched": the detector knows the impaired channel; "nominal": it only knows
# the impairment-free channel and the residual acts as interference.
_HWI_DEFAULTS: Dict[str, object] = {**_BER_DEFAULTS, "detector.csi": "matched"}

EXPERIMENT_DEFAULTS: Dict[str, Dict[str, object]] = {
    "psd": {
        "pulse.rolloff": 0.15,
        "psd.band_hz": 1e6,
        "psd.truncation": 17,
        "psd.sigma_c2": 1.0,
        "sweep.lambda1": [0.0, 0.007],
    },
    "ber_mobility": {**_BER_DEFAULTS, "sweep.v_max_kmh": [0.0, 50.0, 150.0, 300.0, 450.0]},
    "ber_paths": {**_BER_DEFAULTS, "sweep.n_paths": [2, 3, 4, 5, 6, 7, 8, 9, 10]},
    "ber_pn": {**_HWI_DEFAULTS, "sweep.sigma_phi": [0.0, 0.001, 0.01, 0.1]},
    "ber_cfo": {**_HWI_DEFAULTS, "sweep.sigma_cfo_ppm": [0.0, 1e-7, 1e-6, 1e-5]},
    "ber_sj": {**_HWI_DEFAULTS, "sweep.sigma_sj": [0.1, 0.01, 0.001, 0.0001]},
    "crb": {
        "sweep.snr_db": [-10.0, -5.0, 0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0],
        "sweep.lambda1": [0.0, 0.003, 0.007],
        "sweep.pulse": ["rrc", "gaussian", "rect"],
        "crb.sigma_c2": 1.0,
        "crb.f_tau": 0.0,
        "crb.f_nu": 0.0,
    },
    "impulse_response": {
        "waveform.n_cpp": 8,
        "ir.delay_bins": [1.1, 3.0, 6.0],
        "ir.nu_max_hz": 12e3,
        "ir.pdp_decay_db": 10.0,
        "ir.f_c": 5.8e9,
        "ir.cluster_threshold": 0.2,
        "ir.dominant_threshold": 0.1,
    },
    "validate": {},
}


class ConfigError(ValueError):
    """Raised for unreadable or invalid configuration files."""


class NumericalError(RuntimeError):
    """Raised when an experiment produces non-finite or inconsistent numbers."""


# ----------------------------------------------------------------------------
# Config handling
# ----------------------------------------------------------------------------

def parse_config_text(text: str) -> Dict[str, str]:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    out: Dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        if key in out:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        out[key] = value
    return out


def _coerce(key: str, text: str, default):
    try:
        if isinstance(default, list):
            items = [s.strip() for s in text.split(",") if s.strip()]
            if not items:
                raise ConfigError(f"{key}: sweep axis must not be empty")
            proto = default[0] if default else 0.0
            return [_coerce(key, s, proto) for s in items]
        if isinstance(default, bool):
            if text.lower() not in ("true", "false", "1", "0"):
                raise ValueError(text)
            return text.lower() in ("true", "1")
        if isinstance(default, int):
            val = float(text)
            if val != int(val):
                raise ValueError(text)
            return int(val)
        if isinstance(default, float):
            return float(text)
        return text
    except ValueError:
        raise ConfigError(f"{key}: cannot interpret {text!r} as {type(default).__name__}") from None


def _format(value) -> str:
    if isinstance(value, list):
        return ", ".join(_format(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


@dataclass
class ExperimentConfig:
    """Resolved experiment description."""

    experiment: str
    params: Dict[str, object]
    out: Path = Path("results")
    threads: int = 1

    @property
    def seed(self) -> int:
        return int(self.params["run.seed"])

    @property
    def trials(self) -> int:
        return int(self.params["run.trials"])

    def canonical_text(self) -> str:
        lines = [f"experiment = {self.experiment}"]
        lines += [f"{k} = {_format(self.params[k])}" for k in sorted(self.params)]
        return "\n".join(lines) + "\n"

    def config_hash(self) -> str:
        return hashlib.sha256(self.canonical_text().encode()).hexdigest()

    def waveform(self, lambda1: Optional[float] = None, lambda2: Optional[float] = None,
                 pulse_kind: Optional[str] = None, truncation: Optional[int] = None) -> WaveformConfig:
        p = self.params
        lam1 = p["waveform.lambda1"] if lambda1 is None else lambda1
        lam2 = p["waveform.lambda2"] if lambda2 is None else lambda2
        n = int(p["waveform.n"])
        delta_f = float(p["waveform.delta_f"])
        t_s = 1.0 / (n * delta_f)
        kind = p["pulse.kind"] if pulse_kind is None else pulse_kind
        trunc = int(p["pulse.truncation"]) if truncation is None else truncation
        pulse = PulseShape(kind=kind, rolloff=float(p["pulse.rolloff"]),
                           bandwidth=float(p["pulse.bandwidth_ts"]) / t_s if kind == "gaussian" else None,
                           duration=float(p["pulse.duration_ts"]) * t_s if kind == "rect" else None,
                           truncation=trunc or None)
        return WaveformConfig(DaftParams(n, lam1, lam2), delta_f, int(p["waveform.n_cpp"]),
                              int(p["waveform.oversample"]), pulse, float(p["pulse.tolerance"]))


def resolve_config(experiment: str, overrides: Dict[str, str], seed: Optional[int] = None,
                   out: Optional[str] = None, threads: Optional[int] = None) -> ExperimentConfig:
    """Merge overrides into the defaults of ``experiment`` and validate the result."""
    if experiment not in EXPERIMENTS:
        raise ConfigError(f"experiment: unknown experiment {experiment!r}")
    overrides = dict(overrides)
    named = overrides.pop("experiment", None)
    if named is not None and named != experiment:
        raise ConfigError(f"experiment: config names {named!r} but {experiment!r} was requested")
    defaults = {**COMMON_DEFAULTS, **EXPERIMENT_DEFAULTS[experiment]}
    params = dict(defaults)
    for key, text in overrides.items():
        if key not in defaults:
            raise ConfigError(f"{key}: unknown key for experiment {experiment!r}")
        params[key] = _coerce(key, text, defaults[key])
    if seed is not None:
        params["run.seed"] = int(seed)
    if params["run.trials"] < 1:
        raise ConfigError("run.trials: must be >= 1")
    if params.get("detector.csi", "matched") not in ("matched", "nominal"):
        raise ConfigError("detector.csi: must be 'matched' or 'nominal'")
    if threads is None:
        threads = int(os.environ.get("AFDM_LAB_THREADS", "1"))
    cfg = ExperimentConfig(experiment, params, Path(out) if out else Path("results"), max(1, int(threads)))
    try:
        cfg.waveform()
    except ValueError as exc:
        raise ConfigError(f"waveform/pulse: {exc}") from None
    return cfg


def load_config(path, experiment: str, **kwargs) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"config: cannot read {path}: {exc}") from None
    return resolve_config(experiment, parse_config_text(text), **kwargs)


# ----------------------------------------------------------------------------
# Output helpers
# ----------------------------------------------------------------------------

def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    if isinstance(x, str):
        return x
    return format(float(x), ".10g")


def write_csv(cfg: ExperimentConfig, name: str, columns: List[str], rows: List[list],
              notes: Optional[List[str]] = None) -> Path:
    """Write a CSV whose comment header carries the config hash, seed and parameters."""
    cfg.out.mkdir(parents=True, exist_ok=True)
    path = cfg.out / name
    lines = [f"# afdm-lab {cfg.experiment}",
             f"# config_sha256={cfg.config_hash()} seed={cfg.seed}"]
    lines += [f"# {line}" for line in cfg.canonical_text().splitlines()]
    lines += [f"# note: {n}" for n in (notes or [])]
    lines.append(",".join(columns))
    lines += [",".join(_fmt(v) for v in row) for row in rows]
    path.write_text("\n".join(lines) + "\n")
    return path


def _check_finite(values, what: str):
    arr = np.asarray(values, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise NumericalError(f"non-finite values in {what}")


def _map(cfg: ExperimentConfig, fn: Callable, items):
    if cfg.threads > 1:
        with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
            return list(pool.map(fn, items))
    return [fn(i) for i in items]


# ----------------------------------------------------------------------------
# PSD
# ----------------------------------------------------------------------------

REFERENCE_OOB_DB = {("ofdm", False): -40.0, ("afdm", False): -39.24,
                     ("ofdm", True): -37.0, ("afdm", True): -30.0}


def oob_table(cfg: ExperimentConfig):
    """OOB energy of the four PSD curves; returns rows ``(label, trunc, oob_db, grid)``."""
    p = cfg.params
    rows = []
    for lam in p["sweep.lambda1"]:
        for trunc in (0, int(p["psd.truncation"])):
            wf = cfg.waveform(lambda1=lam, lambda2=lam, truncation=trunc)
            psd = analytic_psd(wf, float(p["psd.sigma_c2"]), frequency_grid(wf))
            label = "ofdm" if lam == 0 else f"afdm_l{lam:g}"
            rows.append((label, trunc, oob_energy(psd, float(p["psd.band_hz"])), psd))
    return rows


def run_psd(cfg: ExperimentConfig) -> List[Path]:
    paths = []
    summary = []
    for label, trunc, oob, psd in oob_table(cfg):
        db = psd.db()
        db = np.maximum(db, -300.0)
        _check_finite(db, "psd")
        suffix = f"_lp{trunc}" if trunc else ""
        paths.append(write_csv(cfg, f"psd_{label}{suffix}.csv", ["freq_hz", "psd_db"],
                               [[f, v] for f, v in zip(psd.freqs, db)]))
        kind = "ofdm" if label == "ofdm" else "afdm"
        target = REFERENCE_OOB_DB.get((kind, bool(trunc)), float("nan"))
        summary.append([label, trunc, oob, target])
    paths.append(write_csv(cfg, "oob_summary.csv", ["curve", "truncation", "oob_db", "reference_db"], summary))
    print("OOB summary: " + "; ".join(f"{s[0]} Lp={s[1] or 'inf'}: {s[2]:.2f} dB (ref {s[3]:.2f})"
                                      for s in summary))
    return paths


# ----------------------------------------------------------------------------
# BER sweeps
# ----------------------------------------------------------------------------

def _noise_vars(cfg):
    return [10 ** (-s / 10) for s in cfg.params["sweep.snr_db"]]


def draw_channel(cfg: ExperimentConfig, tag: int, trial: int, n_paths=None, v_max=None) -> DsChannel:
    """Channel realization ``trial`` of stream ``tag``, seeded by ``(seed, tag, trial)``."""
    p = cfg.params
    return sample_realization((cfg.seed, tag, trial),
                              int(p["channel.n_paths"] if n_paths is None else n_paths),
                              float(p["channel.delay_spread"]), float(p["channel.pdp_decay_db"]),
                              float(p["channel.v_max_kmh"] if v_max is None else v_max),
                              float(p["channel.f_c"]))


def _trial_stats(cfg: ExperimentConfig, h, trial_key) -> tuple:
    """Theory BER per SNR and counted errors/bits for one realization.

    ``h`` is either one effective channel or a ``(true, assumed)`` pair when
    the detector works from a different channel than the one the data see.
    """
    h, h_det = h if isinstance(h, tuple) else (h, None)
    m_c = int(cfg.params["run.m_c"])
    frames = int(cfg.params["run.frames_per_trial"])
    theory, errs, bits = [], [], []
    for si, nv in enumerate(_noise_vars(cfg)):
        sinr = sinr_per_symbol(h, nv) if h_det is None else mismatched_sinr(h, h_det, nv)
        theory.append(theoretical_ber(sinr, m_c))
        if frames > 0:
            rng = np.random.default_rng([cfg.seed, *trial_key, si])
            e, b = count_bit_errors(h, nv, frames, rng, m_c, detector_h=h_det)
        else:
            e, b = 0, 0
        errs.append(e)
        bits.append(b)
    return theory, errs, bits


def _reduce(cfg: ExperimentConfig, results) -> List[BerPoint]:
    pts = []
    for si, snr in enumerate(cfg.params["sweep.snr_db"]):
        theory = float(np.mean([r[0][si] for r in results]))
        errors = int(sum(r[1][si] for r in results))
        bits = int(sum(r[2][si] for r in results))
        lo, hi = binomial_ci(errors, bits) if bits else (float("nan"), float("nan"))
        emp = errors / bits if bits else float("nan")
        pts.append(BerPoint(float(snr), theory, emp, lo, hi, len(results), errors, bits))
    _check_finite([p.ber_theory_mean for p in pts], "theoretical BER")
    return pts


def _ber_rows(points: List[BerPoint]):
    return [[p.snr_db, p.ber_theory_mean, p.ber_empirical_mean, p.ci_low, p.ci_high, p.trials]
            for p in points]


BER_COLUMNS = ["snr_db", "ber_theory_mean", "ber_empirical_mean", "ci_low", "ci_high", "trials"]


def ber_curve(cfg: ExperimentConfig, builder: Callable[[int], object], key: tuple) -> List[BerPoint]:
    """Average BER over ``run.trials`` realizations produced by ``builder(trial)``."""
    def one(trial):
        return _trial_stats(cfg, builder(trial), key + (trial,))
    return _reduce(cfg, _map(cfg, one, range(cfg.trials)))


def model_builders(cfg: ExperimentConfig, wf: WaveformConfig, channel_fn):
    active = wf.active_set()
    return {
        "ct": lambda i: effective_channel_ideal(channel_fn(i), wf, active),
        "dt": lambda i: dt_reference_channel(channel_fn(i), wf),
    }


def run_ber_mobility(cfg: ExperimentConfig) -> Dict[tuple, List[BerPoint]]:
    wf = cfg.waveform()
    curves = {}
    for vi, v in enumerate(cfg.params["sweep.v_max_kmh"]):
        builders = model_builders(cfg, wf, lambda i, v=v: draw_channel(cfg, 1, i, v_max=v))
        for mi, (model, b) in enumerate(builders.items()):
            pts = ber_curve(cfg, b, (1, vi, mi))
            curves[(model, v)] = pts
            write_csv(cfg, f"ber_mobility_{model}_v{v:g}.csv", BER_COLUMNS, _ber_rows(pts))
    return curves


def run_ber_paths(cfg: ExperimentConfig) -> Dict[tuple, List[BerPoint]]:
    wf = cfg.waveform()
    curves = {}
    for li, n_paths in enumerate(cfg.params["sweep.n_paths"]):
        builders = model_builders(cfg, wf, lambda i, n_paths=n_paths: draw_channel(cfg, 2, i, n_paths=n_paths))
        for mi, (model, b) in enumerate(builders.items()):
            pts = ber_curve(cfg, b, (2, li, mi))
            curves[(model, n_paths)] = pts
            write_csv(cfg, f"ber_paths_{model}_L{n_paths}.csv", BER_COLUMNS, _ber_rows(pts))
    return curves


def draw_pn_cfo(cfg: ExperimentConfig, wf: WaveformConfig, trial: int, sigma_phi: float = 0.0,
                sigma_cfo_ppm: float = 0.0, tag: int = 0) -> PnCfoParams:
    """Per-frame impairment draw: ``phi0 ~ N(0, s)``, ``phi1 ~ N(0, s / T_frame)``, CFO in ppm of f_c."""
    rng = np.random.default_rng([cfg.seed, 90 + tag, trial])
    t_frame = wf.n_total * wf.t_s
    phi0 = rng.normal(0.0, sigma_phi) if sigma_phi > 0 else 0.0
    phi1 = rng.normal(0.0, sigma_phi / t_frame) if sigma_phi > 0 else 0.0
    cfo_std = sigma_cfo_ppm * float(cfg.params["channel.f_c"]) * 1e-6
    cfo = rng.normal(0.0, cfo_std) if cfo_std > 0 else 0.0
    return PnCfoParams(phi0, phi1, cfo)


def draw_sj(cfg: ExperimentConfig, wf: WaveformConfig, trial: int, sigma_sj: float) -> SjParams:
    """Per-frame jitter draw: ``delta0 ~ N(0, s T_s)``, ``delta1 ~ N(0, s)``."""
    rng = np.random.default_rng([cfg.seed, 93, trial])
    if sigma_sj <= 0:
        return SjParams()
    return SjParams(rng.normal(0.0, sigma_sj * wf.t_s), float(np.clip(rng.normal(0.0, sigma_sj), -0.99, 0.99)))


def _hwi_waveforms(cfg: ExperimentConfig):
    return {"afdm": cfg.waveform(), "ofdm": cfg.waveform(lambda1=0.0, lambda2=0.0)}


def _run_hwi(cfg: ExperimentConfig, axis: str, tag: int, make_h) -> Dict[tuple, List[BerPoint]]:
    curves = {}
    nominal = cfg.params["detector.csi"] == "nominal"
    for wi, (name, wf) in enumerate(_hwi_waveforms(cfg).items()):
        active = wf.active_set()
        for xi, sigma in enumerate(cfg.params[axis]):
            def build(i, wf=wf, active=active, sigma=sigma):
                ch = draw_channel(cfg, tag, i)
                h = make_h(ch, wf, active, i, sigma)
                return (h, effective_channel_ideal(ch, wf, active)) if nominal else h
            pts = ber_curve(cfg, build, (tag, wi, xi))
            curves[(name, sigma)] = pts
            short = axis.split(".", 1)[1]
            write_csv(cfg, f"{cfg.experiment}_{name}_{short}{sigma:g}.csv", BER_COLUMNS, _ber_rows(pts))
    return curves


def run_ber_pn(cfg: ExperimentConfig):
    return _run_hwi(cfg, "sweep.sigma_phi", 3, lambda ch, wf, act, i, s: effective_channel_pn_cfo(
        ch, wf, act, draw_pn_cfo(cfg, wf, i, sigma_phi=s)))


def run_ber_cfo(cfg: ExperimentConfig):
    return _run_hwi(cfg, "sweep.sigma_cfo_ppm", 4, lambda ch, wf, act, i, s: effective_channel_pn_cfo(
        ch, wf, act, draw_pn_cfo(cfg, wf, i, sigma_cfo_ppm=s, tag=1)))


def run_ber_sj(cfg: ExperimentConfig):
    return _run_hwi(cfg, "sweep.sigma_sj", 5, lambda ch, wf, act, i, s: effective_channel_sj(
        ch, wf, act, draw_sj(cfg, wf, i, s)))


# ----------------------------------------------------------------------------
# CRB
# ----------------------------------------------------------------------------

def crb_rows(cfg: ExperimentConfig):
    p = cfg.params
    rows = []
    for kind in p["sweep.pulse"]:
        for lam in p["sweep.lambda1"]:
            wf = cfg.waveform(lambda1=lam, lambda2=lam, pulse_kind=kind)
            n_u = wf.active_set().n_u
            if n_u % 2 == 0:
                n_u -= 1
            for snr_db in p["sweep.snr_db"]:
                c = CrbConfig(wf.daft, n_u, float(p["crb.sigma_c2"]), 10 ** (snr_db / 10),
                              float(p["crb.f_tau"]), float(p["crb.f_nu"]))
                fim = fim_numeric(c)
                inv = np.linalg.inv(fim)
                rows.append([snr_db, lam, kind, inv[0, 0], inv[1, 1], fim[0, 0], fim[1, 1]])
    _check_finite([r[3:] for r in rows], "CRB")
    return rows


def run_crb(cfg: ExperimentConfig):
    rows = crb_rows(cfg)
    write_csv(cfg, "crb.csv", ["snr_db", "lambda1", "pulse", "crb_ftau", "crb_fnu", "fim_ftau", "fim_fnu"], rows)
    closed = []
    p = cfg.params
    n = int(p["waveform.n"])
    for lam in p["sweep.lambda1"]:
        wf = cfg.waveform(lambda1=lam, lambda2=lam, pulse_kind="rrc")
        n_u = wf.active_set().n_u
        for snr_db in p["sweep.snr_db"]:
            c = CrbConfig(wf.daft, n_u, float(p["crb.sigma_c2"]), 10 ** (snr_db / 10))
            if lam <= crb_validity_bound(n, n_u):
                a_tau, a_nu = crb_closed_afdm(c)
            else:
                a_tau = a_nu = float("nan")
            o_tau, o_nu = crb_closed_ofdm(c)
            closed.append([snr_db, lam, a_tau, a_nu, o_tau, o_nu])
    write_csv(cfg, "crb_closed_form.csv",
              ["snr_db", "lambda1", "crb_ftau_afdm", "crb_fnu_afdm", "crb_ftau_ofdm", "crb_fnu_ofdm"], closed)
    return rows


# ----------------------------------------------------------------------------
# Impulse response
# ----------------------------------------------------------------------------

def three_path_channel(cfg: ExperimentConfig, wf: WaveformConfig) -> DsChannel:
    p = cfg.params
    delays = np.asarray(p["ir.delay_bins"], dtype=float) * wf.t_s
    f_c = float(p["ir.f_c"])
    v_kmh = float(p["ir.nu_max_hz"]) * SPEED_OF_LIGHT / f_c * 3.6
    return sample_realization((cfg.seed, 6), len(delays), float(delays.max()), float(p["ir.pdp_decay_db"]),
                              v_kmh, f_c, delays=delays)


@dataclass
class ImpulseSummary:
    responses: Dict[str, np.ndarray]
    nrms: Dict[str, float]
    clusters: Dict[str, int]
    channel: DsChannel = field(repr=False)


def dominant_nrms(h_ct, h_dt, threshold: float) -> float:
    """Normalized RMS gap of magnitudes over taps within ``threshold`` of the CT peak."""
    a, b = np.abs(h_ct), np.abs(h_dt)
    dom = a >= threshold * a.max()
    return float(np.sqrt(np.mean((a[dom] - b[dom]) ** 2) / np.mean(a[dom] ** 2)))


def impulse_summary(cfg: ExperimentConfig) -> ImpulseSummary:
    p = cfg.params
    out, nrms, clusters = {}, {}, {}
    ch = None
    for name, lam in (("afdm", None), ("ofdm", 0.0)):
        wf = cfg.waveform(lambda1=lam, lambda2=lam) if lam is not None else cfg.waveform()
        ch = three_path_channel(cfg, wf)
        hc = impulse_response(effective_channel_ideal(ch, wf, wf.active_set()))
        hd = impulse_response(dt_reference_channel(ch, wf))
        out[f"ct_{name}"], out[f"dt_{name}"] = hc, hd
        nrms[name] = dominant_nrms(hc, hd, float(p["ir.dominant_threshold"]))
        for key in (f"ct_{name}", f"dt_{name}"):
            clusters[key] = count_clusters(out[key], float(p["ir.cluster_threshold"]))
    return ImpulseSummary(out, nrms, clusters, ch)


def run_impulse_response(cfg: ExperimentConfig):
    s = impulse_summary(cfg)
    keys = ["ct_afdm", "dt_afdm", "ct_ofdm", "dt_ofdm"]
    n = len(s.responses[keys[0]])
    rows = [[i - n // 2] + [abs(s.responses[k][i]) for k in keys] for i in range(n)]
    write_csv(cfg, "impulse_response.csv", ["index"] + keys, rows)
    cfg.out.mkdir(parents=True, exist_ok=True)
    (cfg.out / "impulse_response_channel.csv").write_text("\n".join(s.channel.csv_rows()) + "\n")
    write_csv(cfg, "impulse_response_summary.csv", ["model", "nrms_ct_vs_dt", "clusters_ct", "clusters_dt"],
              [[m, s.nrms[m], s.clusters[f"ct_{m}"], s.clusters[f"dt_{m}"]] for m in ("afdm", "ofdm")])
    print("impulse response: " + "; ".join(
        f"{m}: NRMS {s.nrms[m]:.3f}, clusters CT={s.clusters['ct_' + m]} DT={s.clusters['dt_' + m]}"
        for m in ("afdm", "ofdm")))
    return s


# ----------------------------------------------------------------------------
# Dispatcher
# ----------------------------------------------------------------------------

def run_validate(cfg: ExperimentConfig) -> bool:
    from .validation import run_all
    results = run_all()
    rows = [[r.name, "PASS" if r.passed else "FAIL", r.detail] for r in results]
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'} {r.name}: {r.detail}")
    write_csv(cfg, "validate.csv", ["check", "status", "detail"], rows)
    return all(r.passed for r in results)


RUNNERS = {
    "psd": run_psd,
    "ber_mobility": run_ber_mobility,
    "ber_paths": run_ber_paths,
    "ber_pn": run_ber_pn,
    "ber_cfo": run_ber_cfo,
    "ber_sj": run_ber_sj,
    "crb": run_crb,
    "impulse_response": run_impulse_response,
    "validate": run_validate,
}


def run(cfg: ExperimentConfig) -> int:
    """Run an experiment; returns the process exit status."""
    try:
        result = RUNNERS[cfg.experiment](cfg)
    except (NumericalError, ArithmeticError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}")
        return 2
    if cfg.experiment == "validate" and not result:
        return 2
    return 0
