import numpy as np
import pytest

from afdm_lab.cli import main
from afdm_lab.experiments import (ConfigError, dominant_nrms, load_config, parse_config_text, resolve_config,
                                  run, run_ber_pn)
from afdm_lab.validation import run_all


def test_parse_config_text():
    text = "# comment\nwaveform.n = 32   # trailing\n\nsweep.snr_db = 0, 10\n"
    assert parse_config_text(text) == {"waveform.n": "32", "sweep.snr_db": "0, 10"}
    with pytest.raises(ConfigError, match="line 1"):
        parse_config_text("no equals sign")
    with pytest.raises(ConfigError, match="duplicate"):
        parse_config_text("a = 1\na = 2")


def test_resolve_config_types_and_errors():
    cfg = resolve_config("ber_mobility", {"waveform.n": "32", "sweep.snr_db": "0, 10", "run.trials": "5"})
    assert cfg.params["waveform.n"] == 32
    assert cfg.params["sweep.snr_db"] == [0.0, 10.0]
    assert cfg.waveform().n == 32
    with pytest.raises(ConfigError, match="waveform.n"):
        resolve_config("psd", {"waveform.n": "abc"})
    with pytest.raises(ConfigError, match="waveform.n"):
        resolve_config("psd", {"waveform.n": "6.5"})
    with pytest.raises(ConfigError, match="unknown key"):
        resolve_config("psd", {"sweep.sigma_phi": "0.1"})
    with pytest.raises(ConfigError, match="waveform/pulse"):
        resolve_config("psd", {"waveform.n": "7"})
    with pytest.raises(ConfigError, match="experiment"):
        resolve_config("psd", {"experiment": "crb"})
    with pytest.raises(ConfigError):
        load_config("/nonexistent/file.cfg", "psd")


def test_detector_csi_option(tmp_path):
    with pytest.raises(ConfigError, match="detector.csi"):
        resolve_config("ber_pn", {"detector.csi": "perfect"})
    with pytest.raises(ConfigError, match="unknown key"):
        resolve_config("ber_mobility", {"detector.csi": "nominal"})
    base = {"waveform.n": "16", "waveform.lambda1": "0.03125", "waveform.lambda2": "0.03125",
            "sweep.snr_db": "20", "sweep.sigma_phi": "0, 0.1", "run.trials": "6", "run.frames_per_trial": "0"}
    curves = {}
    for csi in ("matched", "nominal"):
        cfg = resolve_config("ber_pn", {**base, "detector.csi": csi}, out=str(tmp_path / csi))
        curves[csi] = run_ber_pn(cfg)
    key0, key1 = ("afdm", 0.0), ("afdm", 0.1)
    assert curves["nominal"][key0][0].ber_theory_mean == pytest.approx(curves["matched"][key0][0].ber_theory_mean)
    assert curves["nominal"][key1][0].ber_theory_mean > curves["matched"][key1][0].ber_theory_mean


def test_config_hash_tracks_parameters():
    a = resolve_config("crb", {})
    b = resolve_config("crb", {}, seed=2)
    assert a.config_hash() == resolve_config("crb", {}).config_hash()
    assert a.config_hash() != b.config_hash()


def test_cli_exit_codes(tmp_path, capsys):
    bad = tmp_path / "bad.cfg"
    bad.write_text("waveform.n = nope\n")
    assert main(["psd", "--config", str(bad), "--out", str(tmp_path)]) == 1
    assert "waveform.n" in capsys.readouterr().err


def test_numerical_failure_exit_code(tmp_path, monkeypatch):
    import afdm_lab.experiments as ex

    def boom(cfg):
        raise ArithmeticError("forced")

    monkeypatch.setitem(ex.RUNNERS, "crb", boom)
    assert run(resolve_config("crb", {}, out=str(tmp_path))) == 2


def _ber_cfg(tmp_path, name, threads):
    text = ("run.trials = 4\nrun.frames_per_trial = 2\nsweep.snr_db = 0, 10\n"
            "sweep.v_max_kmh = 0, 300\nwaveform.n = 16\nwaveform.lambda1 = 0.03125\nwaveform.lambda2 = 0.03125\n")
    path = tmp_path / f"{name}.cfg"
    path.write_text(text)
    out = tmp_path / name
    assert main(["ber_mobility", "--config", str(path), "--out", str(out), "--seed", "5",
                 "--threads", str(threads)]) == 0
    return out


def test_ber_output_is_byte_identical_across_runs_and_threads(tmp_path):
    a = _ber_cfg(tmp_path, "a", 1)
    b = _ber_cfg(tmp_path, "b", 3)
    files = sorted(p.name for p in a.iterdir())
    assert files == sorted(p.name for p in b.iterdir())
    assert "ber_mobility_ct_v300.csv" in files
    for name in files:
        assert (a / name).read_bytes() == (b / name).read_bytes()
    text = (a / "ber_mobility_ct_v0.csv").read_text().splitlines()
    assert text[1].startswith("# config_sha256=") and "seed=5" in text[1]
    header = next(line for line in text if not line.startswith("#"))
    assert header == "snr_db,ber_theory_mean,ber_empirical_mean,ci_low,ci_high,trials"


def test_crb_and_psd_outputs(tmp_path):
    cfg_file = tmp_path / "crb.cfg"
    cfg_file.write_text("sweep.snr_db = 0, 10\nsweep.pulse = rrc\n")
    assert main(["crb", "--config", str(cfg_file), "--out", str(tmp_path)]) == 0
    rows = [line for line in (tmp_path / "crb.csv").read_text().splitlines() if not line.startswith("#")]
    assert rows[0] == "snr_db,lambda1,pulse,crb_ftau,crb_fnu,fim_ftau,fim_fnu"
    assert len(rows) == 1 + 2 * 3
    assert main(["psd", "--out", str(tmp_path)]) == 0
    psd = [line for line in (tmp_path / "psd_ofdm.csv").read_text().splitlines() if not line.startswith("#")]
    assert psd[0] == "freq_hz,psd_db"


def test_impulse_response_outputs(tmp_path):
    assert main(["impulse_response", "--out", str(tmp_path)]) == 0
    dump = (tmp_path / "impulse_response_channel.csv").read_text().splitlines()
    assert dump[0] == "l,gain_re,gain_im,delay_s,doppler_hz" and len(dump) == 4


def test_dominant_nrms():
    a = np.array([0.0, 1.0, 0.5, 0.01])
    assert dominant_nrms(a, a, 0.1) == 0.0
    assert dominant_nrms(a, 1.1 * a, 0.1) == pytest.approx(0.1)


def test_validation_suite_passes(tmp_path):
    results = run_all()
    assert all(r.passed for r in results), [r for r in results if not r.passed]
    assert main(["validate", "--out", str(tmp_path)]) == 0
