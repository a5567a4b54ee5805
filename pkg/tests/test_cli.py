import json

import numpy as np
import pytest
import scipy.constants as sc

from kitwpa import cli
from kitwpa.results import read_table_csv


def write_cfg(path, text):
    path.write_text(text, encoding="utf-8")
    return str(path)


NOISE_CFG = """
[run]
seed = 11

[noise]
t_hot = 3.13 K
t_cold = 10 mK
t_mxc = 12 mK
l1 = 0.95
l2 = 0.7
g_ii = 120
a_pa = 1.0
a_hemt = 50
f_pump = 1.6 GHz

[sweep]
start = 0.60 GHz
stop = 0.80 GHz
count = 5

[synth]
noise_frac = 0

[output]
directory = {out}
"""


def test_parse_quantity_units():
    assert cli.parse_quantity("2.2 GHz") == pytest.approx(2.2e9)
    assert cli.parse_quantity("120 um") == pytest.approx(120e-6)
    assert cli.parse_quantity("12 mK") == pytest.approx(0.012)
    assert cli.parse_quantity("0.89 mA") == pytest.approx(0.89e-3)
    assert cli.parse_quantity("1 nW") == pytest.approx(1e-9)
    assert cli.parse_quantity("-110 dBm") == -110.0
    assert cli.parse_quantity("0.0064 c") == pytest.approx(0.0064 * sc.c)
    assert cli.parse_quantity("470 ohm") == 470.0
    assert cli.parse_quantity("3.5") == 3.5


def test_parse_quantity_rejects_garbage():
    for bad in ("fast", "1 parsec", "1 2 3"):
        with pytest.raises(cli.ConfigError):
            cli.parse_quantity(bad)


def test_config_hash_ignores_declaration_order(tmp_path):
    a = write_cfg(tmp_path / "a.cfg", "[run]\nseed = 1\n[sweep]\nstart = 1\n")
    b = write_cfg(tmp_path / "b.cfg", "[sweep]\nstart = 1\n[run]\nseed = 1\n")
    c = write_cfg(tmp_path / "c.cfg", "[run]\nseed = 2\n[sweep]\nstart = 1\n")
    ha = cli.RunConfig.load(a).sha256
    assert ha == cli.RunConfig.load(b).sha256
    assert ha != cli.RunConfig.load(c).sha256


def test_missing_config_exit_code(tmp_path, capsys):
    assert cli.main(["gain", "-c", str(tmp_path / "nope.cfg")]) == cli.EXIT_CONFIG
    record = json.loads(capsys.readouterr().err)
    assert record["error"] == "config-error"


def test_missing_input_exit_code(tmp_path, capsys):
    cfg = write_cfg(tmp_path / "n.cfg", NOISE_CFG.format(out=tmp_path))
    assert cli.main(["noise-invert", "-c", cfg]) == cli.EXIT_INPUT
    assert json.loads(capsys.readouterr().err)["error"] == "missing-input"


def test_outdir_env_override(tmp_path, monkeypatch, capsys):
    cfg = write_cfg(tmp_path / "n.cfg", NOISE_CFG.format(out=tmp_path / "a"))
    override = tmp_path / "b"
    monkeypatch.setenv("KITWPA_OUTDIR", str(override))
    assert cli.main(["noise-forward", "-c", cfg]) == 0
    capsys.readouterr()
    assert (override / "noise_forward.csv").exists()
    assert not (tmp_path / "a").exists()


def test_noise_round_trip_through_files(tmp_path, capsys):
    cfg = write_cfg(tmp_path / "n.cfg", NOISE_CFG.format(out=tmp_path))
    assert cli.main(["synth", "--kind", "noise-traces", "-c", cfg]) == 0
    assert cli.main(["noise-invert", "-c", cfg,
                     str(tmp_path / "synth_noise.csv")]) == 0
    capsys.readouterr()
    _, _, cols = read_table_csv(tmp_path / "noise_invert.csv")
    np.testing.assert_allclose(cols["Apa_photons"], 1.0, atol=1e-8)
    assert np.all(cols["err_photons"] > 0)


def test_fit_bandgap_through_files(tmp_path, capsys):
    cfg = write_cfg(tmp_path / "bg.cfg", f"""
[run]
seed = 4
[synth]
i_star = 0.89 mA
i_quartic = 0.86 mA
f_gap0 = 2.2 GHz
i_max = 0.5 mA
count = 25
noise_frac = 0
[output]
directory = {tmp_path}
""")
    assert cli.main(["synth", "--kind", "bandgap-data", "-c", cfg]) == 0
    assert cli.main(["fit-bandgap", "-c", cfg,
                     str(tmp_path / "synth_bandgap.csv")]) == 0
    capsys.readouterr()
    payload = json.loads((tmp_path / "fit_bandgap.json").read_text())
    assert payload["i_star_A"] == pytest.approx(0.89e-3, rel=1e-6)
    assert payload["i_quartic_A"] == pytest.approx(0.86e-3, rel=1e-6)
    assert payload["converged"]


def test_synth_provenance_carries_ground_truth(tmp_path, capsys):
    cfg = write_cfg(tmp_path / "ps.cfg", f"""
[run]
seed = 9
[synth]
gain_db = 21.5
p_c_dbm = -70 dBm
noise_db = 0.05
[output]
directory = {tmp_path}
""")
    assert cli.main(["synth", "--kind", "power-sweep", "-c", cfg]) == 0
    capsys.readouterr()
    prov, header, cols = read_table_csv(tmp_path / "synth_power.csv")
    assert prov["truth_gain_db"] == "21.5"
    assert prov["truth_p_c_dbm"] == "-70"
    assert "config_sha256" in prov
    assert header == ["Pin_dBm", "Pout_dBm"]
    assert len(cols["Pin_dBm"]) == 46


def test_json_output_format(tmp_path, capsys):
    cfg = write_cfg(tmp_path / "n.cfg",
                    NOISE_CFG.format(out=tmp_path).replace(
                        "[output]", "[output]\nformat = json"))
    assert cli.main(["noise-forward", "-c", cfg]) == 0
    capsys.readouterr()
    payload = json.loads((tmp_path / "noise_forward.json").read_text())
    assert payload["axis"]["name"] == "f_Hz"
    assert set(payload["columns"]) == {"P_hot_dBm", "P_cold_dBm", "P_off_dBm"}


def test_bad_sweep_scale_is_config_error(tmp_path, capsys):
    cfg = write_cfg(tmp_path / "n.cfg",
                    NOISE_CFG.format(out=tmp_path).replace(
                        "count = 5", "count = 5\nscale = cubic"))
    assert cli.main(["noise-forward", "-c", cfg]) == cli.EXIT_CONFIG
    capsys.readouterr()
