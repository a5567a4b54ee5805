"""Batch front end: config-driven sweeps, noise analysis and synthetic data.

Configuration files are flat sectioned key = value text; numeric values
accept SI unit suffixes (GHz, um, mK, nW, mA, ohm, dBm, c, ...).  Output
CSV/JSON files carry '#'-prefixed provenance headers including a sha256
hash of the resolved configuration, and all randomness flows from a
single seeded PCG64 generator, so identical config plus seed reproduces
byte-identical data sections.
"""

from __future__ import annotations

import argparse
import configparser
import hashlib
import json
import os
import sys
from pathlib import Path

import numpy as np
import scipy.constants as sc

from . import __version__, cme, device, extract, noise
from .results import SweepResult, fmt_number, read_table_csv

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INPUT = 4
EXIT_MODEL = 5

_UNIT_SCALE = {
    "hz": 1.0, "khz": 1e3, "mhz": 1e6, "ghz": 1e9,
    "m": 1.0, "mm": 1e-3, "um": 1e-6, "µm": 1e-6, "nm": 1e-9,
    "a": 1.0, "ma": 1e-3, "ua": 1e-6, "µa": 1e-6,
    "k": 1.0, "mk": 1e-3,
    "w": 1.0, "mw": 1e-3, "uw": 1e-6, "µw": 1e-6, "nw": 1e-9, "pw": 1e-12,
    "ohm": 1.0, "kohm": 1e3,
    "s": 1.0, "ms": 1e-3, "us": 1e-6,
}


class ConfigError(Exception):
    """Invalid or incomplete run configuration."""


def parse_quantity(text: str) -> float:
    """Parse '2.2 GHz', '120 um', '-35 dBm', '0.0115 c' or a bare number.

    dBm values are returned unconverted (the key name says dBm); 'c'
    multiplies by the vacuum speed of light; everything else maps to SI.
    """
    parts = text.strip().split()
    if len(parts) == 1:
        try:
            return float(parts[0])
        except ValueError as exc:
            raise ConfigError(f"not a number: {text!r}") from exc
    if len(parts) != 2:
        raise ConfigError(f"expected 'value [unit]': {text!r}")
    try:
        value = float(parts[0])
    except ValueError as exc:
        raise ConfigError(f"not a number: {parts[0]!r}") from exc
    unit = parts[1]
    if unit == "dBm":
        return value
    if unit == "c":
        return value * sc.c
    scale = _UNIT_SCALE.get(unit.lower())
    if scale is None:
        raise ConfigError(f"unknown unit {unit!r} in {text!r}")
    return value * scale


class RunConfig:
    """Sectioned configuration with typed accessors and a content hash."""

    def __init__(self, parser: configparser.ConfigParser, path: str):
        self._cp = parser
        self.path = path
        canon = []
        for section in sorted(parser.sections()):
            for key in sorted(parser[section]):
                canon.append(f"{section}.{key}={parser[section][key]}")
        self.sha256 = hashlib.sha256("\n".join(canon).encode()).hexdigest()

    @classmethod
    def load(cls, path: str) -> "RunConfig":
        parser = configparser.ConfigParser(inline_comment_prefixes=("#",))
        read = parser.read(path)
        if not read:
            raise ConfigError(f"config file not found: {path}")
        return cls(parser, path)

    def has(self, section: str, key: str | None = None) -> bool:
        if key is None:
            return self._cp.has_section(section)
        return self._cp.has_option(section, key)

    def raw(self, section: str, key: str, default=None):
        if not self._cp.has_option(section, key):
            if default is None:
                raise ConfigError(f"missing [{section}] {key}")
            return default
        return self._cp.get(section, key)

    def number(self, section: str, key: str, default: float | None = None) -> float:
        if not self._cp.has_option(section, key):
            if default is None:
                raise ConfigError(f"missing [{section}] {key}")
            return default
        return parse_quantity(self._cp.get(section, key))

    def integer(self, section: str, key: str, default: int | None = None) -> int:
        return int(round(self.number(section, key,
                                     None if default is None else float(default))))

    def text(self, section: str, key: str, default: str | None = None) -> str:
        val = self.raw(section, key, default)
        if val is None:
            raise ConfigError(f"missing [{section}] {key}")
        return str(val).strip()

    def flag(self, section: str, key: str, default: bool) -> bool:
        raw = self.raw(section, key, "true" if default else "false")
        return str(raw).strip().lower() in ("1", "true", "yes", "on")

    @property
    def seed(self) -> int:
        s = self.integer("run", "seed", 0) if self.has("run") else 0
        if s < 0:
            raise ConfigError("seed must be a nonnegative integer")
        return s


def sweep_axis(cfg: RunConfig) -> np.ndarray:
    start = cfg.number("sweep", "start")
    stop = cfg.number("sweep", "stop")
    count = cfg.integer("sweep", "count")
    scale = cfg.text("sweep", "scale", "linear")
    if count < 1:
        raise ConfigError("sweep count must be at least 1")
    if scale == "linear":
        return np.linspace(start, stop, count)
    if scale == "log":
        if start <= 0 or stop <= 0:
            raise ConfigError("log sweep needs positive endpoints")
        return np.geomspace(start, stop, count)
    raise ConfigError(f"unknown sweep scale {scale!r}")


def build_device(cfg: RunConfig) -> device.DeviceSpec:
    if not cfg.has("device") or cfg.text("device", "preset", "paper") == "paper":
        with_loss = cfg.flag("device", "with_loss", True) if cfg.has("device") else True
        return device.paper_device(with_loss=with_loss)
    d = cfg.number
    length = d("device", "length")
    with_loss = cfg.flag("device", "with_loss", False)
    loss_f, loss_a = device.default_loss_table(length) if with_loss else ((), ())
    spec = device.DeviceSpec(
        z_line=d("device", "z_line", 110.0),
        v_line=d("device", "v_line", 0.014 * sc.c),
        z_stub=d("device", "z_stub"),
        v_stub=d("device", "v_stub"),
        stub_len=d("device", "stub_len"),
        stub_mod_depth=d("device", "stub_mod_depth"),
        mod_period=d("device", "mod_period"),
        pitch=d("device", "pitch"),
        length=length,
        i_star=d("device", "i_star"),
        i_quartic=d("device", "i_quartic"),
        width=d("device", "width", 320e-9),
        thickness=d("device", "thickness", 50e-9),
        loss_freq_hz=loss_f, loss_np_per_m=loss_a,
    )
    if cfg.flag("device", "calibrate", True):
        spec = device.calibrate(spec, f_gap_target=d("device", "f_gap_target", 2.2e9))
    return spec


def build_pump(cfg: RunConfig, spec: device.DeviceSpec,
               mode_selection: str | None = None) -> cme.PumpConfig:
    selection = mode_selection or cfg.text("pump", "mode_selection", "6-mode")
    f_p = cfg.number("pump", "f_pump")
    if cfg.has("pump", "i_pump"):
        return cme.PumpConfig(f_p, cfg.number("pump", "i_pump"), selection)
    if cfg.has("pump", "i_pump_ratio"):
        return cme.PumpConfig(f_p, cfg.number("pump", "i_pump_ratio") * spec.i_star,
                              selection)
    return cme.PumpConfig.from_power_dbm(f_p, cfg.number("pump", "p_pump_dbm"),
                                         mode_selection=selection)


def build_chain(cfg: RunConfig, f_signal_hz: float | None = None) -> noise.NoiseChain:
    n = cfg.number
    f_s = f_signal_hz if f_signal_hz is not None else n("noise", "f_signal")
    if cfg.has("noise", "f_idler"):
        f_i = n("noise", "f_idler")
    else:
        f_i = 2.0 * n("noise", "f_pump") - f_s
    t_mxc = n("noise", "t_mxc")
    if cfg.has("noise", "a_pa"):
        a_prime = n("noise", "a_pa") - noise.photon_occupation(f_i, t_mxc)
    else:
        a_prime = n("noise", "a_pa_prime")
    return noise.NoiseChain(
        t_hot=n("noise", "t_hot"), t_cold=n("noise", "t_cold"), t_mxc=t_mxc,
        l1=n("noise", "l1"), l2=n("noise", "l2"),
        g_ii=n("noise", "g_ii"), a_pa_prime=a_prime,
        a_hemt=n("noise", "a_hemt"),
        f_signal_hz=f_s, f_idler_hz=f_i,
        g_hemt=n("noise", "g_hemt", 1e5), a_room=n("noise", "a_room", 1000.0),
        g_room=n("noise", "g_room", 1e5),
        bandwidth_hz=n("noise", "bandwidth", 1e6))


def provenance(cfg: RunConfig, **extra) -> dict:
    head = {"tool": f"kitwpa {__version__}", "config_sha256": cfg.sha256,
            "seed": str(cfg.seed)}
    head.update({k: str(v) for k, v in extra.items()})
    return head


def out_path(cfg: RunConfig, name: str) -> Path:
    directory = os.environ.get("KITWPA_OUTDIR")
    if directory is None:
        directory = cfg.text("output", "directory", ".") if cfg.has("output") else "."
    base = Path(directory)
    base.mkdir(parents=True, exist_ok=True)
    fmt = cfg.text("output", "format", "csv") if cfg.has("output") else "csv"
    if fmt not in ("csv", "json"):
        raise ConfigError(f"unknown output format {fmt!r}")
    return base / f"{name}.{fmt}"


def write_result(result: SweepResult, path: Path) -> None:
    if path.suffix == ".json":
        result.write_json(path)
    else:
        result.write_csv(path)


def _dispersion_grid(cfg: RunConfig) -> np.ndarray:
    if cfg.has("sweep"):
        return sweep_axis(cfg)
    return np.linspace(0.02e9, 6.2e9, 6200)


def cmd_dispersion(cfg: RunConfig, args) -> list[Path]:
    spec = build_device(cfg)
    grid = _dispersion_grid(cfg)
    curve = device.bloch_dispersion(spec, grid)
    res = SweepResult(
        axis_name="f_Hz", axis=grid,
        columns={"re_k_rad_per_m": curve.k.real, "im_k_rad_per_m": curve.k.imag,
                 "delta_k_rad_per_m": curve.delta_k,
                 "re_Zb_ohm": curve.z_bloch.real, "im_Zb_ohm": curve.z_bloch.imag},
        provenance=provenance(cfg, v_ref_m_per_s=fmt_number(curve.v_ref)))
    path = out_path(cfg, "dispersion")
    write_result(res, path)
    return [path]


def cmd_stopband(cfg: RunConfig, args) -> list[Path]:
    spec = build_device(cfg)
    grid = _dispersion_grid(cfg)
    curve = device.bloch_dispersion(spec, grid)
    bands = curve.stopbands
    res = SweepResult(
        axis_name="index", axis=np.arange(len(bands)),
        columns={"center_Hz": np.array([b.center_hz for b in bands]),
                 "lower_Hz": np.array([b.lower_hz for b in bands]),
                 "upper_Hz": np.array([b.upper_hz for b in bands])},
        provenance=provenance(cfg))
    path = out_path(cfg, "stopband")
    write_result(res, path)
    return [path]


def cmd_gain(cfg: RunConfig, args) -> list[Path]:
    spec = build_device(cfg)
    grid = _dispersion_grid_for_modes(cfg)
    curve = device.bloch_dispersion(spec, grid)
    pump = build_pump(cfg, spec)
    f_grid = sweep_axis(cfg)
    res = cme.gain_sweep(pump, f_grid, spec, curve,
                         seed_dbm=cfg.number("pump", "seed_dbm", -110.0),
                         rtol=cfg.number("pump", "rtol", 1e-9),
                         include_loss=cfg.flag("pump", "include_loss", True),
                         workers=args.workers)
    res.provenance = provenance(cfg, pump_hz=fmt_number(pump.f_pump_hz),
                                i_pump_a=fmt_number(pump.i_pump))
    path = out_path(cfg, "gain")
    write_result(res, path)
    return [path]


def _dispersion_grid_for_modes(cfg: RunConfig) -> np.ndarray:
    # wide enough for third-harmonic and sideband lookups of a <2 GHz pump
    return np.linspace(0.02e9, 6.2e9, 6200)


def _spectrum_result(cfg: RunConfig, rows) -> SweepResult:
    return SweepResult(
        axis_name="f_Hz", axis=np.array([f for _, f, _ in rows]),
        columns={"Pout_dBm": np.array([p for _, _, p in rows])},
        status=[lbl for lbl, _, _ in rows],
        provenance=provenance(cfg))


def cmd_spectrum(cfg: RunConfig, args) -> list[Path]:
    spec = build_device(cfg)
    curve = device.bloch_dispersion(spec, _dispersion_grid_for_modes(cfg))
    pump = build_pump(cfg, spec, mode_selection="6-mode")
    rows = cme.output_spectrum(pump, cfg.number("pump", "f_signal"),
                               cfg.number("pump", "p_signal_dbm", -110.0),
                               spec, curve,
                               rtol=cfg.number("pump", "rtol", 1e-9))
    path = out_path(cfg, "spectrum")
    write_result(_spectrum_result(cfg, rows), path)
    return [path]


def cmd_two_tone(cfg: RunConfig, args) -> list[Path]:
    spec = build_device(cfg)
    curve = device.bloch_dispersion(spec, _dispersion_grid_for_modes(cfg))
    pump = build_pump(cfg, spec, mode_selection="two-tone")
    rows = cme.two_tone_spectrum(cfg.number("pump", "f1"), cfg.number("pump", "f2"),
                                 cfg.number("pump", "p_in_dbm"), pump, spec, curve,
                                 rtol=cfg.number("pump", "rtol", 1e-9))
    path = out_path(cfg, "two_tone")
    write_result(_spectrum_result(cfg, rows), path)
    return [path]


def cmd_compression(cfg: RunConfig, args) -> list[Path]:
    spec = build_device(cfg)
    curve = device.bloch_dispersion(spec, _dispersion_grid_for_modes(cfg))
    pump = build_pump(cfg, spec, mode_selection="two-tone")
    f1 = cfg.number("pump", "f1")
    f2 = cfg.number("pump", "f2")
    p_in = sweep_axis(cfg)
    p_sig = np.empty(len(p_in))
    p_imd = np.empty(len(p_in))
    for j, p in enumerate(p_in):
        rows = {lbl: pw for lbl, _, pw in cme.two_tone_spectrum(
            f1, f2, float(p), pump, spec, curve,
            rtol=cfg.number("pump", "rtol", 1e-9))}
        p_sig[j] = rows["signal_1"]
        p_imd[j] = rows["imd_21"]
    sweep = extract.PowerSweep(p_in, p_sig, p_imd_dbm=p_imd)
    figures = {}
    try:
        figures["p1db_dbm"] = fmt_number(extract.p1db(sweep))
    except extract.ExtractError as exc:
        figures["p1db_dbm"] = f"not-found ({type(exc).__name__})"
    try:
        figures["ip3_dbm"] = fmt_number(extract.ip3(sweep))
    except (extract.ExtractError, ValueError) as exc:
        figures["ip3_dbm"] = f"not-found ({type(exc).__name__})"
    res = SweepResult(axis_name="Pin_dBm", axis=p_in,
                      columns={"Pout_dBm": p_sig, "Pimd_dBm": p_imd},
                      provenance=provenance(cfg, **figures))
    path = out_path(cfg, "compression")
    write_result(res, path)
    return [path]


def cmd_noise_forward(cfg: RunConfig, args) -> list[Path]:
    f_grid = sweep_axis(cfg) if cfg.has("sweep") else \
        np.array([cfg.number("noise", "f_signal")])
    p_hot = np.empty(len(f_grid))
    p_cold = np.empty(len(f_grid))
    p_off = np.empty(len(f_grid))
    for j, f_s in enumerate(f_grid):
        chain = build_chain(cfg, f_signal_hz=float(f_s))
        p_hot[j] = noise.forward_chain_power(chain, "hot")
        p_cold[j] = noise.forward_chain_power(chain, "cold")
        p_off[j] = noise.forward_chain_power(chain, "pump_off")
    to_dbm = lambda p: 10.0 * np.log10(p / 1e-3)
    res = SweepResult(axis_name="f_Hz", axis=f_grid,
                      columns={"P_hot_dBm": to_dbm(p_hot),
                               "P_cold_dBm": to_dbm(p_cold),
                               "P_off_dBm": to_dbm(p_off)},
                      provenance=provenance(cfg))
    path = out_path(cfg, "noise_forward")
    write_result(res, path)
    return [path]


def cmd_noise_invert(cfg: RunConfig, args) -> list[Path]:
    if not args.inputs:
        raise FileNotFoundError("noise-invert needs an input trace CSV")
    _, header, cols = read_table_csv(args.inputs[0])
    needed = ("f_Hz", "P_hot_dBm", "P_cold_dBm", "P_off_dBm")
    for name in needed:
        if name not in cols:
            raise ConfigError(f"input trace lacks column {name!r}")
    f_grid = cols["f_Hz"]
    from_dbm = lambda p: 1e-3 * 10.0 ** (np.asarray(p) / 10.0)
    out = {k: np.empty(len(f_grid)) for k in
           ("Y", "Yprime", "Nsys_photons", "Apa_photons", "err_photons")}
    d_t_hot = cfg.number("noise", "d_t_hot", 0.050)
    for j, f_s in enumerate(f_grid):
        chain = build_chain(cfg, f_signal_hz=float(f_s))
        res = noise.invert_chain(
            from_dbm(cols["P_hot_dBm"][j]), from_dbm(cols["P_cold_dBm"][j]),
            from_dbm(cols["P_off_dBm"][j]),
            chain.n_hot_eff, chain.n_cold, chain.n_t_idler)
        band_sys, _ = noise.uncertainty_band(
            chain.replace(a_pa_prime=res.a_pa_prime), d_t_hot)
        out["Y"][j] = res.y
        out["Yprime"][j] = res.y_prime
        out["Nsys_photons"][j] = res.n_sys
        out["Apa_photons"][j] = res.a_pa
        out["err_photons"][j] = band_sys
    res = SweepResult(axis_name="f_Hz", axis=f_grid, columns=out,
                      provenance=provenance(cfg))
    path = out_path(cfg, "noise_invert")
    write_result(res, path)
    return [path]


def cmd_fit_bandgap(cfg: RunConfig, args) -> list[Path]:
    if not args.inputs:
        raise FileNotFoundError("fit-bandgap needs an input data CSV")
    _, _, cols = read_table_csv(args.inputs[0])
    if "I_dc_A" not in cols or "f_gap_Hz" not in cols:
        raise ConfigError("input needs I_dc_A and f_gap_Hz columns")
    fit = extract.fit_bandgap_shift(cols["I_dc_A"], cols["f_gap_Hz"])
    payload = {
        "provenance": provenance(cfg),
        "i_star_A": fit.i_star,
        "i_quartic_A": None if np.isnan(fit.i_quartic) else fit.i_quartic,
        "covariance_A2": [[None if not np.isfinite(v) else v for v in row]
                          for row in np.asarray(fit.covariance)],
        "residual_norm": fit.residual_norm,
        "converged": fit.converged,
        "quartic_degenerate": fit.quartic_degenerate,
    }
    path = out_path(cfg, "fit_bandgap").with_suffix(".json")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")
    return [path]


def cmd_synth(cfg: RunConfig, args) -> list[Path]:
    rng = np.random.default_rng(cfg.seed)
    kind = args.kind
    if kind == "bandgap-data":
        s = cfg.number
        i_star = s("synth", "i_star", 0.89e-3)
        i_quart = s("synth", "i_quartic", 0.86e-3)
        f0 = s("synth", "f_gap0", 2.2e9)
        i_max = s("synth", "i_max", 0.5e-3)
        count = cfg.integer("synth", "count", 21)
        frac = s("synth", "noise_frac", 0.0)
        i_dc = np.linspace(0.0, i_max, count)
        f_gap = extract.bandgap_model(i_dc, i_star, i_quart, f0)
        span = f0 - f_gap[-1]
        f_gap = f_gap + rng.normal(0.0, max(frac, 0.0) * max(span, 1.0), count)
        res = SweepResult(axis_name="I_dc_A", axis=i_dc,
                          columns={"f_gap_Hz": f_gap},
                          provenance=provenance(
                              cfg, truth_i_star_A=fmt_number(i_star),
                              truth_i_quartic_A=fmt_number(i_quart),
                              truth_f_gap0_Hz=fmt_number(f0),
                              noise_frac=fmt_number(frac)))
        path = out_path(cfg, "synth_bandgap")
        write_result(res, path)
        return [path]
    if kind == "noise-traces":
        f_grid = sweep_axis(cfg) if cfg.has("sweep") else \
            np.array([cfg.number("noise", "f_signal")])
        frac = cfg.number("synth", "noise_frac", 0.0)
        cols = {"P_hot_dBm": np.empty(len(f_grid)),
                "P_cold_dBm": np.empty(len(f_grid)),
                "P_off_dBm": np.empty(len(f_grid))}
        for j, f_s in enumerate(f_grid):
            chain = build_chain(cfg, f_signal_hz=float(f_s))
            for name, which in (("P_hot_dBm", "hot"), ("P_cold_dBm", "cold"),
                                ("P_off_dBm", "pump_off")):
                p = noise.forward_chain_power(chain, which)
                p *= 1.0 + frac * rng.standard_normal()
                cols[name][j] = 10.0 * np.log10(p / 1e-3)
        truth = {"truth_a_pa_prime": fmt_number(
            build_chain(cfg, float(f_grid[0])).a_pa_prime),
            "noise_frac": fmt_number(frac)}
        res = SweepResult(axis_name="f_Hz", axis=f_grid, columns=cols,
                          provenance=provenance(cfg, **truth))
        path = out_path(cfg, "synth_noise")
        write_result(res, path)
        return [path]
    if kind == "power-sweep":
        s = cfg.number
        g0 = s("synth", "gain_db", 21.5)
        p_c = s("synth", "p_c_dbm", -70.0)
        start = s("synth", "start_dbm", -100.0)
        stop = s("synth", "stop_dbm", -55.0)
        count = cfg.integer("synth", "count", 46)
        jitter = s("synth", "noise_db", 0.0)
        p_in = np.linspace(start, stop, count)
        p_out = p_in + g0 - 10.0 * np.log10(1.0 + 10.0 ** ((p_in - p_c) / 10.0))
        p_out = p_out + rng.normal(0.0, jitter, count)
        res = SweepResult(axis_name="Pin_dBm", axis=p_in,
                          columns={"Pout_dBm": p_out},
                          provenance=provenance(cfg, truth_gain_db=fmt_number(g0),
                                                truth_p_c_dbm=fmt_number(p_c),
                                                noise_db=fmt_number(jitter)))
        path = out_path(cfg, "synth_power")
        write_result(res, path)
        return [path]
    raise ConfigError(f"unknown synth kind {kind!r}")


_COMMANDS = {
    "dispersion": cmd_dispersion,
    "stopband": cmd_stopband,
    "gain": cmd_gain,
    "spectrum": cmd_spectrum,
    "two-tone": cmd_two_tone,
    "compression": cmd_compression,
    "noise-forward": cmd_noise_forward,
    "noise-invert": cmd_noise_invert,
    "fit-bandgap": cmd_fit_bandgap,
    "synth": cmd_synth,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kitwpa",
        description="Traveling-wave parametric amplifier simulation toolkit")
    parser.add_argument("--version", action="version",
                        version=f"kitwpa {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", "-c", required=True)
        p.add_argument("--workers", type=int, default=1)
        p.add_argument("inputs", nargs="*")
        if name == "synth":
            p.add_argument("--kind", required=True,
                           choices=["noise-traces", "bandgap-data", "power-sweep"])
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = RunConfig.load(args.config)
        paths = _COMMANDS[args.command](cfg, args)
    except (ConfigError, configparser.Error, ValueError) as exc:
        _emit_error("config-error", exc)
        return EXIT_CONFIG
    except FileNotFoundError as exc:
        _emit_error("missing-input", exc)
        return EXIT_INPUT
    except (device.DeviceModelError, cme.CmeError, noise.NoiseError,
            extract.ExtractError) as exc:
        _emit_error("model-error", exc)
        return EXIT_MODEL
    for path in paths:
        print(path)
    return EXIT_OK


def _emit_error(kind: str, exc: Exception) -> None:
    record = {"error": kind, "type": type(exc).__name__, "message": str(exc)}
    print(json.dumps(record), file=sys.stderr)


if __name__ == "__main__":
    sys.exit(main())
