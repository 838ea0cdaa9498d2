"""Scenario configuration: validation, defaults and file I/O.

Scenario files are flat ``key = value`` text.  Values are numbers, booleans
or bracketed arrays (``[a, b, c]``).  Powers and noise floors are given in
dBm, SINR targets in dB, angles in degrees; everything is converted to
linear watts / degrees on load.  See ``docs`` section of the README for the
full key list.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

SPEED_OF_LIGHT = 299792458.0


class ScenarioError(ValueError):
    """Raised for unparsable or invalid scenario files."""


def dbm_to_watts(p_dbm):
    return 10.0 ** ((p_dbm - 30.0) / 10.0)


def watts_to_dbm(p_w):
    return 10.0 * math.log10(p_w) + 30.0


def db_to_lin(x_db):
    return 10.0 ** (x_db / 10.0)


def lin_to_db(x):
    return 10.0 * math.log10(x)


@dataclass
class SystemConfig:
    """Static system description plus solver knobs (all linear units)."""

    n_antennas: int = 16
    n_iods: int = 2
    n_eves: int = 2
    carrier_hz: float = 1.0e9
    element_spacing: float | None = None  # defaults to c / (2 f_c)
    per_antenna_power: list[float] = field(default_factory=list)  # watts, length N
    noise_iod: float = 1e-13  # sigma_u^2, watts (-100 dBm)
    noise_eve: float = 1e-13  # sigma_e^2, watts
    sinr_targets: list[float] = field(default_factory=list)  # Gamma_p,k linear, length K
    secrecy_prob: float = 0.95  # kappa
    sigma_p: float | None = None  # interference cap (watts); None -> non-binding default
    vartheta: float | None = None  # minimax budget normalizer; None -> sum(P_n)
    sum_power: bool = False  # replace per-antenna rows by one sum-power row
    tol_eps1: float = 1e-6
    tol_eps2: float = 1e-6
    tol_eps3: float = 1e-6
    barrier_sigma0: float = 20.0  # minimax barrier start
    barrier_growth: float = 2.0  # minimax barrier growth factor
    ls_alpha: float = 0.1
    ls_beta: float = 0.5
    gamma_e_init: float = 1.0  # 0 dB starting Eve-SINR cap
    max_mm_iters: int = 100
    max_outer_iters: int = 30
    rng_seed: int = 1234

    # -- derived helpers -------------------------------------------------
    def spacing(self):
        if self.element_spacing is not None:
            return self.element_spacing
        return SPEED_OF_LIGHT / (2.0 * self.carrier_hz)

    def total_power(self):
        return float(sum(self.per_antenna_power))

    def vartheta_value(self):
        return self.total_power() if self.vartheta is None else self.vartheta

    def sigma_p_value(self, channels=None):
        """Interference cap; the default is loose enough to never bind."""
        if self.sigma_p is not None:
            return self.sigma_p
        if channels is None:
            raise ValueError("default sigma_p needs channels to be resolved")
        gmax = max(float((abs(h) ** 2).sum()) for h in channels.iod_channels)
        return self.noise_iod + gmax * self.total_power()


@dataclass
class Geometry:
    """Polar placement of IoDs (and optionally Eves) around the array."""

    iod_polar: list[tuple[float, float]] = field(default_factory=list)  # (range m, azimuth deg)
    eve_polar: list[tuple[float, float]] | None = None


def validate_config(cfg: SystemConfig, geom: Geometry | None = None) -> list[str]:
    """Return all invariant violations; empty when the config is valid."""
    errs = []
    if cfg.n_antennas < 1:
        errs.append("n_antennas must be a positive integer")
    if cfg.n_iods < 1:
        errs.append("n_iods must be a positive integer")
    if cfg.n_eves < 1:
        errs.append("n_eves must be a positive integer")
    if cfg.n_iods >= cfg.n_antennas:
        errs.append(f"n_iods must be < n_antennas (got K={cfg.n_iods}, N={cfg.n_antennas})")
    if cfg.carrier_hz <= 0:
        errs.append("carrier_hz must be positive")
    if cfg.element_spacing is not None and cfg.element_spacing <= 0:
        errs.append("element_spacing must be positive")
    if len(cfg.per_antenna_power) != cfg.n_antennas:
        errs.append(f"per_antenna_power must have length N={cfg.n_antennas}")
    if any(p < 0 for p in cfg.per_antenna_power):
        errs.append("per-antenna powers must be non-negative")
    if cfg.noise_iod <= 0:
        errs.append("noise_iod must be strictly positive")
    if cfg.noise_eve <= 0:
        errs.append("noise_eve must be strictly positive")
    if len(cfg.sinr_targets) != cfg.n_iods:
        errs.append(f"sinr_targets must have length K={cfg.n_iods}")
    if any(g <= 0 for g in cfg.sinr_targets):
        errs.append("sinr_targets must be strictly positive (linear scale)")
    if not (0.0 < cfg.secrecy_prob < 1.0):
        errs.append(f"secrecy_prob must lie in (0,1), got {cfg.secrecy_prob}")
    if cfg.sigma_p is not None and cfg.sigma_p <= 0:
        errs.append("sigma_p must be strictly positive")
    if cfg.vartheta is not None and cfg.vartheta <= 0:
        errs.append("vartheta must be strictly positive")
    for name in ("tol_eps1", "tol_eps2", "tol_eps3"):
        if getattr(cfg, name) <= 0:
            errs.append(f"{name} must be strictly positive")
    if cfg.barrier_sigma0 <= 0:
        errs.append("barrier_sigma0 must be strictly positive")
    if cfg.barrier_growth <= 1:
        errs.append("barrier_growth must exceed 1")
    if not (0.0 < cfg.ls_alpha < 0.5):
        errs.append("ls_alpha must lie in (0, 0.5)")
    if not (0.0 < cfg.ls_beta < 1.0):
        errs.append("ls_beta must lie in (0, 1)")
    if cfg.gamma_e_init <= 0:
        errs.append("gamma_e_init must be strictly positive")
    if geom is not None:
        if len(geom.iod_polar) != cfg.n_iods:
            errs.append(f"iod geometry must list K={cfg.n_iods} positions")
        for r, th in geom.iod_polar:
            if r <= 0:
                errs.append(f"IoD range must be positive, got {r}")
            if not (-90.0 <= th <= 90.0):
                errs.append(f"IoD azimuth must lie in [-90, 90] deg, got {th}")
        if geom.eve_polar is not None:
            for r, th in geom.eve_polar:
                if r <= 0:
                    errs.append(f"Eve range must be positive, got {r}")
                if not (-90.0 <= th <= 90.0):
                    errs.append(f"Eve azimuth must lie in [-90, 90] deg, got {th}")
    return errs


# ---------------------------------------------------------------------------
# file format


def _parse_value(text, path, lineno):
    text = text.strip()
    if text.startswith("["):
        if not text.endswith("]"):
            raise ScenarioError(f"{path}:{lineno}: unterminated array")
        inner = text[1:-1].strip()
        if not inner:
            return []
        return [_parse_value(tok, path, lineno) for tok in inner.split(",")]
    low = text.lower()
    if low in ("true", "false"):
        return low == "true"
    try:
        if any(c in text for c in ".eE") and not text.lstrip("+-").isdigit():
            return float(text)
        return int(text)
    except ValueError:
        raise ScenarioError(f"{path}:{lineno}: cannot parse value {text!r}") from None


def _read_kv(path):
    kv, lines = {}, {}
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = fh.readlines()
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario file {path}: {exc}") from exc
    for lineno, line in enumerate(raw, start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ScenarioError(f"{path}:{lineno}: expected 'key = value'")
        key, _, value = stripped.partition("=")
        key = key.strip()
        if key in kv:
            raise ScenarioError(f"{path}:{lineno}: duplicate key {key!r}")
        kv[key] = _parse_value(value, path, lineno)
        lines[key] = lineno
    return kv, lines


def _as_list(value, length, what):
    if isinstance(value, list):
        vals = [float(v) for v in value]
        if len(vals) == 1:
            return vals * length
        if len(vals) != length:
            raise ScenarioError(f"{what} must have length {length}, got {len(vals)}")
        return vals
    return [float(value)] * length


_SCALAR_KEYS = {
    "secrecy_prob": "secrecy_prob",
    "tol_eps1": "tol_eps1",
    "tol_eps2": "tol_eps2",
    "tol_eps3": "tol_eps3",
    "barrier_sigma0": "barrier_sigma0",
    "barrier_growth": "barrier_growth",
    "ls_alpha": "ls_alpha",
    "ls_beta": "ls_beta",
    "max_mm_iters": "max_mm_iters",
    "max_outer_iters": "max_outer_iters",
    "rng_seed": "rng_seed",
    "carrier_hz": "carrier_hz",
    "element_spacing": "element_spacing",
    "sum_power": "sum_power",
}


def load_scenario(path) -> tuple[SystemConfig, Geometry]:
    """Parse and validate a scenario file.

    Raises ScenarioError with a line reference on parse problems and with
    the violated invariant on validation problems.
    """
    kv, _ = _read_kv(path)

    def pop(key, default=None):
        return kv.pop(key, default)

    n = int(pop("n_antennas", 16))
    k = int(pop("n_iods", 2))
    q = int(pop("n_eves", 2))

    cfg = SystemConfig(n_antennas=n, n_iods=k, n_eves=q)
    for key, attr in _SCALAR_KEYS.items():
        if key in kv:
            cfg = replace(cfg, **{attr: kv.pop(key)})

    if "per_antenna_power_dbm" in kv:
        pa = _as_list(kv.pop("per_antenna_power_dbm"), n, "per_antenna_power_dbm")
        powers = [dbm_to_watts(p) for p in pa]
    else:
        total_dbm = float(pop("total_power_dbm", 10.0))
        powers = [dbm_to_watts(total_dbm) / n] * n
    cfg = replace(cfg, per_antenna_power=powers)

    cfg = replace(cfg, noise_iod=dbm_to_watts(float(pop("noise_iod_dbm", -100.0))))
    cfg = replace(cfg, noise_eve=dbm_to_watts(float(pop("noise_eve_dbm", -100.0))))
    targets_db = _as_list(pop("sinr_targets_db", 8.0), k, "sinr_targets_db")
    cfg = replace(cfg, sinr_targets=[db_to_lin(g) for g in targets_db])
    if "sigma_p_dbm" in kv:
        cfg = replace(cfg, sigma_p=dbm_to_watts(float(kv.pop("sigma_p_dbm"))))
    if "vartheta_w" in kv:
        cfg = replace(cfg, vartheta=float(kv.pop("vartheta_w")))
    if "gamma_e_init_db" in kv:
        cfg = replace(cfg, gamma_e_init=db_to_lin(float(kv.pop("gamma_e_init_db"))))

    ranges = _as_list(pop("iod_range_m", 1000.0), k, "iod_range_m")
    azims = _as_list(pop("iod_azimuth_deg", 0.0), k, "iod_azimuth_deg")
    geom = Geometry(iod_polar=list(zip(ranges, azims)))
    if "eve_range_m" in kv or "eve_azimuth_deg" in kv:
        er = _as_list(pop("eve_range_m", 1000.0), q, "eve_range_m")
        ea = _as_list(pop("eve_azimuth_deg", 0.0), q, "eve_azimuth_deg")
        geom.eve_polar = list(zip(er, ea))

    if kv:
        raise ScenarioError(f"{path}: unknown keys {sorted(kv)}")

    errs = validate_config(cfg, geom)
    if errs:
        raise ScenarioError(f"{path}: invalid scenario: " + "; ".join(errs))
    return cfg, geom


def save_scenario(path, cfg: SystemConfig, geom: Geometry) -> None:
    """Write a scenario file that load_scenario parses back to the same config."""
    lines = [
        "# secbeam scenario",
        f"n_antennas = {cfg.n_antennas}",
        f"n_iods = {cfg.n_iods}",
        f"n_eves = {cfg.n_eves}",
        f"carrier_hz = {cfg.carrier_hz!r}",
    ]
    if cfg.element_spacing is not None:
        lines.append(f"element_spacing = {cfg.element_spacing!r}")
    pa = ", ".join(repr(watts_to_dbm(p)) for p in cfg.per_antenna_power)
    lines.append(f"per_antenna_power_dbm = [{pa}]")
    lines.append(f"noise_iod_dbm = {watts_to_dbm(cfg.noise_iod)!r}")
    lines.append(f"noise_eve_dbm = {watts_to_dbm(cfg.noise_eve)!r}")
    st = ", ".join(repr(lin_to_db(g)) for g in cfg.sinr_targets)
    lines.append(f"sinr_targets_db = [{st}]")
    if cfg.sigma_p is not None:
        lines.append(f"sigma_p_dbm = {watts_to_dbm(cfg.sigma_p)!r}")
    if cfg.vartheta is not None:
        lines.append(f"vartheta_w = {cfg.vartheta!r}")
    if cfg.sum_power:
        lines.append("sum_power = true")
    lines.append(f"gamma_e_init_db = {lin_to_db(cfg.gamma_e_init)!r}")
    for key, attr in _SCALAR_KEYS.items():
        if key in ("carrier_hz", "element_spacing", "sum_power"):
            continue
        lines.append(f"{key} = {getattr(cfg, attr)!r}")
    lines.append("iod_range_m = [" + ", ".join(repr(r) for r, _ in geom.iod_polar) + "]")
    lines.append("iod_azimuth_deg = [" + ", ".join(repr(a) for _, a in geom.iod_polar) + "]")
    if geom.eve_polar:
        lines.append("eve_range_m = [" + ", ".join(repr(r) for r, _ in geom.eve_polar) + "]")
        lines.append("eve_azimuth_deg = [" + ", ".join(repr(a) for _, a in geom.eve_polar) + "]")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
