"""Run configuration: a sectioned ``key = value`` file with unit-suffixed keys.

Example::

    [source]
    phase_rad = 0.0
    overlap = 1.0
    purity_weight = calibrated     # fit to target_tangle
    target_tangle = 0.905
    calibration = auto             # tangle | visibilities | auto
    pair_rate_hz = 500

    [detectors]
    singles_rate_a_hz = 20000
    dark_prob_b_per_ns = 5e-5
    coincidence_window_ns = 1.0

    [experiment]
    name = chsh
    duration_s = 40
    seed = 2026

    [output]
    directory = out
    formats = json, csv

Omitted keys take the defaults below. Unknown sections or keys are errors,
so typos do not pass silently.
"""
from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from .analyzer import DetectorConfig
from .errors import ConfigError
from .source_model import (
    HH_SWEEP_TEMPERATURES_C,
    VV_TEMPERATURE_C,
    CrystalConfig,
    SourceConfig,
    calibrate_purity_weight,
    calibrate_to_visibilities,
    overlap_from_temperatures,
)

EXPERIMENTS = ("visibility", "tangle-sweep", "chsh", "bbell", "leggett", "overlap", "tomography")
STOCHASTIC = {"visibility", "tangle-sweep", "chsh", "bbell", "leggett", "tomography"}
DEFAULT_SEED = 2026


@dataclass(frozen=True)
class SourceSettings:
    phase_rad: float = 0.0
    # None: compute from the crystal temperatures
    overlap: float | None = 1.0
    # None: calibrate to target_tangle at the resolved overlap
    purity_weight: float | None = None
    target_tangle: float = 0.905
    # how a calibrated purity_weight is found: "tangle" holds the overlap fixed,
    # "visibilities" fits (v, overlap) jointly to the fringe visibilities at
    # target_tangle, "auto" picks "visibilities" for the visibility experiment
    calibration: str = "auto"
    pair_rate_hz: float = 500.0
    hh_temp_c: float = VV_TEMPERATURE_C
    vv_temp_c: float = VV_TEMPERATURE_C
    center_wavelength_nm: float = 810.0
    fwhm_nm: float = 0.30
    dlambda_dt_nm_per_c: float = 0.20
    hh_temp_ref_c: float = VV_TEMPERATURE_C
    vv_temp_ref_c: float = VV_TEMPERATURE_C

    def crystals(self):
        common = dict(
            center_wavelength_ref=self.center_wavelength_nm,
            dlambda_dT=self.dlambda_dt_nm_per_c,
            fwhm=self.fwhm_nm,
        )
        return (
            CrystalConfig(temp_ref=self.hh_temp_ref_c, role="HH", **common),
            CrystalConfig(temp_ref=self.vv_temp_ref_c, role="VV", **common),
        )

    def resolved_overlap(self):
        if self.overlap is not None:
            return self.overlap
        hh, vv = self.crystals()
        return overlap_from_temperatures(hh, vv, self.hh_temp_c, self.vv_temp_c)

    def resolved_purity_weight(self, overlap=None):
        if self.purity_weight is not None:
            return self.purity_weight
        o = self.resolved_overlap() if overlap is None else overlap
        return calibrate_purity_weight(self.target_tangle, o)

    def source_config(self, calibration="tangle"):
        if calibration == "visibilities" and self.purity_weight is None:
            cal = calibrate_to_visibilities(self.target_tangle)
            return SourceConfig(self.phase_rad, cal.overlap, cal.purity_weight, self.pair_rate_hz)
        o = self.resolved_overlap()
        return SourceConfig(
            phase=self.phase_rad,
            overlap=o,
            purity_weight=self.resolved_purity_weight(o),
            pair_rate=self.pair_rate_hz,
        )


@dataclass(frozen=True)
class ExperimentSettings:
    name: str = "chsh"
    duration_s: float = 40.0
    seed: int | None = DEFAULT_SEED
    n_points: int = 16
    phi_deg: tuple = (10.0, 20.0, 30.0, 40.0, 50.0, 60.0, 70.0, 80.0)
    hh_temps_c: tuple = HH_SWEEP_TEMPERATURES_C
    exposure_pairs: float = 2e4
    bootstrap_replicas: int = 100
    chsh_bases: str = "equatorial"  # or "optimal"


@dataclass(frozen=True)
class OutputSettings:
    directory: str = "out"
    formats: tuple = ("json", "csv")


@dataclass(frozen=True)
class RunConfig:
    source: SourceSettings = field(default_factory=SourceSettings)
    detectors: DetectorConfig = field(default_factory=DetectorConfig)
    experiment: ExperimentSettings = field(default_factory=ExperimentSettings)
    output: OutputSettings = field(default_factory=OutputSettings)

    def with_experiment(self, **changes):
        return replace(self, experiment=replace(self.experiment, **changes))

    def with_source(self, **changes):
        return replace(self, source=replace(self.source, **changes))

    def source_config(self):
        mode = self.source.calibration
        if mode == "auto":
            mode = "visibilities" if self.experiment.name == "visibility" else "tangle"
        return self.source.source_config(mode)

    def validate(self, stochastic=True):
        if self.experiment.name not in EXPERIMENTS:
            raise ConfigError(
                f"unknown experiment {self.experiment.name!r}; choose from {', '.join(EXPERIMENTS)}"
            )
        if stochastic and self.experiment.name in STOCHASTIC and self.experiment.seed is None:
            raise ConfigError("a seed is required for stochastic runs (experiment.seed or --seed)")
        if not self.experiment.duration_s > 0:
            raise ConfigError("experiment.duration_s must be positive")
        if self.source.calibration not in ("auto", "tangle", "visibilities"):
            raise ConfigError("source.calibration must be auto, tangle or visibilities")
        try:
            self.source_config()
        except ValueError as exc:
            raise ConfigError(f"invalid source settings: {exc}") from None
        return self


# keys in the [detectors] section and the DetectorConfig field each maps to
_DETECTOR_KEYS = {
    "singles_rate_a_hz": "singles_rate_A",
    "dark_rate_a_hz": "dark_rate_A",
    "dark_prob_b_per_ns": "dark_prob_B_per_ns",
    "coincidence_window_ns": "coincidence_window",
    "efficiency_product": "efficiency_product",
}


def _floats(text):
    return tuple(float(x) for x in text.replace(",", " ").split())


def _optional_float(text, keyword):
    t = text.strip().lower()
    if t in (keyword, "none", ""):
        return None
    return float(text)


def _parse_section(section, cls, converters):
    out = {}
    known = {f.name for f in fields(cls)}
    for key, raw in section.items():
        if key not in known:
            raise ConfigError(f"unknown key {key!r} in [{section.name}]")
        conv = converters.get(key, float)
        try:
            out[key] = conv(raw)
        except ValueError:
            raise ConfigError(f"bad value {raw!r} for {section.name}.{key}") from None
    return out


def _int(text):
    v = float(text)
    if not v.is_integer():
        raise ValueError(text)
    return int(v)


def load_config(path=None, text=None):
    """Parse a config file (or string). With neither, return the defaults."""
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        if path is not None:
            path = Path(path)
            if not path.exists():
                raise ConfigError(f"config file {path} not found")
            cp.read(path)
        elif text is not None:
            cp.read_string(text)
        else:
            return RunConfig()
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse config: {exc}") from None

    unknown = set(cp.sections()) - {"source", "detectors", "experiment", "output"}
    if unknown:
        raise ConfigError(f"unknown config sections: {sorted(unknown)}")

    src = {}
    if cp.has_section("source"):
        src = _parse_section(
            cp["source"],
            SourceSettings,
            {
                "overlap": lambda t: _optional_float(t, "from_temperatures"),
                "purity_weight": lambda t: _optional_float(t, "calibrated"),
                "calibration": str.strip,
            },
        )
    det = {}
    if cp.has_section("detectors"):
        for key, raw in cp["detectors"].items():
            if key not in _DETECTOR_KEYS:
                raise ConfigError(f"unknown key {key!r} in [detectors]")
            try:
                det[_DETECTOR_KEYS[key]] = float(raw)
            except ValueError:
                raise ConfigError(f"bad value {raw!r} for detectors.{key}") from None
    exp = {}
    if cp.has_section("experiment"):
        exp = _parse_section(
            cp["experiment"],
            ExperimentSettings,
            {
                "name": str.strip,
                "seed": _int,
                "n_points": _int,
                "bootstrap_replicas": _int,
                "phi_deg": _floats,
                "hh_temps_c": _floats,
                "chsh_bases": str.strip,
            },
        )
        # a config file that names no seed gets none; the CLI may supply one
        exp.setdefault("seed", None)
    out = {}
    if cp.has_section("output"):
        out = _parse_section(
            cp["output"],
            OutputSettings,
            {
                "directory": str.strip,
                "formats": lambda t: tuple(x.strip().lower() for x in t.split(",") if x.strip()),
            },
        )
    try:
        cfg = RunConfig(
            source=SourceSettings(**src),
            detectors=DetectorConfig(**det),
            experiment=ExperimentSettings(**exp),
            output=OutputSettings(**out),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
    if any(not math.isfinite(x) for x in cfg.experiment.phi_deg):
        raise ConfigError("experiment.phi_deg must be finite")
    return cfg
