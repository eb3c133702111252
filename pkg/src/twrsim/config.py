"""Run configuration stored as an INI-style file with one section per component.

Example::

    [scene]
    tof_initial = 5.0e-9
    vbar = 0

    [clock_i]
    offset = 0
    skew_ppm = 20

    [clock_j]
    offset = 0
    skew_ppm = -20

    [noise]
    variance_R = 6.96e-21
    distribution = gaussian

    [timing]
    dt32 = 3.5e-4
    dt53 = 1.9e-3
    processing_T = 7.2e-3

    [sweep]
    dt53_min = 2e-4
    dt53_max = 2e-2
    points = 200
    log_spaced = true

    [run]
    n_measurements = 2500
    seed = 0
    output_path = sweep.csv

``scene`` also accepts ``distance_m``/``velocity_mps`` and clocks accept
``skew`` (dimensionless) instead of ``skew_ppm``.
"""

from __future__ import annotations

import configparser
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from twrsim.harness import TrialConfig
from twrsim.protocol import Scene, TimingConfig
from twrsim.timebase import (
    DEFAULT_R,
    SPEED_OF_LIGHT,
    ClockParams,
    Distribution,
    NoiseModel,
)


class ConfigError(ValueError):
    """Invalid or unreadable configuration; ``location`` names the offending spot."""

    def __init__(self, message: str, location: str = ""):
        self.location = location
        super().__init__(f"{location}: {message}" if location else message)


@dataclass(frozen=True)
class SweepSpec:
    dt53_min: float
    dt53_max: float
    points: int = 200
    log_spaced: bool = True

    def __post_init__(self):
        if not self.dt53_min > 0:
            raise ValueError("dt53_min must be positive")
        if self.points < 1:
            raise ValueError("points must be at least 1")
        if self.points > 1 and not self.dt53_min < self.dt53_max:
            raise ValueError("dt53_min must be below dt53_max")


@dataclass(frozen=True)
class RunConfig:
    scene: Scene = field(default_factory=lambda: Scene.from_distance(1.5))
    clock_i: ClockParams = ClockParams()
    clock_j: ClockParams = ClockParams()
    noise: NoiseModel = field(default_factory=lambda: NoiseModel(DEFAULT_R))
    timing: TimingConfig = field(
        default_factory=lambda: TimingConfig(dt32=3.5e-4, dt53=1.9e-3, processing_T=7.2e-3)
    )
    sweep: Optional[SweepSpec] = None
    n_measurements: int = 2500
    seed: int = 0
    output_path: Optional[str] = None
    timestamp_log: Optional[str] = None
    workers: int = 1

    def trial(self) -> TrialConfig:
        return TrialConfig(
            n_measurements=self.n_measurements,
            timing=self.timing,
            scene=self.scene,
            clocks=(self.clock_i, self.clock_j),
            noise=self.noise,
            seed=self.seed,
        )

    # -- text round trip --------------------------------------------------

    def to_text(self) -> str:
        cp = configparser.ConfigParser(interpolation=None)
        cp.optionxform = str
        cp["scene"] = {"tof_initial": repr(self.scene.tof_initial), "vbar": repr(self.scene.vbar)}
        for name, clock in (("clock_i", self.clock_i), ("clock_j", self.clock_j)):
            cp[name] = {"offset": repr(clock.offset), "skew": repr(clock.skew)}
        noise = {"variance_R": repr(self.noise.variance_R),
                 "distribution": self.noise.distribution.value}
        if self.noise.quantization_tick is not None:
            noise["quantization_tick"] = repr(self.noise.quantization_tick)
        cp["noise"] = noise
        cp["timing"] = {k: repr(getattr(self.timing, k)) for k in ("dt32", "dt53", "processing_T")}
        if self.sweep is not None:
            cp["sweep"] = {
                "dt53_min": repr(self.sweep.dt53_min),
                "dt53_max": repr(self.sweep.dt53_max),
                "points": str(self.sweep.points),
                "log_spaced": "true" if self.sweep.log_spaced else "false",
            }
        run = {"n_measurements": str(self.n_measurements), "seed": str(self.seed),
               "workers": str(self.workers)}
        if self.output_path:
            run["output_path"] = self.output_path
        if self.timestamp_log:
            run["timestamp_log"] = self.timestamp_log
        cp["run"] = run
        lines = []
        for section in cp.sections():
            lines.append(f"[{section}]")
            lines.extend(f"{k} = {v}" for k, v in cp[section].items())
            lines.append("")
        return "\n".join(lines)

    @classmethod
    def from_text(cls, text: str) -> "RunConfig":
        return _parse(text)

    @classmethod
    def load(cls, path) -> "RunConfig":
        path = Path(path)
        try:
            text = path.read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config file: {exc.strerror}", str(path)) from exc
        try:
            return _parse(text)
        except ConfigError as exc:
            raise ConfigError(str(exc), str(path)) from exc


_KNOWN = {
    "scene": {"tof_initial", "vbar", "distance_m", "velocity_mps"},
    "clock_i": {"offset", "skew", "skew_ppm"},
    "clock_j": {"offset", "skew", "skew_ppm"},
    "noise": {"variance_R", "std_cm", "distribution", "quantization_tick"},
    "timing": {"dt32", "dt53", "processing_T"},
    "sweep": {"dt53_min", "dt53_max", "points", "log_spaced"},
    "run": {"n_measurements", "seed", "output_path", "timestamp_log", "workers"},
}


def _line_of(text: str, section: str, key: Optional[str] = None) -> int:
    current = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        m = re.match(r"\[(.+)\]$", stripped)
        if m:
            current = m.group(1).strip()
            if key is None and current == section:
                return lineno
            continue
        if current == section and key is not None:
            name = re.split(r"[=:]", stripped, maxsplit=1)[0].strip()
            if name == key:
                return lineno
    return 0


class _Reader:
    def __init__(self, cp: configparser.ConfigParser, text: str):
        self.cp = cp
        self.text = text

    def where(self, section: str, key: Optional[str] = None) -> str:
        line = _line_of(self.text, section, key)
        spot = f"[{section}]" + (f" {key}" if key else "")
        return f"line {line}: {spot}" if line else spot

    def has(self, section, key):
        return self.cp.has_option(section, key)

    def get(self, section, key, conv=float, default=None):
        if not self.cp.has_option(section, key):
            return default
        raw = self.cp.get(section, key).strip()
        try:
            if conv is bool:
                return self.cp.getboolean(section, key)
            return conv(raw)
        except ValueError as exc:
            raise ConfigError(f"cannot parse {raw!r}: {exc}", self.where(section, key)) from exc

    def build(self, section, factory, *args, **kwargs):
        try:
            return factory(*args, **kwargs)
        except (ValueError, TypeError) as exc:
            raise ConfigError(str(exc), self.where(section)) from exc


def _parse(text: str) -> RunConfig:
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(str(exc).replace("\n", " ")) from exc
    r = _Reader(cp, text)
    for section in cp.sections():
        if section not in _KNOWN:
            raise ConfigError(f"unknown section {section!r}", r.where(section))
        unknown = set(cp[section]) - _KNOWN[section]
        if unknown:
            key = sorted(unknown)[0]
            raise ConfigError(f"unknown key {key!r}", r.where(section, key))

    defaults = RunConfig()
    kw = {}

    if cp.has_section("scene"):
        if r.has("scene", "distance_m") or r.has("scene", "velocity_mps"):
            tof = r.get("scene", "distance_m", default=defaults.scene.tof_initial * SPEED_OF_LIGHT) / SPEED_OF_LIGHT
            vbar = r.get("scene", "velocity_mps", default=0.0) / SPEED_OF_LIGHT
        else:
            tof = r.get("scene", "tof_initial", default=defaults.scene.tof_initial)
            vbar = r.get("scene", "vbar", default=0.0)
        kw["scene"] = r.build("scene", Scene, tof, vbar)

    for name in ("clock_i", "clock_j"):
        if cp.has_section(name):
            offset = r.get(name, "offset", default=0.0)
            if r.has(name, "skew_ppm"):
                skew = r.get(name, "skew_ppm") / 1e6
            else:
                skew = r.get(name, "skew", default=0.0)
            kw[name] = r.build(name, ClockParams, offset, skew)

    if cp.has_section("noise"):
        if r.has("noise", "std_cm"):
            var = (r.get("noise", "std_cm") / 100.0 / SPEED_OF_LIGHT) ** 2
        else:
            var = r.get("noise", "variance_R", default=DEFAULT_R)
        dist = r.get("noise", "distribution", conv=str, default="gaussian").lower()
        try:
            dist = Distribution(dist)
        except ValueError as exc:
            raise ConfigError(f"unknown distribution {dist!r}", r.where("noise", "distribution")) from exc
        tick = r.get("noise", "quantization_tick", default=None)
        kw["noise"] = r.build("noise", NoiseModel, var, dist, tick)

    if cp.has_section("timing"):
        t = defaults.timing
        kw["timing"] = r.build(
            "timing", TimingConfig,
            r.get("timing", "dt32", default=t.dt32),
            r.get("timing", "dt53", default=t.dt53),
            r.get("timing", "processing_T", default=t.processing_T),
        )

    if cp.has_section("sweep"):
        for key in ("dt53_min", "dt53_max"):
            if not r.has("sweep", key):
                raise ConfigError(f"missing {key}", r.where("sweep"))
        kw["sweep"] = r.build(
            "sweep", SweepSpec,
            r.get("sweep", "dt53_min"),
            r.get("sweep", "dt53_max"),
            r.get("sweep", "points", conv=int, default=200),
            r.get("sweep", "log_spaced", conv=bool, default=True),
        )

    if cp.has_section("run"):
        n = r.get("run", "n_measurements", conv=int, default=defaults.n_measurements)
        if n < 2:
            raise ConfigError("n_measurements must be at least 2", r.where("run", "n_measurements"))
        kw["n_measurements"] = n
        kw["seed"] = r.get("run", "seed", conv=int, default=0)
        kw["output_path"] = r.get("run", "output_path", conv=str, default=None)
        kw["timestamp_log"] = r.get("run", "timestamp_log", conv=str, default=None)
        kw["workers"] = r.get("run", "workers", conv=int, default=1)

    return RunConfig(**kw)
