"""Experiment configuration: ``[section]`` / ``key = value`` files, SI units."""
from __future__ import annotations

import configparser
from dataclasses import asdict, dataclass, field, fields, replace

from .errors import InvalidConfigError
from .gp import FitStrategy
from .modal import BeamConfig
from .trajectory import MotionBounds

__all__ = ["ExperimentConfig", "IlcConfig", "MotionConfig", "load_config", "dump_config"]


@dataclass(frozen=True)
class MotionConfig:
    distance: float = 0.1
    v_max: float = 0.5
    a_max: float = 1.0
    j_max: float = 10.0
    d_max: float = 100.0
    settle: float = 0.5

    def bounds(self):
        return MotionBounds(self.distance, self.v_max, self.a_max, self.j_max, self.d_max)


@dataclass(frozen=True)
class IlcConfig:
    trials: int = 6
    w_e: float = 1.0
    w_f_rel: float = 1e-8
    w_df: float = 0.0
    nominal_position: float = 0.25


@dataclass(frozen=True)
class ExperimentConfig:
    beam: BeamConfig = field(default_factory=BeamConfig)
    bandwidth_hz: float = 4.0
    motion: MotionConfig = field(default_factory=MotionConfig)
    ilc: IlcConfig = field(default_factory=IlcConfig)
    gp: FitStrategy = field(default_factory=FitStrategy)
    training_positions: tuple = (0.010, 0.130, 0.250, 0.370, 0.490)
    test_positions: tuple = (0.030, 0.110, 0.248, 0.387, 0.470)
    trace_position: float = 0.030
    bode_positions: tuple = (0.0, 0.035, 0.250)
    grid_points: int = 201
    workers: int = 1
    output_dir: str = "out"

    def validate(self):
        length = self.beam.length
        for name in ("training_positions", "test_positions", "bode_positions"):
            for rho in getattr(self, name):
                if not 0 <= rho <= length:
                    raise InvalidConfigError(f"{name}: {rho} m outside beam [0, {length}]")
        if not 0 <= self.ilc.nominal_position <= length:
            raise InvalidConfigError("nominal_position outside beam")
        if self.ilc.trials < 1:
            raise InvalidConfigError("ilc.trials must be >= 1")
        if self.workers < 1:
            raise InvalidConfigError("workers must be >= 1")
        self.motion.bounds().validate()
        return self


_SECTIONS = {"beam": BeamConfig, "motion": MotionConfig, "ilc": IlcConfig, "gp": FitStrategy}
_TOP = ("bandwidth_hz", "training_positions", "test_positions", "trace_position",
        "bode_positions", "grid_points", "workers", "output_dir")


def _parse(value, default):
    if isinstance(default, tuple):
        return tuple(float(v) for v in value.replace(",", " ").split())
    if isinstance(default, bool):
        return value.strip().lower() in ("1", "true", "yes", "on")
    if isinstance(default, int):
        return int(value)
    if isinstance(default, float):
        return float(value)
    return value.strip()


def _format(value):
    if isinstance(value, tuple):
        return ", ".join(repr(float(v)) for v in value)
    return repr(value) if isinstance(value, float) else str(value)


def load_config(path=None, text=None):
    """Read a config file; missing keys keep their defaults."""
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    if path is not None:
        with open(path) as fh:
            parser.read_file(fh)
    elif text is not None:
        parser.read_string(text)
    cfg = ExperimentConfig()
    updates = {}
    for section, cls in _SECTIONS.items():
        if not parser.has_section(section):
            continue
        current = getattr(cfg, section)
        known = {f.name for f in fields(cls)}
        kw = {}
        for key, value in parser.items(section):
            if key not in known:
                raise InvalidConfigError(f"unknown key [{section}] {key}")
            kw[key] = _parse(value, getattr(current, key))
        updates[section] = replace(current, **kw)
    if parser.has_section("experiment"):
        for key, value in parser.items("experiment"):
            if key not in _TOP:
                raise InvalidConfigError(f"unknown key [experiment] {key}")
            updates[key] = _parse(value, getattr(cfg, key))
    for section in parser.sections():
        if section not in _SECTIONS and section != "experiment":
            raise InvalidConfigError(f"unknown section [{section}]")
    return replace(cfg, **updates).validate()


def dump_config(cfg):
    lines = []
    for section in _SECTIONS:
        lines.append(f"[{section}]")
        for key, value in asdict(getattr(cfg, section)).items():
            lines.append(f"{key} = {_format(value)}")
        lines.append("")
    lines.append("[experiment]")
    for key in _TOP:
        lines.append(f"{key} = {_format(getattr(cfg, key))}")
    return "\n".join(lines) + "\n"
