"""Declarative experiment configuration read from INI files.

Lengths may be written as decimals or fractions ("1/20"); lists are comma separated.
See configs/ for one file per shipped experiment.
"""

from __future__ import annotations

import configparser
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from pathlib import Path

EXPERIMENTS = ("ex1", "ex2", "appendix", "global-local", "hlimit-1d", "constant")
TRANSITION_KINDS = ("smooth", "characteristic")


class ConfigError(ValueError):
    pass


def _num(text: str) -> float:
    try:
        return float(Fraction(text.strip()))
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigError(f"not a number: {text!r}") from exc


def _nums(text: str) -> list[float]:
    return [_num(t) for t in text.split(",") if t.strip()]


@dataclass
class ExperimentConfig:
    experiment: str
    eps: float = 0.04
    R1: float = 2.5
    R2: float = 1.5
    center: tuple = (0.5, 0.5)
    L: float = 0.05
    delta: float = 0.05
    ladder: list = field(default_factory=list)  # coarse h outside K (table runs)
    h_fine: float = 1 / 160  # fixed size inside K for table runs
    fine_ladder: list = field(default_factory=list)  # h inside K for localized / comparison runs
    h_coarse: float = 1 / 20
    reference: int = 640  # subdivisions per axis of the uniform reference mesh
    transition: str = "smooth"
    tol: float = 1e-10
    output: str = "out"
    hmm_samples: int = 65
    hmm_cell: int = 32
    eta: list = field(default_factory=lambda: [0.05])
    appendix_N: int = 128
    appendix_eps_over_h: float = 0.03
    appendix_fine_N: int = 1024
    appendix_fine_eps: float = 0.0015
    appendix_L: list = field(default_factory=lambda: [1 / 64, 1 / 32, 1 / 16, 1 / 8])
    rho_samples: int = 11
    bands: dict = field(default_factory=dict)  # name -> (lo, hi)

    @property
    def reference_h(self) -> float:
        return 1.0 / self.reference

    def validate(self) -> "ExperimentConfig":
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}; expected one of {EXPERIMENTS}")
        if self.transition not in TRANSITION_KINDS:
            raise ConfigError(f"unknown transition kind {self.transition!r}")
        if len(set(self.appendix_L)) != len(self.appendix_L) or any(v <= 0 for v in self.appendix_L):
            raise ConfigError("appendix L values must be positive and distinct")
        for name in ("ladder", "fine_ladder"):
            vals = getattr(self, name)
            if any(v <= 0 for v in vals):
                raise ConfigError(f"{name} entries must be positive")
            if any(b >= a for a, b in zip(vals, vals[1:])):
                raise ConfigError(f"{name} must be strictly decreasing, got {vals}")
        if self.tol <= 0:
            raise ConfigError("solver tolerance must be positive")
        if self.experiment in ("ex1", "ex2", "global-local") and self.reference_h > self.eps / 10:
            raise ConfigError(f"reference h = 1/{self.reference} exceeds eps/10 = {self.eps / 10:g}")
        if self.L <= 0 or self.delta < 0:
            raise ConfigError("need L > 0 and delta >= 0")
        for k, (lo, hi) in self.bands.items():
            if lo > hi:
                raise ConfigError(f"band {k} is empty")
        return self

    def to_dict(self) -> dict:
        d = asdict(self)
        d["center"] = list(self.center)
        d["bands"] = {k: list(v) for k, v in self.bands.items()}
        return d


def parse_config(text: str, base: Path | None = None) -> ExperimentConfig:
    cp = configparser.ConfigParser()
    cp.read_string(text)
    get = lambda sec, key: cp.get(sec, key, fallback=None)
    exp = get("experiment", "id")
    if exp is None:
        raise ConfigError("missing [experiment] id")
    cfg = ExperimentConfig(exp)
    if (v := get("experiment", "output")) is not None:
        cfg.output = str(base / v) if base and not Path(v).is_absolute() else v

    scalars = {
        ("coefficient", "eps"): "eps", ("coefficient", "R1"): "R1", ("coefficient", "R2"): "R2",
        ("region", "L"): "L", ("region", "delta"): "delta",
        ("mesh", "h_fine"): "h_fine", ("mesh", "h_coarse"): "h_coarse",
        ("solver", "tol"): "tol", ("appendix", "eps_over_h"): "appendix_eps_over_h",
        ("appendix", "fine_eps"): "appendix_fine_eps",
    }
    for (sec, key), attr in scalars.items():
        if (v := get(sec, key)) is not None:
            setattr(cfg, attr, _num(v))
    ints = {
        ("mesh", "reference"): "reference", ("hmm", "samples"): "hmm_samples", ("hmm", "cell"): "hmm_cell",
        ("appendix", "N"): "appendix_N", ("appendix", "fine_N"): "appendix_fine_N",
        ("hlimit", "samples"): "rho_samples",
    }
    for (sec, key), attr in ints.items():
        if (v := get(sec, key)) is not None:
            setattr(cfg, attr, int(v))
    lists = {("mesh", "ladder"): "ladder", ("mesh", "fine_ladder"): "fine_ladder",
             ("global_local", "eta"): "eta", ("appendix", "L"): "appendix_L"}
    for (sec, key), attr in lists.items():
        if (v := get(sec, key)) is not None:
            setattr(cfg, attr, _nums(v))
    if (v := get("region", "center")) is not None:
        cfg.center = tuple(_nums(v))
    if (v := get("transition", "kind")) is not None:
        cfg.transition = v.strip()
    if cp.has_section("bands"):
        for k, v in cp.items("bands"):
            lo, hi = _nums(v)
            cfg.bands[k] = (lo, hi)
    return cfg.validate()


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    return parse_config(path.read_text(), base=path.parent)
