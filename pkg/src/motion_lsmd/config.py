"""Flat key=value configuration covering every documented default."""

from __future__ import annotations

import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .detector import DetectorConfig
from .errors import InvalidValue, RangeError, UnknownKey
from .lsmd import LsmdParams
from .tracker import MotionModelParams, TrackerConfig


def _positive(v) -> bool:
    return v > 0


def _non_negative(v) -> bool:
    return v >= 0


def _unit(v) -> bool:
    return 0.0 <= v <= 1.0


def _any(_v) -> bool:
    return True


def _choice(*opts):
    return lambda v: v in opts


def _parse_bool(raw: str) -> bool:
    low = raw.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {raw!r}")


# key -> (type, default, range predicate, description of the legal range)
SCHEMA: dict[str, tuple[type, object, object, str]] = {
    "pipeline.seed": (int, 0, _non_negative, ">= 0"),
    "ingest.patch_size": (int, 16, _positive, "> 0"),
    "ingest.stride": (int, 8, _positive, "> 0"),
    "ingest.template_size": (int, 32, _positive, "> 0"),
    "sparse.lambda1": (float, 0.01, _non_negative, ">= 0"),
    "sparse.max_iter": (int, 500, _positive, "> 0"),
    "sparse.tol": (float, 1e-8, _positive, "> 0"),
    "lsmd.mu_L": (float, 1.0, _positive, "> 0"),
    "lsmd.mu_S": (float, 0.3, _positive, "> 0"),
    "lsmd.lambda_l1": (float, 0.05, _non_negative, ">= 0"),
    "lsmd.max_iter": (int, 200, _positive, "> 0"),
    "lsmd.rel_tol": (float, 1e-6, _positive, "> 0"),
    "lsmd.k": (int, 4, lambda v: v >= 2, ">= 2"),
    "lsmd.group_weight": (float, 1.0, _positive, "> 0"),
    "tracker.n_particles": (int, 600, _positive, "> 0"),
    "tracker.sigma_lx": (float, 4.0, _non_negative, ">= 0"),
    "tracker.sigma_ly": (float, 4.0, _non_negative, ">= 0"),
    "tracker.sigma_theta": (float, 0.02, _non_negative, ">= 0"),
    "tracker.sigma_s": (float, 0.01, _non_negative, ">= 0"),
    "tracker.sigma_alpha": (float, 0.002, _non_negative, ">= 0"),
    "tracker.sigma_phi": (float, 0.001, _non_negative, ">= 0"),
    "tracker.n_templates": (int, 10, lambda v: v >= 2, ">= 2"),
    "tracker.sigma_c": (float, 0.1, _positive, "> 0"),
    "tracker.eps_occ": (float, 0.15, _positive, "> 0"),
    "tracker.tau_update": (float, 0.3, _unit, "in [0,1]"),
    "tracker.occ_gate": (float, 0.3, _unit, "in [0,1]"),
    "tracker.ring_scale": (float, 1.5, _positive, "> 0"),
    "tracker.observe": (str, "raw", _choice("raw", "difference"), "raw|difference"),
    "detector.tau_on": (float, 0.5, _non_negative, ">= 0"),
    "detector.tau_off": (float, 0.35, _non_negative, ">= 0"),
    "detector.min_len": (int, 5, _positive, "> 0"),
    "detector.kappa": (float, 0.0, _unit, "in [0,1]"),
    "detector.normalize": (bool, True, _any, "bool"),
    "detector.stride": (int, 1, _positive, "> 0"),
    "detector.lsmd_input": (str, "difference", _choice("difference", "raw"), "difference|raw"),
    "detector.use_tracker": (bool, False, _any, "bool"),
}


@dataclass
class Config:
    values: dict[str, object] = field(default_factory=dict)

    def __post_init__(self):
        merged = {k: spec[1] for k, spec in SCHEMA.items()}
        merged.update(self.values)
        self.values = merged

    def __getitem__(self, key: str):
        if key not in SCHEMA:
            raise UnknownKey(f"unknown config key {key!r}")
        return self.values[key]

    def echo(self, stream=None) -> None:
        stream = stream or sys.stderr
        for key in sorted(self.values):
            print(f"{key} = {self.values[key]}", file=stream)

    # --- views consumed by the library modules ---

    def tracker_config(self) -> TrackerConfig:
        sigma = np.array(
            [
                self["tracker.sigma_lx"],
                self["tracker.sigma_ly"],
                self["tracker.sigma_theta"],
                self["tracker.sigma_s"],
                self["tracker.sigma_alpha"],
                self["tracker.sigma_phi"],
            ]
        )
        return TrackerConfig(
            n_particles=self["tracker.n_particles"],
            motion=MotionModelParams(sigma=sigma),
            n_templates=self["tracker.n_templates"],
            template_size=self["ingest.template_size"],
            sigma_c=self["tracker.sigma_c"],
            eps_occ=self["tracker.eps_occ"],
            tau_update=self["tracker.tau_update"],
            occ_gate=self["tracker.occ_gate"],
            ring_scale=self["tracker.ring_scale"],
            observe=self["tracker.observe"],
            seed=self["pipeline.seed"],
            lambda1=self["sparse.lambda1"],
            solver_tol=self["sparse.tol"],
            solver_max_iter=self["sparse.max_iter"],
        )

    def lsmd_params(self) -> LsmdParams:
        return LsmdParams(
            mu_L=self["lsmd.mu_L"],
            mu_S=self["lsmd.mu_S"],
            lambda_l1=self["lsmd.lambda_l1"],
            max_iter=self["lsmd.max_iter"],
            rel_tol=self["lsmd.rel_tol"],
            seed=self["pipeline.seed"],
        )

    def detector_config(self) -> DetectorConfig:
        return DetectorConfig(
            patch_size=self["ingest.patch_size"],
            stride=self["ingest.stride"],
            tree_k=self["lsmd.k"],
            lsmd=self.lsmd_params(),
            group_weight=self["lsmd.group_weight"],
            tau_on=self["detector.tau_on"],
            tau_off=self["detector.tau_off"],
            min_len=self["detector.min_len"],
            kappa=self["detector.kappa"],
            normalize=self["detector.normalize"],
            temporal_stride=self["detector.stride"],
            lsmd_input=self["detector.lsmd_input"],
            seed=self["pipeline.seed"],
            use_tracker=self["detector.use_tracker"],
            tracker=self.tracker_config(),
        )


def _convert(key: str, raw: str):
    typ, _default, check, legal = SCHEMA[key]
    raw = raw.strip()
    try:
        if typ is bool:
            val = _parse_bool(raw)
        elif typ is int:
            val = int(raw)
        elif typ is float:
            val = float(raw)
        else:
            val = raw
    except ValueError as exc:
        raise InvalidValue(f"{key}: cannot parse {raw!r} as {typ.__name__}") from exc
    if not check(val):
        raise RangeError(f"{key} = {val!r} outside legal range ({legal})")
    return val


def parse_kv_lines(lines: list[str], source: str = "<config>") -> dict[str, str]:
    """Shared 'key = value' line format with '#' comments."""
    out: dict[str, str] = {}
    for lineno, line in enumerate(lines, 1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise InvalidValue(f"{source}:{lineno}: expected key = value")
        key, raw = stripped.split("=", 1)
        out[key.strip()] = raw.strip()
    return out


def parse_config(
    path: str | Path | None = None,
    overrides: list[str] | None = None,
    verbose: bool = False,
) -> Config:
    """Parse a config file plus 'key=value' override strings.

    Overrides win over file values; absent keys take documented defaults.
    """
    values: dict[str, object] = {}
    if path is not None:
        text = Path(path).read_text(encoding="utf-8")
        for key, raw in parse_kv_lines(text.splitlines(), source=str(path)).items():
            if key not in SCHEMA:
                raise UnknownKey(f"unknown config key {key!r}")
            values[key] = _convert(key, raw)
    for item in overrides or []:
        if "=" not in item:
            raise InvalidValue(f"override must look like key=value, got {item!r}")
        key, raw = item.split("=", 1)
        key = key.strip()
        if key not in SCHEMA:
            raise UnknownKey(f"unknown config key {key!r}")
        values[key] = _convert(key, raw)
    cfg = Config(values=values)
    if cfg["detector.tau_off"] > cfg["detector.tau_on"]:
        raise RangeError("detector.tau_off must not exceed detector.tau_on")
    if verbose:
        cfg.echo()
    return cfg


def default_config() -> Config:
    return Config()
