"""Pipeline configuration: every tunable threshold in one flat TOML file.

Unknown keys are rejected so typos fail loudly; absent keys take the
documented defaults.  ``dump_config`` emits a file that loads back to an
identical configuration.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .expansion import ExpansionParams
from .features import SamplingParams
from .geometry import CameraModel
from .meshing import RejectionThresholds
from .underwater import WaterParams

_DEFAULT_CAMERA = CameraModel(fx=525.0, fy=525.0, cx=319.5, cy=239.5,
                              width=640, height=480)


@dataclass(frozen=True)
class PipelineConfig:
    camera: CameraModel = _DEFAULT_CAMERA
    sampling: SamplingParams = SamplingParams()
    thresholds: RejectionThresholds = RejectionThresholds()
    expansion: ExpansionParams = ExpansionParams()
    water: WaterParams = WaterParams()
    depth_scale: float = 1.0 / 5000.0
    max_dt: float = 0.02

    def __post_init__(self):
        if self.depth_scale <= 0:
            raise ValueError("depth_scale must be positive")
        if self.max_dt <= 0:
            raise ValueError("max_dt must be positive")


# key -> (section, attribute, type); sections are assembled into the
# dataclasses above, which own the range checks
_SCHEMA = {
    "fx": ("camera", "fx", float),
    "fy": ("camera", "fy", float),
    "cx": ("camera", "cx", float),
    "cy": ("camera", "cy", float),
    "width": ("camera", "width", int),
    "height": ("camera", "height", int),
    "max_points": ("sampling", "max_points", int),
    "quality_level": ("sampling", "quality_level", float),
    "min_distance": ("sampling", "min_distance", float),
    "block_size": ("sampling", "block_size", int),
    "border_margin": ("sampling", "border_margin", int),
    "l_p": ("thresholds", "l_p", float),
    "l_v": ("thresholds", "l_v", float),
    "d": ("thresholds", "d", float),
    "window": ("expansion", "window_size", int),
    "min_pixel_distance": ("expansion", "min_pixel_distance", float),
    "d_min": ("expansion", "d_min", float),
    "beta_r": ("water", 0, float),
    "beta_g": ("water", 1, float),
    "beta_b": ("water", 2, float),
    "backlight_r": ("water", 3, float),
    "backlight_g": ("water", 4, float),
    "backlight_b": ("water", 5, float),
    "depth_scale": ("top", "depth_scale", float),
    "max_dt": ("top", "max_dt", float),
}

_SECTION_TYPES = {
    "camera": CameraModel,
    "sampling": SamplingParams,
    "thresholds": RejectionThresholds,
    "expansion": ExpansionParams,
}


def config_from_dict(raw: dict) -> PipelineConfig:
    """Build a PipelineConfig from a flat key-value mapping."""
    sections: dict[str, dict] = {name: {} for name in _SECTION_TYPES}
    water = list(WaterParams().beta) + list(WaterParams().backlight)
    top: dict[str, float] = {}
    for key, value in raw.items():
        if key not in _SCHEMA:
            raise ValueError(f"unknown config key: {key}")
        section, attr, typ = _SCHEMA[key]
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ValueError(f"config key {key} must be a number")
        if typ is int and float(value) != int(value):
            raise ValueError(f"config key {key} must be an integer")
        value = typ(value)
        if section == "water":
            water[attr] = value
        elif section == "top":
            top[attr] = value
        else:
            sections[section][attr] = value

    defaults = PipelineConfig()
    parts = {}
    for name, cls in _SECTION_TYPES.items():
        base = getattr(defaults, name)
        merged = {f: getattr(base, f) for f in base.__dataclass_fields__}
        merged.update(sections[name])
        parts[name] = cls(**merged)
    water_params = WaterParams(beta=tuple(water[:3]),
                               backlight=tuple(water[3:]))
    return PipelineConfig(camera=parts["camera"], sampling=parts["sampling"],
                          thresholds=parts["thresholds"],
                          expansion=parts["expansion"], water=water_params,
                          depth_scale=top.get("depth_scale",
                                              defaults.depth_scale),
                          max_dt=top.get("max_dt", defaults.max_dt))


def load_config(path) -> PipelineConfig:
    """Load a TOML config file; parse errors keep tomllib's line numbers."""
    with open(path, "rb") as fh:
        raw = tomllib.load(fh)
    return config_from_dict(raw)


def dump_config(config: PipelineConfig) -> str:
    """Emit TOML that loads back to an identical configuration."""
    cam, smp, thr, exp, wat = (config.camera, config.sampling,
                               config.thresholds, config.expansion,
                               config.water)
    values = {
        "fx": cam.fx, "fy": cam.fy, "cx": cam.cx, "cy": cam.cy,
        "width": cam.width, "height": cam.height,
        "max_points": smp.max_points, "quality_level": smp.quality_level,
        "min_distance": smp.min_distance, "block_size": smp.block_size,
        "border_margin": smp.border_margin,
        "l_p": thr.l_p, "l_v": thr.l_v, "d": thr.d,
        "window": exp.window_size,
        "min_pixel_distance": exp.min_pixel_distance, "d_min": exp.d_min,
        "beta_r": wat.beta[0], "beta_g": wat.beta[1], "beta_b": wat.beta[2],
        "backlight_r": wat.backlight[0], "backlight_g": wat.backlight[1],
        "backlight_b": wat.backlight[2],
        "depth_scale": config.depth_scale, "max_dt": config.max_dt,
    }
    lines = []
    for key, value in values.items():
        if isinstance(value, int):
            lines.append(f"{key} = {value}")
        else:
            lines.append(f"{key} = {value!r}")
    return "\n".join(lines) + "\n"
