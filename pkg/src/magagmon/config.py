"""Flat dotted-key run configuration with per-subcommand schemas.

A config file is plain text, one `key = value` per line, `#` comments.
Unknown keys are rejected and every violation names the offending key path,
which keeps scientific runs auditable from the config alone.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

__all__ = ["ConfigError", "KeySpec", "RunConfig", "SCHEMAS", "parse_config_text", "load_config"]


class ConfigError(ValueError):
    """Schema violation; carries the dotted key path it names."""

    def __init__(self, key: str, message: str):
        super().__init__(f"{message}: {key}")
        self.key = key


def _parse_point(raw: str):
    parts = [p.strip() for p in raw.split(",")]
    if len(parts) != 2:
        raise ValueError(f"expected 'x,y', got {raw!r}")
    return (float(parts[0]), float(parts[1]))


def _parse_points(raw: str):
    return tuple(_parse_point(p) for p in raw.split(";") if p.strip())


def _parse_floats(raw: str):
    return tuple(float(p) for p in raw.split(",") if p.strip())


def _parse_bool(raw: str):
    low = raw.strip().lower()
    if low in ("true", "yes", "1", "on"):
        return True
    if low in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"expected a boolean, got {raw!r}")


_PARSERS = {
    "int": int,
    "float": float,
    "str": str,
    "bool": _parse_bool,
    "point": _parse_point,
    "points": _parse_points,
    "floats": _parse_floats,
}


@dataclass(frozen=True)
class KeySpec:
    kind: str
    required: bool = False
    default: object = None
    choices: Optional[tuple] = None


_FIELD_KEYS = {
    "field.kind": KeySpec("str", default="constant",
                          choices=("constant", "radial-quadratic", "concave",
                                   "gaussian-bump", "zero", "grid")),
    "field.beta0": KeySpec("float", default=1.0),
    "field.curvature": KeySpec("float", default=0.5),
    "field.width": KeySpec("float", default=1.0),
    "field.csv": KeySpec("str", default=""),
}

_GAUGE_KEYS = {
    "gauge.kind": KeySpec("str", default="landau", choices=("landau", "transversal")),
    "gauge.quad_n": KeySpec("int", default=32),
}

_DOMAIN_KEYS = {
    "domain.kind": KeySpec("str", default="plane", choices=("rectangle", "disc", "plane")),
    "domain.xmin": KeySpec("float", default=-1.0),
    "domain.xmax": KeySpec("float", default=1.0),
    "domain.ymin": KeySpec("float", default=-1.0),
    "domain.ymax": KeySpec("float", default=1.0),
    "domain.center": KeySpec("point", default=(0.0, 0.0)),
    "domain.radius": KeySpec("float", default=1.0),
}

_GRID_KEYS = {
    "grid.nx": KeySpec("int", default=128),
    "grid.ny": KeySpec("int", default=128),
    "grid.box_halfwidth": KeySpec("float", default=8.0),
}

_SAMPLING_KEYS = {
    "sampling.n_steps": KeySpec("int", default=400),
    "sampling.n_paths": KeySpec("int", default=20000),
    "sampling.seed": KeySpec("int", required=True),
    "sampling.chunk": KeySpec("int", default=4096),
}

_QUAD_KEYS = {
    "quad.n_gh": KeySpec("int", default=20),
    "quad.n_s": KeySpec("int", default=16),
}

_AGMON_KEYS = {
    "agmon.lambda": KeySpec("float", default=0.5),
    "agmon.a": KeySpec("float", default=1.0),
    "agmon.nu1": KeySpec("float", default=None),
    "agmon.convention": KeySpec("str", default="half-square",
                                choices=("half-square", "half-abs")),
}

_OPT_KEYS = {
    "opt.restarts": KeySpec("int", default=8),
    "opt.interior_vertices": KeySpec("int", default=24),
    "opt.seed": KeySpec("int", default=0),
    "opt.max_cycles": KeySpec("int", default=12),
    "opt.preset": KeySpec("str", default="default", choices=("default", "light")),
}

_OUTPUT_KEYS = {
    "output.dir": KeySpec("str", default=""),
}

SCHEMAS: dict = {
    "heatkernel": {
        **_FIELD_KEYS, **_SAMPLING_KEYS, **_OUTPUT_KEYS,
        "heatkernel.x": KeySpec("point", default=(0.0, 0.0)),
        "heatkernel.y": KeySpec("point", default=(0.0, 0.0)),
        "heatkernel.t": KeySpec("floats", default=(1.0,)),
        "heatkernel.method": KeySpec("str", default="all",
                                     choices=("mehler", "bridge", "binned", "all")),
        "heatkernel.bin_radius": KeySpec("float", default=0.3),
    },
    "levy-area": {
        **_SAMPLING_KEYS, **_OUTPUT_KEYS,
        "levy.x": KeySpec("point", default=(0.0, 0.0)),
        "levy.horizon": KeySpec("float", default=1.0),
        "levy.beta0": KeySpec("float", default=1.0),
        "levy.dump_paths": KeySpec("bool", default=False),
    },
    "betabar": {
        **_FIELD_KEYS, **_QUAD_KEYS, **_OUTPUT_KEYS,
        "sampling.seed": KeySpec("int", default=0),
        "betabar.x": KeySpec("point", default=(0.0, 0.0)),
        "betabar.p": KeySpec("points", required=True),
        "betabar.t": KeySpec("floats", default=(0.25,)),
        "betabar.method": KeySpec("str", default="gh", choices=("gh", "mc", "both")),
        "betabar.mc_samples": KeySpec("int", default=200000),
    },
    "agmon-dist": {
        **_FIELD_KEYS, **_GAUGE_KEYS, **_GRID_KEYS, **_QUAD_KEYS, **_AGMON_KEYS,
        **_OPT_KEYS, **_OUTPUT_KEYS,
        "agmon.x": KeySpec("points", required=True),
    },
    "eigs": {
        **_FIELD_KEYS, **_GAUGE_KEYS, **_DOMAIN_KEYS, **_GRID_KEYS, **_OUTPUT_KEYS,
        "eigs.k": KeySpec("int", default=6),
    },
    "verify-bound": {
        **_FIELD_KEYS, **_GAUGE_KEYS, **_DOMAIN_KEYS, **_GRID_KEYS, **_QUAD_KEYS,
        **_AGMON_KEYS, **_OPT_KEYS, **_OUTPUT_KEYS,
        "eigs.k": KeySpec("int", default=1),
        "verify.n_angles": KeySpec("int", default=8),
        "verify.n_radii": KeySpec("int", default=5),
    },
    "bounds": {
        **_FIELD_KEYS, **_GAUGE_KEYS, **_GRID_KEYS, **_QUAD_KEYS, **_AGMON_KEYS,
        **_OPT_KEYS, **_OUTPUT_KEYS,
        "bounds.kind": KeySpec("str", required=True,
                               choices=("confine", "concave", "carmona")),
        "bounds.x": KeySpec("points", required=True),
        "bounds.beta0": KeySpec("float", default=1.0),
        "bounds.compact_radius": KeySpec("float", default=0.0),
        "bounds.beta_inf": KeySpec("float", default=0.0),
        "bounds.horizons": KeySpec("floats", default=(1.0,)),
        "bounds.w_beta0": KeySpec("float", default=1.0),
        "bounds.u_level": KeySpec("float", default=0.0),
    },
    "kato-check": {
        **_FIELD_KEYS, **_GAUGE_KEYS, **_GRID_KEYS, **_OUTPUT_KEYS,
        "kato.p": KeySpec("float", default=2.0),
    },
}

_STOCHASTIC = ("heatkernel", "levy-area")


@dataclass(frozen=True)
class RunConfig:
    subcommand: str
    values: dict
    text: str  # canonical source text, hashed into the manifest
    provided: frozenset = frozenset()  # keys present in the file itself

    def __getitem__(self, key: str):
        return self.values[key]


def parse_config_text(text: str) -> dict:
    raw = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}", "expected 'key = value'")
        key, value = stripped.split("=", 1)
        key = key.strip()
        if key in raw:
            raise ConfigError(key, "duplicate key")
        raw[key] = value.strip()
    return raw


def validate(subcommand: str, raw: dict, text: str = "") -> RunConfig:
    if subcommand not in SCHEMAS:
        raise ConfigError(subcommand, "unknown subcommand")
    schema = SCHEMAS[subcommand]
    for key in raw:
        if key not in schema:
            raise ConfigError(key, "unknown key")
    values = {}
    for key, spec in schema.items():
        if key in raw:
            try:
                value = _PARSERS[spec.kind](raw[key])
            except ValueError as err:
                raise ConfigError(key, f"bad value ({err})") from err
            if spec.choices is not None and value not in spec.choices:
                raise ConfigError(key, f"must be one of {spec.choices}")
            values[key] = value
        elif spec.required:
            raise ConfigError(key, "missing required key")
        else:
            values[key] = spec.default
    if subcommand == "betabar" and values["betabar.method"] in ("mc", "both") \
            and "sampling.seed" not in raw:
        raise ConfigError("sampling.seed", "missing required key")
    return RunConfig(subcommand, values, text, frozenset(raw))


def load_config(subcommand: str, path: str) -> RunConfig:
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    return validate(subcommand, parse_config_text(text), text)
