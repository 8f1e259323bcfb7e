"""Flat key=value run configuration: parsing, validation, serialization."""
from __future__ import annotations

from dataclasses import dataclass, fields, replace

import numpy as np

from .errors import ParseError, ValidationError


def _parse_vector(text: str) -> tuple:
    return tuple(float(t) for t in text.replace(",", " ").split())


def _parse_vectors(text: str) -> tuple:
    text = text.strip()
    if not text:
        return ()
    return tuple(_parse_vector(part) for part in text.split(";") if part.strip())


def _parse_table(text: str) -> tuple:
    """Polynomial terms 'e1 e2 coeff; ...' -> ((e1, e2, coeff), ...)."""
    text = text.strip()
    if not text:
        return ()
    out = []
    for part in text.split(";"):
        if not part.strip():
            continue
        nums = part.replace(",", " ").split()
        if len(nums) < 2:
            raise ValueError(f"term '{part.strip()}' needs exponents and a coefficient")
        out.append(tuple(int(t) for t in nums[:-1]) + (float(nums[-1]),))
    return tuple(out)


def _fmt_vector(v) -> str:
    return ",".join(repr(float(x)) for x in v)


def _fmt_vectors(vs) -> str:
    return "; ".join(_fmt_vector(v) for v in vs)


def _fmt_table(t) -> str:
    return "; ".join(" ".join(str(int(e)) for e in term[:-1]) + " " + repr(float(term[-1]))
                     for term in t)


@dataclass(frozen=True)
class RunConfig:
    """Validated run configuration; immutable, equality-comparable."""

    seed: int = 0
    out: str = "out"
    group_generators: tuple = ((0.0, 1.0),
                               (-0.8660254037844386, 0.5))
    a1: tuple = (1.0, 0.0)
    potential_kind: str = "triangle"
    potential_table: tuple = ()
    potential_minima: tuple = ()
    q_h_table: tuple = ()
    grid_R: float = 8.0
    grid_h: float = 0.1
    grid_node_cap: int = 4_000_000
    flow_dt: float | None = None
    flow_tol: float = 1e-3
    flow_max_steps: int = 400_000
    flow_k_sym: int = 50
    flow_clamp: bool = True
    flow_energy_stride: int = 1
    flow_stall_epochs: int = 80
    flow_seed_mode: str = "affine"
    flow_seed_file: str = ""
    verify_kato_trials: int = 50
    verify_subharmonic_trials: int = 100
    verify_decay_band: tuple = (1.0, 3.0)
    verify_ball_center: tuple | None = None
    verify_ball_radius: float | None = None
    verify_checks: tuple = ("kato", "subharmonic", "positivity", "degiorgi",
                            "decay", "ordering")
    sweep_radii: tuple = (4.0, 6.0, 8.0, 12.0)
    sweep_h: float = 0.1
    compare_n: int = 2
    compare_c: float | None = None
    compare_qbar: float | None = None
    compare_qmax: float | None = None
    compare_l0_hint: float | None = None
    compare_rho: float = 0.5


# key in the document -> (field name, parse, format)
_KEYS = {
    "seed": ("seed", int, str),
    "out": ("out", str, str),
    "group.generators": ("group_generators", _parse_vectors, _fmt_vectors),
    "a1": ("a1", _parse_vector, _fmt_vector),
    "potential": ("potential_kind", str, str),        # alias
    "potential.kind": ("potential_kind", str, str),
    "potential.table": ("potential_table", _parse_table, _fmt_table),
    "potential.minima": ("potential_minima", _parse_vectors, _fmt_vectors),
    "q.h_table": ("q_h_table", _parse_table, _fmt_table),
    "grid.R": ("grid_R", float, repr),
    "grid.h": ("grid_h", float, repr),
    "grid.node_cap": ("grid_node_cap", int, str),
    "flow.dt": ("flow_dt", float, repr),
    "flow.tol": ("flow_tol", float, repr),
    "flow.max_steps": ("flow_max_steps", int, str),
    "flow.k_sym": ("flow_k_sym", int, str),
    "flow.clamp": ("flow_clamp", None, None),       # bool, handled below
    "flow.energy_stride": ("flow_energy_stride", int, str),
    "flow.stall_epochs": ("flow_stall_epochs", int, str),
    "flow.seed_mode": ("flow_seed_mode", str, str),
    "flow.seed_file": ("flow_seed_file", str, str),
    "verify.kato_trials": ("verify_kato_trials", int, str),
    "verify.subharmonic_trials": ("verify_subharmonic_trials", int, str),
    "verify.decay_band": ("verify_decay_band", _parse_vector, _fmt_vector),
    "verify.ball_center": ("verify_ball_center", _parse_vector, _fmt_vector),
    "verify.ball_radius": ("verify_ball_radius", float, repr),
    "verify.checks": ("verify_checks",
                      lambda s: tuple(t.strip() for t in s.split(",") if t.strip()),
                      lambda v: ",".join(v)),
    "sweep.radii": ("sweep_radii", _parse_vector, _fmt_vector),
    "sweep.h": ("sweep_h", float, repr),
    "compare.n": ("compare_n", int, str),
    "compare.c": ("compare_c", float, repr),
    "compare.qbar": ("compare_qbar", float, repr),
    "compare.qmax": ("compare_qmax", float, repr),
    "compare.l0_hint": ("compare_l0_hint", float, repr),
    "compare.rho": ("compare_rho", float, repr),
}

_OPTIONAL = {"flow.dt", "verify.ball_center", "verify.ball_radius",
             "compare.c", "compare.qbar", "compare.qmax", "compare.l0_hint"}

_VALID_CHECKS = ("kato", "subharmonic", "positivity", "degiorgi", "decay",
                 "ordering")


def _parse_bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("true", "1", "yes", "on"):
        return True
    if t in ("false", "0", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def parse_config(text: str) -> RunConfig:
    """Parse a key = value document into a validated RunConfig.

    Blank lines and '#' comments are ignored; unknown keys are rejected.
    """
    updates = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError(f"expected key = value, got {raw.strip()!r}", lineno)
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if key not in _KEYS:
            raise ParseError(f"unknown key {key!r}", lineno)
        field_name, parse, _ = _KEYS[key]
        try:
            if key == "flow.clamp":
                updates[field_name] = _parse_bool(value)
            elif value == "" and key in _OPTIONAL:
                updates[field_name] = None
            else:
                updates[field_name] = parse(value)
        except (ValueError, TypeError) as exc:
            raise ParseError(f"bad value for {key}: {exc}", lineno) from None
    cfg = replace(RunConfig(), **updates)
    validate_config(cfg)
    return cfg


def validate_config(cfg: RunConfig) -> None:
    """Range checks; raises ValidationError naming the offending key."""
    def err(key, msg):
        raise ValidationError(key, msg)

    if cfg.grid_R <= 0:
        err("grid.R", "must be positive")
    if not 0 < cfg.grid_h <= cfg.grid_R / 2:
        err("grid.h", f"must satisfy 0 < h <= R/2 = {cfg.grid_R / 2}")
    if cfg.flow_dt is not None and not 0 < cfg.flow_dt <= 0.25 * cfg.grid_h ** 2:
        err("flow.dt", f"must satisfy 0 < dt <= 0.25 h^2 = {0.25 * cfg.grid_h ** 2:.3g}")
    if cfg.flow_tol <= 0:
        err("flow.tol", "must be positive")
    if cfg.flow_max_steps < 1:
        err("flow.max_steps", "must be at least 1")
    if cfg.flow_k_sym < 1:
        err("flow.k_sym", "must be at least 1")
    if cfg.flow_energy_stride < 0:
        err("flow.energy_stride", "must be nonnegative (0 disables recording)")
    if cfg.flow_stall_epochs < 0:
        err("flow.stall_epochs", "must be nonnegative (0 disables stall exit)")
    if cfg.flow_seed_mode not in ("affine", "file"):
        err("flow.seed_mode", "must be 'affine' or 'file'")
    if cfg.potential_kind not in ("triangle", "custom"):
        err("potential.kind", "must be 'triangle' or 'custom'")
    if cfg.potential_kind == "custom" and not cfg.potential_table:
        err("potential.table", "required for a custom potential")
    if cfg.potential_kind == "custom" and not cfg.potential_minima:
        err("potential.minima", "required for a custom potential")
    for gen in cfg.group_generators:
        if len(gen) != len(cfg.a1):
            err("group.generators", "generator dimension does not match a1")
        if abs(np.linalg.norm(gen) - 1.0) > 1e-8:
            err("group.generators", f"normal {gen} is not unit length")
    if cfg.verify_kato_trials < 20:
        err("verify.kato_trials", "must be at least 20")
    if cfg.verify_subharmonic_trials < 1:
        err("verify.subharmonic_trials", "must be at least 1")
    if len(cfg.verify_decay_band) != 2 or not 0 <= cfg.verify_decay_band[0] < cfg.verify_decay_band[1]:
        err("verify.decay_band", "must be an increasing pair d_min,d_max")
    for check in cfg.verify_checks:
        if check not in _VALID_CHECKS:
            err("verify.checks", f"unknown check {check!r}")
    if len(cfg.sweep_radii) < 1 or any(r <= 0 for r in cfg.sweep_radii):
        err("sweep.radii", "must be positive radii")
    if not 0 < cfg.sweep_h <= min(cfg.sweep_radii) / 2:
        err("sweep.h", "must satisfy 0 < h <= min(R)/2")
    if cfg.compare_n < 1:
        err("compare.n", "must be at least 1")
    if not 0 < cfg.compare_rho < 1:
        err("compare.rho", "must lie in (0, 1)")
    if cfg.verify_ball_radius is not None and cfg.verify_ball_radius <= 0:
        err("verify.ball_radius", "must be positive")
    if cfg.seed < 0:
        err("seed", "must be nonnegative")


def serialize(cfg: RunConfig) -> str:
    """Canonical text form; parse(serialize(cfg)) == cfg."""
    lines = []
    by_field = {spec[0]: (key, spec[2]) for key, spec in _KEYS.items()}
    for f in fields(RunConfig):
        key, fmt = by_field[f.name]
        value = getattr(cfg, f.name)
        if key == "flow.clamp":
            lines.append(f"{key} = {'true' if value else 'false'}")
        elif value is None:
            lines.append(f"{key} =")
        else:
            lines.append(f"{key} = {fmt(value)}")
    return "\n".join(lines) + "\n"
