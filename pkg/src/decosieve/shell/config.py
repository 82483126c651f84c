"""Flat dotted-key configuration files.

Format: one ``section.key = value`` per line; ``#`` starts a comment;
blank lines ignored. Every key is declared in SCHEMA with a type and a
default — unknown keys are rejected by name (a typo must never silently
fall back to a default), and the fully resolved configuration (defaults
included) is echoed into every run directory so a result can always be
reproduced from its own output.

The pipeline is deterministic by construction; there is no random number
generator anywhere, and the ``run.rng_free`` key exists only as a seal:
setting it to false is a configuration error.
"""

import math
from dataclasses import dataclass

from ..errors import ConfigError

_WINDOWS = ("exponential", "gaussian", "sharp")
_ENGINES = ("channels", "qbm", "secular")
_MEASURES = ("linear", "vn")
_FAMILY_KINDS = ("coherent_grid", "number_states", "two_state_superpositions",
                 "squeezed_grid")
_STATE_KINDS = ("number", "coherent", "superposition")
_PLOT_KINDS = ("", "entropy_curves", "offdiag_decay", "coefficient_traces")
_FORMS = ("linear", "exponential")
_B_READINGS = ("ln", "ml")


def _bool(s):
    t = s.strip().lower()
    if t in ("true", "yes", "1", "on"):
        return True
    if t in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _float_list(s):
    items = [p.strip() for p in s.split(",") if p.strip() != ""]
    return tuple(float(p) for p in items)


def _int_list(s):
    items = [p.strip() for p in s.split(",") if p.strip() != ""]
    return tuple(int(p) for p in items)


def _pair_list(s):
    out = []
    for part in (p.strip() for p in s.split(",") if p.strip() != ""):
        a, _, b = part.partition(":")
        out.append((int(a), int(b)))
    return tuple(out)


def _fmt(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return f"{value:.17g}"
    if isinstance(value, tuple):
        if value and isinstance(value[0], tuple):  # pair lists keep n:m form
            return ",".join(f"{a}:{b}" for a, b in value)
        return ",".join(_fmt(v) for v in value)
    return str(value)


# key -> (parser, default); default None means "derived later or required"
SCHEMA = {
    "system.m": (float, 1.0),
    "system.omega": (float, 1.0),
    "system.d": (int, 16),

    "bath.cutoff": (float, None),
    "bath.dim": (int, 1),
    "bath.window": (str, "exponential"),
    "bath.k_max": (float, None),
    "bath.n_k": (int, 64),
    "bath.temperature": (float, 0.0),
    "bath.field_mass": (float, 0.0),
    "bath.e2": (float, 1.0),

    "kernels.t_max": (float, None),

    "solver.engine": (str, "channels"),
    "solver.dt": (float, None),
    "solver.t_max": (float, None),
    "solver.snapshot_stride": (int, 1),
    "solver.allow_coarse_step": (_bool, False),
    "solver.include_cross": (_bool, False),
    "solver.b_reading": (str, "ln"),
    "solver.elements": (_pair_list, ((0, 1),)),
    "solver.anomalous_sign": (float, 1.0),

    "state.kind": (str, "number"),
    "state.n": (int, 0),
    "state.alpha_re": (float, 0.0),
    "state.alpha_im": (float, 0.0),
    "state.pair": (_pair_list, ((0, 1),)),
    "state.phase": (float, 0.0),

    "sieve.kind": (str, "coherent_grid"),
    "sieve.checkpoints": (_float_list, None),
    "sieve.measure": (str, "linear"),
    "family.n_max": (int, 3),
    "family.amps": (_float_list, (0.5, 1.0)),
    "family.phases": (_float_list, (0.0,)),
    "family.pairs": (_pair_list, ((0, 1), (0, 3))),
    "family.rs": (_float_list, (0.25, 0.5)),
    "family.thetas": (_float_list, (0.0,)),

    "oracle.d_s": (int, 8),
    "oracle.mode_omegas": (_float_list, (0.6, 1.3, 2.1)),
    "oracle.mode_couplings": (_float_list, (0.05, 0.0625, 0.0375)),
    "oracle.mode_levels": (_int_list, (5, 5, 5)),
    "oracle.wavenumbers": (_float_list, ()),
    "oracle.form": (str, "linear"),
    "oracle.multipliers": (_float_list, (1.0, 0.5, 0.25)),
    "oracle.t_star": (float, 3.0),
    "oracle.bath_temperature": (float, 0.0),

    "output.dir": (str, "out"),
    "output.plot": (str, ""),
    "run.rng_free": (_bool, True),
}

_CHOICES = {
    "bath.window": _WINDOWS,
    "solver.engine": _ENGINES,
    "solver.b_reading": _B_READINGS,
    "sieve.measure": _MEASURES,
    "sieve.kind": _FAMILY_KINDS,
    "state.kind": _STATE_KINDS,
    "oracle.form": _FORMS,
    "output.plot": _PLOT_KINDS,
}


def parse_text(text):
    """Raw key -> string map; syntax and unknown-key errors only."""
    raw = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, _, value = body.partition("=")
        key, value = key.strip(), value.strip()
        if key not in SCHEMA:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in raw:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        raw[key] = value
    return raw


@dataclass(frozen=True)
class Resolved:
    """Typed view of a fully resolved configuration."""

    values: dict

    def __getitem__(self, key):
        return self.values[key]

    def echo(self):
        """The complete configuration, defaults included, as config text."""
        lines = [f"{k} = {_fmt(v)}" for k, v in sorted(self.values.items())
                 if v is not None]
        return "\n".join(lines) + "\n"


def resolve(raw, command):
    """Type, default, derive and cross-check a raw map for ``command``."""
    values = {}
    for key, (parser, default) in SCHEMA.items():
        if key in raw:
            try:
                values[key] = parser(raw[key])
            except (ValueError, TypeError) as exc:
                raise ConfigError(f"{key}: cannot parse {raw[key]!r} ({exc})")
        else:
            values[key] = default
    for key, choices in _CHOICES.items():
        if values[key] not in choices:
            raise ConfigError(
                f"{key}: {values[key]!r} is not one of {choices}"
            )
    if not values["run.rng_free"]:
        raise ConfigError(
            "run.rng_free = false: this pipeline has no stochastic component; "
            "the key is a determinism seal and may only be true"
        )

    omega = values["system.omega"]
    period = 2.0 * math.pi / omega
    if values["solver.dt"] is None:
        values["solver.dt"] = period / 200.0

    needs_bath = command in ("kernels", "coeffs", "evolve", "rates", "sieve")
    if needs_bath and values["bath.cutoff"] is None:
        raise ConfigError(f"bath.cutoff is required for '{command}'")
    if values["bath.cutoff"] is not None and values["bath.k_max"] is None:
        values["bath.k_max"] = 8.0 * values["bath.cutoff"]

    needs_horizon = command in ("kernels", "coeffs", "evolve", "sieve")
    if needs_horizon:
        t_solver = values["solver.t_max"]
        t_kern = values["kernels.t_max"]
        if command == "sieve":
            if values["sieve.checkpoints"] is None:
                raise ConfigError("sieve.checkpoints is required for 'sieve'")
            horizon = max(values["sieve.checkpoints"])
            if t_solver is not None and t_solver < horizon:
                raise ConfigError(
                    f"solver.t_max = {t_solver:g} is shorter than the last "
                    f"checkpoint in sieve.checkpoints ({horizon:g}); drop one "
                    "of the two keys or make them consistent"
                )
            t_solver = max(t_solver or 0.0, horizon)
            values["solver.t_max"] = t_solver
        if t_solver is None and t_kern is None:
            raise ConfigError(
                f"'{command}' needs a horizon: set solver.t_max or kernels.t_max"
            )
        if t_solver is not None and t_kern is not None and t_kern < t_solver:
            raise ConfigError(
                f"kernels.t_max = {t_kern:g} is shorter than solver.t_max = "
                f"{t_solver:g}: the coefficient table would not cover the "
                "evolution; raise kernels.t_max or lower solver.t_max"
            )
        if t_kern is None:
            values["kernels.t_max"] = t_solver
        if t_solver is None:
            values["solver.t_max"] = values["kernels.t_max"]

    if command == "evolve" and values["solver.t_max"] is None:
        raise ConfigError("solver.t_max is required for 'evolve'")
    return Resolved(values)


def load(path, command):
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    return resolve(parse_text(text), command)
