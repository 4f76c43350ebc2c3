"""Strict parsing of experiment configuration files.

A configuration is a small INI-like text::

    # comment
    [space]
    N = 64

    [model]
    name = heat

    [time]
    T = 0.1
    steps = 1000

    [experiment]
    kind = simulate
    epsilon = 0.1
    samples = 200

``[model]`` and ``[experiment]`` are required; ``[space]`` and ``[time]`` may
be omitted, in which case every key takes its default.  Lists are comma
separated.  Unknown sections or keys, duplicate sections or keys, malformed
numbers and out-of-range values are all reported together, each with its
line number.

Defaults:

========================  ==========================================
``[space] N``             64
``[space] domain_kind``   the model's own geometry
``[space] alpha``         the model's own exponent
``[time] T``              0.1
``[time] steps``          1000
``[experiment] seed``     0
``[experiment] output``   ``$LDPLAB_OUTPUT`` or ``ldplab-output``
``[experiment] workers``  1
========================  ==========================================

Experiment keys per kind are listed in :data:`EXPERIMENT_KEYS`.
"""
from __future__ import annotations

import inspect
import math
import os
import re
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError
from .models import BUILTIN_FACTORIES, builtin_model
from .spaces import DOMAIN_KINDS

KINDS = ("check-hypotheses", "solve-skeleton", "simulate", "galerkin-convergence", "rate",
         "mc-ldp")
SECTIONS = ("space", "model", "time", "experiment")
REQUIRED_SECTIONS = ("model", "experiment")
OUTPUT_ENV = "LDPLAB_OUTPUT"
DEFAULT_OUTPUT = "ldplab-output"
SEED_MAX = 2 ** 64 - 1


class ConfigError(ConfigurationError):
    """Configuration rejected; ``errors`` lists every problem found."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


# -- value types -------------------------------------------------------------------

def _int(text):
    try:
        return int(text.strip(), 10)
    except ValueError:
        raise ValueError(f"expected an integer, got {text.strip()!r}") from None


def _float(text):
    try:
        value = float(text)
    except ValueError:
        raise ValueError(f"expected a number, got {text.strip()!r}") from None
    if not math.isfinite(value):
        raise ValueError(f"expected a finite number, got {text.strip()!r}")
    return value


def _bool(text):
    low = text.strip().lower()
    if low in ("true", "yes", "1"):
        return True
    if low in ("false", "no", "0"):
        return False
    raise ValueError(f"expected true or false, got {text.strip()!r}")


def _str(text):
    value = text.strip()
    if not value:
        raise ValueError("expected a non-empty value")
    return value


def _list(item):
    def parse(text):
        parts = [p for p in text.split(",")]
        if not parts or any(not p.strip() for p in parts):
            raise ValueError(f"expected a comma-separated list, got {text.strip()!r}")
        return tuple(item(p) for p in parts)
    return parse


@dataclass(frozen=True)
class Key:
    parse: object
    default: object = None
    check: object = None
    message: str = ""

    def validate(self, value):
        if self.check is not None and not self.check(value):
            raise ValueError(self.message)
        return value


def _choice(*options):
    return Key(_str, None, lambda v: v in options, f"must be one of {', '.join(options)}")


POSITIVE = dict(check=lambda v: v > 0, message="must be positive")
NONNEG = dict(check=lambda v: v >= 0, message="must be nonnegative")
AT_LEAST_ONE = dict(check=lambda v: v >= 1, message="must be at least 1")

SPACE_KEYS = {
    "domain_kind": _choice(*DOMAIN_KINDS),
    "N": Key(_int, 64, lambda v: 2 <= v <= 4096, "must lie in [2, 4096]"),
    "alpha": Key(_float, None, lambda v: v > 1, "alpha_exponent must exceed 1"),
}

TIME_KEYS = {
    "T": Key(_float, 0.1, **POSITIVE),
    "steps": Key(_int, 1000, **AT_LEAST_ONE),
}

_STATE_KEYS = {
    "x0": Key(_str, "sine", lambda v: v in ("zero", "sine", "mode"), "must be zero, sine or mode"),
    "x0_mode": Key(_int, 1, **AT_LEAST_ONE),
    "x0_amplitude": Key(_float, 1.0),
    "x0_file": Key(_str),
    "control": Key(_list(_float), (0.0,)),
    "method": Key(_str, "implicit", lambda v: v in ("implicit", "semi-implicit"),
                  "must be implicit or semi-implicit"),
    "newton_tol": Key(_float, 1e-10, **POSITIVE),
}

_COMMON_KEYS = {
    "kind": _choice(*KINDS),
    "seed": Key(_int, 0, lambda v: 0 <= v <= SEED_MAX, "must be an unsigned 64-bit integer"),
    "output": Key(_str),
    "workers": Key(_int, 1, **AT_LEAST_ONE),
}

EXPERIMENT_KEYS = {
    "check-hypotheses": {
        "samples": Key(_int, 1000, **AT_LEAST_ONE),
        "regime": Key(_str, None, lambda v: v in ("A", "B"), "must be A or B"),
        "radius": Key(_float, 1.0, **POSITIVE),
    },
    "solve-skeleton": dict(_STATE_KEYS),
    "simulate": {
        **_STATE_KEYS,
        "epsilon": Key(_float, 0.1, **NONNEG),
        "samples": Key(_int, 1, **AT_LEAST_ONE),
        "stop_M": Key(_float, None, **POSITIVE),
        "force": Key(_bool, False),
    },
    "galerkin-convergence": {
        **_STATE_KEYS,
        "levels": Key(_list(_int), (8, 16, 32, 64),
                      lambda v: len(v) >= 2 and all(a < b for a, b in zip(v, v[1:])) and v[0] >= 1,
                      "must be an increasing list of at least two positive levels"),
    },
    "rate": {
        **{k: _STATE_KEYS[k] for k in ("x0", "x0_mode", "x0_amplitude", "x0_file")},
        "target_file": Key(_str),
        "tol": Key(_float, 1e-3, **POSITIVE),
        "K": Key(_int, 64, **AT_LEAST_ONE),
        "pins": Key(_int, 4, **NONNEG),
        "initial_penalty": Key(_float, 10.0, **POSITIVE),
        "max_rounds": Key(_int, 40, **AT_LEAST_ONE),
        "max_iterations": Key(_int, 500, **AT_LEAST_ONE),
    },
    "mc-ldp": {
        **_STATE_KEYS,
        "epsilons": Key(_list(_float), (0.2, 0.1, 0.05),
                        lambda v: all(e >= 0 for e in v), "must be nonnegative"),
        "delta": Key(_float, 0.25, **NONNEG),
        "samples": Key(_int, 2000, **AT_LEAST_ONE),
        "event": Key(_str, "sup", lambda v: v in ("sup", "endpoint"), "must be sup or endpoint"),
        "force": Key(_bool, False),
    },
}
REQUIRED_EXPERIMENT_KEYS = {"rate": ("target_file",)}


def _model_keys(name):
    """Keys accepted in ``[model]`` for a built-in, typed by the factory defaults."""
    keys = {"name": _choice(*BUILTIN_FACTORIES), "eps0": Key(_float, None, **POSITIVE)}
    params = inspect.signature(BUILTIN_FACTORIES[name]).parameters
    for pname, par in params.items():
        if pname == "num_points":
            continue
        d = par.default
        if isinstance(d, bool):
            keys[pname] = Key(_bool, d)
        elif isinstance(d, int):
            keys[pname] = Key(_int, d)
        elif isinstance(d, float):
            keys[pname] = Key(_float, d)
        elif isinstance(d, tuple):
            keys[pname] = Key(_list(_int), d)
        else:
            keys[pname] = Key(_str, d)
    return keys


# -- lexing ------------------------------------------------------------------------

@dataclass(frozen=True)
class Entry:
    text: str
    where: str


def lex(text, source="line"):
    """Split text into ``{section: {key: Entry}}`` plus a list of structural errors."""
    sections, headers, errors = {}, {}, []
    current = None
    skipping = False  # keys under a rejected header were already reported
    for num, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line[0] in "#;":
            continue
        where = f"{source} {num}"
        if line.startswith("["):
            current, skipping = None, True
            if not line.endswith("]"):
                errors.append(f"{where}: malformed section header {line!r}")
                continue
            name = line[1:-1].strip()
            if name not in SECTIONS:
                errors.append(f"{where}: unknown section [{name}]")
            elif name in sections:
                errors.append(f"{where}: duplicate section [{name}] (first at {headers[name]})")
            else:
                sections[name] = {}
                headers[name] = where
                current, skipping = name, False
            continue
        if "=" not in line:
            errors.append(f"{where}: expected 'key = value', got {line!r}")
            continue
        key, value = (part.strip() for part in line.split("=", 1))
        if current is None:
            if not skipping:
                errors.append(f"{where}: key {key!r} appears before any section")
            continue
        if key in sections[current]:
            errors.append(f"{where}: duplicate key {key!r} in [{current}] "
                          f"(first at {sections[current][key].where})")
            continue
        sections[current][key] = Entry(value, where)
    return sections, headers, errors


# -- validated configuration ---------------------------------------------------------

@dataclass(frozen=True)
class RunConfig:
    model_name: str
    model_params: dict
    eps0: float | None
    domain_kind: str
    num_points: int
    alpha: float
    horizon: float
    steps: int
    kind: str
    params: dict
    seed: int
    output: str
    workers: int = 1

    def build_model(self):
        model = builtin_model(self.model_name, self.num_points, **self.model_params)
        if self.eps0 is not None:
            model = model.with_profile(eps0=self.eps0)
        return model

    def grid(self):
        from .dynamics import TimeGrid
        return TimeGrid(self.horizon, self.steps)

    def to_dict(self):
        """Canonical echo of every resolved value, defaults included."""
        return {
            "space": {"domain_kind": self.domain_kind, "N": self.num_points, "alpha": self.alpha},
            "model": {"name": self.model_name, **_plain(self.model_params),
                      **({"eps0": self.eps0} if self.eps0 is not None else {})},
            "time": {"T": self.horizon, "steps": self.steps},
            "experiment": {"kind": self.kind, "seed": self.seed, "output": self.output,
                           "workers": self.workers, **_plain(self.params)},
        }


def _plain(d):
    return {k: list(v) if isinstance(v, tuple) else v for k, v in d.items()}


def _resolve(section, entries, schema, errors):
    values = {}
    for key, entry in entries.items():
        if key not in schema:
            errors.append(f"{entry.where}: unknown key {key!r} in [{section}]")
            continue
        try:
            values[key] = schema[key].validate(schema[key].parse(entry.text))
        except ValueError as exc:
            errors.append(f"{entry.where}: {section}.{key}: {exc}")
    for key, spec in schema.items():
        values.setdefault(key, spec.default)
    return values


def merge(base, overrides):
    """Sections from ``base`` win over ``overrides`` key by key."""
    out = {s: dict(keys) for s, keys in overrides.items()}
    for s, keys in base.items():
        out.setdefault(s, {}).update(keys)
    return out


def parse_config(text, overrides=None, *, kind=None, source="line"):
    """Validate configuration text into a :class:`RunConfig`.

    ``overrides`` maps ``section -> {key: value text}`` (e.g. from command-line
    flags); keys present in ``text`` take precedence.  ``kind`` pins the
    experiment kind.  Raises :class:`ConfigError` listing every problem.
    """
    sections, headers, errors = lex(text, source)
    flag_sections = {s: {k: Entry(str(v), f"flag --{k}") for k, v in keys.items()}
                     for s, keys in (overrides or {}).items() if keys}
    if kind is not None:
        flag_sections.setdefault("experiment", {})["kind"] = Entry(kind, "command")
    merged = merge(sections, flag_sections)
    for name in REQUIRED_SECTIONS:
        if name not in merged:
            errors.append(f"end of input: missing required section [{name}]")
    if kind is not None and "kind" in sections.get("experiment", {}):
        entry = sections["experiment"]["kind"]
        if entry.text.strip() != kind:
            errors.append(f"{entry.where}: experiment kind {entry.text.strip()!r} does not match "
                          f"command {kind!r}")

    model_entries = merged.get("model", {})
    name_entry = model_entries.get("name")
    model_name = None
    if name_entry is None:
        if "model" in merged:
            errors.append(f"{headers.get('model', 'model')}: [model] requires 'name'")
    elif name_entry.text.strip() not in BUILTIN_FACTORIES:
        errors.append(f"{name_entry.where}: unknown model {name_entry.text.strip()!r}; choose from "
                      f"{', '.join(sorted(BUILTIN_FACTORIES))}")
    else:
        model_name = name_entry.text.strip()
    model_schema = _model_keys(model_name) if model_name else {k: Key(_str) for k in model_entries}
    model_vals = _resolve("model", model_entries, model_schema, errors)

    exp_entries = merged.get("experiment", {})
    kind_entry = exp_entries.get("kind")
    exp_kind = None
    if kind_entry is None:
        if "experiment" in merged:
            errors.append(f"{headers.get('experiment', 'experiment')}: [experiment] requires 'kind'")
    elif kind_entry.text.strip() not in KINDS:
        errors.append(f"{kind_entry.where}: unknown experiment kind {kind_entry.text.strip()!r}")
    else:
        exp_kind = kind_entry.text.strip()
    exp_schema = {**_COMMON_KEYS, **EXPERIMENT_KEYS.get(exp_kind, {})}
    if exp_kind is None:
        exp_schema = {k: Key(_str) for k in exp_entries}
    exp_vals = _resolve("experiment", exp_entries, exp_schema, errors)
    for key in REQUIRED_EXPERIMENT_KEYS.get(exp_kind, ()):
        if exp_vals.get(key) is None:
            errors.append(f"{headers.get('experiment', 'experiment')}: {exp_kind} requires '{key}'")

    space_vals = _resolve("space", merged.get("space", {}), SPACE_KEYS, errors)
    time_vals = _resolve("time", merged.get("time", {}), TIME_KEYS, errors)

    model = None
    if model_name is not None and space_vals["N"] is not None and not errors:
        params = {k: v for k, v in model_vals.items() if k not in ("name", "eps0")}
        try:
            model = builtin_model(model_name, space_vals["N"], **params)
        except (ConfigurationError, ValueError, TypeError) as exc:
            where = headers.get("model", "model")
            errors.append(f"{where}: model {model_name!r} rejected its parameters: {exc}")
    if model is not None:
        sp = model.space
        for key, actual in (("domain_kind", sp.domain_kind), ("alpha", sp.alpha)):
            given = space_vals[key]
            if given is not None and given != actual:
                entry = merged["space"][key]
                label = "alpha_exponent" if key == "alpha" else key
                errors.append(f"{entry.where}: {label} {given} does not match model "
                              f"{model_name!r} ({actual})")
        if "control" in exp_vals:
            ctl = exp_vals["control"]
            if len(ctl) not in (1, model.noise_modes):
                entry = merged["experiment"].get("control")
                errors.append(f"{entry.where if entry else 'experiment'}: control needs 1 or "
                              f"{model.noise_modes} values")
        if exp_kind == "galerkin-convergence" and exp_vals["levels"][-1] > sp.num_points:
            entry = merged["experiment"].get("levels")
            errors.append(f"{entry.where if entry else 'experiment'}: levels exceed N="
                          f"{sp.num_points}")
        if exp_kind == "rate" and time_vals["steps"] % exp_vals["K"]:
            entry = merged["experiment"].get("K")
            errors.append(f"{entry.where if entry else 'experiment'}: K={exp_vals['K']} must "
                          f"divide steps={time_vals['steps']}")
    if errors:
        raise ConfigError(sorted(errors, key=_line_order))

    common = {k: exp_vals.pop(k) for k in list(_COMMON_KEYS)}
    output = common["output"] or os.environ.get(OUTPUT_ENV) or DEFAULT_OUTPUT
    return RunConfig(
        model_name=model_name,
        model_params={k: v for k, v in model_vals.items() if k not in ("name", "eps0")},
        eps0=model_vals["eps0"],
        domain_kind=model.space.domain_kind,
        num_points=model.space.num_points,
        alpha=model.space.alpha,
        horizon=time_vals["T"],
        steps=time_vals["steps"],
        kind=common["kind"],
        params=exp_vals,
        seed=common["seed"],
        output=output,
        workers=common["workers"],
    )


def _line_order(message):
    """Sort key putting file errors in line order ahead of flag and end-of-input errors."""
    match = re.search(r"line (\d+):", message)
    return (0, int(match.group(1))) if match else (1, 0)


def load_state_file(path, num_points):
    """Read states stored one per line as ``num_points`` comma-separated values."""
    rows = []
    with open(path, encoding="utf-8") as fh:
        for num, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            try:
                row = [_float(v) for v in line.split(",")]
            except ValueError as exc:
                raise ConfigError([f"{path}:{num}: {exc}"]) from None
            if len(row) != num_points:
                raise ConfigError([f"{path}:{num}: expected {num_points} values, got {len(row)}"])
            rows.append(row)
    if not rows:
        raise ConfigError([f"{path}: no states found"])
    return np.array(rows, dtype=float)
