"""Experiment configuration: a sectioned ``key = value`` text file.

Grammar (read with :mod:`configparser`)::

    [section]
    key = value        ; numbers, words, or comma-separated number lists
    # full-line comments start with '#' or ';'

Known sections and keys are listed in ``SCHEMA``; anything else is rejected.
Keys left out take the defaults shown there. The ``[system]`` section also
accepts the keyword parameters of the chosen built-in system.
"""

from __future__ import annotations

import configparser
import inspect
import math

from .dynamics import _REGISTRY
from .errors import RejectedInputError


class ConfigError(RejectedInputError):
    """The configuration file is malformed or names unknown keys."""


def _float(v):
    return float(v)


def _int(v):
    return int(v)


def _word(v):
    return str(v).strip()


def _floats(v):
    v = str(v).strip()
    return tuple(float(x) for x in v.split(",")) if v else ()


def _opt_float(v):
    v = str(v).strip()
    return None if v in ("", "none") else float(v)


def _bool(v):
    s = str(v).strip().lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {v!r}")


# section -> key -> (parser, default)
SCHEMA = {
    "system": {"name": (_word, "integrator")},
    "budget": {
        "mu": (_float, 0.0),
        "eta": (_float, 1.0),
        "u0_lo": (_floats, (0.0,)),
        "u0_hi": (_floats, (1.0,)),
        "k_lo": (_floats, (-1.0,)),
        "k_hi": (_floats, (1.0,)),
    },
    "bound": {
        "mode": (_word, "quadratic"),
        "eps": (_float, 0.1),
        "gains": (_word, "local"),
        "gain_samples": (_int, 5),
        "mx": (_opt_float, None),
        "mu_gain": (_opt_float, None),
        "lx": (_opt_float, None),
        "tp": (_opt_float, None),
        "du": (_opt_float, None),
        "dx": (_opt_float, None),
        "dx_scale": (_opt_float, None),
        "rho": (_opt_float, None),
    },
    "search": {
        "tp_min": (_float, 1e-6),
        "tp_max": (_float, 10.0),
        "n_tp": (_int, 64),
        "du_min": (_opt_float, None),
        "du_max": (_opt_float, None),
        "n_du": (_int, 32),
        "refine_passes": (_int, 2),
    },
    "estimate": {
        "t": (_float, 1.0),
        "x0": (_floats, ()),
        "pieces": (_int, 4),
        "signal_file": (_word, ""),
    },
    "separated": {
        "construction": (_word, "uniform"),
        "a": (_float, 1.0),
        "b": (_float, 0.0),
        "eps": (_float, 0.1),
        "alpha": (_float, 0.0),
        "t": (_float, 3.0),
        "x0": (_floats, (0.0,)),
        "max_switches": (_int, 10),
        "max_members": (_int, 1024),
        "sandwich_members": (_int, 0),
    },
    "switched": {
        "modes": (_word, "constant"),
        "a": (_float, 1.0),
        "b": (_float, 0.0),
        "td": (_float, 1.0),
        "eps": (_float, 0.1),
        "alpha": (_float, 1.0),
        "tau": (_float, 1.0),
        "horizon": (_opt_float, None),
        "n_signals": (_int, 100),
        "k_lo": (_floats, (-1.0,)),
        "k_hi": (_floats, (1.0,)),
        "table_points": (_int, 21),
    },
}

MODES = ("quadratic", "affine", "rho-form")


def _format(v):
    if v is None:
        return "none"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, tuple):
        return ", ".join(repr(float(x)) for x in v)
    return str(v)


class Config:
    """Parsed configuration: ``cfg[section][key]`` with defaults filled in."""

    def __init__(self, values, system_params):
        self.values = values
        self.system_params = system_params

    def __getitem__(self, section):
        return self.values[section]

    def __eq__(self, other):
        return isinstance(other, Config) and self.values == other.values and \
            self.system_params == other.system_params

    def to_text(self):
        lines = []
        for section, keys in SCHEMA.items():
            lines.append(f"[{section}]")
            for key in keys:
                lines.append(f"{key} = {_format(self.values[section][key])}")
            if section == "system":
                for key in sorted(self.system_params):
                    lines.append(f"{key} = {_format(self.system_params[key])}")
            lines.append("")
        return "\n".join(lines)


def parse_config(text):
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=(";",))
    parser.optionxform = str.lower
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse configuration: {exc}") from None
    unknown = set(parser.sections()) - set(SCHEMA)
    if unknown:
        raise ConfigError(f"unknown section(s): {sorted(unknown)}")
    values, system_params = {}, {}
    for section, keys in SCHEMA.items():
        got = dict(parser.items(section)) if parser.has_section(section) else {}
        out = {}
        for key, (conv, default) in keys.items():
            if key in got:
                try:
                    out[key] = conv(got.pop(key))
                except ValueError as exc:
                    raise ConfigError(f"[{section}] {key}: {exc}") from None
            else:
                out[key] = default
        if section == "system" and got:
            system_params = _system_params(out["name"], got)
            got = {}
        if got:
            raise ConfigError(f"unknown key(s) in [{section}]: {sorted(got)}")
        values[section] = out
    _validate(values)
    return Config(values, system_params)


def _system_params(name, raw):
    if name not in _REGISTRY:
        raise ConfigError(f"unknown system {name!r}")
    accepted = inspect.signature(_REGISTRY[name]).parameters
    params = {}
    for key, val in raw.items():
        if key not in accepted:
            raise ConfigError(f"system {name!r} has no parameter {key!r}")
        try:
            params[key] = float(val)
        except ValueError:
            raise ConfigError(f"[system] {key}: not a number: {val!r}") from None
    return params


def _validate(v):
    if v["system"]["name"] not in _REGISTRY:
        raise ConfigError(f"unknown system {v['system']['name']!r}")
    b = v["bound"]
    if b["mode"] not in MODES:
        raise ConfigError(f"[bound] mode must be one of {MODES}")
    if b["gains"] not in ("local", "lipschitz", "explicit"):
        raise ConfigError("[bound] gains must be local, lipschitz or explicit")
    if b["gains"] == "explicit" and (b["mx"] is None or b["mu_gain"] is None):
        raise ConfigError("[bound] explicit gains need mx and mu_gain")
    if not b["eps"] > 0:
        raise ConfigError("[bound] eps must be positive")
    if b["dx"] is not None and b["dx_scale"] is not None:
        raise ConfigError("[bound] give dx or dx_scale, not both")
    bu = v["budget"]
    if len(bu["u0_lo"]) != len(bu["u0_hi"]) or len(bu["k_lo"]) != len(bu["k_hi"]):
        raise ConfigError("[budget] box bounds differ in length")
    if bu["mu"] < 0 or bu["eta"] < 0:
        raise ConfigError("[budget] mu and eta must be nonnegative")
    if v["separated"]["construction"] not in ("uniform", "alpha"):
        raise ConfigError("[separated] construction must be uniform or alpha")
    if v["switched"]["modes"] not in ("constant", "scalar"):
        raise ConfigError("[switched] modes must be constant or scalar")
    for section in v.values():
        for key, val in section.items():
            if isinstance(val, float) and not math.isfinite(val):
                raise ConfigError(f"non-finite value for {key}")


def load_config(path):
    try:
        with open(path, encoding="utf-8") as fp:
            text = fp.read()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None
    return parse_config(text)


def default_config():
    return parse_config("")
