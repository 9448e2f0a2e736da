"""Flat ``key = value`` run configuration.

Each subcommand owns a schema of documented keys. Values are resolved in the
order: key defaults, preset, config file, command-line flags (flags win).
Unknown keys are rejected. Every resolved value has a canonical text form so
a run manifest can be fed back as a config and reproduce the run exactly.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Any, Callable

from .errors import ConfigurationError


@dataclass(frozen=True)
class Key:
    name: str
    parse: Callable[[str], Any]
    default: str
    help: str
    show: Callable[[Any], str] = str


def _int(s: str) -> int:
    try:
        return int(str(s).strip().replace("_", ""))
    except ValueError:
        raise ConfigurationError(f"expected an integer, got {s!r}") from None


def _float(s: str) -> float:
    try:
        return float(str(s).strip())
    except ValueError:
        raise ConfigurationError(f"expected a number, got {s!r}") from None


def _fraction(s: str) -> Fraction:
    try:
        return Fraction(str(s).strip())
    except (ValueError, ZeroDivisionError):
        raise ConfigurationError(f"expected a rational number, got {s!r}") from None


def _list(item):
    def parse(s: str):
        s = str(s).strip()
        if not s:
            return ()
        return tuple(item(p) for p in s.split(","))

    return parse


def _optional(item):
    def parse(s: str):
        s = str(s).strip()
        return None if s in ("", "auto", "none") else item(s)

    return parse


def _choice(*options):
    def parse(s: str):
        s = str(s).strip()
        if s not in options:
            raise ConfigurationError(f"expected one of {options}, got {s!r}")
        return s

    return parse


def _show_list(v) -> str:
    return ",".join(_show_scalar(x) for x in v)


def _show_scalar(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _show_optional(v) -> str:
    return "auto" if v is None else _show_scalar(v)


def _snr_list(s: str):
    v = _list(_float)(s)
    return v


COMMON = [
    Key("seed", _int, "0", "master seed (unsigned 64-bit)"),
    Key("preset", _choice("none"), "none", "named parameter set"),
]

_BOUNDS = [
    Key("nt", _int, "4", "transmit antennas"),
    Key("nr", _int, "4", "receive antennas"),
    Key("m", _int, "2", "source samples per block"),
    Key("n", _int, "3", "channel uses per block"),
    Key("beta_list", _list(_fraction), "1,2,3,4", "lower dimension parameters beta", _show_list),
    Key("beta_prime_list", _list(_fraction), "", "upper parameters beta' (default: equal to beta)", _show_list),
    Key("f_step", _fraction, "1/4", "fidelity grid step"),
]

_MAPPING = [
    Key("kind", _choice("linear", "spiral", "hybrid_digital_analog"), "linear", "mapping kind"),
    Key("m", _int, "1", "source samples per block"),
    Key("n", _int, "1", "channel uses per block"),
    Key("nt", _int, "1", "transmit antennas"),
    Key("stretch", _float, "4.0", "spiral stretch", _show_scalar),
    Key("bits", _int, "2", "hybrid bits per sample"),
]

_DIMENSION = _MAPPING + [
    Key("source_set", _choice("mapping", "segment", "square", "mixture", "full"), "mapping",
        "cloud source: the mapping, or a synthetic reference set"),
    Key("dim", _int, "2", "ambient dimension of synthetic sets"),
    Key("c_list", _list(_float), "1.0", "probability levels c", _show_list),
    Key("sigma_min_exp", _int, "4", "coarsest box 2^-k"),
    Key("sigma_max_exp", _int, "11", "finest box 2^-k"),
    Key("n_samples", _int, "1000000", "cloud size"),
]

_SIMULATE = _MAPPING + [
    Key("nr", _int, "1", "receive antennas"),
    Key("decoder", _choice("grid_ml", "linear_mmse"), "grid_ml", "decoder kind"),
    Key("grid_step", _optional(_float), "auto", "grid_ml step (auto: min(1e-3, 1/snr))", _show_optional),
    Key("snr_grid", _snr_list, "10,100,1000", "linear SNR values", _show_list),
    Key("f_grid", _list(_float), "0", "fidelity exponents", _show_list),
    Key("n_channels", _int, "1000", "channel draws per SNR"),
    Key("n_src", _int, "100", "source blocks per channel"),
    Key("n_noise", _int, "1", "noise draws per source block"),
    Key("threshold_scale", _float, "1.0", "event threshold = scale * m * snr^-f", _show_scalar),
]

_EIGEN = [
    Key("nt", _int, "2", "transmit antennas"),
    Key("nr", _int, "2", "receive antennas"),
    Key("beta", _fraction, "2", "dimension parameter; k = nt - beta + 1"),
    Key("snr_grid", _snr_list, "100,316.22776601683796,1000,3162.2776601683795,10000",
        "linear SNR values", _show_list),
    Key("n_draws", _int, "1000000", "channel draws"),
    Key("sigma_ref", _optional(_float), "auto", "eigenvalue reference (auto: nt/snr)", _show_optional),
]

PRESETS: dict[str, dict[str, dict[str, str]]] = {
    "bounds": {
        "figure1": {"nt": "4", "nr": "4", "m": "2", "n": "3", "beta_list": "1,2,3,4", "beta_prime_list": ""},
    },
    "figure1": {
        "figure1": {"nt": "4", "nr": "4", "m": "2", "n": "3", "beta_list": "1,2,3,4", "beta_prime_list": ""},
    },
    "dimension": {
        "segment": {"source_set": "segment", "c_list": "1.0"},
        "square": {"source_set": "square", "c_list": "1.0"},
        "mixture": {"source_set": "mixture", "c_list": "0.9,0.99"},
        "spiral": {"source_set": "mapping", "kind": "spiral", "stretch": "4.0", "c_list": "0.9"},
        "linear": {"source_set": "mapping", "kind": "linear", "c_list": "0.9"},
        "hybrid": {"source_set": "mapping", "kind": "hybrid_digital_analog", "bits": "3", "c_list": "0.9"},
    },
    "simulate": {
        "siso_linear": {
            "kind": "linear", "m": "1", "n": "1", "nt": "1", "nr": "1", "decoder": "linear_mmse",
            "snr_grid": ",".join(repr(10 ** (1 + 3 * i / 7)) for i in range(8)),
            "f_grid": "0.0,0.5,1.2", "n_channels": "100000", "threshold_scale": repr(1 / 24),
        },
        "siso_spiral": {
            "kind": "spiral", "stretch": "2.0", "m": "1", "n": "1", "nt": "1", "nr": "1",
            "decoder": "grid_ml", "grid_step": "0.001", "snr_grid": "10.0,31.622776601683793,100.0,316.22776601683796",
            "f_grid": "0.0,0.5", "n_channels": "5000", "threshold_scale": repr(1 / 24),
        },
        "siso_hybrid": {
            "kind": "hybrid_digital_analog", "bits": "2", "m": "1", "n": "1", "nt": "1", "nr": "1",
            "decoder": "grid_ml", "grid_step": "0.001", "snr_grid": "10.0,31.622776601683793,100.0,316.22776601683796",
            "f_grid": "0.0,0.5", "n_channels": "5000", "threshold_scale": repr(1 / 24),
        },
        "mimo_linear": {
            "kind": "linear", "m": "1", "n": "1", "nt": "2", "nr": "2", "decoder": "linear_mmse",
            "snr_grid": "3.0,10.0,31.622776601683793,100.0",
            "f_grid": "0.0,0.5", "n_channels": "100000", "threshold_scale": repr(1 / 24),
        },
        "eigen_tail": {},
    },
    "eigen": {
        "eigen_tail": {"nt": "2", "nr": "2", "beta": "2"},
        "siso": {"nt": "1", "nr": "1", "beta": "1"},
    },
}

SCHEMAS: dict[str, list[Key]] = {
    "bounds": _BOUNDS,
    "figure1": _BOUNDS,
    "dimension": _DIMENSION,
    "simulate": _SIMULATE,
    "eigen": _EIGEN,
}


def schema(subcommand: str) -> dict[str, Key]:
    keys = {k.name: k for k in COMMON}
    keys["preset"] = Key("preset", _choice("none", *PRESETS[subcommand]), "none", "named parameter set")
    for k in SCHEMAS[subcommand]:
        keys[k.name] = k
    return keys


def parse_text(text: str, source: str = "<config>") -> dict[str, str]:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    out: dict[str, str] = {}
    for no, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"{source}:{no}: expected 'key = value', got {raw!r}")
        key, value = (p.strip() for p in line.split("=", 1))
        if key in out:
            raise ConfigurationError(f"{source}:{no}: duplicate key {key!r}")
        out[key] = value
    return out


def load(path) -> tuple[str | None, dict[str, str]]:
    """Read a config file or a JSON run manifest.

    Returns ``(subcommand or None, raw values)``.
    """
    text = Path(path).read_text(encoding="utf-8")
    if text.lstrip().startswith("{"):
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"{path}: invalid JSON manifest ({exc})") from None
        if not isinstance(doc, dict) or "config" not in doc:
            raise ConfigurationError(f"{path}: manifest has no 'config' section")
        return doc.get("subcommand"), {k: str(v) for k, v in doc["config"].items()}
    return None, parse_text(text, str(path))


@dataclass(frozen=True)
class RunConfig:
    subcommand: str
    values: dict

    def __getitem__(self, key):
        return self.values[key]

    def canonical(self) -> dict[str, str]:
        keys = schema(self.subcommand)
        return {name: keys[name].show(self.values[name]) for name in sorted(self.values)}


def resolve(subcommand: str, file_values: dict[str, str] | None = None, flag_values: dict[str, str] | None = None) -> RunConfig:
    """Merge defaults, preset, file and flags; parse and reject unknown keys."""
    keys = schema(subcommand)
    file_values = dict(file_values or {})
    flag_values = {k: v for k, v in (flag_values or {}).items() if v is not None}
    for source, vals in (("config file", file_values), ("flags", flag_values)):
        unknown = sorted(set(vals) - set(keys))
        if unknown:
            raise ConfigurationError(f"unknown key(s) in {source} for '{subcommand}': {', '.join(unknown)}")
    preset_name = flag_values.get("preset", file_values.get("preset", "none"))
    preset_name = keys["preset"].parse(preset_name)
    raw = {k.name: k.default for k in keys.values()}
    raw.update(PRESETS[subcommand].get(preset_name, {}))
    raw.update(file_values)
    raw.update(flag_values)
    raw["preset"] = preset_name
    values = {}
    for name, text in raw.items():
        try:
            values[name] = keys[name].parse(text)
        except ConfigurationError as exc:
            raise ConfigurationError(f"{name}: {exc}") from None
    return RunConfig(subcommand, values)
