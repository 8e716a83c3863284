"""Experiment configuration files.

Configs are flat INI-style text with two sections:

    [scenario]      physical link parameters (antennas, powers, receiver)
    [experiment]    run parameters (Doppler, delays, samples, seed, codebook)

Delays accept explicit comma lists (``0,1,2,5``) or ranges
(``start..end[:step]``).  Codebook paths may name a shipped file with the
``builtin:`` prefix, e.g. ``builtin:householder_nt4_n16_rank1``; plain
paths are resolved relative to the config file.  A run manifest (JSON)
written by the CLI can be passed anywhere a config is accepted, which
reproduces the run it records.
"""

from __future__ import annotations

import configparser
import json
import os

from .codebook import builtin_codebook_path
from .harness import DEFAULT_CHAIN_SAMPLES, DEFAULT_SAMPLES, ScenarioConfig
from .link import ScenarioParams


class ConfigError(ValueError):
    """Raised when a config file cannot be parsed or validated."""


_SCENARIO_KEYS = {
    "n_tx", "n_rx", "n_streams", "alpha1", "alpha2", "n0",
    "receiver", "interference", "mode", "noise_mode", "tx_rate_scaled",
}
_EXPERIMENT_KEYS = {
    "fd_ts", "delays", "n_samples", "chain_samples", "seed",
    "pi_mode", "coeff_mode", "codebook",
}

_DEFAULTS = {
    "scenario": {
        "n_tx": "4", "n_rx": "4", "n_streams": "1",
        "alpha1": "5.2", "alpha2": "5.2", "n0": "1.0",
        "receiver": "mrc", "interference": "on", "mode": "beam",
        "noise_mode": "expected", "tx_rate_scaled": "off",
    },
    "experiment": {
        "fd_ts": "0.025", "delays": "0..30",
        "n_samples": str(DEFAULT_SAMPLES), "chain_samples": str(DEFAULT_CHAIN_SAMPLES),
        "seed": "12345", "pi_mode": "empirical", "coeff_mode": "conservative",
        "codebook": "builtin:householder_nt4_n16_rank1",
    },
}


def parse_delays(text):
    """Parse a delay grid: ``a,b,c`` or ``start..end[:step]``."""
    text = text.strip()
    if ".." in text:
        head, _, tail = text.partition("..")
        tail, _, step = tail.partition(":")
        try:
            start, end = int(head), int(tail)
            stride = int(step) if step else 1
        except ValueError:
            raise ConfigError(f"bad delay range {text!r}") from None
        if stride < 1 or end < start:
            raise ConfigError(f"bad delay range {text!r}")
        return tuple(range(start, end + 1, stride))
    try:
        return tuple(int(tok) for tok in text.replace(",", " ").split())
    except ValueError:
        raise ConfigError(f"bad delay list {text!r}") from None


def _parse_bool(value, key):
    lowered = value.strip().lower()
    if lowered in ("1", "true", "on", "yes"):
        return True
    if lowered in ("0", "false", "off", "no"):
        return False
    raise ConfigError(f"{key}: expected a boolean, got {value!r}")


def resolve_codebook_path(value, base_dir="."):
    """Resolve a codebook reference to a filesystem path."""
    if value.startswith("builtin:"):
        try:
            return builtin_codebook_path(value[len("builtin:"):])
        except FileNotFoundError as exc:
            raise ConfigError(str(exc)) from None
    if os.path.isabs(value):
        return value
    return os.path.normpath(os.path.join(base_dir, value))


def read_config(path):
    """Read a config file (INI or run-manifest JSON) into section dicts."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    stripped = text.lstrip()
    if stripped.startswith("{"):
        try:
            manifest = json.loads(text)
            sections = manifest["config"]
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise ConfigError(f"{path}: bad manifest: {exc}") from None
        return {
            name: {k: str(v) for k, v in body.items()}
            for name, body in sections.items()
        }
    parser = configparser.ConfigParser()
    try:
        parser.read_string(text, source=str(path))
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return {name: dict(parser[name]) for name in parser.sections()}


def apply_overrides(sections, overrides):
    """Apply ``section.key=value`` override strings."""
    out = {name: dict(body) for name, body in sections.items()}
    for item in overrides or ():
        try:
            target, value = item.split("=", 1)
            section, key = target.split(".", 1)
        except ValueError:
            raise ConfigError(f"bad override {item!r}; use section.key=value") from None
        out.setdefault(section.strip(), {})[key.strip()] = value.strip()
    return out


def build_scenario(sections, base_dir="."):
    """Turn section dicts into a validated :class:`ScenarioConfig`."""
    merged = {
        name: dict(_DEFAULTS[name]) for name in ("scenario", "experiment")
    }
    for name, body in sections.items():
        if name not in merged:
            raise ConfigError(f"unknown config section [{name}]")
        allowed = _SCENARIO_KEYS if name == "scenario" else _EXPERIMENT_KEYS
        for key in body:
            if key not in allowed:
                raise ConfigError(f"unknown key {key!r} in section [{name}]")
        merged[name].update(body)
    sc, ex = merged["scenario"], merged["experiment"]
    try:
        params = ScenarioParams(
            alpha1=float(sc["alpha1"]),
            alpha2=float(sc["alpha2"]),
            n0=float(sc["n0"]),
            n_tx=int(sc["n_tx"]),
            n_rx=int(sc["n_rx"]),
            n_streams=int(sc["n_streams"]),
            noise_mode=sc["noise_mode"],
        )
        config = ScenarioConfig(
            params=params,
            fd_ts=float(ex["fd_ts"]),
            codebook_path=resolve_codebook_path(ex["codebook"], base_dir),
            delays=parse_delays(ex["delays"]),
            n_samples=int(ex["n_samples"]),
            seed=int(ex["seed"]),
            receiver=sc["receiver"],
            interference=_parse_bool(sc["interference"], "interference"),
            mode=sc["mode"],
            pi_mode=ex["pi_mode"],
            coeff_mode=ex["coeff_mode"],
            tx_rate_scaled=_parse_bool(sc["tx_rate_scaled"], "tx_rate_scaled"),
            chain_samples=int(ex["chain_samples"]),
        )
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    return config, merged
