"""Run-config files: defaults, dotted-path overrides, validation, building.

A config is a plain JSON object.  Every command echoes the fully resolved
config into its outputs so any artifact can be reproduced bit-exactly.
"""

from __future__ import annotations

import copy
import json
from pathlib import Path

from .algorithm import RunConfig
from .compressors import parse_compressor
from .graph import MixingMatrix, PRESET_GRAPHS, WEIGHT_RULES, build_mixing_matrix, graph_preset
from .noise import NoiseSchedule
from .objective import ProblemInstance, generate_problem


class ConfigError(ValueError):
    """Malformed run config; message names the offending field."""


# Desk-scale defaults: the 6-agent preset graph with the paper-equivalent
# data scale (1/sqrt(6)), mild noise, and a truncated schedule so realized
# fixed points are exact.
DEFAULT_CONFIG: dict = {
    "graph": {"preset": "paper-fig1", "rule": "metropolis"},
    "problem": {
        "n": 6,
        "d": 10,
        "m_per_agent": 6,
        "ridge": 1e-3,
        "seed": 12345,
        "data_scale": 0.4082482904638631,
    },
    "compressor": "topk:k=2",
    "alpha": 0.1,
    "gamma": 0.05,
    "noise": {"d_eta_x": 1.0, "d_eta_y": 1.0, "q": 0.9, "truncation_k": 200},
    "horizon": 3000,
    "trials": 20,
    "seed": 1,
    "m": 0.5,
    "delta": 1.0,
    "sweep": {
        "q_values": [0.18, 0.26, 0.34, 0.42, 0.5, 0.58, 0.66, 0.74, 0.82, 0.9],
        "trials": 100,
        "d_eta": 5.0,
    },
}

PAPER_SCALE_OVERRIDES = {
    "trials": 1000,
    "horizon": 10000,
    "noise.d_eta_x": 100.0,
    "noise.d_eta_y": 100.0,
    "noise.q": 0.99,
    "noise.truncation_k": None,
}


def default_config() -> dict:
    return copy.deepcopy(DEFAULT_CONFIG)


def load_config(path=None) -> dict:
    """Defaults merged with an optional JSON config file (file wins)."""
    cfg = default_config()
    if path is not None:
        try:
            loaded = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {path}: invalid JSON ({exc})") from exc
        if not isinstance(loaded, dict):
            raise ConfigError(f"config file {path}: expected a JSON object")
        _merge(cfg, loaded, prefix="")
    return cfg


def _merge(base: dict, update: dict, prefix: str) -> None:
    for key, value in update.items():
        path = f"{prefix}{key}"
        if key not in base:
            raise ConfigError(f"{path}: unknown config field")
        if isinstance(base[key], dict) and key != "graph":
            if not isinstance(value, dict):
                raise ConfigError(f"{path}: expected an object")
            _merge(base[key], value, prefix=f"{path}.")
        else:
            base[key] = value


def apply_overrides(cfg: dict, overrides) -> dict:
    """Apply dotted-path assignments like ``noise.q=0.95`` (last wins)."""
    for text in overrides:
        key, sep, raw = text.partition("=")
        if not sep:
            raise ConfigError(f"override {text!r}: expected key=value")
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        node = cfg
        parts = key.split(".")
        for part in parts[:-1]:
            if part not in node or not isinstance(node[part], dict):
                raise ConfigError(f"{key}: unknown config field")
            node = node[part]
        leaf = parts[-1]
        if leaf not in node and parts[0] != "graph":
            raise ConfigError(f"{key}: unknown config field")
        node[leaf] = value
    return cfg


def _expect(cfg: dict, field: str, kind, predicate=None, describe: str = ""):
    node = cfg
    for part in field.split("."):
        if not isinstance(node, dict) or part not in node:
            raise ConfigError(f"{field}: missing")
        node = node[part]
    if kind is float and isinstance(node, int) and not isinstance(node, bool):
        node = float(node)
    if not isinstance(node, kind) or isinstance(node, bool):
        raise ConfigError(f"{field}: expected {kind.__name__}, got {type(node).__name__}")
    if predicate is not None and not predicate(node):
        raise ConfigError(f"{field}: {describe}, got {node!r}")
    return node


def validate_config(cfg: dict) -> dict:
    """Field-level validation; returns the config unchanged on success."""
    _expect(cfg, "alpha", float, lambda v: v > 0, "expected > 0")
    _expect(cfg, "gamma", float, lambda v: 0 < v <= 1, "expected in (0, 1]")
    _expect(cfg, "horizon", int, lambda v: v >= 0, "expected >= 0")
    _expect(cfg, "trials", int, lambda v: v >= 1, "expected >= 1")
    _expect(cfg, "seed", int)
    _expect(cfg, "m", float, lambda v: 0 < v < 1, "expected in (0, 1)")
    _expect(cfg, "delta", float, lambda v: v >= 0, "expected >= 0")
    _expect(cfg, "problem.n", int, lambda v: v >= 1, "expected >= 1")
    _expect(cfg, "problem.d", int, lambda v: v >= 1, "expected >= 1")
    _expect(cfg, "problem.m_per_agent", int, lambda v: v >= 1, "expected >= 1")
    _expect(cfg, "problem.ridge", float, lambda v: v >= 0, "expected >= 0")
    _expect(cfg, "problem.seed", int)
    _expect(cfg, "problem.data_scale", float, lambda v: v > 0, "expected > 0")
    _expect(cfg, "noise.d_eta_x", float, lambda v: v >= 0, "expected >= 0")
    _expect(cfg, "noise.d_eta_y", float, lambda v: v >= 0, "expected >= 0")
    _expect(cfg, "noise.q", float, lambda v: 0 < v < 1, "expected in (0, 1)")
    trunc = cfg["noise"].get("truncation_k")
    if trunc is not None and (not isinstance(trunc, int) or isinstance(trunc, bool) or trunc < 0):
        raise ConfigError(f"noise.truncation_k: expected null or int >= 0, got {trunc!r}")
    comp = _expect(cfg, "compressor", str)
    try:
        parse_compressor(comp)
    except ValueError as exc:
        raise ConfigError(f"compressor: {exc}") from exc
    graph = cfg.get("graph")
    if not isinstance(graph, dict):
        raise ConfigError("graph: expected an object")
    rule = graph.get("rule", "metropolis")
    if rule not in WEIGHT_RULES:
        raise ConfigError(f"graph.rule: expected one of {WEIGHT_RULES}, got {rule!r}")
    if "preset" in graph:
        if graph["preset"] not in PRESET_GRAPHS:
            raise ConfigError(
                f"graph.preset: unknown preset {graph['preset']!r}; available: {sorted(PRESET_GRAPHS)}"
            )
    elif "edges" in graph:
        if "n" not in graph:
            raise ConfigError("graph.n: required alongside graph.edges")
    else:
        raise ConfigError("graph: needs either 'preset' or explicit 'edges' + 'n'")
    sweep = cfg.get("sweep", {})
    if not isinstance(sweep, dict):
        raise ConfigError("sweep: expected an object")
    for q in sweep.get("q_values", []):
        if not (isinstance(q, (int, float)) and 0 < q < 1):
            raise ConfigError(f"sweep.q_values: every q must lie in (0, 1), got {q!r}")
    return cfg


def build_graph(cfg: dict) -> MixingMatrix:
    graph = cfg["graph"]
    rule = graph.get("rule", "metropolis")
    if "preset" in graph:
        return graph_preset(graph["preset"], rule=rule)
    return build_mixing_matrix(graph["edges"], graph["n"], rule=rule)


def build_instance(cfg: dict) -> ProblemInstance:
    p = cfg["problem"]
    return generate_problem(
        n=p["n"],
        d=p["d"],
        m_per_agent=p["m_per_agent"],
        ridge=p["ridge"],
        seed=p["seed"],
        data_scale=p["data_scale"],
    )


def build_schedule(cfg: dict) -> NoiseSchedule:
    noise = cfg["noise"]
    return NoiseSchedule(
        d_eta_x=noise["d_eta_x"],
        d_eta_y=noise["d_eta_y"],
        q=noise["q"],
        truncation_k=noise.get("truncation_k"),
    )


def build_run_config(cfg: dict) -> RunConfig:
    return RunConfig(
        alpha=cfg["alpha"],
        gamma=cfg["gamma"],
        schedule=build_schedule(cfg),
        compressor=parse_compressor(cfg["compressor"]),
        horizon=cfg["horizon"],
        seed=cfg["seed"],
    )


def build_experiment(cfg: dict):
    """(instance, mixing, run_config) from a validated config."""
    validate_config(cfg)
    instance = build_instance(cfg)
    mixing = build_graph(cfg)
    if mixing.n != instance.n:
        raise ConfigError(
            f"problem.n: instance has {instance.n} agents but graph has {mixing.n}"
        )
    return instance, mixing, build_run_config(cfg)
