"""Session config files: JSON schema validation with key-path diagnostics.

A config document carries the full session definition plus run plumbing
(seed list, output directory).  Validation rejects unknown keys by name and
reports every violated invariant with the dotted path of the offending
field; soft recommendations (like the noise ordering) come back as
warnings, not errors.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .engine import FEEDBACK_TYPES, SessionConfig

_TOP_KEYS = {"space", "sampler", "kernel", "noise", "ordinal", "link", "iterations",
             "feedback_types", "solver", "source", "oracle", "seeds", "output_dir",
             "conditions"}
_SPACE_KEYS = {"dimensions"}
_DIM_KEYS = {"name", "min", "max", "step"}
_SAMPLER_KEYS = {"mode", "n", "b", "R", "roi_lambda", "b_roi", "use_subset",
                 "mc_samples", "rng_seed"}
_KERNEL_KEYS = {"signal_variance", "lengthscales", "jitter"}
_NOISE_KEYS = {"c_p", "c_c", "c_o"}
_ORDINAL_KEYS = {"num_categories", "thresholds", "names"}
_SOLVER_KEYS = {"max_newton_iters", "grad_tol"}
_ORACLE_KEYS = {"benchmark", "c_p", "c_c", "c_o", "ordinal_thresholds",
                "eps1", "eps2", "f_eps1", "f_eps2", "link"}
_BENCHMARK_KEYS = {"kind", "values", "path"}
_CONDITION_KEYS = {"label", "override"}


class ConfigError(Exception):
    def __init__(self, errors: list[str]):
        self.errors = errors
        super().__init__("; ".join(errors))


@dataclass
class ValidationResult:
    errors: list[str] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.errors


def _check_keys(doc: dict, allowed: set[str], path: str, errors: list[str]) -> None:
    for key in doc:
        if key not in allowed:
            errors.append(f"{path}{key}: unknown key")


def validate_document(doc: dict) -> ValidationResult:
    """Structural checks before construction; returns all problems at once."""
    res = ValidationResult()
    if not isinstance(doc, dict):
        res.errors.append("config root must be a JSON object")
        return res
    _check_keys(doc, _TOP_KEYS, "", res.errors)

    space = doc.get("space")
    if not isinstance(space, dict) or "dimensions" not in space:
        res.errors.append("space.dimensions: required")
    else:
        _check_keys(space, _SPACE_KEYS, "space.", res.errors)
        dims = space["dimensions"]
        if not isinstance(dims, list) or not dims:
            res.errors.append("space.dimensions: must be a nonempty list")
        else:
            for i, dim in enumerate(dims):
                p = f"space.dimensions[{i}]."
                if not isinstance(dim, dict):
                    res.errors.append(p.rstrip(".") + ": must be an object")
                    continue
                _check_keys(dim, _DIM_KEYS, p, res.errors)
                for req in ("min", "max", "step"):
                    if req not in dim:
                        res.errors.append(p + req + ": required")
                if "step" in dim and not (isinstance(dim["step"], (int, float)) and dim["step"] > 0):
                    res.errors.append(p + f"step: must be > 0, got {dim.get('step')}")
                if ("min" in dim and "max" in dim
                        and isinstance(dim["min"], (int, float))
                        and isinstance(dim["max"], (int, float))
                        and dim["min"] > dim["max"]):
                    res.errors.append(p + f"min: exceeds max ({dim['min']} > {dim['max']})")

    sampler = doc.get("sampler", {})
    if not isinstance(sampler, dict):
        res.errors.append("sampler: must be an object")
        sampler = {}
    _check_keys(sampler, _SAMPLER_KEYS, "sampler.", res.errors)
    mode = sampler.get("mode", "regret_min")
    if mode not in ("regret_min", "active_learning", "random"):
        res.errors.append(f"sampler.mode: unknown mode {mode!r}")
    for key, low in (("n", 1), ("b", 0), ("R", 1), ("mc_samples", 1)):
        if key in sampler and (not isinstance(sampler[key], int) or sampler[key] < low):
            res.errors.append(f"sampler.{key}: must be an integer >= {low}, got {sampler[key]}")
    if mode == "active_learning" and sampler.get("n", 1) != 1:
        res.warnings.append("sampler.n: active_learning is designed for n = 1")

    kernel = doc.get("kernel", {})
    if isinstance(kernel, dict):
        _check_keys(kernel, _KERNEL_KEYS, "kernel.", res.errors)
        if "signal_variance" in kernel and not (isinstance(kernel["signal_variance"], (int, float))
                                                and kernel["signal_variance"] > 0):
            res.errors.append(f"kernel.signal_variance: must be > 0, got {kernel['signal_variance']}")
        ls = kernel.get("lengthscales")
        if ls is not None:
            vals = ls if isinstance(ls, list) else [ls]
            if any(not isinstance(v, (int, float)) or v <= 0 for v in vals):
                res.errors.append(f"kernel.lengthscales: must all be > 0, got {ls}")
        if "jitter" in kernel and (not isinstance(kernel["jitter"], (int, float))
                                   or kernel["jitter"] < 0):
            res.errors.append(f"kernel.jitter: must be >= 0, got {kernel['jitter']}")
    else:
        res.errors.append("kernel: must be an object")

    noise = doc.get("noise", {})
    if isinstance(noise, dict):
        _check_keys(noise, _NOISE_KEYS, "noise.", res.errors)
        for key in _NOISE_KEYS:
            if key in noise and (not isinstance(noise[key], (int, float)) or noise[key] <= 0):
                res.errors.append(f"noise.{key}: must be a positive real, got {noise[key]}")
        c_p = noise.get("c_p", 0.0015)
        c_c = noise.get("c_c", 0.015)
        c_o = noise.get("c_o", 0.1)
        if all(isinstance(v, (int, float)) and v > 0 for v in (c_p, c_c, c_o)):
            if not (c_o > c_c > c_p):
                res.warnings.append(
                    f"noise: ordering c_o > c_c > c_p is recommended "
                    f"(got c_o={c_o}, c_c={c_c}, c_p={c_p})")
    else:
        res.errors.append("noise: must be an object")

    ordinal = doc.get("ordinal", {})
    if isinstance(ordinal, dict):
        _check_keys(ordinal, _ORDINAL_KEYS, "ordinal.", res.errors)
        r = ordinal.get("num_categories", 4)
        if not isinstance(r, int) or r < 2:
            res.errors.append(f"ordinal.num_categories: must be an integer >= 2, got {r}")
        ths = ordinal.get("thresholds")
        if ths is not None:
            if not isinstance(ths, list) or (isinstance(r, int) and len(ths) != r - 1):
                res.errors.append(
                    f"ordinal.thresholds: expected {r - 1} values for {r} categories")
            elif any(b <= a for a, b in zip(ths, ths[1:])):
                res.errors.append("ordinal.thresholds: must be strictly increasing")
    else:
        res.errors.append("ordinal: must be an object")

    link = doc.get("link", "sigmoid")
    if link not in ("sigmoid", "gaussian-cdf"):
        res.errors.append(f"link: must be 'sigmoid' or 'gaussian-cdf', got {link!r}")

    iterations = doc.get("iterations", 30)
    if not isinstance(iterations, int) or iterations < 1:
        res.errors.append(f"iterations: must be an integer >= 1, got {iterations}")

    types = doc.get("feedback_types", list(FEEDBACK_TYPES))
    if not isinstance(types, list) or not types:
        res.errors.append("feedback_types: must be a nonempty list")
    else:
        for t in types:
            if t not in FEEDBACK_TYPES:
                res.errors.append(f"feedback_types: unknown type {t!r}")
        if "preference" in types and isinstance(sampler.get("n", 1), int) \
                and isinstance(sampler.get("b", 1), int) \
                and sampler.get("n", 1) + sampler.get("b", 1) < 2:
            res.errors.append("feedback_types: preference feedback requires sampler.n + sampler.b >= 2")

    solver = doc.get("solver", {})
    if isinstance(solver, dict):
        _check_keys(solver, _SOLVER_KEYS, "solver.", res.errors)
    else:
        res.errors.append("solver: must be an object")

    source = doc.get("source", "human")
    if source not in ("human", "synthetic"):
        res.errors.append(f"source: must be 'human' or 'synthetic', got {source!r}")
    oracle = doc.get("oracle")
    if source == "synthetic" and oracle is None:
        res.errors.append("oracle: required when source is 'synthetic'")
    if oracle is not None:
        if not isinstance(oracle, dict):
            res.errors.append("oracle: must be an object")
        else:
            _check_keys(oracle, _ORACLE_KEYS, "oracle.", res.errors)
            bench = oracle.get("benchmark", {})
            if isinstance(bench, dict):
                _check_keys(bench, _BENCHMARK_KEYS, "oracle.benchmark.", res.errors)
                kind = bench.get("kind")
                if kind not in ("hartmann3", "hartmann6", "grid_table"):
                    res.errors.append(
                        f"oracle.benchmark.kind: must be hartmann3, hartmann6 or grid_table, got {kind!r}")
                if kind == "grid_table" and "values" not in bench and "path" not in bench:
                    res.errors.append("oracle.benchmark: grid_table needs 'values' or 'path'")
            else:
                res.errors.append("oracle.benchmark: required")
            for key in ("c_p", "c_c", "c_o"):
                if key in oracle and (not isinstance(oracle[key], (int, float)) or oracle[key] <= 0):
                    res.errors.append(f"oracle.{key}: must be a positive real, got {oracle[key]}")

    seeds = doc.get("seeds", [])
    if not isinstance(seeds, list) or any(not isinstance(s, int) for s in seeds):
        res.errors.append("seeds: must be a list of integers")

    conditions = doc.get("conditions")
    if conditions is not None:
        if not isinstance(conditions, list) or not conditions:
            res.errors.append("conditions: must be a nonempty list")
        else:
            for i, cond in enumerate(conditions):
                if not isinstance(cond, dict):
                    res.errors.append(f"conditions[{i}]: must be an object")
                    continue
                _check_keys(cond, _CONDITION_KEYS, f"conditions[{i}].", res.errors)
                if "label" not in cond:
                    res.errors.append(f"conditions[{i}].label: required")
    return res


def _merge(base: dict, override: dict) -> dict:
    out = dict(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = value
    return out


def _resolve_grid_table(doc: dict) -> dict:
    """Inline a grid_table oracle loaded from a side file."""
    bench = doc.get("oracle", {}).get("benchmark", {})
    if bench.get("kind") == "grid_table" and "path" in bench and "values" not in bench:
        with open(bench["path"]) as fh:
            table = json.load(fh)
        bench = dict(bench)
        bench["values"] = table["values"]
        bench.pop("path")
        doc = dict(doc)
        doc["oracle"] = dict(doc["oracle"])
        doc["oracle"]["benchmark"] = bench
    return doc


def session_config_from_document(doc: dict, seed: int | None = None) -> SessionConfig:
    """Build a SessionConfig after validation; raises ConfigError when invalid."""
    res = validate_document(doc)
    if not res.ok:
        raise ConfigError(res.errors)
    doc = _resolve_grid_table(doc)
    if seed is not None:
        doc = _merge(doc, {"sampler": {"rng_seed": int(seed)}})
    payload = {k: v for k, v in doc.items() if k in _TOP_KEYS - {"seeds", "output_dir", "conditions"}}
    return SessionConfig.from_dict(payload)


def load_document(path: str) -> dict:
    with open(path) as fh:
        return json.load(fh)


def condition_documents(doc: dict) -> list[tuple[str, dict]]:
    """Expand a comparison config: base document plus per-condition overrides."""
    conditions = doc.get("conditions") or [{"label": "default", "override": {}}]
    base = {k: v for k, v in doc.items() if k != "conditions"}
    return [(c["label"], _merge(base, c.get("override", {}))) for c in conditions]
