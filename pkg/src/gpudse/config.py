"""Run configuration: defaults, JSON loading with deep merge, seed streams."""

from __future__ import annotations

import copy
import hashlib
import json
import zlib
from pathlib import Path

import numpy as np

from .space import DEFAULT_REFERENCE, DEFAULT_VALUES, PARAM_NAMES, SpaceSpec


class ConfigError(ValueError):
    """Invalid or inconsistent run configuration."""


def default_config() -> dict:
    """Built-in defaults: Table-style 8-GPU lattice, GPT-3-class layer under
    8-way tensor parallelism in FP16, and calibration anchored on the
    reference design (1.41 GHz clock, 408 GB/s per memory channel,
    50 GB/s per link, 826 mm^2 die)."""
    from .perfmodel import solve_area_constants

    space = {
        "parameters": {n: list(DEFAULT_VALUES[n]) for n in PARAM_NAMES},
        "reference_design": dict(DEFAULT_REFERENCE),
    }
    calibration = {
        "clock_hz": 1.41e9,
        "bw_per_channel": 408e9,
        "bw_per_link": 50e9,
        "n_gpus": 8,
    }
    calibration.update(
        solve_area_constants(
            reference=DEFAULT_REFERENCE,
            die_mm2=826.0,
            share_cores=0.60,
            share_gb=0.10,
            share_mem=0.20,
            share_link=0.10,
            core_split={"base": 0.30, "pe": 0.08, "lane": 0.15, "sram": 0.47},
        )
    )
    return {
        "space": space,
        "model": {
            "d_model": 12288,
            "n_head": 96,
            "d_head": 128,
            "d_ffn": 49152,
            "elem_bytes": 2,
            "tp_degree": 8,
        },
        "workload": {
            "batch": 8,
            "prefill_seq_len": 2048,
            # decode latency is taken at this output token; KV length is
            # prefill_seq_len + decode_output_index (inclusive convention)
            "decode_output_index": 1024,
        },
        "calibration": calibration,
        "optimizer": {
            "grid": {"budget": 1000},
            "random_walk": {"restart_prob": 0.05},
            "genetic": {
                "population": 20,
                "crossover_prob": 0.9,
                "mutation_prob": 0.1,
            },
            "ant_colony": {"evaporation": 0.1},
            "bayesian": {"k_neighbors": 5, "candidates": 512},
        },
        "loop": {
            "aggressiveness": 2,
            "alternation_threshold": 1.10,
            "improve_margin": 0.01,
            "refine_alpha": 0.5,
            "sensitivity_perturbs_performance": True,
        },
        "benchmark": {
            "counts": {"bottleneck": 308, "prediction": 127, "tuning": 30},
            "prediction_examples": 4,
            "distractor_multipliers": [0.7, 1.2, 1.5],
            "max_draw_retries": 50,
        },
    }


def _deep_merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in override.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _deep_merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def load_config(path: str | Path | None = None) -> dict:
    """Defaults, optionally deep-merged with a JSON config file."""
    cfg = default_config()
    if path is None:
        return cfg
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file not found: {p}")
    try:
        user = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {p} is not valid JSON: {exc}") from exc
    if not isinstance(user, dict):
        raise ConfigError(f"config file {p} must contain a JSON object")
    return _deep_merge(cfg, user)


def config_hash(cfg: dict) -> str:
    canon = json.dumps(cfg, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()


def make_space(cfg: dict) -> SpaceSpec:
    try:
        return SpaceSpec.from_mapping(cfg["space"])
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"bad space section: {exc}") from exc


def sub_rng(seed: int, stream: str) -> np.random.Generator:
    """Named random stream derived from one manifest seed. Streams with
    different names are independent; the same (seed, name) always yields
    the same sequence."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), zlib.crc32(stream.encode())]))
