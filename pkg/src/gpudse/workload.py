"""Operator graphs for one transformer layer under tensor parallelism.

Builds the per-GPU FLOP, weight-traffic, activation-tensor, and
communication-payload counts for the prefill and decode phases of a
decoder layer. Counts are hardware-independent; the performance model
decides which bytes actually reach DRAM on a given design.

Cost accounting (per GPU, tp = tensor-parallel degree, e = bytes/element):
  fused QKV projection   6*B*q*d^2 / tp
  attention scores / context   2*B*h*q*L*d_head / tp   (L = key length)
  output projection      2*B*q*d^2 / tp
  FFN up / down          2*B*q*d*d_ffn / tp each
  softmax                5*B*h*q*L / tp   (vector)
  layernorm              5*B*q*d         (vector, replicated on every GPU)
  allreduce payload      B*q*d*e per collective (ring factor applied later)
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path


class ConfigError(ValueError):
    """Model configuration violates its invariants."""


@dataclass(frozen=True)
class ModelConfig:
    d_model: int
    n_head: int
    d_head: int
    d_ffn: int
    elem_bytes: int = 2
    tp_degree: int = 8

    def __post_init__(self):
        if self.d_model != self.n_head * self.d_head:
            raise ConfigError(f"d_model {self.d_model} != n_head*d_head {self.n_head * self.d_head}")
        if self.n_head % self.tp_degree or self.d_ffn % self.tp_degree:
            raise ConfigError(f"tp_degree {self.tp_degree} must divide n_head and d_ffn")
        if self.elem_bytes <= 0:
            raise ConfigError("elem_bytes must be positive")

    @classmethod
    def from_mapping(cls, data: dict) -> "ModelConfig":
        return cls(**{k: int(data[k]) for k in ("d_model", "n_head", "d_head", "d_ffn", "elem_bytes", "tp_degree")})


@dataclass(frozen=True)
class OperatorSpec:
    """One operator in the sequential chain.

    act_bytes lists each activation tensor touched (inputs then output);
    the global-buffer policy in the performance model gates them per
    tensor. io_bytes is their sum. gemm_dims is the (M, K, N) shape a
    systolic array sees, set for tensor ops only.
    """

    name: str
    unit_class: str  # tensor | vector | comm
    flops: int
    weight_bytes: int
    act_bytes: tuple[int, ...]
    comm_bytes: int
    gemm_dims: tuple[int, int, int] | None = None

    @property
    def io_bytes(self) -> int:
        return sum(self.act_bytes)

    def __post_init__(self):
        if self.flops < 0:
            raise ValueError(f"{self.name}: negative flops")
        if (self.unit_class == "comm") != (self.comm_bytes > 0):
            raise ValueError(f"{self.name}: exactly comm ops carry comm_bytes")
        if (self.unit_class == "tensor") != (self.gemm_dims is not None):
            raise ValueError(f"{self.name}: exactly tensor ops carry gemm_dims")


@dataclass(frozen=True)
class PhaseGraph:
    phase: str  # prefill | decode
    batch: int
    seq_or_kv_len: int
    operators: tuple[OperatorSpec, ...]  # executed sequentially in order

    def to_records(self) -> list[dict]:
        rows = []
        for op in self.operators:
            rows.append(
                {
                    "name": op.name,
                    "unit_class": op.unit_class,
                    "flops": op.flops,
                    "weight_bytes": op.weight_bytes,
                    "io_bytes": op.io_bytes,
                    "act_bytes": list(op.act_bytes),
                    "comm_bytes": op.comm_bytes,
                    "gemm_dims": list(op.gemm_dims) if op.gemm_dims else None,
                }
            )
        return rows

    def dump(self, path: str | Path) -> None:
        doc = {
            "phase": self.phase,
            "batch": self.batch,
            "seq_or_kv_len": self.seq_or_kv_len,
            "operators": self.to_records(),
        }
        Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True))


def _layer_chain(cfg: ModelConfig, batch: int, q_len: int, kv_len: int) -> tuple[OperatorSpec, ...]:
    """The operator chain for one layer: attention block, allreduce,
    layernorm, FFN block, allreduce, layernorm."""
    d, h, dh, ffn = cfg.d_model, cfg.n_head, cfg.d_head, cfg.d_ffn
    e, tp = cfg.elem_bytes, cfg.tp_degree
    hl = h // tp
    B, q, L = batch, q_len, kv_len
    M = B * q  # gemm rows for the projection/FFN matmuls

    full_act = B * q * d * e  # replicated layer input/output activation
    qkv_out = B * q * (3 * d // tp) * e
    q_act = B * hl * q * dh * e
    cache_act = B * hl * L * dh * e  # K (or V) read per attention matmul
    scores_act = B * hl * q * L * e
    part_act = B * q * (d // tp) * e
    ffn_act = B * q * (ffn // tp) * e
    ar_payload = B * q * d * e

    return (
        OperatorSpec("qkv_proj", "tensor", 3 * 2 * B * q * d * d // tp, d * (3 * d // tp) * e,
                     (full_act, qkv_out), 0, (M, d, 3 * d // tp)),
        OperatorSpec("attn_scores", "tensor", 2 * B * h * q * L * dh // tp, 0,
                     (q_act, cache_act, scores_act), 0, (M, dh, L)),
        OperatorSpec("softmax", "vector", 5 * B * h * q * L // tp, 0,
                     (scores_act, scores_act), 0),
        OperatorSpec("attn_context", "tensor", 2 * B * h * q * L * dh // tp, 0,
                     (scores_act, cache_act, part_act), 0, (M, L, dh)),
        OperatorSpec("out_proj", "tensor", 2 * B * q * d * d // tp, (d // tp) * d * e,
                     (part_act, full_act), 0, (M, d // tp, d)),
        OperatorSpec("allreduce_attn", "comm", 0, 0, (), ar_payload),
        OperatorSpec("ln_attn", "vector", 5 * B * q * d, 2 * d * e, (full_act, full_act), 0),
        OperatorSpec("ffn_up", "tensor", 2 * B * q * d * ffn // tp, d * (ffn // tp) * e,
                     (full_act, ffn_act), 0, (M, d, ffn // tp)),
        OperatorSpec("ffn_down", "tensor", 2 * B * q * d * ffn // tp, (ffn // tp) * d * e,
                     (ffn_act, full_act), 0, (M, ffn // tp, d)),
        OperatorSpec("allreduce_ffn", "comm", 0, 0, (), ar_payload),
        OperatorSpec("ln_ffn", "vector", 5 * B * q * d, 2 * d * e, (full_act, full_act), 0),
    )


def build_prefill(cfg: ModelConfig, batch: int, seq_len: int) -> PhaseGraph:
    """Prefill: query length = key length = seq_len."""
    if batch < 1 or seq_len < 1:
        raise ConfigError("batch and seq_len must be >= 1")
    return PhaseGraph("prefill", batch, seq_len, _layer_chain(cfg, batch, seq_len, seq_len))


def build_decode(cfg: ModelConfig, batch: int, kv_len: int) -> PhaseGraph:
    """Decode: query length 1, attention reads a KV cache of kv_len tokens.

    Weight traffic matches prefill (the full weights stream every step).
    """
    if batch < 1 or kv_len < 1:
        raise ConfigError("batch and kv_len must be >= 1")
    return PhaseGraph("decode", batch, kv_len, _layer_chain(cfg, batch, 1, kv_len))
