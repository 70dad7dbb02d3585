"""Operator-count oracles.

Expected values are frozen from the cost formulas evaluated by hand:
fused QKV prefill flops = 3*2*8*2048*12288^2/8 = 12288^3 = 1,855,425,871,872;
degenerate attention scores = 2*1*96*1*1*128 = 24,576; allreduce payload
= 8*2048*12288*2 = 402,653,184; decode attention context at kv=3072 =
2*8*96*3072*128/8 = 75,497,472; per-op KV read = 8*96*3072*128*2/8 =
75,497,472 bytes.
"""

import pytest

from gpudse.workload import ConfigError, ModelConfig, build_decode, build_prefill

GPT3 = ModelConfig(d_model=12288, n_head=96, d_head=128, d_ffn=49152, elem_bytes=2, tp_degree=8)


def op(graph, name):
    return next(o for o in graph.operators if o.name == name)


def test_chain_names_and_order():
    g = build_prefill(GPT3, 8, 2048)
    assert [o.name for o in g.operators] == [
        "qkv_proj", "attn_scores", "softmax", "attn_context", "out_proj",
        "allreduce_attn", "ln_attn", "ffn_up", "ffn_down", "allreduce_ffn", "ln_ffn",
    ]


def test_qkv_prefill_flops_frozen():
    g = build_prefill(GPT3, 8, 2048)
    assert op(g, "qkv_proj").flops == 1_855_425_871_872


def test_degenerate_attention_scores():
    cfg = ModelConfig(d_model=12288, n_head=96, d_head=128, d_ffn=49152, elem_bytes=2, tp_degree=1)
    g = build_prefill(cfg, 1, 1)
    assert op(g, "attn_scores").flops == 24_576


def test_allreduce_payload_frozen():
    g = build_prefill(GPT3, 8, 2048)
    assert op(g, "allreduce_attn").comm_bytes == 402_653_184
    assert op(g, "allreduce_ffn").comm_bytes == 402_653_184


def test_decode_attention_context_flops_frozen():
    g = build_decode(GPT3, 8, 3072)
    assert op(g, "attn_context").flops == 75_497_472


def test_decode_kv_read_bytes_frozen():
    g = build_decode(GPT3, 8, 3072)
    # second activation tensor of each attention matmul is the cache read
    assert op(g, "attn_scores").act_bytes[1] == 75_497_472
    assert op(g, "attn_context").act_bytes[1] == 75_497_472


def test_decode_kv1_matches_prefill_s1():
    dec = build_decode(GPT3, 8, 1)
    pre = build_prefill(GPT3, 8, 1)
    for name in ("attn_scores", "attn_context", "softmax"):
        assert op(dec, name).flops == op(pre, name).flops


def test_decode_weights_match_prefill():
    dec = build_decode(GPT3, 8, 3072)
    pre = build_prefill(GPT3, 8, 2048)
    for d_op, p_op in zip(dec.operators, pre.operators):
        assert d_op.weight_bytes == p_op.weight_bytes
    # decode gemms use the batch as the row dimension
    assert op(dec, "qkv_proj").gemm_dims[0] == 8


def test_batch_linearity():
    g1 = build_prefill(GPT3, 4, 512)
    g2 = build_prefill(GPT3, 8, 512)
    for a, b in zip(g1.operators, g2.operators):
        assert b.flops == 2 * a.flops
        assert b.io_bytes == 2 * a.io_bytes
        assert b.comm_bytes == 2 * a.comm_bytes
        assert b.weight_bytes == a.weight_bytes  # parameters do not scale


def test_seq_scaling_quadratic_vs_linear():
    g1 = build_prefill(GPT3, 8, 1024)
    g2 = build_prefill(GPT3, 8, 2048)
    assert op(g2, "attn_scores").flops == 4 * op(g1, "attn_scores").flops
    assert op(g2, "softmax").flops == 4 * op(g1, "softmax").flops
    for name in ("qkv_proj", "out_proj", "ffn_up", "ffn_down", "ln_attn"):
        assert op(g2, name).flops == 2 * op(g1, name).flops


def test_tensor_parallel_conserves_weights():
    single = ModelConfig(d_model=12288, n_head=96, d_head=128, d_ffn=49152, elem_bytes=2, tp_degree=1)
    total_single = sum(o.weight_bytes for o in build_prefill(single, 1, 16).operators
                       if o.name != "ln_attn" and o.name != "ln_ffn")
    per_gpu = sum(o.weight_bytes for o in build_prefill(GPT3, 1, 16).operators
                  if o.name != "ln_attn" and o.name != "ln_ffn")
    assert per_gpu * GPT3.tp_degree == total_single


def test_comm_ops_exclusively_carry_comm_bytes():
    g = build_decode(GPT3, 8, 3072)
    for o in g.operators:
        assert (o.unit_class == "comm") == (o.comm_bytes > 0)
        assert (o.unit_class == "tensor") == (o.gemm_dims is not None)


def test_config_invariants():
    with pytest.raises(ConfigError):
        ModelConfig(d_model=100, n_head=4, d_head=16, d_ffn=400)
    with pytest.raises(ConfigError):
        ModelConfig(d_model=12288, n_head=96, d_head=128, d_ffn=49151, tp_degree=8)
    with pytest.raises(ConfigError):
        build_prefill(GPT3, 0, 16)
    with pytest.raises(ConfigError):
        build_decode(GPT3, 8, 0)


def test_graph_dump(tmp_path):
    g = build_decode(GPT3, 8, 3072)
    path = tmp_path / "decode.json"
    g.dump(path)
    import json

    doc = json.loads(path.read_text())
    assert doc["phase"] == "decode"
    assert len(doc["operators"]) == 11
    assert doc["operators"][0]["name"] == "qkv_proj"
