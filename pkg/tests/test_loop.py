import json

import pytest

from gpudse.influence import build_structural_map, measure_sensitivity
from gpudse.llm import MockBackend
from gpudse.loop import (
    ExhaustedError,
    FailureMemory,
    InvalidDirectiveError,
    StrategyDirective,
    apply_directive,
    propose_directive,
    refine_influence,
    refine_pair,
    run_loop,
)
from gpudse.perfmodel import PhaseBreakdown
from gpudse.space import DesignPoint, PARAM_NAMES

A100 = DesignPoint(12, 108, 4, 16, 32, 128, 40, 5)


@pytest.fixture()
def measured_ahk(spec, evaluator):
    ahk = build_structural_map(spec)
    measure_sensitivity(spec, A100, evaluator, ahk)
    return ahk


def fake_phase(dominant):
    shares = {r: 0.0 for r in ("tensor_compute", "vector_compute", "memory_bw", "interconnect")}
    shares[dominant] = 1.0
    return PhaseBreakdown("prefill", 1.0, (), shares, dominant)


# --------------------------------------------------------------------------
# directives


def test_directive_invariants():
    with pytest.raises(ValueError):
        StrategyDirective("memory_bw", (), None, 1)
    with pytest.raises(ValueError):
        StrategyDirective("memory_bw", (("mem_channels", 1),), ("mem_channels", -1), 2)


def test_fingerprint_ignores_step_magnitudes():
    a = StrategyDirective("memory_bw", (("mem_channels", 1),), ("core_count", -1), 2)
    b = StrategyDirective("memory_bw", (("mem_channels", 2),), ("core_count", -2), 2)
    assert a.fingerprint() == b.fingerprint()


def test_propose_interconnect_bottleneck_trades_cores(spec, evaluator, measured_ahk):
    """An interconnect-dominant report must boost links and release the
    least-critical resource, which at the reference is the core budget."""
    d = propose_directive(
        fake_phase("interconnect"), measured_ahk, spec, A100, "ttft",
        visited={A100.astuple()}, failures=FailureMemory(), consts=evaluator.consts,
    )
    assert d.boosts == (("link_count", +1),)
    assert d.tradeoff == ("core_count", -1)


def test_propose_memory_bottleneck_with_links_maxed(spec, evaluator, measured_ahk):
    start = A100.with_value("link_count", 24)
    d = propose_directive(
        fake_phase("memory_bw"), measured_ahk, spec, start, "tpot",
        visited={start.astuple()}, failures=FailureMemory(), consts=evaluator.consts,
    )
    assert d.boosts == (("mem_channels", +1),)


def test_propose_skips_blocked_fingerprint(spec, evaluator, measured_ahk):
    failures = FailureMemory()
    first = propose_directive(
        fake_phase("memory_bw"), measured_ahk, spec, A100, "ttft",
        visited={A100.astuple()}, failures=failures, consts=evaluator.consts,
    )
    failures.add(first)
    second = propose_directive(
        fake_phase("memory_bw"), measured_ahk, spec, A100, "ttft",
        visited={A100.astuple()}, failures=failures, consts=evaluator.consts,
    )
    assert second.fingerprint() != first.fingerprint()


def test_propose_skips_visited_designs(spec, evaluator, measured_ahk):
    first = propose_directive(
        fake_phase("memory_bw"), measured_ahk, spec, A100, "ttft",
        visited={A100.astuple()}, failures=FailureMemory(), consts=evaluator.consts,
    )
    result, _ = apply_directive(spec, A100, first)
    second = propose_directive(
        fake_phase("memory_bw"), measured_ahk, spec, A100, "ttft",
        visited={A100.astuple(), result.astuple()}, failures=FailureMemory(),
        consts=evaluator.consts,
    )
    other, _ = apply_directive(spec, A100, second)
    assert other != result


def test_propose_requires_measurements(spec, evaluator):
    with pytest.raises(ValueError):
        propose_directive(
            fake_phase("memory_bw"), build_structural_map(spec), spec, A100, "ttft",
            visited=set(), failures=FailureMemory(), consts=evaluator.consts,
        )


def test_apply_directive_boost_and_tradeoff(spec):
    d = StrategyDirective("interconnect", (("link_count", +1),), ("core_count", -1), 2)
    result, flags = apply_directive(spec, A100, d)
    assert result.link_count == 18
    assert result.core_count == 96
    assert flags == ()


def test_apply_directive_boost_only(spec):
    d = StrategyDirective("memory_bw", (("mem_channels", +1),), None, 1)
    result, _ = apply_directive(spec, A100, d)
    assert result == A100.with_value("mem_channels", 6)


def test_apply_directive_clamps_and_flags(spec):
    start = A100.with_value("link_count", 24)
    d = StrategyDirective("interconnect", (("link_count", +1),), ("core_count", -1), 2)
    result, flags = apply_directive(spec, start, d)
    assert result.link_count == 24
    assert result.core_count == 96
    assert "clamped:link_count" in flags


def test_apply_directive_all_noop_is_invalid(spec):
    start = A100.with_value("link_count", 24)
    d = StrategyDirective("interconnect", (("link_count", +1),), None, 1)
    with pytest.raises(InvalidDirectiveError):
        apply_directive(spec, start, d)


# --------------------------------------------------------------------------
# refinement


def _sample(step, design, evaluator, outcome="neutral", directive=None):
    from gpudse.loop import TrajectorySample
    from gpudse.pareto import strictly_better

    metrics, report = evaluator.evaluate(design)
    return TrajectorySample(
        step=step, design=design, metrics=metrics, report=report,
        directive=directive, outcome=outcome,
        dominates_reference=strictly_better(metrics.normalized(), (1.0, 1.0, 1.0)),
        kind="step",
    )


def test_refine_single_param_moves_magnitude(spec, evaluator, measured_ahk):
    before = measured_ahk.magnitude("mem_channels", "tpot")
    a = _sample(0, A100, evaluator)
    b = _sample(1, A100.with_value("mem_channels", 6), evaluator)
    assert refine_pair(measured_ahk, spec, a, b, alpha=0.5)
    observed = b.metrics.tpot_s - a.metrics.tpot_s
    after = measured_ahk.magnitude("mem_channels", "tpot")
    assert after == pytest.approx(0.5 * before + 0.5 * observed)
    assert measured_ahk.get("mem_channels", "tpot").source == "refined"


def test_refine_linear_metric_exact_on_uniform_steps(spec, evaluator, measured_ahk, cfg):
    """Area is linear and link steps are uniform, so one attributable
    observation pins the magnitude at the exact per-step derivative."""
    a = _sample(0, A100, evaluator)
    b = _sample(1, A100.with_value("link_count", 18), evaluator)
    refine_pair(measured_ahk, spec, a, b, alpha=0.5)
    assert measured_ahk.magnitude("link_count", "area") == pytest.approx(
        6 * cfg["calibration"]["a_link"], rel=1e-12
    )


def test_refine_two_param_attribution(spec, evaluator, measured_ahk):
    a = _sample(0, A100, evaluator)
    moved = A100.with_value("mem_channels", 6).with_value("link_count", 18)
    b = _sample(1, moved, evaluator)
    assert refine_pair(measured_ahk, spec, a, b, alpha=0.5)
    assert measured_ahk.get("mem_channels", "area").source == "refined"
    assert measured_ahk.get("link_count", "area").source == "refined"


def test_refine_skips_three_param_pairs(spec, evaluator, measured_ahk):
    a = _sample(0, A100, evaluator)
    moved = (
        A100.with_value("mem_channels", 6)
        .with_value("link_count", 18)
        .with_value("core_count", 96)
    )
    b = _sample(1, moved, evaluator)
    assert not refine_pair(measured_ahk, spec, a, b)


def test_refine_influence_collects_failures(spec, evaluator, measured_ahk):
    d = StrategyDirective("memory_bw", (("mem_channels", 1),), None, 1)
    a = _sample(0, A100, evaluator)
    b = _sample(1, A100.with_value("mem_channels", 6), evaluator, outcome="failed", directive=d)
    failures = FailureMemory()
    refine_influence(measured_ahk, spec, [a, b], failures)
    assert failures.blocked(d)


def test_refine_never_touches_hard_zeros(spec, evaluator, measured_ahk):
    a = _sample(0, A100, evaluator)
    b = _sample(1, A100.with_value("systolic_dim", 32), evaluator)
    refine_pair(measured_ahk, spec, a, b)
    assert measured_ahk.get("systolic_dim", "peak_vector").magnitude is None


# --------------------------------------------------------------------------
# the loop


def test_budget_one_is_initial_only(spec, evaluator):
    res = run_loop(spec, evaluator, budget=1, seed=0)
    assert len(res.trajectory) == 1
    assert res.trajectory[0].kind == "initial"
    assert res.trajectory[0].design == A100


def test_twenty_samples_find_dominating_design(spec, evaluator):
    res = run_loop(spec, evaluator, budget=20, seed=1)
    assert len(res.trajectory) == 20
    assert any(s.dominates_reference for s in res.trajectory)


def test_trajectory_steps_contiguous_and_deduplicated(spec, evaluator):
    res = run_loop(spec, evaluator, budget=60, seed=2)
    assert [s.step for s in res.trajectory] == list(range(60))
    seen = [s.design.astuple() for s in res.trajectory]
    assert len(seen) == len(set(seen))


def test_rule_backend_deterministic(spec, evaluator):
    a = run_loop(spec, evaluator, budget=40, seed=9)
    b = run_loop(spec, evaluator, budget=40, seed=9)
    assert [(s.design, s.metrics, s.outcome, s.kind) for s in a.trajectory] == [
        (s.design, s.metrics, s.outcome, s.kind) for s in b.trajectory
    ]


def test_structural_zeros_survive_whole_run(spec, evaluator):
    res = run_loop(spec, evaluator, budget=120, seed=3)
    assert res.influence.get("systolic_dim", "peak_vector").magnitude is None
    assert res.influence.get("vector_width", "peak_tensor").magnitude is None


def test_failed_fingerprints_never_recur(spec, evaluator):
    res = run_loop(spec, evaluator, budget=300, seed=4)
    failed_at = {}
    for s in res.trajectory:
        if s.directive is None:
            continue
        fp = s.directive.fingerprint()
        if fp in failed_at:
            assert s.step < failed_at[fp], "blocked directive reused after failure"
        if s.outcome == "failed":
            failed_at.setdefault(fp, s.step)


def test_probe_samples_counted_against_budget(spec, evaluator):
    res = run_loop(spec, evaluator, budget=10, seed=0)
    kinds = [s.kind for s in res.trajectory]
    assert kinds[0] == "initial"
    assert all(k == "probe" for k in kinds[1:])
    assert len(res.trajectory) == 10


def test_loop_validates_all_designs(spec, evaluator):
    from gpudse.space import validate

    res = run_loop(spec, evaluator, budget=150, seed=6)
    for s in res.trajectory:
        assert validate(spec, s.design) == []


# --------------------------------------------------------------------------
# llm backend


def good_directive_reply():
    return json.dumps(
        {
            "target_bottleneck": "memory_bw",
            "boosts": [["mem_channels", 1]],
            "tradeoff": ["vector_width", -1],
            "rationale": "bandwidth starved",
        }
    )


def test_llm_backend_uses_parsed_directive(spec, evaluator):
    backend = MockBackend(script=[good_directive_reply()] * 10)
    res = run_loop(spec, evaluator, budget=18, backend="llm", seed=0, gateway_backend=backend)
    step = next(s for s in res.trajectory if s.kind == "step")
    assert step.directive.boosts == (("mem_channels", 1),)
    assert step.directive.tradeoff == ("vector_width", -1)
    assert "llm_fallback" not in step.flags
    assert step.design.mem_channels == 6 and step.design.vector_width == 16


def test_llm_backend_reprompts_then_falls_back(spec, evaluator):
    backend = MockBackend(script=["nonsense", "more nonsense"] * 20)
    log: list = []
    res = run_loop(
        spec, evaluator, budget=18, backend="llm", seed=0,
        gateway_backend=backend, llm_log=log,
    )
    step = next(s for s in res.trajectory if s.kind == "step")
    assert "llm_fallback" in step.flags
    assert step.directive is not None  # rule backend supplied the move
    assert len(log) >= 2  # original attempt plus the corrective re-prompt


def test_llm_backend_requires_gateway(spec, evaluator):
    with pytest.raises(ValueError):
        run_loop(spec, evaluator, budget=2, backend="llm", seed=0)
