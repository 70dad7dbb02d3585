"""
==========================================
Roofline evaluation with stall attribution
==========================================

Evaluates the reference design and two hand-picked alternatives on the
transformer-layer workload, printing normalized PPA, per-phase stall
shares, and the slowest operators.
"""

from gpudse.config import load_config, make_space
from gpudse.perfmodel import Evaluator
from gpudse.space import DesignPoint

cfg = load_config()
spec = make_space(cfg)
evaluator = Evaluator.from_config(cfg, spec)

################################################################################
# the reference normalizes to exactly (1, 1, 1)

ref = spec.reference_design
metrics, rep = evaluator.evaluate(ref)
print(f"reference: TTFT {metrics.ttft_s * 1e3:.2f} ms, TPOT {metrics.tpot_s * 1e6:.1f} us, "
      f"area {metrics.area_mm2:.0f} mm^2")
for phase in (rep.prefill, rep.decode):
    shares = ", ".join(f"{k} {v:.3f}" for k, v in sorted(phase.stall_shares.items()))
    print(f"  {phase.phase}: dominant={phase.dominant_resource}  [{shares}]")

################################################################################
# the slowest operators tell you what to fix

worst = sorted(rep.prefill.operators, key=lambda t: -t.bound_time_s)[:3]
print("\nslowest prefill operators:")
for op in worst:
    print(f"  {op.name:14s} {op.bound_time_s * 1e3:7.2f} ms  bound by {op.binding_resource}")

################################################################################
# two designs in the published direction: wider systolic arrays, fewer
# cores, one more memory channel, more links

for name, d in (
    ("design A", DesignPoint(24, 64, 4, 32, 16, 128, 40, 6)),
    ("design B", DesignPoint(18, 96, 4, 32, 16, 128, 40, 6)),
):
    m, _ = evaluator.evaluate(d)
    print(f"{name}: ttft_n {m.ttft_n:.3f}  tpot_n {m.tpot_n:.3f}  area_n {m.area_n:.3f}")

################################################################################
# starving the memory system shows in the decode attribution

starved, srep = evaluator.evaluate(ref.with_value("mem_channels", 1))
print(f"\n1 memory channel: tpot_n {starved.tpot_n:.2f}, "
      f"decode dominant = {srep.decode.dominant_resource}")
