"""
==============================================
Generating and scoring the reasoning benchmark
==============================================

Builds a small oracle-verified question suite across the three task
families and scores the built-in agents, with and without the corrective
rules.
"""

from gpudse.benchmark import (
    OracleAgent,
    RandomAgent,
    RuleAgent,
    generate_suite,
    score,
    verify_question,
)
from gpudse.config import load_config, make_space
from gpudse.perfmodel import Evaluator

cfg = load_config()
spec = make_space(cfg)
evaluator = Evaluator.from_config(cfg, spec)

################################################################################
# generation re-evaluates every option, so keys are sound by construction

suite = generate_suite(spec, evaluator, {"bottleneck": 30, "prediction": 30, "tuning": 15}, seed=4)
verified = sum(verify_question(q, evaluator, spec) for q in suite.questions)
print(f"{verified}/{len(suite.questions)} keys re-verified independently")

print("\none bottleneck question:\n")
print(suite.by_task("bottleneck")[0].prompt)

################################################################################
# agents: the oracle re-evaluates, the random agent guesses, the scripted
# rule agent estimates from the exemplars in the prompt

for name, agent in (
    ("oracle", OracleAgent(evaluator, spec)),
    ("random", RandomAgent(7)),
):
    rep = score(suite, agent)
    print(f"{name:8s} accuracy per task: {rep.accuracy}  overall {rep.overall:.3f}")

################################################################################
# the three corrective rules (dominant bottleneck only, deltas from the
# sensitivity reference, least-critical trade-off) lift the same agent

rule_agent = RuleAgent(spec)
off = score(suite, rule_agent, rules="original")
on = score(suite, rule_agent, rules="enhanced")
print(f"\nrules off: {off.overall:.3f}  {off.accuracy}")
print(f"rules on:  {on.overall:.3f}  {on.accuracy}")
