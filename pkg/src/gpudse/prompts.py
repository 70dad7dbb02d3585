"""Prompt templates for the chat-completion backends.

Versioned as code; the run manifest records PROMPT_VERSION so stored
trajectories can be tied to the exact prompt wording that produced them.
"""

from __future__ import annotations

PROMPT_VERSION = "1"

# The three corrective rules prepended to system prompts in "enhanced"
# mode. They pin down the failure modes scripted and language-model
# agents are most prone to in this domain.
CORRECTIVE_RULES = (
    "Focus solely on the dominant bottleneck: target only the resource "
    "with the largest stall share and ignore parameters unrelated to it.",
    "Always compute deltas relative to the sensitivity reference design, "
    "never against a zero baseline.",
    "When trading resources off, adjust only the least critical resource: "
    "the parameter with the smallest influence on the current objective.",
)

STRATEGY_SYSTEM = """\
You are tuning one GPU design inside a discrete lattice of eight parameters.
Propose exactly one mitigation directive for the dominant bottleneck.
Reply with a single JSON object (optionally fenced) of the form:
{"target_bottleneck": "<resource>", "boosts": [["<parameter>", +steps], ...],
 "tradeoff": ["<parameter>", -steps] or null, "rationale": "<one sentence>"}
Resources: tensor_compute, vector_compute, memory_bw, interconnect.
Steps move along each parameter's ordered value list. Every named
parameter must be distinct, boosts must be non-empty, and the resulting
design must stay inside the lattice.
"""

INFLUENCE_SYSTEM = """\
You are reading the closed-form description of a GPU performance and area
model. State the sign of each parameter's structural influence on each
metric. Reply with a single JSON object (optionally fenced):
{"influences": {"<parameter>": {"<metric>": "+"|"-"|"0", ...}, ...}}
Use "0" only when the metric's formula does not mention the parameter.
"""

BENCH_SYSTEM = """\
You are answering a multiple-choice question about GPU architecture
tuning for transformer inference. Exactly one option is correct.
Reply with the single letter of your chosen option (A, B, C or D).
"""


def strategy_user_prompt(design: dict, metrics: dict, stall_shares: dict, dominant: str,
                         objective: str, influence_rows: list[dict], visited: int,
                         blocked: list) -> str:
    import json

    lines = [
        f"Current design: {json.dumps(design, sort_keys=True)}",
        f"Normalized metrics (reference = 1.0): {json.dumps(metrics, sort_keys=True)}",
        f"Optimization objective this round: {objective}",
        f"Stall shares of the targeted phase: {json.dumps(stall_shares, sort_keys=True)}",
        f"Dominant bottleneck: {dominant}",
        f"Designs already visited: {visited} (do not revisit).",
    ]
    if blocked:
        lines.append(f"Blocked directive fingerprints (failed before): {blocked}")
    lines.append("Influence table (change per +1 step at the sensitivity reference):")
    for row in influence_rows:
        lines.append(
            f"  {row['parameter']} -> {row['metric']}: sign {row['sign']:+d}, "
            f"magnitude {row['magnitude']}"
        )
    lines.append("Propose the directive now.")
    return "\n".join(lines)


def influence_user_prompt(model_description: str, parameters: list[str], metrics: list[str]) -> str:
    return (
        "Model description:\n"
        f"{model_description}\n\n"
        f"Parameters: {', '.join(parameters)}\n"
        f"Metrics: {', '.join(metrics)}\n"
        "Emit the sign table."
    )


def bench_system_prompt(rules: str) -> str:
    if rules == "enhanced":
        return BENCH_SYSTEM + "\nRules:\n" + "\n".join(f"- {r}" for r in CORRECTIVE_RULES)
    return BENCH_SYSTEM
