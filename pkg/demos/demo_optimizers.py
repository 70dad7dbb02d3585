"""
==================================
Five baseline explorers, one loop
==================================

Runs each baseline optimizer for the same small budget and compares the
hypervolume and sample efficiency they reach.
"""

from gpudse.config import load_config, make_space
from gpudse.optimizers import BudgetExhausted, METHODS, make_optimizer
from gpudse.pareto import ParetoArchive, sample_efficiency
from gpudse.perfmodel import Evaluator

cfg = load_config()
spec = make_space(cfg)
evaluator = Evaluator.from_config(cfg, spec)

BUDGET = 150

################################################################################
# every method shares the propose/observe interface

for method in METHODS:
    options = dict(cfg["optimizer"].get(method, {}))
    if method == "grid":
        options["budget"] = BUDGET
    opt = make_optimizer(method, spec, seed=1, options=options)
    archive = ParetoArchive(reference=(1.0, 1.0, 1.0))
    objs = []
    while len(objs) < BUDGET:
        try:
            d = opt.propose(1)[0]
        except BudgetExhausted:
            break
        m, _ = evaluator.evaluate(d)
        opt.observe(d, m.normalized())
        objs.append(m.normalized())
        archive.insert(d, m.normalized())
    print(f"{method:12s} PHV {archive.hypervolume():.5f}  "
          f"SE {sample_efficiency(objs, (1.0, 1.0, 1.0)):.3f}  "
          f"front {len(archive.entries)}")

################################################################################
# grid and the walker never look at the objectives; the other three adapt.
# Rerun with different seeds to see the variance the adaptive methods carry.
