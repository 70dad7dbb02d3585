"""
===========================================
Pareto archive and exact 3D hypervolume
===========================================

Feeds random evaluations into a Pareto archive and tracks the dominated
hypervolume against the unit reference point.
"""

import numpy as np

from gpudse.config import load_config, make_space
from gpudse.pareto import ParetoArchive, dominates, hypervolume, sample_efficiency
from gpudse.perfmodel import Evaluator
from gpudse.space import random_design

cfg = load_config()
spec = make_space(cfg)
evaluator = Evaluator.from_config(cfg, spec)

################################################################################
# dominance is componentwise-<= with one strict improvement

print(dominates((0.7, 0.9, 0.8), (1, 1, 1)))   # True
print(dominates((1.0, 1.0, 1.0), (1, 1, 1)))   # equality never dominates

################################################################################
# archive 300 random designs and watch the front grow

rng = np.random.default_rng(3)
archive = ParetoArchive(reference=(1.0, 1.0, 1.0))
objs = []
for i in range(300):
    d = random_design(spec, rng)
    m, _ = evaluator.evaluate(d)
    objs.append(m.normalized())
    archive.insert(d, m.normalized())
    if (i + 1) % 100 == 0:
        print(f"after {i + 1:3d} samples: front size {len(archive.entries):2d}, "
              f"PHV {archive.hypervolume():.5f}")

print("sample efficiency vs reference:", sample_efficiency(objs, (1.0, 1.0, 1.0)))

################################################################################
# hypervolume is an exact sweep, so tiny fronts are cheap to compare

print(hypervolume([(0.5, 0.5, 0.5)], (1, 1, 1)))          # 0.125: one box
print(hypervolume([(0.5, 0.5, 0.5)] * 3, (1, 1, 1)))      # duplicates add nothing
