"""
=====================================
The design lattice and moves over it
=====================================

Loads the default 8-parameter GPU-node design space, counts it, validates
a few configurations, and walks single-step neighbors.
"""

import numpy as np

from gpudse.space import SpaceSpec, random_design, space_cardinality, step_neighbor, validate

spec = SpaceSpec.default()

################################################################################
# size of the search problem

print(f"lattice cardinality: {space_cardinality(spec):,}")
for p in spec.parameters:
    print(f"  {p.name:18s} {p.allowed_values}")

################################################################################
# the reference design sits slightly off-lattice (40 MB buffer) but is
# accepted as a reference extension

ref = spec.reference_design
print("\nreference design:", ref.as_dict())
print("violations:", validate(spec, ref) or "none")

broken = ref.with_value("mem_channels", 0)
print("zero channels ->", validate(spec, broken))

################################################################################
# single-step moves follow each parameter's ordered value list

up = step_neighbor(spec, ref, "core_count", +1)
print(f"\ncores {ref.core_count} -> {up.core_count} (one step up)")
buf = step_neighbor(spec, ref, "global_buffer_mb", +1)
print(f"buffer {ref.global_buffer_mb} MB -> {buf.global_buffer_mb} MB (off-lattice start)")

################################################################################
# uniform sampling is the seed for every stochastic explorer

rng = np.random.default_rng(0)
for _ in range(3):
    print("sample:", random_design(spec, rng).astuple())
