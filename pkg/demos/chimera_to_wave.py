"""
From two pipelines to two waves
===============================

Chimera keeps two copies of the model and runs one pipeline down the
devices and one up. Swapping the symmetric halves of its schedule turns
each half of the cluster into a one-wave V, with the two halves acting as
plain data parallelism.
"""

from fractions import Fraction

from wavepipe import CostModel, generate, make_config, simulate, transform_chimera_to_wave

chimera = make_config("chimera", 8, 8)
group, placement = transform_chimera_to_wave(chimera)
print(f"per-group pipeline: P={group.P} W={group.W} S={group.S} replicas={group.D}")
print("group placement:", placement.as_index_lists())

# the combined schedule on all eight devices, both groups at once
for tc in (0, Fraction(1, 2), 1):
    cost = CostModel(1, 2, tc)
    before = simulate(generate("chimera", 8, 8, cost_model=cost), cost).makespan
    after = simulate(generate("chimera-wave", 8, 8, cost_model=cost), cost).makespan
    print(f"T_C={str(tc):<3}  chimera {float(before):6.2f}   wave {float(after):6.2f}")
