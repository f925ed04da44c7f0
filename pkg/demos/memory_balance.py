"""
Where the activations pile up
=============================

1F1B frees activations early, but the first device still holds one per
in-flight micro-batch. The wave shape spreads that load: every device
holds a piece near both ends of the model.
"""

from wavepipe import generate, make_config, make_placement, memory_profile, simulate

P = B = 8
for scheme, W in [("gpipe", 1), ("dapple", 1), ("hanayo", 1), ("hanayo", 2), ("chimera", 1)]:
    cfg = make_config(scheme, P, B, W)
    prof = memory_profile(simulate(generate(scheme, P, B, W)), make_placement(cfg))
    peaks = " ".join(f"{float(x):4.2f}" for x in prof.peak_activation_units)
    print(f"{scheme:<8} W={W}  weights {float(prof.weight_units[0])}  peaks [{peaks}]  "
          f"variance {float(prof.activation_variance):.3f}")
