"""
Schedules at a glance
=====================

Build the five schedules on four devices, check them, simulate them with
the default costs (backward twice as long as forward, free messages) and
drop a Gantt chart per scheme.
"""

import os
from pathlib import Path

from wavepipe import bubble_ratio, generate, simulate, trace_to_gantt, validate

out = Path(os.environ.get("WAVEPIPE_OUT_DIR", "demo_out"))
out.mkdir(parents=True, exist_ok=True)

# one entry per scheme; only the wave schemes take a wave count
runs = [("gpipe", 1), ("dapple", 1), ("chimera", 1), ("chimera-wave", 1), ("hanayo", 1), ("hanayo", 2)]

for scheme, W in runs:
    alist = generate(scheme, 4, 4, W)
    assert validate(alist).ok
    trace = simulate(alist)
    name = f"{scheme}_W{W}"
    (out / f"{name}.svg").write_text(trace_to_gantt(trace, "svg", alist.config))
    print(f"{name:<16} makespan {float(trace.makespan):6.3f}   bubble {float(bubble_ratio(trace)):.3f}")

# the last device of 1F1B alternates forward and backward from the start
print(generate("dapple", 4, 4).compute_labels()[3])

# the bottom of the V: device 3 runs two slices of micro-batch 0 back to back
print(generate("hanayo", 4, 4).compute_labels()[3][:4])
print(f"charts in {out}/")
