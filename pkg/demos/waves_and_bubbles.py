"""
Waves versus bubbles
====================

More waves means thinner slices, so the fill and drain phases shrink.
Compare the closed-form ratio with what the simulator measures, then see
what happens once messages stop being free.
"""

from fractions import Fraction

from wavepipe import CostModel, analytic_bubble_hanayo, analytic_bubble_simplified, compare

# closed form and simulation side by side, B = P
print(" P  W   closed form   simulated")
for P in (4, 8):
    rows = compare([("hanayo", P, P, W) for W in (1, 2, 4, 8)])
    for row in sorted(rows, key=lambda r: r.config.W):
        W = row.config.W
        print(f"{P:>2} {W:>2}   {float(analytic_bubble_simplified(P, W)):.4f}        {float(row.simulated):.4f}")

# with T_B = 2 T_F and free messages the long form collapses to the short one
assert analytic_bubble_hanayo(8, 3, 1, 2, 0) == analytic_bubble_simplified(8, 3)

# each extra wave adds boundary crossings; with slow links the best W moves down
for tc in (0, Fraction(1, 32), Fraction(1, 16), Fraction(1, 8), Fraction(1, 4)):
    rows = compare([("hanayo", 4, 4, W) for W in range(1, 9)], CostModel(1, 2, tc))
    best = rows[0]
    print(f"T_C={str(tc):<4} best W={best.config.W}  makespan {float(best.makespan):.3f}")
