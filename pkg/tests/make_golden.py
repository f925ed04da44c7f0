"""Regenerate the golden files under tests/data/golden.

Run only when the scheduling policy changes on purpose; the diff of the
regenerated files is the review artifact.
"""

import json
from pathlib import Path

from wavepipe import generate, serialize_action_list

GOLDEN = Path(__file__).parent / "data" / "golden"

# name -> (args, note)
ORDERS = {
    "gpipe_P4_B4": (("gpipe", 4, 4), "all forwards before any backward on every device"),
    "dapple_P4_B4": (("dapple", 4, 4), "1F1B; device p warms up with 4-p forwards"),
    "chimera_P4_B4": (("chimera", 4, 4), "micro-batches 0,1 down (group 0), 2,3 up (group 1)"),
    "hanayo_P4_B4_W1": (("hanayo", 4, 4, 1), "one V; device 3 runs slices 3 and 4 back to back"),
    "hanayo_P4_B4_W2": ((
        "hanayo", 4, 4, 2),
        "two waves; launch stagger is whatever the backward-first greedy policy produces and may "
        "differ in detail from hand-drawn two-wave diagrams, which leave the stagger unspecified"),
}

# full action lists used as mutation fixtures
ACTION_LISTS = {
    "gpipe_P2_B2": ("gpipe", 2, 2),
    "gpipe_P4_B4": ("gpipe", 4, 4),
    "dapple_P4_B4": ("dapple", 4, 4),
    "hanayo_P4_B4_W2": ("hanayo", 4, 4, 2),
}


def main():
    GOLDEN.mkdir(parents=True, exist_ok=True)
    for name, (args, note) in ORDERS.items():
        alist = generate(*args)
        doc = {
            "note": note,
            "config": alist.config.to_dict(),
            "compute_order": {str(d): labels for d, labels in alist.compute_labels().items()},
        }
        (GOLDEN / f"{name}.order.json").write_text(json.dumps(doc, indent=1) + "\n")
    for name, args in ACTION_LISTS.items():
        (GOLDEN / f"{name}.actions.json").write_bytes(serialize_action_list(generate(*args)))


if __name__ == "__main__":
    main()
