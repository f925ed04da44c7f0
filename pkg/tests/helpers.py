"""Golden-file loading and the documented single-action mutations."""

import copy
import json
from pathlib import Path

from wavepipe.core import action_list_from_dict

GOLDEN = Path(__file__).parent / "data" / "golden"


def golden_doc(name: str) -> dict:
    return json.loads((GOLDEN / f"{name}.actions.json").read_text())


def golden_order(name: str) -> dict:
    return json.loads((GOLDEN / f"{name}.order.json").read_text())


def load(doc: dict):
    return action_list_from_dict(doc)


def _find(actions, **want):
    for i, a in enumerate(actions):
        if all(a.get(k) == v for k, v in want.items()):
            return i
    raise LookupError(want)


def delete_forward(doc, device, microbatch):
    """Completeness: drop one Forward."""
    doc = copy.deepcopy(doc)
    acts = doc["actions"][device]
    del acts[_find(acts, kind="forward", microbatch=microbatch)]
    return doc


def misplace_backward(doc, src, dst, microbatch):
    """Completeness: move a Backward onto a device that does not own its slice."""
    doc = copy.deepcopy(doc)
    acts = doc["actions"][src]
    act = acts.pop(_find(acts, kind="backward", microbatch=microbatch))
    act["local_module_rank"] = 0
    doc["actions"][dst].insert(-1, act)
    return doc


def receive_before_send(doc, device=0, microbatch=0):
    """Dependencies: hoist the gradient Receive above the activation Send it depends on."""
    doc = copy.deepcopy(doc)
    acts = doc["actions"][device]
    recv = acts.pop(_find(acts, kind="receive", microbatch=microbatch, payload="gradient"))
    acts.insert(_find(acts, kind="send", microbatch=microbatch, payload="activation"), recv)
    return doc


def delete_send(doc, device=0, microbatch=0):
    """Dependencies: drop a Send, keeping its Receive."""
    doc = copy.deepcopy(doc)
    acts = doc["actions"][device]
    del acts[_find(acts, kind="send", microbatch=microbatch)]
    return doc


def defuse_exchange(doc, group=0):
    """Deadlock: split a BatchedExchange back into plain Send-then-Receive on both sides."""
    doc = copy.deepcopy(doc)
    for acts in doc["actions"]:
        for i, a in enumerate(acts):
            if a["kind"] == "batched_exchange" and a["batch_group"] == group:
                parts = sorted(a["parts"], key=lambda p: p["kind"] != "send")
                acts[i:i + 1] = parts
                break
    return doc


def premature_flush(doc, device=0):
    """Flush: move the OptimizerStep in front of the device's last Backward."""
    doc = copy.deepcopy(doc)
    acts = doc["actions"][device]
    opt = acts.pop()
    last_bwd = max(i for i, a in enumerate(acts) if a["kind"] == "backward")
    acts.insert(last_bwd, opt)
    return doc


# the four documented mutations, one per check
MUTATIONS = {
    "completeness": lambda: delete_forward(golden_doc("gpipe_P4_B4"), 1, 2),
    "dependencies": lambda: receive_before_send(golden_doc("gpipe_P2_B2")),
    "deadlock": lambda: defuse_exchange(golden_doc("dapple_P4_B4"), 0),
    "flush": lambda: premature_flush(golden_doc("gpipe_P4_B4"), 2),
}
