"""Structural checks for action lists.

The four checks are independent of any cost model. Each returns a
:class:`Report`; :func:`validate` runs them all.
"""

from __future__ import annotations

import json
from collections import defaultdict
from dataclasses import dataclass, field
from graphlib import CycleError, TopologicalSorter
from typing import Optional

from .core import ActionKind, ActionList, Payload

COMPLETENESS = "completeness"
DEPENDENCIES = "dependencies"
DEADLOCK = "deadlock"
FLUSH = "flush"


@dataclass(frozen=True)
class Diagnostic:
    check: str
    severity: str
    device: Optional[int]
    position: Optional[int]
    message: str

    def to_dict(self) -> dict:
        return {"check": self.check, "severity": self.severity, "device": self.device,
                "position": self.position, "message": self.message}

    def line(self) -> str:
        where = []
        if self.device is not None:
            where.append(f"device {self.device}")
        if self.position is not None:
            where.append(f"pos {self.position}")
        loc = f" [{', '.join(where)}]" if where else ""
        return f"{self.severity.upper()} {self.check}{loc}: {self.message}"


@dataclass
class Report:
    diagnostics: list = field(default_factory=list)

    def add(self, check, device, position, message, severity="error"):
        self.diagnostics.append(Diagnostic(check, severity, device, position, message))

    @property
    def errors(self) -> list:
        return [d for d in self.diagnostics if d.severity == "error"]

    @property
    def ok(self) -> bool:
        return not self.errors

    def checks_failed(self) -> set:
        return {d.check for d in self.errors}

    def extend(self, other: "Report") -> "Report":
        self.diagnostics.extend(other.diagnostics)
        return self

    def render(self) -> str:
        return "\n".join(d.line() for d in self.diagnostics)

    def to_json(self) -> str:
        return json.dumps([d.to_dict() for d in self.diagnostics], indent=1)


def _comm_actions(alist: ActionList):
    """Yield (device, position, Send/Receive action), unpacking batched exchanges."""
    for dev, pos, act in alist.iter_actions():
        if act.kind is ActionKind.BATCHED_EXCHANGE:
            for part in act.parts:
                yield dev, pos, part
        elif act.kind in (ActionKind.SEND, ActionKind.RECEIVE):
            yield dev, pos, act


def _msg_key(act, dev) -> tuple:
    if act.kind is ActionKind.SEND:
        return (act.payload, act.microbatch, act.slice_index, dev, act.peer)
    return (act.payload, act.microbatch, act.slice_index, act.peer, dev)


def _label(kind, mb, s) -> str:
    return f"{kind.value} (mb {mb}, slice {s})"


def check_completeness(alist: ActionList) -> Report:
    """Every (micro-batch, slice) has exactly one Forward and one Backward on its owner."""
    rep = Report()
    cfg, placement = alist.config, alist.placement
    owners = placement.owner_map()

    # placement itself
    expected_copies = cfg.num_groups
    seen_slices = defaultdict(int)
    for dev, slices in enumerate(placement.assignment):
        for sl in slices:
            seen_slices[sl.index] += 1
    for s in range(cfg.S):
        if seen_slices[s] != expected_copies:
            rep.add(COMPLETENESS, None, None,
                    f"slice {s} placed {seen_slices[s]} times, expected {expected_copies}")

    seen = defaultdict(list)
    for dev, pos, act in alist.iter_actions():
        if not act.kind.is_compute:
            continue
        mb, s = act.microbatch, act.slice_index
        seen[(act.kind, mb, s)].append((dev, pos))
        owner = owners.get((cfg.group_of(mb), s))
        if owner is None or owner[0] != dev:
            rep.add(COMPLETENESS, dev, pos,
                    f"misplaced {_label(act.kind, mb, s)}: slice owned by device "
                    f"{owner[0] if owner else '?'}")
            continue
        if act.local_module_rank != owner[1]:
            rep.add(COMPLETENESS, dev, pos,
                    f"{_label(act.kind, mb, s)} uses local module rank {act.local_module_rank}, "
                    f"slice lives at rank {owner[1]}")

    for kind in (ActionKind.FORWARD, ActionKind.BACKWARD):
        for mb in range(cfg.B):
            for s in range(cfg.S):
                where = seen.get((kind, mb, s), [])
                if not where:
                    owner = owners.get((cfg.group_of(mb), s), (None,))[0]
                    rep.add(COMPLETENESS, owner, None, f"missing {_label(kind, mb, s)}")
                for dev, pos in where[1:]:
                    rep.add(COMPLETENESS, dev, pos, f"duplicated {_label(kind, mb, s)}")
    return rep


def _compute_index(alist: ActionList) -> dict:
    idx = {}
    for dev, pos, act in alist.iter_actions():
        if act.kind.is_compute:
            idx.setdefault((act.kind, act.microbatch, act.slice_index), (dev, pos))
    return idx


def check_dependencies(alist: ActionList) -> Report:
    """Happens-before graph is acyclic and every dataflow edge is realized."""
    rep = Report()
    cfg = alist.config
    S = cfg.S
    sends, recvs = {}, {}
    for dev, pos, act in _comm_actions(alist):
        table = sends if act.kind is ActionKind.SEND else recvs
        key = _msg_key(act, dev)
        if key in table:
            rep.add(DEPENDENCIES, dev, pos, f"duplicated {act.kind.value} {act.short()}")
        table[key] = (dev, pos)
    for key, (dev, pos) in recvs.items():
        if key not in sends:
            rep.add(DEPENDENCIES, dev, pos,
                    f"unmatched receive of {key[0].value} mb {key[1]} slice {key[2]} from device {key[3]}")
    for key, (dev, pos) in sends.items():
        if key not in recvs:
            rep.add(DEPENDENCIES, dev, pos,
                    f"unmatched send of {key[0].value} mb {key[1]} slice {key[2]} to device {key[4]}")

    # both halves of a batched exchange complete as one event
    def node(dev, pos):
        act = alist.per_device[dev][pos]
        if act.kind is ActionKind.BATCHED_EXCHANGE:
            return ("batch", act.batch_group)
        return (dev, pos)

    graph = defaultdict(set)  # node -> predecessors

    def edge(src, dst):
        a, b = node(*src), node(*dst)
        graph[b]
        if a != b:
            graph[b].add(a)

    for dev, actions in enumerate(alist.per_device):
        for pos in range(1, len(actions)):
            edge((dev, pos - 1), (dev, pos))
        if actions:
            graph[node(dev, 0)]
    for key, src in sends.items():
        dst = recvs.get(key)
        if dst is not None:
            edge(src, dst)

    F, Bk = ActionKind.FORWARD, ActionKind.BACKWARD
    computes = _compute_index(alist)
    for (kind, mb, s), (dev, pos) in sorted(computes.items(), key=lambda kv: kv[1]):
        if kind is F:
            if s == 0:
                continue
            prod, payload = (F, mb, s - 1), Payload.ACTIVATION
        elif s == S - 1:
            prod, payload = (F, mb, s), None
        else:
            prod, payload = (Bk, mb, s + 1), Payload.GRADIENT
        if prod not in computes:
            continue  # reported by completeness
        pdev, ppos = computes[prod]
        edge((pdev, ppos), (dev, pos))
        label = f"{_label(*prod)} -> {_label(kind, mb, s)}"
        if pdev == dev:
            if ppos > pos:
                rep.add(DEPENDENCIES, dev, pos, f"dataflow edge {label} violates program order")
            continue
        key = (payload, mb, prod[2], pdev, dev)
        snd, rcv = sends.get(key), recvs.get(key)
        if snd is None or rcv is None or snd[1] < ppos or rcv[1] > pos:
            rep.add(DEPENDENCIES, dev, pos, f"dataflow edge {label} not realized by a send/receive pair")

    try:
        tuple(TopologicalSorter(graph).static_order())
    except CycleError as exc:
        cycle = exc.args[1]
        labels = [f"batch group {n[1]}" if n[0] == "batch"
                  else f"{n[0]}:{n[1]}:{alist.per_device[n[0]][n[1]].short()}" for n in cycle[:12]]
        first = next((n for n in cycle if n[0] != "batch"), (None, None))
        rep.add(DEPENDENCIES, first[0], first[1], "happens-before cycle: " + " <- ".join(labels))
    return rep


def check_deadlock_free(alist: ActionList) -> Report:
    """Run the lists under rendezvous semantics and certify batched crossings.

    A Send only completes together with its Receive; a BatchedExchange
    completes together with its peer's. Anything safe here is safe under
    buffered sends too.
    """
    rep = Report()
    streams = alist.per_device
    P = alist.config.P

    # adjacent, unfused send/send crossings between a device pair
    where = {}
    for dev, pos, act in alist.iter_actions():
        if act.kind in (ActionKind.SEND, ActionKind.RECEIVE):
            where[(act.kind, _msg_key(act, dev))] = (dev, pos)
    for dev, actions in enumerate(streams):
        for pos in range(len(actions) - 1):
            a, b = actions[pos], actions[pos + 1]
            if a.kind is not ActionKind.SEND or b.kind is not ActionKind.RECEIVE or a.peer != b.peer:
                continue
            their_recv = where.get((ActionKind.RECEIVE, _msg_key(a, dev)))
            their_send = where.get((ActionKind.SEND, _msg_key(b, dev)))
            if their_recv and their_send and their_send[0] == their_recv[0] \
                    and their_recv[1] == their_send[1] + 1:
                rep.add(DEADLOCK, dev, pos,
                        f"cross-communication with device {a.peer} is not batched "
                        f"(send/send at positions {pos} and {their_send[1]})")

    pc = [0] * P

    def current(d):
        return streams[d][pc[d]] if pc[d] < len(streams[d]) else None

    progressed = True
    while progressed:
        progressed = False
        for dev in range(P):
            while True:
                act = current(dev)
                if act is None:
                    break
                if not act.kind.is_comm:
                    pc[dev] += 1
                    progressed = True
                    continue
                peer = act.peer
                other = current(peer) if 0 <= peer < P else None
                if other is None:
                    break
                if act.kind is ActionKind.BATCHED_EXCHANGE:
                    match = other.kind is ActionKind.BATCHED_EXCHANGE and other.batch_group == act.batch_group
                else:
                    want = ActionKind.RECEIVE if act.kind is ActionKind.SEND else ActionKind.SEND
                    match = other.kind is want and _msg_key(other, peer) == _msg_key(act, dev)
                if not match or peer == dev:
                    break
                pc[dev] += 1
                pc[peer] += 1
                progressed = True
    blocked = [d for d in range(P) if pc[d] < len(streams[d])]
    if blocked:
        pending = ", ".join(f"{d}@{pc[d]}:{streams[d][pc[d]].short()}" for d in blocked)
        rep.add(DEADLOCK, blocked[0], pc[blocked[0]],
                f"deadlock under rendezvous semantics; blocked devices {blocked}: {pending}")
    return rep


def check_flush(alist: ActionList) -> Report:
    """Each device ends with exactly one OptimizerStep, after all its compute."""
    rep = Report()
    for dev, actions in enumerate(alist.per_device):
        steps = [i for i, a in enumerate(actions) if a.kind is ActionKind.OPTIMIZER_STEP]
        if not steps:
            rep.add(FLUSH, dev, len(actions), "missing flush: no optimizer step")
            continue
        for extra in steps[1:]:
            rep.add(FLUSH, dev, extra, "more than one optimizer step")
        first = steps[0]
        if first != len(actions) - 1:
            later = [i for i in range(first + 1, len(actions)) if actions[i].kind.is_compute]
            what = f"{len(later)} compute action(s) follow it" if later else "it is not the final action"
            rep.add(FLUSH, dev, first, f"premature optimizer step at position {first}: {what}")
    return rep


CHECKS = {
    COMPLETENESS: check_completeness,
    DEPENDENCIES: check_dependencies,
    DEADLOCK: check_deadlock_free,
    FLUSH: check_flush,
}


def validate(alist: ActionList) -> Report:
    rep = Report()
    for check in CHECKS.values():
        rep.extend(check(alist))
    return rep
