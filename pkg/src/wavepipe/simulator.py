"""Deterministic discrete-event execution of an action list.

Semantics, per device, in program order:

* Forward/Backward occupy the compute engine for ``T_F * fraction`` or
  ``T_B * fraction``.
* Send is buffered and free for the sender. Its payload arrives at
  ``max(send reached, receive posted) + T_C``.
* Receive is posted when the device starts the compute action preceding it
  (look-ahead depth 1, or time 0 if there is none). It does not block; the
  compute that consumes the payload starts no earlier than its arrival.
* BatchedExchange starts when both participants reach it and holds both
  engines for ``T_C``.
* OptimizerStep is free.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from numbers import Real
from typing import Optional

from .core import Action, ActionKind, ActionList, Payload


class SimulationError(RuntimeError):
    pass


@dataclass(frozen=True)
class CostModel:
    """Per-stage forward/backward times and one point-to-point transfer time.

    ``T_F`` and ``T_B`` are the cost of a whole pass divided by ``P``; a
    slice holding ``fraction`` of that share costs ``fraction`` times as much.
    """

    T_F: Real = 1
    T_B: Real = 2
    T_C: Real = 0

    def __post_init__(self):
        for name in ("T_F", "T_B", "T_C"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")

    def compute_time(self, kind: ActionKind, fraction: Fraction = Fraction(1)):
        base = self.T_F if kind is ActionKind.FORWARD else self.T_B
        return base * fraction


@dataclass(frozen=True)
class Interval:
    device: int
    position: int  # index into the device's action stream
    action: Action
    start: Real
    end: Real


@dataclass(frozen=True)
class CommEvent:
    src: int
    dst: int
    post: Real  # when the transfer could begin (both ends ready)
    arrival: Real
    microbatch: int
    payload: str


@dataclass(frozen=True)
class SimTrace:
    intervals: tuple  # per device, tuple[Interval, ...]
    makespan: Real
    comm_events: tuple
    num_devices: int

    def all_intervals(self):
        for dev in self.intervals:
            yield from dev

    def busy_time(self, device: int):
        return sum((iv.end - iv.start for iv in self.intervals[device] if iv.action.kind.is_compute), 0)

    def to_dict(self) -> dict:
        def num(x):
            return float(x)

        return {
            "makespan": num(self.makespan),
            "devices": [
                [{"position": iv.position, "kind": iv.action.kind.value,
                  "microbatch": iv.action.microbatch, "slice": iv.action.slice_index,
                  "batch_group": iv.action.batch_group,
                  "start": num(iv.start), "end": num(iv.end)} for iv in dev]
                for dev in self.intervals
            ],
            "comm_events": [
                {"src": e.src, "dst": e.dst, "post": num(e.post), "arrival": num(e.arrival),
                 "microbatch": e.microbatch, "payload": e.payload}
                for e in self.comm_events
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=1) + "\n"


def _key(act: Action, dev: int) -> tuple:
    if act.kind is ActionKind.SEND:
        return (act.payload, act.microbatch, act.slice_index, dev, act.peer)
    return (act.payload, act.microbatch, act.slice_index, act.peer, dev)


def simulate(alist: ActionList, cost_model: Optional[CostModel] = None) -> SimTrace:
    cost = cost_model or CostModel()
    P = alist.config.P
    streams = alist.per_device
    placement = alist.placement
    pc = [0] * P
    clock = [0] * P
    last_compute_start = [0] * P
    sent: dict = {}  # message key -> time the sender reached the Send
    posted: dict = {}  # (device, payload, mb, source slice) -> (message key, post time)
    intervals = [[] for _ in range(P)]
    events = []

    def advance(dev: int) -> bool:
        if pc[dev] >= len(streams[dev]):
            return False
        act = streams[dev][pc[dev]]
        kind = act.kind
        if kind.is_compute:
            frac = placement.slice_at(dev, act.local_module_rank).fraction
            start = clock[dev]
            if kind is ActionKind.FORWARD:
                inbox = (dev, Payload.ACTIVATION, act.microbatch, act.slice_index - 1)
            else:
                inbox = (dev, Payload.GRADIENT, act.microbatch, act.slice_index + 1)
            if inbox in posted:
                key, post = posted[inbox]
                if key not in sent:
                    return False
                begin = max(sent[key], post)
                arrival = begin + cost.T_C
                events.append(CommEvent(key[3], dev, begin, arrival, act.microbatch, key[0].value))
                del posted[inbox]
                start = max(start, arrival)
            end = start + cost.compute_time(kind, frac)
            intervals[dev].append(Interval(dev, pc[dev], act, start, end))
            last_compute_start[dev] = start
            clock[dev] = end
        elif kind is ActionKind.SEND:
            sent[_key(act, dev)] = clock[dev]
        elif kind is ActionKind.RECEIVE:
            inbox = (dev, act.payload, act.microbatch, act.slice_index)
            posted[inbox] = (_key(act, dev), last_compute_start[dev])
        elif kind is ActionKind.BATCHED_EXCHANGE:
            peer = act.peer
            if pc[peer] >= len(streams[peer]):
                return False
            other = streams[peer][pc[peer]]
            if other.kind is not ActionKind.BATCHED_EXCHANGE or other.batch_group != act.batch_group:
                return False
            start = max(clock[dev], clock[peer])
            end = start + cost.T_C
            for d, a in ((dev, act), (peer, other)):
                intervals[d].append(Interval(d, pc[d], a, start, end))
                for part in a.parts:
                    if part.kind is ActionKind.SEND:
                        events.append(CommEvent(d, part.peer, start, end, part.microbatch,
                                                part.payload.value))
                clock[d] = end
            pc[peer] += 1
        pc[dev] += 1
        return True

    while True:
        progressed = False
        for dev in range(P):
            while advance(dev):
                progressed = True
        if all(pc[d] >= len(streams[d]) for d in range(P)):
            break
        if not progressed:
            stuck = {d: streams[d][pc[d]].short() for d in range(P) if pc[d] < len(streams[d])}
            raise SimulationError(f"simulation cannot make progress; blocked at {stuck}")

    for dev in range(P):
        ivs = intervals[dev]
        for a, b in zip(ivs, ivs[1:]):
            assert a.end <= b.start, f"engine overlap on device {dev}: {a} / {b}"

    makespan = max(clock) if clock else 0
    return SimTrace(tuple(tuple(iv) for iv in intervals), makespan, tuple(events), P)


def trace_to_gantt(trace: SimTrace, format: str = "svg", config=None) -> str:
    """SVG or CSV Gantt chart of ``trace``; see :mod:`wavepipe.gantt`."""
    from .gantt import trace_to_gantt as render

    return render(trace, format, config)
