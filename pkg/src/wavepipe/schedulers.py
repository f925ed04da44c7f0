"""Stage placements and action-list generation for every supported scheme.

Placements are closed-form. Compute ordering comes from one event-driven
greedy list scheduler shared by all schemes; the schemes differ only in
where their slices live and in two admission rules (GPipe's forward
barrier, 1F1B's warmup cap). Communication is inserted afterwards.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

from .core import (
    Action,
    ActionKind,
    ActionList,
    Direction,
    Payload,
    ScheduleConfig,
    Scheme,
    StagePlacement,
    StageSlice,
    ConfigError,
    make_config,
)
from .simulator import CostModel


class SchedulingError(RuntimeError):
    """The greedy executor stalled. Never happens for a valid placement."""


# --------------------------------------------------------------------------
# placements


def _check_scheme(config: ScheduleConfig, *allowed: Scheme) -> None:
    if config.scheme not in allowed:
        names = ", ".join(s.value for s in allowed)
        raise ConfigError(f"placement for {names} called with a {config.scheme.value} config")


def placement_gpipe(config: ScheduleConfig) -> StagePlacement:
    _check_scheme(config, Scheme.GPIPE, Scheme.DAPPLE)
    return StagePlacement(tuple((StageSlice(p, Fraction(1), Direction.DOWN),) for p in range(config.P)))


placement_dapple = placement_gpipe


def placement_chimera(config: ScheduleConfig) -> StagePlacement:
    _check_scheme(config, Scheme.CHIMERA)
    P = config.P
    if P % 2:
        raise ConfigError(f"P must be even for chimera (got {P})")
    return StagePlacement(tuple(
        (StageSlice(p, Fraction(1), Direction.DOWN, 0),
         StageSlice(P - 1 - p, Fraction(1), Direction.UP, 1))
        for p in range(P)))


def _wave_slices(rank: int, P: int, W: int, fraction: Fraction, group: int = 0) -> tuple:
    out = []
    for w in range(W):
        out.append(StageSlice(2 * w * P + rank, fraction, Direction.DOWN, group))
        out.append(StageSlice(2 * w * P + 2 * P - 1 - rank, fraction, Direction.UP, group))
    return tuple(out)


def placement_hanayo(config: ScheduleConfig) -> StagePlacement:
    """Device ``p`` holds slices ``2wP+p`` and ``2wP+2P-1-p`` for each wave ``w``."""
    _check_scheme(config, Scheme.HANAYO)
    frac = Fraction(1, 2 * config.W)
    return StagePlacement(tuple(_wave_slices(p, config.P, config.W, frac) for p in range(config.P)))


def placement_chimera_wave(config: ScheduleConfig) -> StagePlacement:
    """Two mirrored V groups of ``P/2`` devices each.

    Group 0 occupies devices ``0 .. P/2-1`` in rank order, group 1 occupies
    devices ``P-1 .. P/2``. Each slice holds ``1/W`` of a ``model/P`` unit.
    """
    _check_scheme(config, Scheme.CHIMERA_WAVE)
    half = config.P // 2
    frac = Fraction(1, config.W)
    devices = []
    for d in range(config.P):
        if d < half:
            devices.append(_wave_slices(d, half, config.W, frac, group=0))
        else:
            devices.append(_wave_slices(config.P - 1 - d, half, config.W, frac, group=1))
    return StagePlacement(tuple(devices))


def make_placement(config: ScheduleConfig) -> StagePlacement:
    return {
        Scheme.GPIPE: placement_gpipe,
        Scheme.DAPPLE: placement_dapple,
        Scheme.CHIMERA: placement_chimera,
        Scheme.CHIMERA_WAVE: placement_chimera_wave,
        Scheme.HANAYO: placement_hanayo,
    }[config.scheme](config)


def transform_chimera_to_wave(config: ScheduleConfig):
    """Swap the symmetric blocks of a Chimera pipeline into two one-wave groups.

    Returns the per-group Hanayo config (half the devices, half the
    micro-batches, twice the data-parallel replicas) and its placement.
    """
    if config.scheme is not Scheme.CHIMERA:
        raise ConfigError("transform_chimera_to_wave expects a chimera config")
    if config.P % 2:
        raise ConfigError(f"P must be even for chimera (got {config.P})")
    group = make_config(Scheme.HANAYO, config.P // 2, max(config.B // 2, 1), 1, 2 * config.D)
    return group, placement_hanayo(group)


def chimera_wave_group_devices(config: ScheduleConfig, group: int) -> list:
    """Devices of one Chimera-wave group, listed by local rank."""
    half = config.P // 2
    if group == 0:
        return list(range(half))
    return [config.P - 1 - r for r in range(half)]


# --------------------------------------------------------------------------
# greedy list scheduling


@dataclass(frozen=True)
class SchedulePolicy:
    """Admission and priority rules for the greedy list scheduler.

    Backward tasks are preferred over forward ones; ties go to the lower
    micro-batch index (within its group), then to traversal order.
    """

    forward_barrier: bool = False  # GPipe: no backward until all local forwards ran
    warmup_cap: bool = False  # 1F1B: at most P - p micro-batches in flight on device p

    def priority(self, config: ScheduleConfig, task) -> tuple:
        kind, mb, s = task
        if kind is ActionKind.BACKWARD:
            return (0, config.local_index(mb), -s, config.group_of(mb))
        return (1, config.local_index(mb), s, config.group_of(mb))

    @classmethod
    def for_scheme(cls, scheme: Scheme) -> "SchedulePolicy":
        if scheme is Scheme.GPIPE:
            return cls(forward_barrier=True)
        if scheme is Scheme.DAPPLE:
            return cls(warmup_cap=True)
        return cls()


def _list_schedule(placement: StagePlacement, config: ScheduleConfig, cost: CostModel,
                   policy: SchedulePolicy):
    P, B, S = config.P, config.B, config.S
    owners = placement.owner_map()
    F, Bk = ActionKind.FORWARD, ActionKind.BACKWARD

    def owner(task):
        return owners[(config.group_of(task[1]), task[2])]

    def duration(task):
        dev, rank = owner(task)
        return cost.compute_time(task[0], placement.slice_at(dev, rank).fraction)

    def deps(task):
        kind, mb, s = task
        if kind is F:
            return [(F, mb, s - 1)] if s > 0 else []
        if s == S - 1:
            return [(F, mb, s)]
        return [(Bk, mb, s + 1)]

    def succs(task):
        kind, mb, s = task
        if kind is F:
            return [(F, mb, s + 1)] if s < S - 1 else [(Bk, mb, s)]
        return [(Bk, mb, s - 1)] if s > 0 else []

    finish: dict = {}
    ready: list = [dict() for _ in range(P)]
    free = [0] * P
    n_fwd = [0] * P
    n_fwd_done = [0] * P
    n_bwd_done = [0] * P
    for mb in range(B):
        for s in range(S):
            n_fwd[owner((F, mb, s))[0]] += 1
    for mb in range(B):
        task = (F, mb, 0)
        ready[owner(task)[0]][task] = 0
    order: list = [[] for _ in range(P)]
    remaining = 2 * B * S

    def eligible(dev, task):
        if task[0] is Bk:
            return not policy.forward_barrier or n_fwd_done[dev] == n_fwd[dev]
        if policy.warmup_cap:
            return n_fwd_done[dev] - n_bwd_done[dev] < P - dev
        return True

    t = 0
    while remaining:
        progressed = True
        while progressed:
            progressed = False
            for dev in range(P):
                if free[dev] > t:
                    continue
                cands = [task for task, rt in ready[dev].items() if rt <= t and eligible(dev, task)]
                if not cands:
                    continue
                task = min(cands, key=lambda x: policy.priority(config, x))
                del ready[dev][task]
                end = t + duration(task)
                finish[task] = (dev, end)
                free[dev] = end
                order[dev].append((task, t, end))
                if task[0] is F:
                    n_fwd_done[dev] += 1
                else:
                    n_bwd_done[dev] += 1
                remaining -= 1
                progressed = True
                for nxt in succs(task):
                    if all(d in finish for d in deps(nxt)):
                        ndev = owner(nxt)[0]
                        rt = max(e + (cost.T_C if ddev != ndev else 0)
                                 for ddev, e in (finish[d] for d in deps(nxt)))
                        ready[ndev][nxt] = rt
        if not remaining:
            break
        future = [f for f in free if f > t]
        future += [rt for r in ready for rt in r.values() if rt > t]
        if not future:
            pending = {d: sorted(r) for d, r in enumerate(ready) if r}
            raise SchedulingError(f"greedy executor stalled at t={t}; pending={pending}")
        t = min(future)
    return order, owners


def compute_schedule(placement: StagePlacement, config: ScheduleConfig,
                     cost_model: Optional[CostModel] = None,
                     policy: Optional[SchedulePolicy] = None) -> ActionList:
    """Order compute actions per device (no communication, no optimizer step)."""
    cost = cost_model or CostModel()
    policy = policy or SchedulePolicy.for_scheme(config.scheme)
    order, owners = _list_schedule(placement, config, cost, policy)
    per_device = []
    for dev in range(config.P):
        acts = []
        for (kind, mb, s), _, _ in order[dev]:
            _, rank = owners[(config.group_of(mb), s)]
            acts.append(Action(kind, microbatch=mb, local_module_rank=rank, slice_index=s))
        per_device.append(tuple(acts))
    return ActionList(config, placement, tuple(per_device))


# --------------------------------------------------------------------------
# communication


def _message_key(act: Action, dev: int) -> tuple:
    """Identity of a point-to-point message: (payload, mb, source slice, sender, receiver)."""
    if act.kind is ActionKind.SEND:
        return (act.payload, act.microbatch, act.slice_index, dev, act.peer)
    return (act.payload, act.microbatch, act.slice_index, act.peer, dev)


def insert_comm(compute: ActionList) -> ActionList:
    """Add Send/Receive pairs at cross-device slice boundaries and fuse crossings.

    A Send goes right after the compute producing its payload, a Receive
    right before the compute consuming it; consecutive slices on one device
    exchange nothing. Mutually matching Send/Receive pairs that sit at
    adjacent positions on both devices become one BatchedExchange per
    device. Any crossing left that would still deadlock with rendezvous sends
    is broken by hoisting the blocking Receive earlier, which only moves a
    prefetch forward.
    """
    config, placement = compute.config, compute.placement
    owners = placement.owner_map()
    S = config.S
    streams = []
    for dev in range(config.P):
        out = []
        for act in compute.per_device[dev]:
            if not act.kind.is_compute:
                continue
            mb, s, g = act.microbatch, act.slice_index, config.group_of(act.microbatch)
            if act.kind is ActionKind.FORWARD:
                src, dst, payload = s - 1, s + 1, Payload.ACTIVATION
            else:
                src, dst, payload = s + 1, s - 1, Payload.GRADIENT
            if 0 <= src < S:
                src_dev = owners[(g, src)][0]
                if src_dev != dev:
                    out.append(Action(ActionKind.RECEIVE, mb, act.local_module_rank, src,
                                      peer=src_dev, payload=payload))
            out.append(act)
            if 0 <= dst < S:
                dst_dev = owners[(g, dst)][0]
                if dst_dev != dev:
                    out.append(Action(ActionKind.SEND, mb, act.local_module_rank, s,
                                      peer=dst_dev, payload=payload))
        out.append(Action(ActionKind.OPTIMIZER_STEP))
        streams.append(out)
    streams = _fuse(streams)
    streams = _hoist_blocking_receives(streams)
    streams = _fuse(streams)
    return ActionList(config, placement, tuple(tuple(s) for s in streams))


def _hoist_blocking_receives(streams: list) -> list:
    """Run under rendezvous semantics; when stuck, pull the awaited Receive forward."""
    streams = [list(s) for s in streams]
    P = len(streams)
    pc = [0] * P

    def head(d):
        return streams[d][pc[d]] if pc[d] < len(streams[d]) else None

    while True:
        progressed = True
        while progressed:
            progressed = False
            for dev in range(P):
                while (act := head(dev)) is not None:
                    if not act.kind.is_comm:
                        pc[dev] += 1
                        progressed = True
                        continue
                    other = head(act.peer)
                    if other is None:
                        break
                    if act.kind is ActionKind.BATCHED_EXCHANGE:
                        ok = other.kind is ActionKind.BATCHED_EXCHANGE and other.batch_group == act.batch_group
                    else:
                        ok = other.kind in (ActionKind.SEND, ActionKind.RECEIVE) and other.kind is not act.kind \
                            and _message_key(other, act.peer) == _message_key(act, dev)
                    if not ok:
                        break
                    pc[dev] += 1
                    pc[act.peer] += 1
                    progressed = True
        if all(head(d) is None for d in range(P)):
            return streams
        for dev in range(P):
            act = head(dev)
            if act is None or act.kind is not ActionKind.SEND:
                continue
            peer, key = act.peer, _message_key(act, dev)
            for pos in range(pc[peer] + 1, len(streams[peer])):
                cand = streams[peer][pos]
                if cand.kind is ActionKind.RECEIVE and _message_key(cand, peer) == key:
                    streams[peer].insert(pc[peer], streams[peer].pop(pos))
                    break
            else:
                continue
            break
        else:
            raise SchedulingError("communication order cannot be made deadlock-free")


def _fuse(streams: list) -> list:
    sends, recvs = {}, {}
    existing = [-1]
    for dev, stream in enumerate(streams):
        for pos, act in enumerate(stream):
            if act.kind is ActionKind.SEND:
                sends[_message_key(act, dev)] = (dev, pos)
            elif act.kind is ActionKind.RECEIVE:
                recvs[_message_key(act, dev)] = (dev, pos)
            elif act.kind is ActionKind.BATCHED_EXCHANGE:
                existing.append(act.batch_group)

    used: set = set()
    fused: dict = {}  # (dev, first pos) -> batch group
    counter = itertools.count(max(existing) + 1)
    for dev, stream in enumerate(streams):
        for pos in range(len(stream) - 1):
            a, b = stream[pos], stream[pos + 1]
            if (dev, pos) in used or (dev, pos + 1) in used:
                continue
            if a.kind is not ActionKind.SEND or b.kind is not ActionKind.RECEIVE or a.peer != b.peer:
                continue
            peer_rcv = recvs.get(_message_key(a, dev))
            peer_snd = sends.get(_message_key(b, dev))
            if peer_rcv is None or peer_snd is None:
                continue
            (pd1, pp1), (pd2, pp2) = peer_rcv, peer_snd
            # only send-first on both sides can deadlock; other orders stay unfused
            if pd1 != pd2 or pp1 != pp2 + 1:
                continue
            lo = pp2
            if (pd1, lo) in used or (pd1, lo + 1) in used:
                continue
            group = next(counter)
            for d, p in ((dev, pos), (pd1, lo)):
                used.update({(d, p), (d, p + 1)})
                fused[(d, p)] = group

    out = []
    for dev, stream in enumerate(streams):
        new, pos = [], 0
        while pos < len(stream):
            if (dev, pos) in fused:
                parts = (stream[pos], stream[pos + 1])
                new.append(Action(ActionKind.BATCHED_EXCHANGE, peer=parts[0].peer,
                                  batch_group=fused[(dev, pos)], parts=parts))
                pos += 2
            else:
                new.append(stream[pos])
                pos += 1
        out.append(new)
    return out


def generate_schedule(placement: StagePlacement, config: ScheduleConfig,
                      cost_model: Optional[CostModel] = None) -> ActionList:
    """Full action list: greedy compute order, communication, final optimizer step."""
    return insert_comm(compute_schedule(placement, config, cost_model))


def generate(scheme, P: int, B: int, W: int = 1, D: int = 1,
             cost_model: Optional[CostModel] = None) -> ActionList:
    """Convenience wrapper: config, placement and schedule in one call."""
    config = make_config(scheme, P, B, W, D)
    return generate_schedule(make_placement(config), config, cost_model)
