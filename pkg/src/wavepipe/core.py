"""Configuration model, action-list IR and its JSON serialization.

Every other module consumes the types defined here. All of them are frozen
dataclasses, so a generated schedule can be shared freely.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Iterable, Mapping, Optional


class ConfigError(ValueError):
    """Raised for an illegal (scheme, P, B, W, D) combination."""


class ParseError(ValueError):
    """Raised when an action-list document is malformed.

    ``position`` is a JSON-pointer-like path to the offending element.
    """

    def __init__(self, message: str, position: str = ""):
        self.position = position
        super().__init__(f"{position}: {message}" if position else message)


class Scheme(str, enum.Enum):
    GPIPE = "gpipe"
    DAPPLE = "dapple"
    CHIMERA = "chimera"
    CHIMERA_WAVE = "chimera-wave"
    HANAYO = "hanayo"

    @property
    def is_wave(self) -> bool:
        return self in (Scheme.HANAYO, Scheme.CHIMERA_WAVE)

    @property
    def is_bidirectional(self) -> bool:
        """Two micro-batch groups, each with its own copy of the stage chain."""
        return self in (Scheme.CHIMERA, Scheme.CHIMERA_WAVE)

    @classmethod
    def parse(cls, value: "str | Scheme") -> "Scheme":
        if isinstance(value, Scheme):
            return value
        key = str(value).strip().lower().replace("_", "-")
        aliases = {"1f1b": "dapple", "chimerawave": "chimera-wave", "wave": "hanayo"}
        key = aliases.get(key, key)
        try:
            return cls(key)
        except ValueError:
            raise ConfigError(f"unknown scheme {value!r}") from None


class Direction(str, enum.Enum):
    DOWN = "down"
    UP = "up"


class ActionKind(str, enum.Enum):
    FORWARD = "forward"
    BACKWARD = "backward"
    SEND = "send"
    RECEIVE = "receive"
    BATCHED_EXCHANGE = "batched_exchange"
    OPTIMIZER_STEP = "optimizer_step"

    @property
    def is_compute(self) -> bool:
        return self in (ActionKind.FORWARD, ActionKind.BACKWARD)

    @property
    def is_comm(self) -> bool:
        return self in (ActionKind.SEND, ActionKind.RECEIVE, ActionKind.BATCHED_EXCHANGE)


class Payload(str, enum.Enum):
    ACTIVATION = "activation"
    GRADIENT = "gradient"


@dataclass(frozen=True)
class ScheduleConfig:
    scheme: Scheme
    P: int
    B: int
    W: int = 1
    D: int = 1

    @property
    def S(self) -> int:
        """Number of stages in one pipeline chain."""
        if self.scheme is Scheme.HANAYO:
            return 2 * self.W * self.P
        if self.scheme is Scheme.CHIMERA_WAVE:
            # two independent V-shaped groups of P/2 devices each
            return 2 * self.W * (self.P // 2)
        return self.P

    @property
    def num_groups(self) -> int:
        return 2 if self.scheme.is_bidirectional else 1

    def group_of(self, microbatch: int) -> int:
        """Pipeline (Chimera direction / Chimera-wave group) a micro-batch runs on.

        The first half of the micro-batches go down, the rest go up.
        """
        if not self.scheme.is_bidirectional:
            return 0
        return 0 if microbatch < (self.B + 1) // 2 else 1

    def local_index(self, microbatch: int) -> int:
        """Index of a micro-batch within its own group."""
        if self.group_of(microbatch) == 0:
            return microbatch
        return microbatch - (self.B + 1) // 2

    def to_dict(self) -> dict:
        return {"scheme": self.scheme.value, "P": self.P, "B": self.B,
                "W": self.W, "D": self.D, "S": self.S}


def make_config(scheme, P: int, B: int, W: int = 1, D: int = 1) -> ScheduleConfig:
    """Build a validated :class:`ScheduleConfig`."""
    scheme = Scheme.parse(scheme)
    for name, value in (("P", P), ("B", B), ("W", W), ("D", D)):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{name} must be an integer, got {value!r}")
        if value < 1:
            raise ConfigError(f"{name} must be >= 1, got {value}")
    if B < P:
        raise ConfigError(f"B must be >= P (got B={B}, P={P})")
    if W > 1 and not scheme.is_wave:
        raise ConfigError(f"W > 1 is only meaningful for wave schemes, not {scheme.value}")
    if scheme.is_bidirectional:
        if P % 2:
            raise ConfigError(f"P must be even for {scheme.value} (got {P})")
        if B % 2:
            raise ConfigError(f"B must be even for {scheme.value} (got {B})")
    return ScheduleConfig(scheme, P, B, W, D)


@dataclass(frozen=True)
class StageSlice:
    index: int
    fraction: Fraction
    direction: Direction
    # micro-batch group served by this copy (Chimera direction, Chimera-wave group)
    group: int = 0

    def to_dict(self) -> dict:
        return {"index": self.index, "fraction": str(self.fraction),
                "direction": self.direction.value, "group": self.group}


@dataclass(frozen=True)
class StagePlacement:
    assignment: tuple  # tuple[tuple[StageSlice, ...], ...], one entry per device

    @property
    def num_devices(self) -> int:
        return len(self.assignment)

    def slices(self, device: int) -> tuple:
        return self.assignment[device]

    def weight(self, device: int) -> Fraction:
        return sum((s.fraction for s in self.assignment[device]), Fraction(0))

    def owner_map(self) -> dict:
        """(group, slice index) -> (device, local module rank)."""
        out = {}
        for dev, slices in enumerate(self.assignment):
            for rank, sl in enumerate(slices):
                out[(sl.group, sl.index)] = (dev, rank)
        return out

    def slice_at(self, device: int, local_rank: int) -> StageSlice:
        return self.assignment[device][local_rank]

    def as_index_lists(self) -> dict:
        return {d: [s.index for s in sl] for d, sl in enumerate(self.assignment)}


@dataclass(frozen=True)
class Action:
    kind: ActionKind
    microbatch: Optional[int] = None
    local_module_rank: Optional[int] = None
    slice_index: Optional[int] = None
    peer: Optional[int] = None
    payload: Optional[Payload] = None
    batch_group: Optional[int] = None
    # the fused Send/Receive actions of a BatchedExchange
    parts: tuple = ()

    def __post_init__(self):
        if self.kind.is_compute and self.peer is not None:
            raise ValueError("compute actions never carry a peer")
        if self.kind.is_comm and self.peer is None:
            raise ValueError(f"{self.kind.value} requires a peer")

    def short(self) -> str:
        """Compact label such as ``F3.s5`` used in golden traces and logs."""
        k = self.kind
        if k is ActionKind.FORWARD:
            return f"F{self.microbatch}.s{self.slice_index}"
        if k is ActionKind.BACKWARD:
            return f"B{self.microbatch}.s{self.slice_index}"
        if k is ActionKind.OPTIMIZER_STEP:
            return "OPT"
        if k is ActionKind.BATCHED_EXCHANGE:
            inner = ",".join(p.short() for p in self.parts)
            return f"X[{inner}]@{self.peer}"
        tag = "a" if self.payload is Payload.ACTIVATION else "g"
        arrow = "->" if k is ActionKind.SEND else "<-"
        return f"{'S' if k is ActionKind.SEND else 'R'}{tag}{self.microbatch}.s{self.slice_index}{arrow}{self.peer}"

    def to_dict(self) -> dict:
        d: dict[str, Any] = {"kind": self.kind.value}
        for name in ("microbatch", "local_module_rank", "slice_index", "peer", "batch_group"):
            value = getattr(self, name)
            if value is not None:
                d[name] = value
        if self.payload is not None:
            d["payload"] = self.payload.value
        if self.parts:
            d["parts"] = [p.to_dict() for p in self.parts]
        return d


@dataclass(frozen=True)
class ActionList:
    config: ScheduleConfig
    placement: StagePlacement
    per_device: tuple  # tuple[tuple[Action, ...], ...]

    def compute_order(self, device: int) -> list:
        return [a for a in self.per_device[device] if a.kind.is_compute]

    def compute_labels(self) -> dict:
        return {d: [a.short() for a in self.compute_order(d)] for d in range(self.config.P)}

    def iter_actions(self) -> Iterable:
        for dev, actions in enumerate(self.per_device):
            for pos, act in enumerate(actions):
                yield dev, pos, act

    def replace_device(self, device: int, actions: Iterable) -> "ActionList":
        seq = list(self.per_device)
        seq[device] = tuple(actions)
        return ActionList(self.config, self.placement, tuple(seq))


# --------------------------------------------------------------------------
# serialization

_CONFIG_KEYS = {"scheme", "P", "B", "W", "D", "S"}
_SLICE_KEYS = {"index", "fraction", "direction", "group"}
_ACTION_KEYS = {"kind", "microbatch", "local_module_rank", "slice_index", "peer",
                "payload", "batch_group", "parts"}

_REQUIRED = {
    ActionKind.FORWARD: ("microbatch", "local_module_rank", "slice_index"),
    ActionKind.BACKWARD: ("microbatch", "local_module_rank", "slice_index"),
    ActionKind.SEND: ("microbatch", "local_module_rank", "slice_index", "peer", "payload"),
    ActionKind.RECEIVE: ("microbatch", "local_module_rank", "slice_index", "peer", "payload"),
    ActionKind.BATCHED_EXCHANGE: ("peer", "batch_group", "parts"),
    ActionKind.OPTIMIZER_STEP: (),
}


def action_list_to_dict(alist: ActionList) -> dict:
    return {
        "config": alist.config.to_dict(),
        "placement": [[s.to_dict() for s in dev] for dev in alist.placement.assignment],
        "actions": [[a.to_dict() for a in dev] for dev in alist.per_device],
    }


def serialize_action_list(alist: ActionList) -> bytes:
    """Serialize to canonical JSON bytes (sorted keys, so output is byte-stable)."""
    return (json.dumps(action_list_to_dict(alist), sort_keys=True, indent=1) + "\n").encode()


def _expect_int(value, where: str, lo: int, hi: int, what: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ParseError(f"{what} must be an integer", where)
    if not lo <= value < hi:
        raise ParseError(f"{what} out of range", where)
    return value


def _check_keys(obj, allowed: set, where: str) -> None:
    if not isinstance(obj, Mapping):
        raise ParseError("expected an object", where)
    unknown = set(obj) - allowed
    if unknown:
        raise ParseError(f"unknown field(s) {sorted(unknown)}", where)


def _parse_action(obj, where: str, cfg: ScheduleConfig, n_slices: int, nested=False) -> Action:
    _check_keys(obj, _ACTION_KEYS, where)
    if "kind" not in obj:
        raise ParseError("missing field 'kind'", where)
    try:
        kind = ActionKind(obj["kind"])
    except ValueError:
        raise ParseError(f"unknown action kind {obj['kind']!r}", where) from None
    if nested and kind not in (ActionKind.SEND, ActionKind.RECEIVE):
        raise ParseError("batched exchange parts must be send/receive", where)
    for name in _REQUIRED[kind]:
        if name not in obj:
            raise ParseError(f"missing field {name!r} for {kind.value}", where)
    kw: dict[str, Any] = {"kind": kind}
    if "microbatch" in obj:
        kw["microbatch"] = _expect_int(obj["microbatch"], f"{where}/microbatch", 0, cfg.B, "microbatch")
    if "local_module_rank" in obj:
        kw["local_module_rank"] = _expect_int(obj["local_module_rank"], f"{where}/local_module_rank",
                                              0, n_slices, "local module rank")
    if "slice_index" in obj:
        kw["slice_index"] = _expect_int(obj["slice_index"], f"{where}/slice_index", 0, cfg.S, "slice index")
    if "peer" in obj:
        kw["peer"] = _expect_int(obj["peer"], f"{where}/peer", 0, cfg.P, "peer rank")
    if "payload" in obj:
        try:
            kw["payload"] = Payload(obj["payload"])
        except ValueError:
            raise ParseError(f"unknown payload {obj['payload']!r}", f"{where}/payload") from None
    if "batch_group" in obj:
        kw["batch_group"] = _expect_int(obj["batch_group"], f"{where}/batch_group", 0, 2**31, "batch group")
    if "parts" in obj:
        if kind is not ActionKind.BATCHED_EXCHANGE or not isinstance(obj["parts"], list):
            raise ParseError("'parts' only allowed as a list on batched_exchange", f"{where}/parts")
        kw["parts"] = tuple(_parse_action(p, f"{where}/parts/{i}", cfg, n_slices, nested=True)
                            for i, p in enumerate(obj["parts"]))
    try:
        return Action(**kw)
    except ValueError as exc:
        raise ParseError(str(exc), where) from None


def action_list_from_dict(doc) -> ActionList:
    _check_keys(doc, {"config", "placement", "actions"}, "")
    for key in ("config", "placement", "actions"):
        if key not in doc:
            raise ParseError(f"missing top-level field {key!r}", "")
    raw = doc["config"]
    _check_keys(raw, _CONFIG_KEYS, "/config")
    for key in ("scheme", "P", "B"):
        if key not in raw:
            raise ParseError(f"missing field {key!r}", "/config")
    try:
        cfg = make_config(raw["scheme"], raw["P"], raw["B"], raw.get("W", 1), raw.get("D", 1))
    except ConfigError as exc:
        raise ParseError(str(exc), "/config") from None
    if "S" in raw and raw["S"] != cfg.S:
        raise ParseError(f"S={raw['S']} inconsistent with derived S={cfg.S}", "/config/S")

    placement = doc["placement"]
    if not isinstance(placement, list) or len(placement) != cfg.P:
        raise ParseError(f"placement must list exactly P={cfg.P} devices", "/placement")
    devices = []
    for d, dev in enumerate(placement):
        if not isinstance(dev, list):
            raise ParseError("expected a list of slices", f"/placement/{d}")
        slices = []
        for r, s in enumerate(dev):
            where = f"/placement/{d}/{r}"
            _check_keys(s, _SLICE_KEYS, where)
            for key in ("index", "fraction", "direction"):
                if key not in s:
                    raise ParseError(f"missing field {key!r}", where)
            try:
                frac = Fraction(s["fraction"])
                direction = Direction(s["direction"])
            except (ValueError, TypeError, ZeroDivisionError):
                raise ParseError("bad fraction or direction", where) from None
            slices.append(StageSlice(
                _expect_int(s["index"], f"{where}/index", 0, cfg.S, "slice index"),
                frac, direction,
                _expect_int(s.get("group", 0), f"{where}/group", 0, cfg.num_groups, "group")))
        devices.append(tuple(slices))

    actions = doc["actions"]
    if not isinstance(actions, list) or len(actions) != cfg.P:
        raise ParseError(f"actions must list exactly P={cfg.P} devices", "/actions")
    per_device = []
    for d, dev in enumerate(actions):
        if not isinstance(dev, list):
            raise ParseError("expected a list of actions", f"/actions/{d}")
        per_device.append(tuple(_parse_action(a, f"/actions/{d}/{i}", cfg, len(devices[d]))
                                for i, a in enumerate(dev)))
    return ActionList(cfg, StagePlacement(tuple(devices)), tuple(per_device))


def parse_action_list(data: "bytes | str", validate: bool = True) -> ActionList:
    """Parse an action-list document.

    With ``validate`` (the default) the structural checks of
    :mod:`wavepipe.validator` that do not need a cost model are run and a
    :class:`ParseError` is raised on the first error, e.g. a device whose
    stream lacks its final optimizer step.
    """
    try:
        doc = json.loads(data)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc.msg}", f"line {exc.lineno} col {exc.colno}") from None
    alist = action_list_from_dict(doc)
    if validate:
        from .validator import check_flush

        report = check_flush(alist)
        if not report.ok:
            err = report.errors[0]
            raise ParseError(err.message, f"/actions/{err.device}/{err.position}")
    return alist
