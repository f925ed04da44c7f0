"""Metrics measured from traces, plus the closed-form bubble models.

Empirical metrics (bubble ratio, memory profile) come from a simulated
trace. The closed forms are the wave-pipeline bubble model, its simplified
``T_B = 2 T_F, T_C = 0`` form, and Chimera's ``K``. All of them stay exact
(``Fraction``) when fed integers or fractions.
"""

from __future__ import annotations

import csv
import io
import json
import statistics
from dataclasses import dataclass
from fractions import Fraction
from numbers import Rational, Real
from typing import Iterable, Optional, Sequence

from .core import ActionKind, ConfigError, ScheduleConfig, Scheme, StagePlacement
from .simulator import CostModel, SimTrace, simulate


def _exact(*values) -> bool:
    return all(isinstance(v, Rational) for v in values)


def _num(x):
    return Fraction(x) if isinstance(x, Rational) else x


# --------------------------------------------------------------------------
# measured


def bubble_ratio(trace: SimTrace):
    """``1 - sum(busy) / (P * makespan)``; only Forward/Backward count as busy."""
    if trace.makespan <= 0:
        raise ValueError("bubble ratio undefined for a zero-length trace")
    busy = sum((trace.busy_time(d) for d in range(trace.num_devices)), 0)
    denom = trace.num_devices * trace.makespan
    if _exact(busy, denom):
        return 1 - Fraction(busy) / Fraction(denom)
    return 1 - busy / denom


@dataclass(frozen=True)
class MemoryProfile:
    """Per-device weight and peak activation, in unit blocks.

    A weight unit is the whole model divided by ``P``; an activation unit is
    one full-stage activation, pro-rated by slice fraction.
    """

    weight_units: tuple
    peak_activation_units: tuple

    @property
    def activation_variance(self) -> Fraction:
        """Population variance of the per-device peaks."""
        return statistics.pvariance(self.peak_activation_units)

    def to_dict(self) -> dict:
        return {"weight_units": [str(w) for w in self.weight_units],
                "peak_activation_units": [str(a) for a in self.peak_activation_units],
                "activation_variance": str(self.activation_variance)}


def memory_profile(trace: SimTrace, placement: StagePlacement) -> MemoryProfile:
    weights = tuple(placement.weight(d) for d in range(placement.num_devices))
    peaks = []
    for dev in range(placement.num_devices):
        events = []
        for iv in trace.intervals[dev]:
            act = iv.action
            if not act.kind.is_compute:
                continue
            frac = placement.slice_at(dev, act.local_module_rank).fraction
            if act.kind is ActionKind.FORWARD:
                events.append((iv.start, 1, frac))
            else:
                events.append((iv.end, 0, -frac))  # frees sort before allocations at equal time
        live = peak = Fraction(0)
        for _, _, delta in sorted(events, key=lambda e: (e[0], e[1])):
            live += delta
            peak = max(peak, live)
        peaks.append(peak)
    return MemoryProfile(weights, tuple(peaks))


@dataclass(frozen=True)
class MetricsReport:
    bubble_ratio: Real
    makespan: Real
    busy: tuple
    memory: MemoryProfile

    @property
    def activation_variance(self):
        return self.memory.activation_variance

    def to_dict(self) -> dict:
        return {"bubble_ratio": float(self.bubble_ratio), "makespan": float(self.makespan),
                "busy": [float(b) for b in self.busy],
                "activation_variance": float(self.activation_variance),
                "memory": self.memory.to_dict()}

    def render(self) -> str:
        lines = [f"makespan      {float(self.makespan):.6g}",
                 f"bubble_ratio  {float(self.bubble_ratio):.4f}",
                 f"act_variance  {float(self.activation_variance):.4f}",
                 "device  busy        M_w     peak M_a"]
        for d, busy in enumerate(self.busy):
            lines.append(f"{d:>6}  {float(busy):<10.6g}  {str(self.memory.weight_units[d]):<6}  "
                         f"{self.memory.peak_activation_units[d]}")
        return "\n".join(lines)


def metrics(trace: SimTrace, placement: StagePlacement) -> MetricsReport:
    return MetricsReport(bubble_ratio(trace), trace.makespan,
                         tuple(trace.busy_time(d) for d in range(trace.num_devices)),
                         memory_profile(trace, placement))


# --------------------------------------------------------------------------
# closed forms


@dataclass(frozen=True)
class ZoneBubbleInput:
    P: int
    W: int
    LR: int  # local rank of the device under analysis
    T_F: Real = 1
    T_B: Real = 2
    T_C: Real = 0

    def __post_init__(self):
        if not 0 <= self.LR < self.P:
            raise ValueError(f"local rank LR={self.LR} out of range for P={self.P}")
        if self.W < 1:
            raise ValueError("W must be >= 1")


def zone_bubbles(inp: ZoneBubbleInput) -> dict:
    """Sizes of the four bubble zones of a wave pipeline.

    ``C_first``/``C_second`` are the two zone-C sizes; which devices incur
    which one is not pinned down, so both are returned.
    """
    T_F, T_B, T_C = (_num(v) for v in (inp.T_F, inp.T_B, inp.T_C))
    two_w = 2 * inp.W
    if _exact(T_F, T_B, T_C):
        two_w = Fraction(two_w)
    return {
        "A": T_F / two_w + T_C,
        "B": (inp.P - inp.LR) / two_w * (T_B - T_F) + 2 * T_C,
        "C_first": T_B + 2 * T_C,
        "C_second": T_B + T_C,
    }


def analytic_bubble_hanayo(P: int, W: int, T_F=1, T_B=2, T_C=0):
    """Wave-pipeline bubble ratio from the summed zone model."""
    if P < 2:
        raise ValueError("the wave bubble model needs P >= 2")
    if W < 1:
        raise ValueError("W must be >= 1")
    T_F, T_B, T_C = (_num(v) for v in (T_F, T_B, T_C))
    one = Fraction(1) if _exact(T_F, T_B, T_C) else 1.0
    P_, W_ = one * P, one * W
    num = (1 / W_) * T_B + (1 + 2 * W_ + 2 / P_ + (P_ - 2) / 3) * T_C
    den = (P_ / (P_ - 1)) * T_F + (1 / (2 * W_) + P_ / (P_ - 1)) * T_B + ((P_ - 2) / 2 + 4 * W_) * T_C
    return num / den


def analytic_bubble_simplified(P: int, W: int) -> Fraction:
    """``(2P - 2) / (3PW + P - 1)``: the model with ``T_B = 2 T_F`` and no communication."""
    if P < 2:
        raise ValueError("P must be >= 2")
    return Fraction(2 * P - 2, 3 * P * W + P - 1)


def analytic_chimera_K(P: int):
    """``K = P^2 / 2 - P`` as used in Chimera's bubble ratio."""
    if P < 2:
        raise ValueError("P must be >= 2")
    return Fraction(P * P, 2) - P


def classic_bubble(P: int, B: int) -> Fraction:
    """``(P - 1) / (B + P - 1)``, the GPipe/1F1B ratio with one slice per device."""
    return Fraction(P - 1, B + P - 1)


# --------------------------------------------------------------------------
# comparison


@dataclass
class CompareRow:
    config: ScheduleConfig
    makespan: Optional[Real] = None
    simulated: Optional[Real] = None
    analytic: Optional[Real] = None
    memory: Optional[MemoryProfile] = None
    error: Optional[str] = None

    @property
    def throughput(self) -> float:
        return 1 / float(self.makespan) if self.makespan else 0.0

    def to_dict(self) -> dict:
        c = self.config
        mem = self.memory
        return {
            "scheme": c.scheme.value, "P": c.P, "B": c.B, "W": c.W, "D": c.D, "S": c.S,
            "makespan": None if self.makespan is None else float(self.makespan),
            "simulated_ratio": None if self.simulated is None else float(self.simulated),
            "analytic_ratio": None if self.analytic is None else float(self.analytic),
            "max_M_w": None if mem is None else float(max(mem.weight_units)),
            "peak_M_a": None if mem is None else float(max(mem.peak_activation_units)),
            "act_variance": None if mem is None else float(mem.activation_variance),
            "error": self.error,
        }


def analytic_for(config: ScheduleConfig, cost: CostModel):
    """Closed-form ratio where one exists: wave schemes only."""
    if config.scheme is Scheme.HANAYO and config.P >= 2:
        return analytic_bubble_hanayo(config.P, config.W, cost.T_F, cost.T_B, cost.T_C)
    if config.scheme is Scheme.CHIMERA_WAVE and config.P // 2 >= 2:
        return analytic_bubble_hanayo(config.P // 2, config.W, cost.T_F, cost.T_B, cost.T_C)
    return None


def evaluate(config: ScheduleConfig, cost: Optional[CostModel] = None) -> CompareRow:
    from .schedulers import generate_schedule, make_placement

    cost = cost or CostModel()
    placement = make_placement(config)
    trace = simulate(generate_schedule(placement, config, cost), cost)
    return CompareRow(config, trace.makespan, bubble_ratio(trace), analytic_for(config, cost),
                      memory_profile(trace, placement))


def compare(configs: Iterable, cost_model: Optional[CostModel] = None) -> list:
    """Simulate each config; rows sorted by throughput (1/makespan), failures last.

    ``configs`` may hold :class:`ScheduleConfig` objects or argument tuples
    for :func:`make_config`; a config that fails produces a row carrying the
    error instead of aborting the table.
    """
    from .core import make_config

    cost = cost_model or CostModel()
    rows = []
    for item in configs:
        try:
            config = item if isinstance(item, ScheduleConfig) else make_config(*item)
        except ConfigError as exc:
            rows.append(CompareRow(_placeholder(item), error=str(exc)))
            continue
        try:
            rows.append(evaluate(config, cost))
        except Exception as exc:  # noqa: BLE001 - reported per row
            rows.append(CompareRow(config, error=f"{type(exc).__name__}: {exc}"))
    ok = sorted((r for r in rows if r.error is None), key=lambda r: r.makespan)
    return ok + [r for r in rows if r.error is not None]


def _placeholder(item) -> ScheduleConfig:
    # unvalidated config, only so a failed row can still name what was asked for
    args = list(item) + [1] * (5 - len(item))
    scheme = Scheme.parse(args[0])
    return ScheduleConfig(scheme, *args[1:5])


COLUMNS = ["scheme", "P", "B", "W", "D", "S", "makespan", "simulated_ratio", "analytic_ratio",
           "max_M_w", "peak_M_a", "act_variance", "error"]


def rows_to_csv(rows: Sequence) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=COLUMNS, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: ("" if v is None else v) for k, v in row.to_dict().items()})
    return buf.getvalue()


def rows_to_json(rows: Sequence) -> str:
    return json.dumps([r.to_dict() for r in rows], indent=1, sort_keys=True) + "\n"


def bubble_curves(P_values: Sequence, W_values: Sequence = (1, 2, 4),
                  cost_model: Optional[CostModel] = None, simulated: bool = True) -> list:
    """Theoretical (and optionally simulated) bubble ratio per (scheme, P, W), with ``B = P``.

    Rows are plain dicts ready for CSV export and external plotting.
    """
    cost = cost_model or CostModel()
    out = []
    for P in P_values:
        entries = [(Scheme.GPIPE, 1), (Scheme.DAPPLE, 1)]
        if P % 2 == 0:
            entries += [(Scheme.CHIMERA, 1), (Scheme.CHIMERA_WAVE, 1)]
        entries += [(Scheme.HANAYO, w) for w in W_values]
        for scheme, W in entries:
            config = ScheduleConfig(scheme, P, P, W, 1)
            if scheme in (Scheme.GPIPE, Scheme.DAPPLE):
                theory = classic_bubble(P, P) if cost.T_C == 0 else None
            else:
                theory = analytic_for(config, cost)
            row = {"scheme": scheme.value, "P": P, "W": W,
                   "analytic": None if theory is None else float(theory), "simulated": None}
            if simulated:
                row["simulated"] = float(evaluate(config, cost).simulated)
            out.append(row)
    return out


def curves_to_csv(rows: Sequence) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=["scheme", "P", "W", "analytic", "simulated"],
                            lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: ("" if v is None else v) for k, v in row.items()})
    return buf.getvalue()
