"""Gantt renderings of a simulated trace: SVG for eyes, CSV for tools."""

from __future__ import annotations

import csv
import io
from typing import Optional
from xml.sax.saxutils import escape

from .core import ActionKind, ScheduleConfig
from .simulator import SimTrace

FORMATS = ("svg", "csv")

# forward / backward per pipeline group, exchange fill and stroke
COLORS = {
    (ActionKind.FORWARD, 0): "#7cc67c",
    (ActionKind.BACKWARD, 0): "#f0a04b",
    (ActionKind.FORWARD, 1): "#6fa8dc",
    (ActionKind.BACKWARD, 1): "#f4d35e",
}
EXCHANGE_FILL = "#b48ede"
EXCHANGE_STROKE = "#e889c0"

ROW_H = 28
LABEL_W = 60
PAD = 10


def _color(kind: ActionKind, group: int) -> str:
    if kind is ActionKind.BATCHED_EXCHANGE:
        return EXCHANGE_FILL
    return COLORS[(kind, min(group, 1))]


def to_csv(trace: SimTrace) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["device", "kind", "microbatch", "slice", "start", "end"])
    for iv in trace.all_intervals():
        act = iv.action
        writer.writerow([iv.device, act.kind.value,
                         "" if act.microbatch is None else act.microbatch,
                         "" if act.slice_index is None else act.slice_index,
                         float(iv.start), float(iv.end)])
    return buf.getvalue()


def to_svg(trace: SimTrace, config: Optional[ScheduleConfig] = None, scale: float = 40.0) -> str:
    """One row per device and one rectangle per interval.

    With ``config`` given, the second pipeline group of a bidirectional
    scheme is drawn in its own colours.
    """
    span = float(trace.makespan) or 1.0
    width = int(LABEL_W + span * scale + 2 * PAD)
    height = int(trace.num_devices * ROW_H + 2 * PAD + 16)
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'font-family="monospace" font-size="11">',
           f'<rect width="{width}" height="{height}" fill="white"/>']
    for dev in range(trace.num_devices):
        y = PAD + dev * ROW_H
        out.append(f'<text x="{PAD}" y="{y + ROW_H / 2 + 4:.1f}">dev {dev}</text>')
    for iv in trace.all_intervals():
        act = iv.action
        group = config.group_of(act.microbatch) if config and act.microbatch is not None else 0
        x = LABEL_W + PAD + float(iv.start) * scale
        w = max(float(iv.end - iv.start) * scale, 1.0)
        y = PAD + iv.device * ROW_H + 2
        stroke = EXCHANGE_STROKE if act.kind is ActionKind.BATCHED_EXCHANGE else "#333"
        title = escape(f"{act.short()} [{float(iv.start):g}, {float(iv.end):g})")
        out.append(f'<rect x="{x:.2f}" y="{y}" width="{w:.2f}" height="{ROW_H - 4}" '
                   f'fill="{_color(act.kind, group)}" stroke="{stroke}" stroke-width="0.5">'
                   f'<title>{title}</title></rect>')
        if act.microbatch is not None:
            out.append(f'<text x="{x + w / 2:.2f}" y="{y + ROW_H / 2 + 2:.1f}" '
                       f'text-anchor="middle">{act.microbatch}</text>')
    axis_y = PAD + trace.num_devices * ROW_H + 12
    out.append(f'<text x="{LABEL_W + PAD}" y="{axis_y}">0</text>')
    out.append(f'<text x="{LABEL_W + PAD + span * scale:.2f}" y="{axis_y}" '
               f'text-anchor="end">{span:g}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def trace_to_gantt(trace: SimTrace, format: str = "svg", config: Optional[ScheduleConfig] = None) -> str:
    fmt = format.lower()
    if fmt == "svg":
        return to_svg(trace, config)
    if fmt == "csv":
        return to_csv(trace)
    raise ValueError(f"unknown gantt format {format!r}; expected one of {', '.join(FORMATS)}")
