"""Compile, check, simulate and analyze synchronous pipeline-parallel schedules."""

from .analytics import (
    MemoryProfile,
    MetricsReport,
    ZoneBubbleInput,
    analytic_bubble_hanayo,
    analytic_bubble_simplified,
    analytic_chimera_K,
    bubble_ratio,
    compare,
    memory_profile,
    metrics,
    zone_bubbles,
)
from .core import (
    Action,
    ActionKind,
    ActionList,
    ConfigError,
    Direction,
    ParseError,
    Payload,
    ScheduleConfig,
    Scheme,
    StagePlacement,
    StageSlice,
    make_config,
    parse_action_list,
    serialize_action_list,
)
from .schedulers import (
    SchedulePolicy,
    generate,
    generate_schedule,
    insert_comm,
    make_placement,
    placement_chimera,
    placement_dapple,
    placement_gpipe,
    placement_hanayo,
    transform_chimera_to_wave,
)
from .simulator import CostModel, SimTrace, simulate, trace_to_gantt
from .validator import Report, validate

__version__ = "0.1.0"

__all__ = [
    "MemoryProfile",
    "MetricsReport",
    "ZoneBubbleInput",
    "analytic_bubble_hanayo",
    "analytic_bubble_simplified",
    "analytic_chimera_K",
    "bubble_ratio",
    "compare",
    "memory_profile",
    "metrics",
    "zone_bubbles",
    "Action",
    "ActionKind",
    "ActionList",
    "ConfigError",
    "Direction",
    "ParseError",
    "Payload",
    "ScheduleConfig",
    "Scheme",
    "StagePlacement",
    "StageSlice",
    "make_config",
    "parse_action_list",
    "serialize_action_list",
    "SchedulePolicy",
    "generate",
    "generate_schedule",
    "insert_comm",
    "make_placement",
    "placement_chimera",
    "placement_dapple",
    "placement_gpipe",
    "placement_hanayo",
    "transform_chimera_to_wave",
    "CostModel",
    "SimTrace",
    "simulate",
    "trace_to_gantt",
    "Report",
    "validate",
]
