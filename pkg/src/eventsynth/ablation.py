"""Downsampling ablation: how much do events degrade when frames are dropped?

For every factor the sequence is downsampled, optionally re-upsampled, converted
to events with fixed thresholds and compared against events from the full-rate
sequence.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

from .core import FlowField, FrameSequence, GeneratorConfig, sample_thresholds
from .event_gen import generate_events
from .metrics import event_count_distance
from .upsample import (
    CROSSFADE,
    FLOW_WARP,
    downsample_flows,
    downsample_sequence,
    plan_upsampling,
    upsample_sequence,
)

NONE = "none"
VARIANTS = (NONE, CROSSFADE, FLOW_WARP)
DEFAULT_FACTORS = (1, 4, 16, 80)


@dataclass
class AblationResult:
    factors: list[int]
    reference_events: int
    thresholds: tuple[float, float]
    distance: dict[str, list[float]] = field(default_factory=dict)
    event_counts: dict[str, list[int]] = field(default_factory=dict)
    max_displacement: list[float] = field(default_factory=list)
    intermediate_frames: list[int] = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "factors": self.factors,
            "reference_events": self.reference_events,
            "c_pos": self.thresholds[0],
            "c_neg": self.thresholds[1],
            "distance": self.distance,
            "event_counts": self.event_counts,
            "max_displacement_px": self.max_displacement,
            "intermediate_frames": self.intermediate_frames,
        }


def run_ablation(seq: FrameSequence, flows: Sequence[FlowField], factors=DEFAULT_FACTORS,
                 config: GeneratorConfig = GeneratorConfig(), threads: int = 1) -> AblationResult:
    thresholds = sample_thresholds(config)
    reference = generate_events(seq, config, threads, thresholds)
    result = AblationResult(list(factors), len(reference), thresholds)
    for name in VARIANTS:
        result.distance[name] = []
        result.event_counts[name] = []

    for factor in factors:
        low = downsample_sequence(seq, factor)
        low_flows = downsample_flows(flows, len(seq), factor)
        plan = plan_upsampling(low, low_flows)
        result.max_displacement.append(max(f.max_magnitude() for f in low_flows))
        result.intermediate_frames.append(sum(plan.counts))
        for name in VARIANTS:
            video = low if name == NONE else upsample_sequence(low, low_flows, name, plan)
            events = generate_events(video, config, threads, thresholds)
            result.event_counts[name].append(len(events))
            result.distance[name].append(
                event_count_distance(reference, events, seq.width, seq.height))
    return result
