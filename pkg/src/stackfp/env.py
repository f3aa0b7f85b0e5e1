"""Sequential placement environment.

Blocks go down one per step in a fixed order.  Each step's observation
carries the mask stack for the block about to be placed; the action gives
that block's anchor cell, which must be available, plus optionally the aspect
ratio for the block after it (the next observation already needs that shape,
so the ratio is decided one step early; the first block's ratio is a reset
argument for the same reason).

Rewards are dense: the terminal reward is the weighted final metric score,
and every earlier step receives its metric improvement plus that terminal
score as a shared baseline, with the step-zero reference being all-zero
metrics.  Summing the per-step rewards therefore telescopes to the weighted
next-to-last metrics plus episode-length times the baseline.
"""

import dataclasses
import json

import numpy as np

from .core import Circuit, FloorplanError, FloorplanState, occupancy_grid
from .masks import MaskStack, compile_masks, position_mask, wire_mask
from .metrics import (
    MetricTuple,
    SatisfactionThresholds,
    metric_snapshot,
    normalize,
    satisfaction_counts,
    total_hpwl,
)


class InvalidActionError(FloorplanError):
    """Action outside the availability mask, or step on a finished episode."""


@dataclasses.dataclass(frozen=True)
class Action:
    x: int
    y: int
    ar_next: float | None = None


@dataclasses.dataclass(frozen=True)
class Observation:
    step: int
    block: int
    order: tuple[int, ...]
    canvas: np.ndarray          # (num_layers, W, H) occupancy
    masks: MaskStack

    @property
    def availability(self):
        return self.masks.availability


@dataclasses.dataclass(frozen=True)
class StepRecord:
    step: int
    block: int
    x: int
    y: int
    ar_next: float | None
    raw: MetricTuple
    norm: MetricTuple
    rung: str
    dropped: tuple[str, ...]


@dataclasses.dataclass
class EpisodeTrace:
    order: tuple[int, ...]
    hpwl_baseline: float
    steps: list[StepRecord] = dataclasses.field(default_factory=list)
    rewards: list[float] | None = None

    def norm_metrics(self) -> list[MetricTuple]:
        return [s.norm for s in self.steps]

    def rung_events(self) -> int:
        return sum(1 for s in self.steps if s.rung != "none")

    def finalize_rewards(self, profile) -> list[float]:
        self.rewards = compute_rewards(self.norm_metrics(), profile)
        return self.rewards

    def to_jsonl(self) -> str:
        """One JSON object per step; rewards appear once computed."""
        lines = []
        for i, s in enumerate(self.steps):
            rec = {
                "step": s.step,
                "block": s.block,
                "action": {"x": s.x, "y": s.y, "ar_next": s.ar_next},
                "raw": s.raw.as_dict(),
                "norm": s.norm.as_dict(),
                "rung": s.rung,
                "dropped": list(s.dropped),
            }
            if self.rewards is not None:
                rec["reward"] = self.rewards[i]
            lines.append(json.dumps(rec, sort_keys=True))
        return "\n".join(lines) + ("\n" if lines else "")


def weighted_score(m: MetricTuple, profile) -> float:
    """Scalar value of a metric tuple under a profile's weights: gains minus
    penalties.  Rewards maximize it; the annealing cost is its negation."""
    return (profile.w_alignment * m.alignment
            - profile.w_overlap * m.overlap
            - profile.w_hpwl * m.hpwl
            + profile.w_adjacency * m.adjacency
            - profile.w_distance * m.distance)


def compute_rewards(metrics: list[MetricTuple], profile) -> list[float]:
    """Per-step rewards from the normalized metric sequence.

    The last step earns the weighted terminal metrics; that same value is the
    baseline added to every earlier step's weighted metric difference, where
    the step before the first is taken as all zeros."""
    if not metrics:
        raise ValueError("empty metric sequence")
    if any(not m.normalized for m in metrics):
        raise ValueError("rewards are defined over normalized metrics")
    baseline = weighted_score(metrics[-1], profile)
    rewards = []
    prev = 0.0
    for m in metrics[:-1]:
        cur = weighted_score(m, profile)
        rewards.append(cur - prev + baseline)
        prev = cur
    rewards.append(baseline)
    return rewards


def wire_greedy_baseline(circuit: Circuit, order: list[int] | None = None) -> float:
    """Wirelength of one plain wire-greedy rollout: blocks keep their given
    shapes and land on the cheapest legal cell, optional rules ignored.  Used
    to normalize wirelength; falls back to 1 when the circuit has no nets or
    nothing could be placed."""
    state = FloorplanState(circuit, order)
    for block_id in state.order:
        pos = position_mask(state, block_id).values
        if not pos.any():
            continue
        wire = wire_mask(state, block_id).values
        scored = np.where(pos > 0, wire, np.inf)
        flat = int(np.argmin(scored))
        x, y = divmod(flat, circuit.dims.height)
        state.place(block_id, x, y)
    total = total_hpwl(state)
    return total if total > 0 else 1.0


class PlacementEnv:
    """Single-episode driver around a FloorplanState.

    Deterministic: identical circuit, profile, order, reset arguments and
    action sequence reproduce identical states, observations and traces.
    """

    def __init__(self, circuit: Circuit, profile, order: list[int] | None = None,
                 plugins: tuple = (), hpwl_baseline: float | None = None):
        self.circuit = circuit
        self.profile = profile
        self.plugins = tuple(plugins)
        self._order = list(order) if order is not None else None
        self._baseline = hpwl_baseline
        self.state: FloorplanState | None = None
        self.trace: EpisodeTrace | None = None
        self.observation: Observation | None = None

    def reset(self, first_ar: float | None = None) -> Observation | None:
        """Start an episode: preplace fixed blocks when that rule is active,
        optionally shape the first movable block, and observe it."""
        self.state = FloorplanState(self.circuit, self._order)
        if self.profile.uses("preplace"):
            self.state.apply_preplacements()
        if self._baseline is None:
            self._baseline = wire_greedy_baseline(self.circuit, self._order)
        self.trace = EpisodeTrace(order=tuple(self.state.order),
                                  hpwl_baseline=self._baseline)
        if not self.state.done and first_ar is not None:
            blk = self.circuit.blocks[self.state.current_block]
            if blk.is_soft:
                self.state.set_shape(blk.id, first_ar)
        self.observation = self._observe()
        return self.observation

    def _observe(self) -> Observation | None:
        if self.state.done:
            return None
        block = self.state.current_block
        stack = compile_masks(self.state, block, self.profile, self.plugins)
        return Observation(
            step=len(self.trace.steps),
            block=block,
            order=tuple(self.state.order),
            canvas=occupancy_grid(self.state),
            masks=stack,
        )

    def step(self, action: Action) -> tuple[Observation | None, MetricTuple, bool]:
        """Place the current block at the action's cell.  The cell must be
        set in the current availability mask; the optional ratio reshapes the
        next block before it is observed."""
        if self.state is None:
            raise FloorplanError("reset() the environment before stepping")
        if self.state.done or self.observation is None:
            raise InvalidActionError("episode is over; nothing left to place")
        dims = self.circuit.dims
        if not (0 <= action.x < dims.width and 0 <= action.y < dims.height):
            raise InvalidActionError(
                f"anchor ({action.x},{action.y}) is outside the grid")
        avail = self.observation.availability
        if not avail.allows(action.x, action.y):
            raise InvalidActionError(
                f"anchor ({action.x},{action.y}) is not available for "
                f"block {self.observation.block} (rung {avail.rung})")

        block = self.observation.block
        self.state.place(block, action.x, action.y)
        self.state.cursor += 1

        if not self.state.done and action.ar_next is not None:
            nxt = self.circuit.blocks[self.state.current_block]
            if nxt.is_soft:
                self.state.set_shape(nxt.id, action.ar_next)

        raw = metric_snapshot(self.state)
        norm = normalize(raw, self.circuit, self._baseline)
        self.trace.steps.append(StepRecord(
            step=len(self.trace.steps),
            block=block,
            x=action.x,
            y=action.y,
            ar_next=action.ar_next,
            raw=raw,
            norm=norm,
            rung=avail.rung,
            dropped=avail.dropped,
        ))
        done = self.state.done
        self.observation = self._observe()
        if done:
            self.trace.finalize_rewards(self.profile)
        return self.observation, norm, done

    @property
    def hpwl_baseline(self) -> float:
        return self._baseline


@dataclasses.dataclass
class EpisodeSummary:
    raw: MetricTuple
    norm: MetricTuple
    satisfaction: dict[str, tuple[int, int]]
    rungs: list[str]
    rung_events: int
    hpwl_baseline: float
    rewards: list[float]
    plugin_metrics: dict[str, float] = dataclasses.field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "raw": self.raw.as_dict(),
            "norm": self.norm.as_dict(),
            "satisfaction": {k: list(v) for k, v in self.satisfaction.items()},
            "rungs": self.rungs,
            "rung_events": self.rung_events,
            "hpwl_baseline": self.hpwl_baseline,
            "rewards": self.rewards,
            "plugin_metrics": self.plugin_metrics,
        }


def episode_summary(state: FloorplanState, trace: EpisodeTrace,
                    thresholds: SatisfactionThresholds | None = None,
                    profile=None, plugins: tuple = ()) -> EpisodeSummary:
    """Final-state report of a finished episode: metrics raw and normalized,
    per-rule satisfaction, and the relaxation audit."""
    if not state.done:
        raise ValueError("episode is not finished; blocks remain unplaced")
    raw = metric_snapshot(state)
    norm = normalize(raw, state.circuit, trace.hpwl_baseline)
    rewards = trace.rewards
    if rewards is None and profile is not None and trace.steps:
        rewards = trace.finalize_rewards(profile)
    return EpisodeSummary(
        raw=raw,
        norm=norm,
        satisfaction=satisfaction_counts(state, thresholds=thresholds),
        rungs=[s.rung for s in trace.steps],
        rung_events=trace.rung_events(),
        hpwl_baseline=trace.hpwl_baseline,
        rewards=list(rewards) if rewards is not None else [],
        plugin_metrics={p.name: p.metric(state) for p in plugins},
    )
