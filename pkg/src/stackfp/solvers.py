"""Placement solvers driving the masked environment.

All three solvers draw every anchor from the availability mask, so whatever
that mask encodes (non-overlap, outline, and any enabled rule that survived
relaxation) holds for their output by construction.  They differ only in how
they pick among the allowed cells:

* greedy: lexicographic scan of the value masks (wirelength up, alignment
  down, shared edge down, terminal distance up), final ties broken row-major;
  soft-block ratios come from a one-step lookahead over a small candidate
  ladder.
* annealing: reuses greedy as a decoder for a genome of placement order plus
  per-block ratios, starting from the greedy solution itself.
* random: uniform over the allowed cells, ratios log-uniform in the band.

Costs are the negated weighted metric score of the final normalized metrics,
so lower is better and the annealer's objective agrees with the reward.
"""

import dataclasses
import math
import time

import numpy as np

from .core import (
    Circuit,
    FloorplanState,
    InfeasibleError,
    TaskProfile,
    default_order,
    shape_from_ar,
)
from .env import (
    Action,
    EpisodeSummary,
    EpisodeTrace,
    PlacementEnv,
    episode_summary,
    weighted_score,
    wire_greedy_baseline,
)
from .masks import MaskStack, compile_masks
from .metrics import MetricTuple

TIE_KEYS = ("wire", "alignment", "adjacency", "terminal")


@dataclasses.dataclass(frozen=True)
class SolverConfig:
    kind: str = "greedy"                  # greedy | sa | random
    seed: int = 0
    ar_candidates: int = 8
    tie_break: tuple[str, ...] = TIE_KEYS
    sa_iterations: int = 2000
    sa_alpha: float = 0.95                # temperature decay per iteration
    sa_t0: float | None = None            # None: calibrate from sampled moves
    sa_move_weights: tuple[float, float, float] = (0.4, 0.3, 0.3)
    sa_calibration_moves: int = 50

    def __post_init__(self):
        if self.kind not in ("greedy", "sa", "random"):
            raise ValueError(f"unknown solver kind {self.kind!r}")
        if self.ar_candidates < 1:
            raise ValueError("need at least one aspect ratio candidate")
        if not self.tie_break:
            raise ValueError("tie_break cannot be empty")
        if not (0.0 < self.sa_alpha <= 1.0):
            raise ValueError("sa_alpha must be in (0, 1]")
        if len(self.sa_move_weights) != 3 or sum(self.sa_move_weights) <= 0:
            raise ValueError("sa_move_weights needs three nonnegative entries")


@dataclasses.dataclass
class SolveResult:
    kind: str
    state: FloorplanState
    trace: EpisodeTrace
    summary: EpisodeSummary
    order: tuple[int, ...]
    ars: dict[int, float]
    cost: float
    runtime_s: float


@dataclasses.dataclass
class SAResult(SolveResult):
    initial_cost: float = 0.0
    t0: float = 0.0
    accepted: int = 0
    cost_curve: list[float] = dataclasses.field(default_factory=list)


def objective_cost(norm: MetricTuple, profile: TaskProfile) -> float:
    """What the annealer minimizes over final normalized metrics."""
    if not norm.normalized:
        raise ValueError("cost is defined over normalized metrics")
    return -weighted_score(norm, profile)


def ar_candidate_ladder(block, count: int) -> list[float]:
    """Geometrically spaced ratios across the block's band, deduplicated by
    the integer shape they quantize to.  A single candidate sits at the
    band's geometric mean."""
    if not block.is_soft:
        return []
    if count == 1:
        ratios = [math.sqrt(block.ar_min * block.ar_max)]
    else:
        ratios = [float(r) for r in
                  np.geomspace(block.ar_min, block.ar_max, count)]
    out, seen = [], set()
    for r in ratios:
        shape = shape_from_ar(block.area, r, block.ar_min, block.ar_max)
        if shape not in seen:
            seen.add(shape)
            out.append(r)
    return out


def _mask_for_key(stack: MaskStack, key: str):
    """Value mask and optimization sense for one tie-break key."""
    builtin = {
        "wire": (stack.wire, "min"),
        "alignment": (stack.alignment, "max"),
        "adjacency": (stack.grouping, "max"),
        "terminal": (stack.terminal, "min"),
    }
    if key in builtin:
        return builtin[key]
    for m in stack.plugin_masks:
        if m.rule == key:
            return m, "min"
    raise ValueError(f"tie-break key {key!r} matches no mask")


def _filter_cells(stack: MaskStack, tie_break) -> tuple[np.ndarray, tuple]:
    """Lexicographic filtering over the available cells.

    Each key keeps only the cells optimal for its value mask; keys whose rule
    does not bind this block are skipped.  Returns the surviving flat indices
    and the score prefix (relaxation depth first, then one value per applied
    key) used to compare placements across aspect ratio candidates."""
    avail = stack.availability
    cells = np.flatnonzero(avail.mask)
    if cells.size == 0:
        raise InfeasibleError(
            f"no cell available for block {stack.block} ({avail.rung})")
    score = [float(len(avail.dropped))]
    for key in tie_break:
        mask, sense = _mask_for_key(stack, key)
        if mask is None:
            continue
        vals = mask.values.reshape(-1)[cells]
        if sense == "max":
            best = vals.max()
            score.append(-float(best))
        else:
            best = vals.min()
            score.append(float(best))
        cells = cells[vals == best]
    return cells, tuple(score)


def _pick_cell(stack: MaskStack, tie_break, height: int) -> tuple[int, int]:
    cells, _ = _filter_cells(stack, tie_break)
    flat = int(cells.min())          # row-major: smallest x, then smallest y
    return divmod(flat, height)


def _stack_score(stack: MaskStack, tie_break) -> tuple | None:
    """Comparable quality of the best cell in a stack; None when the block
    fits nowhere under this shape."""
    try:
        cells, score = _filter_cells(stack, tie_break)
    except InfeasibleError:
        return None
    return score + (float(cells.min()),)


def _best_first_ar(env: PlacementEnv, block, config: SolverConfig) -> float | None:
    """Scan reset shapes for the opening soft block and keep the one whose
    best cell scores lowest."""
    best_r, best_s = None, None
    for r in ar_candidate_ladder(block, config.ar_candidates):
        obs = env.reset(first_ar=r)
        s = _stack_score(obs.masks, config.tie_break)
        if s is not None and (best_s is None or s < best_s):
            best_r, best_s = r, s
    return best_r


def _lookahead_ar(env: PlacementEnv, x: int, y: int, next_id: int,
                  config: SolverConfig) -> float | None:
    """Simulate the pending placement, then score each candidate shape of the
    next block by the best cell it would leave available."""
    sim = env.state.clone()
    sim.place(env.observation.block, x, y)
    nxt = env.circuit.blocks[next_id]
    best_r, best_s = None, None
    for r in ar_candidate_ladder(nxt, config.ar_candidates):
        sim.set_shape(next_id, r)
        stack = compile_masks(sim, next_id, env.profile, env.plugins)
        s = _stack_score(stack, config.tie_break)
        if s is not None and (best_s is None or s < best_s):
            best_r, best_s = r, s
    return best_r


def greedy_place(circuit: Circuit, profile: TaskProfile,
                 config: SolverConfig | None = None, *,
                 order: list[int] | None = None,
                 ars: dict[int, float] | None = None,
                 plugins: tuple = (),
                 hpwl_baseline: float | None = None) -> SolveResult:
    """Mask-guided greedy placement.

    Free mode (ars None) also chooses every soft block's ratio: the opening
    block by a reset scan, each later one by lookahead while its predecessor
    is placed.  With `ars` given the ratios are fixed and no scanning
    happens, which is the decode path the annealer uses."""
    config = config or SolverConfig()
    t_start = time.perf_counter()
    env = PlacementEnv(circuit, profile, order=order, plugins=plugins,
                       hpwl_baseline=hpwl_baseline)
    chosen: dict[int, float] = dict(ars) if ars is not None else {}
    free = ars is None

    obs = env.reset()
    if obs is not None:
        first = circuit.blocks[obs.block]
        if first.is_soft:
            if not free and first.id in chosen:
                obs = env.reset(first_ar=chosen[first.id])
            elif free:
                r = _best_first_ar(env, first, config)
                if r is not None:
                    chosen[first.id] = r
                obs = env.reset(first_ar=r)

    while obs is not None:
        x, y = _pick_cell(obs.masks, config.tie_break, circuit.dims.height)
        ar_next = None
        cursor = env.state.cursor
        if cursor + 1 < len(env.state.order):
            next_id = env.state.order[cursor + 1]
            if circuit.blocks[next_id].is_soft:
                if free:
                    ar_next = _lookahead_ar(env, x, y, next_id, config)
                    if ar_next is not None:
                        chosen[next_id] = ar_next
                else:
                    ar_next = chosen.get(next_id)
        obs, _, _ = env.step(Action(x, y, ar_next=ar_next))

    summary = episode_summary(env.state, env.trace, profile=profile,
                              plugins=plugins)
    return SolveResult(
        kind="greedy",
        state=env.state,
        trace=env.trace,
        summary=summary,
        order=tuple(env.state.order),
        ars=chosen,
        cost=objective_cost(summary.norm, profile),
        runtime_s=time.perf_counter() - t_start,
    )


def random_place(circuit: Circuit, profile: TaskProfile,
                 config: SolverConfig | None = None, *,
                 order: list[int] | None = None,
                 plugins: tuple = (),
                 hpwl_baseline: float | None = None) -> SolveResult:
    """Uniform choice over the allowed cells; ratios log-uniform in band."""
    config = config or SolverConfig(kind="random")
    t_start = time.perf_counter()
    rng = np.random.default_rng(config.seed)
    env = PlacementEnv(circuit, profile, order=order, plugins=plugins,
                       hpwl_baseline=hpwl_baseline)

    def sample_ar(block) -> float:
        return math.exp(rng.uniform(math.log(block.ar_min),
                                    math.log(block.ar_max)))

    chosen: dict[int, float] = {}
    obs = env.reset()
    if obs is not None and circuit.blocks[obs.block].is_soft:
        r = sample_ar(circuit.blocks[obs.block])
        chosen[obs.block] = r
        obs = env.reset(first_ar=r)
    while obs is not None:
        cells = np.flatnonzero(obs.availability.mask)
        if cells.size == 0:
            raise InfeasibleError(
                f"no cell available for block {obs.block} "
                f"({obs.availability.rung})")
        flat = int(rng.choice(cells))
        x, y = divmod(flat, circuit.dims.height)
        ar_next = None
        cursor = env.state.cursor
        if cursor + 1 < len(env.state.order):
            nxt = circuit.blocks[env.state.order[cursor + 1]]
            if nxt.is_soft:
                ar_next = sample_ar(nxt)
                chosen[nxt.id] = ar_next
        obs, _, _ = env.step(Action(x, y, ar_next=ar_next))

    summary = episode_summary(env.state, env.trace, profile=profile,
                              plugins=plugins)
    return SolveResult(
        kind="random",
        state=env.state,
        trace=env.trace,
        summary=summary,
        order=tuple(env.state.order),
        ars=chosen,
        cost=objective_cost(summary.norm, profile),
        runtime_s=time.perf_counter() - t_start,
    )


class _Genome:
    """Annealing state: placement order of the movable tail plus one ratio
    per reshapeable soft block.  Preplaced blocks stay pinned in front."""

    def __init__(self, prefix: list[int], tail: list[int], ars: dict[int, float]):
        self.prefix = prefix
        self.tail = tail
        self.ars = ars

    def clone(self) -> "_Genome":
        return _Genome(self.prefix, list(self.tail), dict(self.ars))

    @property
    def order(self) -> list[int]:
        return self.prefix + self.tail


def _propose(genome: _Genome, soft_ids: list[int], weights, rng) -> _Genome:
    """One neighbor: swap two order slots, relocate one, or nudge a ratio."""
    cand = genome.clone()
    moves = ["swap", "relocate", "ar"]
    w = np.asarray(weights, dtype=float)
    if len(cand.tail) < 2:
        w[0] = w[1] = 0.0
    if not soft_ids:
        w[2] = 0.0
    if w.sum() == 0:
        return cand
    move = rng.choice(moves, p=w / w.sum())
    if move == "swap":
        i, j = rng.choice(len(cand.tail), size=2, replace=False)
        cand.tail[i], cand.tail[j] = cand.tail[j], cand.tail[i]
    elif move == "relocate":
        i = int(rng.integers(len(cand.tail)))
        b = cand.tail.pop(i)
        j = int(rng.integers(len(cand.tail) + 1))
        cand.tail.insert(j, b)
    else:
        bid = int(rng.choice(soft_ids))
        blk_ar = cand.ars[bid]
        factor = math.exp(rng.uniform(-0.35, 0.35))
        cand.ars[bid] = blk_ar * factor     # decode clips to the band
    return cand


def sa_place(circuit: Circuit, profile: TaskProfile,
             config: SolverConfig | None = None, *,
             order: list[int] | None = None,
             plugins: tuple = ()) -> SAResult:
    """Simulated annealing over (order, ratios), decoded by the greedy
    placer with a shared wirelength baseline so costs are comparable.

    Starts from the free greedy solution, so the initial cost equals the
    greedy cost and the best-so-far curve never rises above it.  Decodes
    that dead-end (a permutation can strand a block) count as rejected."""
    config = config or SolverConfig(kind="sa")
    t_start = time.perf_counter()
    rng = np.random.default_rng(config.seed)

    base_order = list(order) if order is not None else default_order(circuit)
    baseline = wire_greedy_baseline(circuit, base_order)

    seed_result = greedy_place(circuit, profile, config, order=base_order,
                               plugins=plugins, hpwl_baseline=baseline)

    pinned = set()
    if profile.uses("preplace"):
        pinned = {pp.block for pp in circuit.constraints.preplacements}
    seed_order = list(seed_result.order)
    prefix = [b for b in seed_order if b in pinned]
    tail = [b for b in seed_order if b not in pinned]
    ars = {bid: r for bid, r in seed_result.ars.items() if bid not in pinned}
    soft_ids = sorted(ars)

    genome = _Genome(prefix, tail, ars)
    cur_cost = best_cost = initial_cost = seed_result.cost
    best_result = seed_result

    def decode(g: _Genome):
        try:
            res = greedy_place(circuit, profile, config, order=g.order,
                               ars=g.ars, plugins=plugins,
                               hpwl_baseline=baseline)
        except InfeasibleError:
            return None
        return res

    t0 = config.sa_t0
    if t0 is None:
        ups = []
        for _ in range(config.sa_calibration_moves):
            res = decode(_propose(genome, soft_ids, config.sa_move_weights, rng))
            if res is not None and res.cost > cur_cost:
                ups.append(res.cost - cur_cost)
        # mean uphill move accepted with probability ~0.8 at the start
        t0 = (sum(ups) / len(ups)) / math.log(1 / 0.8) if ups else 1.0

    temp = t0
    accepted = 0
    curve = [best_cost]
    for _ in range(config.sa_iterations):
        cand = _propose(genome, soft_ids, config.sa_move_weights, rng)
        res = decode(cand)
        if res is not None:
            delta = res.cost - cur_cost
            if delta <= 0 or rng.random() < math.exp(-delta / max(temp, 1e-12)):
                genome, cur_cost = cand, res.cost
                accepted += 1
                if res.cost < best_cost:
                    best_cost, best_result = res.cost, res
        temp *= config.sa_alpha
        curve.append(best_cost)

    return SAResult(
        kind="sa",
        state=best_result.state,
        trace=best_result.trace,
        summary=best_result.summary,
        order=tuple(best_result.order),
        ars=dict(best_result.ars),
        cost=best_cost,
        runtime_s=time.perf_counter() - t_start,
        initial_cost=initial_cost,
        t0=t0,
        accepted=accepted,
        cost_curve=curve,
    )


def solve(circuit: Circuit, profile: TaskProfile,
          config: SolverConfig | None = None, *,
          plugins: tuple = ()) -> SolveResult:
    """Dispatch on config.kind."""
    config = config or SolverConfig()
    if config.kind == "greedy":
        return greedy_place(circuit, profile, config, plugins=plugins)
    if config.kind == "sa":
        return sa_place(circuit, profile, config, plugins=plugins)
    return random_place(circuit, profile, config, plugins=plugins)
