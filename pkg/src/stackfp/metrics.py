"""Placement quality metrics.

All distances are Manhattan and all geometry is 2D: layers only matter for
deciding which pairs interact (overlap and abutment are per-layer, alignment
is cross-layer) and are otherwise ignored, so terminal distance and
wirelength see the stack in projection.
"""

import dataclasses

import numpy as np

from .core import (
    BoundaryBinding,
    Circuit,
    ConstraintSet,
    FloorplanState,
    Terminal,
    shape_from_ar,
)


@dataclasses.dataclass(frozen=True)
class MetricTuple:
    """One snapshot of the five tracked quantities.

    alignment is a mean score in [0, 1]; hpwl, overlap, adjacency and
    distance are raw grid quantities unless `normalized` is set.
    """
    alignment: float
    hpwl: float
    overlap: float
    adjacency: float
    distance: float
    normalized: bool = False

    ZERO = None     # filled in below

    def as_dict(self) -> dict:
        return {
            "alignment": self.alignment,
            "hpwl": self.hpwl,
            "overlap": self.overlap,
            "adjacency": self.adjacency,
            "distance": self.distance,
        }


MetricTuple.ZERO = MetricTuple(0.0, 0.0, 0.0, 0.0, 0.0)


@dataclasses.dataclass(frozen=True)
class SatisfactionThresholds:
    """Pass marks for per-constraint satisfaction counting.

    A boundary binding passes when its merged distance is at most
    `distance_max`.  An abutment pair passes when the shared edge exceeds
    `adjacency_frac` of the shorter facing edge.  An alignment pair passes
    when the projected intersection exceeds `alignment_frac` of the smaller
    block area.
    """
    distance_max: float = 0.0
    adjacency_frac: float = 0.5
    alignment_frac: float = 0.5


def _require_placed(state: FloorplanState, block_id: int) -> None:
    if not state.placed[block_id]:
        raise ValueError(f"block {block_id} is not placed")


def _span_gap(lo: int, hi: int, p: float) -> float:
    """Distance from p to the closed interval [lo, hi]."""
    return max(lo - p, p - hi, 0)


def block_terminal_distance(state: FloorplanState, block_id: int,
                            terminal: Terminal | int) -> int:
    """Min Manhattan distance from the terminal to the block's nearest edge
    cell.  Zero means the terminal sits on the block's one-cell-wide rim;
    a terminal strictly inside a block is still one or more cells from the
    rim.  Layers are ignored."""
    _require_placed(state, block_id)
    if isinstance(terminal, int):
        terminal = state.circuit.terminals[terminal]
    x, y, w, h = state.rect(block_id)
    tx, ty = terminal.x, terminal.y
    dx = _span_gap(x, x + w - 1, tx)
    dy = _span_gap(y, y + h - 1, ty)
    horiz = dx + min(abs(ty - y), abs(ty - (y + h - 1)))
    vert = dy + min(abs(tx - x), abs(tx - (x + w - 1)))
    return int(min(horiz, vert))


def block_adjacency_length(state: FloorplanState, i: int, j: int) -> int:
    """Shared abutment length of two placed blocks on a common layer.

    Only exact edge contact counts: when one block's x extent ends where the
    other's begins, the result is their y overlap, and vice versa.  Corner
    contact and separated or overlapping blocks give zero."""
    _require_placed(state, i)
    _require_placed(state, j)
    if state.circuit.blocks[i].z != state.circuit.blocks[j].z:
        raise ValueError(f"blocks {i} and {j} sit on different layers")
    xi, yi, wi, hi = state.rect(i)
    xj, yj, wj, hj = state.rect(j)
    if xi + wi == xj or xj + wj == xi:
        return max(0, min(yi + hi, yj + hj) - max(yi, yj))
    if yi + hi == yj or yj + hj == yi:
        return max(0, min(xi + wi, xj + wj) - max(xi, xj))
    return 0


def projected_intersection(state: FloorplanState, i: int, j: int) -> int:
    """Cell count of the two footprints' overlap when projected onto one
    layer; the basis of the alignment score."""
    _require_placed(state, i)
    _require_placed(state, j)
    xi, yi, wi, hi = state.rect(i)
    xj, yj, wj, hj = state.rect(j)
    ox = max(0, min(xi + wi, xj + wj) - max(xi, xj))
    oy = max(0, min(yi + hi, yj + hj) - max(yi, yj))
    return ox * oy


def alignment_score(state: FloorplanState, i: int, j: int, min_area: float) -> float:
    """Projected intersection over min_area, saturated at 1."""
    if state.circuit.blocks[i].z == state.circuit.blocks[j].z:
        raise ValueError(f"alignment is cross-layer; blocks {i} and {j} share layer")
    if min_area <= 0:
        raise ValueError("min_area must be positive")
    return min(1.0, projected_intersection(state, i, j) / min_area)


def _net_points(state: FloorplanState, net) -> list[tuple[float, float]]:
    pts = [(float(t.x), float(t.y))
           for t in (state.circuit.terminals[k] for k in net.terminals)]
    for b in net.blocks:
        if state.placed[b]:
            x, y, w, h = state.rect(b)
            pts.append((x + w / 2.0, y + h / 2.0))
    return pts


def total_hpwl(state: FloorplanState) -> float:
    """Half-perimeter wirelength over all nets: block centers and terminal
    positions, unplaced blocks skipped.  Placing a block never shrinks it."""
    total = 0.0
    for net in state.circuit.nets:
        pts = _net_points(state, net)
        if len(pts) < 2:
            continue
        xs = [p[0] for p in pts]
        ys = [p[1] for p in pts]
        total += (max(xs) - min(xs)) + (max(ys) - min(ys))
    return total


def total_overlap(state: FloorplanState) -> int:
    """Summed pairwise footprint overlap (cells) over same-layer placed
    pairs.  Zero iff no two placed blocks share a cell."""
    total = 0
    for z in range(state.circuit.dims.num_layers):
        ids = [i for i in state.placed_ids() if state.circuit.blocks[i].z == z]
        if len(ids) < 2:
            continue
        x = state.x[ids].astype(np.int64)
        y = state.y[ids].astype(np.int64)
        w = state.w[ids]
        h = state.h[ids]
        ox = np.minimum(x[:, None] + w[:, None], x[None, :] + w[None, :]) \
            - np.maximum(x[:, None], x[None, :])
        oy = np.minimum(y[:, None] + h[:, None], y[None, :] + h[None, :]) \
            - np.maximum(y[:, None], y[None, :])
        ov = np.clip(ox, 0, None) * np.clip(oy, 0, None)
        total += int(np.triu(ov, k=1).sum())
    return total


def binding_distance(state: FloorplanState, binding: BoundaryBinding) -> int:
    """Merged distance of one boundary binding: the worst terminal for ALL
    bindings, the best one for ANY."""
    ds = [block_terminal_distance(state, binding.block, t) for t in binding.terminals]
    return max(ds) if binding.mode == "ALL" else min(ds)


def group_pairs(constraints: ConstraintSet):
    """All unordered member pairs inside each abutment group."""
    for g in constraints.groups:
        for a in range(len(g)):
            for b in range(a + 1, len(g)):
                yield g[a], g[b]


def metric_snapshot(state: FloorplanState) -> MetricTuple:
    """Raw metrics of a possibly partial placement.

    Constraint terms average over every constraint instance; instances whose
    blocks are not yet placed contribute zero, so alignment and adjacency only
    grow as the episode completes and distance only counts realized bindings.
    """
    cons = state.circuit.constraints

    aln = 0.0
    if cons.alignment_pairs:
        got = 0.0
        for p in cons.alignment_pairs:
            if state.placed[p.a] and state.placed[p.b]:
                got += alignment_score(state, p.a, p.b, p.min_area)
        aln = got / len(cons.alignment_pairs)

    adj = 0.0
    pairs = list(group_pairs(cons))
    if pairs:
        got = 0.0
        for a, b in pairs:
            if state.placed[a] and state.placed[b]:
                got += block_adjacency_length(state, a, b)
        adj = got / len(pairs)

    dist = 0.0
    if cons.boundary_bindings:
        got = 0.0
        for bb in cons.boundary_bindings:
            if state.placed[bb.block]:
                got += binding_distance(state, bb)
        dist = got / len(cons.boundary_bindings)

    return MetricTuple(
        alignment=aln,
        hpwl=total_hpwl(state),
        overlap=float(total_overlap(state)),
        adjacency=adj,
        distance=dist,
        normalized=False,
    )


def normalize(metrics: MetricTuple, circuit: Circuit, hpwl_baseline: float) -> MetricTuple:
    """Bring the raw quantities onto comparable scales: distance by half the
    outline perimeter, adjacency by the mean block side, overlap by the mean
    block area, wirelength by a rollout baseline.  Alignment is already a
    score and passes through."""
    if metrics.normalized:
        raise ValueError("metrics are already normalized")
    if hpwl_baseline <= 0:
        raise ValueError(f"hpwl baseline must be positive, got {hpwl_baseline}")
    mean_area = circuit.mean_block_area()
    half_perim = (circuit.dims.width + circuit.dims.height) / 2.0
    return MetricTuple(
        alignment=metrics.alignment,
        hpwl=metrics.hpwl / hpwl_baseline,
        overlap=metrics.overlap / mean_area,
        adjacency=metrics.adjacency / (mean_area ** 0.5),
        distance=metrics.distance / half_perim,
        normalized=True,
    )


def _facing_edge_min(state: FloorplanState, i: int, j: int) -> int:
    """Shorter of the two facing edges of an abutting pair; zero when the
    pair does not abut."""
    xi, yi, wi, hi = state.rect(i)
    xj, yj, wj, hj = state.rect(j)
    if xi + wi == xj or xj + wj == xi:
        return min(hi, hj)
    if yi + hi == yj or yj + hj == yi:
        return min(wi, wj)
    return 0


def _shape_band_widths(block) -> tuple[int, int]:
    lo, _ = shape_from_ar(block.area, block.ar_min, block.ar_min, block.ar_max)
    hi, _ = shape_from_ar(block.area, block.ar_max, block.ar_min, block.ar_max)
    return lo, hi


def satisfaction_counts(state: FloorplanState,
                        constraints: ConstraintSet | None = None,
                        thresholds: SatisfactionThresholds | None = None,
                        ) -> dict[str, tuple[int, int]]:
    """(satisfied, total) per rule.

    Boundary, grouping, alignment and preplacement count constraint
    instances and require their blocks to be placed.  Overlap counts
    same-layer placed pairs, outline counts placed blocks, shape counts soft
    blocks whose integer shape is reachable inside their aspect band."""
    cons = constraints if constraints is not None else state.circuit.constraints
    th = thresholds or SatisfactionThresholds()
    blocks = state.circuit.blocks
    counts: dict[str, tuple[int, int]] = {}

    for p in cons.alignment_pairs:
        _require_placed(state, p.a)
        _require_placed(state, p.b)
    for a, b in group_pairs(cons):
        _require_placed(state, a)
        _require_placed(state, b)
    for bb in cons.boundary_bindings:
        _require_placed(state, bb.block)
    for pp in cons.preplacements:
        _require_placed(state, pp.block)

    ok = sum(1 for bb in cons.boundary_bindings
             if binding_distance(state, bb) <= th.distance_max)
    counts["boundary"] = (ok, len(cons.boundary_bindings))

    pairs = list(group_pairs(cons))
    ok = 0
    for a, b in pairs:
        shared = block_adjacency_length(state, a, b)
        edge = _facing_edge_min(state, a, b)
        if shared > th.adjacency_frac * edge and shared > 0:
            ok += 1
    counts["grouping"] = (ok, len(pairs))

    ok = 0
    for p in cons.alignment_pairs:
        inter = projected_intersection(state, p.a, p.b)
        floor_area = th.alignment_frac * min(blocks[p.a].area, blocks[p.b].area)
        if inter > floor_area:
            ok += 1
    counts["alignment"] = (ok, len(cons.alignment_pairs))

    ok = sum(1 for pp in cons.preplacements
             if state.rect(pp.block) == (pp.x, pp.y, pp.w, pp.h))
    counts["preplace"] = (ok, len(cons.preplacements))

    ok = total = 0
    for z in range(state.circuit.dims.num_layers):
        ids = [i for i in state.placed_ids() if blocks[i].z == z]
        for a in range(len(ids)):
            for b in range(a + 1, len(ids)):
                total += 1
                ox = min(state.x[ids[a]] + state.w[ids[a]], state.x[ids[b]] + state.w[ids[b]]) \
                    - max(state.x[ids[a]], state.x[ids[b]])
                oy = min(state.y[ids[a]] + state.h[ids[a]], state.y[ids[b]] + state.h[ids[b]]) \
                    - max(state.y[ids[a]], state.y[ids[b]])
                if ox <= 0 or oy <= 0:
                    ok += 1
    counts["overlap"] = (ok, total)

    dims = state.circuit.dims
    placed = state.placed_ids()
    ok = sum(1 for i in placed
             if state.x[i] >= 0 and state.y[i] >= 0
             and state.x[i] + state.w[i] <= dims.width
             and state.y[i] + state.h[i] <= dims.height)
    counts["outline"] = (ok, len(placed))

    ok = total = 0
    for b in blocks:
        if not b.is_soft:
            continue
        total += 1
        lo, hi = _shape_band_widths(b)
        w = int(state.w[b.id])
        if lo <= w <= hi and int(state.h[b.id]) == -(-b.area // w):
            ok += 1
    counts["shape"] = (ok, total)

    return counts
