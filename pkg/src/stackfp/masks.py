"""Per-cell rule masks over candidate anchor positions.

Every mask is a (W, H) float array indexed [x, y], where (x, y) is the anchor
the subject block would be placed at.  Value masks score each anchor under one
rule; binarized masks mark the anchors that satisfy the rule's threshold; the
availability mask is the conjunction of all binarized masks, so an action
sampled from it cannot violate any masked rule.

When the conjunction is empty, rules are dropped in rounds of increasing
severity until it is not: every subset of droppable masks is tried in order of
its cost, where dropping the terminal mask costs the most, the grouping mask
less, the alignment mask less again, and plug-in masks the least.  The
position mask is never dropped; an empty position mask means the block simply
does not fit anywhere.
"""

import dataclasses

import numpy as np

from .core import FloorplanState, GridDims

MERGE_ALL = "ALL"
MERGE_ANY = "ANY"


@dataclasses.dataclass(frozen=True)
class RuleMask:
    values: np.ndarray
    rule: str
    block: int | None = None
    merge: str | None = None    # set on merged masks: "max", "min" or "sum"

    @property
    def shape(self):
        return self.values.shape


@dataclasses.dataclass(frozen=True)
class AvailabilityResult:
    """Conjunction of binarized masks plus the relaxation audit trail."""
    mask: np.ndarray
    dropped: tuple[str, ...]
    feasible: bool

    @property
    def rung(self) -> str:
        if not self.feasible:
            return "infeasible"
        if not self.dropped:
            return "none"
        return "drop:" + "+".join(self.dropped)

    def allows(self, x: int, y: int) -> bool:
        return bool(self.mask[x, y])


def _grid(state: FloorplanState) -> GridDims:
    return state.circuit.dims


def adjacent_terminal_mask(state: FloorplanState, block_id: int, terminal) -> RuleMask:
    """Distance from the terminal to the block's nearest edge cell, for every
    anchor.  Anchors that would overhang the outline are still scored; the
    position mask is what rules them out."""
    dims = _grid(state)
    if isinstance(terminal, int):
        terminal = state.circuit.terminals[terminal]
    w = int(state.w[block_id])
    h = int(state.h[block_id])
    tx, ty = terminal.x, terminal.y
    xs = np.arange(dims.width, dtype=np.int64)
    ys = np.arange(dims.height, dtype=np.int64)
    # gap to the edge span vs offset to the two fixed edge rows, per axis
    gap_x = np.maximum(np.maximum(xs - tx, tx - (xs + w - 1)), 0)
    edge_x = np.minimum(np.abs(tx - xs), np.abs(tx - (xs + w - 1)))
    gap_y = np.maximum(np.maximum(ys - ty, ty - (ys + h - 1)), 0)
    edge_y = np.minimum(np.abs(ty - ys), np.abs(ty - (ys + h - 1)))
    vals = np.minimum(gap_x[:, None] + edge_y[None, :],
                      edge_x[:, None] + gap_y[None, :]).astype(np.float64)
    return RuleMask(vals, "terminal", block_id)


def merge_terminal_masks(masks: list[RuleMask], mode: str) -> RuleMask:
    """ALL keeps the worst distance per cell, ANY the best."""
    if not masks:
        raise ValueError("cannot merge an empty list of terminal masks")
    if mode not in (MERGE_ALL, MERGE_ANY):
        raise ValueError(f"unknown merge mode {mode!r}")
    stack = np.stack([m.values for m in masks])
    vals = stack.max(axis=0) if mode == MERGE_ALL else stack.min(axis=0)
    return RuleMask(vals, "terminal", masks[0].block,
                    merge="max" if mode == MERGE_ALL else "min")


def adjacent_block_mask(state: FloorplanState, block_id: int, other_id: int) -> RuleMask:
    """Abutment length against one placed block, for every anchor.

    Nonzero only on the four one-cell-wide strips where the subject's edge
    meets the placed block's edge, and only where the facing intervals
    actually overlap."""
    dims = _grid(state)
    if not state.placed[other_id]:
        raise ValueError(f"block {other_id} is not placed")
    if state.circuit.blocks[block_id].z != state.circuit.blocks[other_id].z:
        raise ValueError(f"blocks {block_id} and {other_id} sit on different layers")
    w1 = int(state.w[block_id])
    h1 = int(state.h[block_id])
    x2, y2, w2, h2 = state.rect(other_id)
    vals = np.zeros((dims.width, dims.height), dtype=np.float64)

    def y_overlap(y_anchor):
        return np.maximum(np.minimum(y_anchor + h1, y2 + h2) - np.maximum(y_anchor, y2), 0)

    def x_overlap(x_anchor):
        return np.maximum(np.minimum(x_anchor + w1, x2 + w2) - np.maximum(x_anchor, x2), 0)

    ylo, yhi = max(y2 - h1 + 1, 0), min(y2 + h2, dims.height)
    for x_strip in (x2 - w1, x2 + w2):
        if 0 <= x_strip < dims.width and ylo < yhi:
            vals[x_strip, ylo:yhi] = y_overlap(np.arange(ylo, yhi))
    xlo, xhi = max(x2 - w1 + 1, 0), min(x2 + w2, dims.width)
    for y_strip in (y2 - h1, y2 + h2):
        if 0 <= y_strip < dims.height and xlo < xhi:
            vals[xlo:xhi, y_strip] = x_overlap(np.arange(xlo, xhi))
    return RuleMask(vals, "grouping", block_id)


def merge_block_masks(masks: list[RuleMask], dims: GridDims,
                      block_id: int | None = None) -> RuleMask:
    """Sum of abutment masks over placed island members; an island with no
    placed member yet merges to all zeros."""
    if not masks:
        return RuleMask(np.zeros((dims.width, dims.height)), "grouping", block_id,
                        merge="sum")
    vals = np.zeros_like(masks[0].values)
    for m in masks:
        vals = vals + m.values
    return RuleMask(vals, "grouping", masks[0].block, merge="sum")


def alignment_mask(state: FloorplanState, block_id: int, partner_id: int,
                   min_area: float) -> RuleMask:
    """Projected-overlap score against one placed cross-layer partner, for
    every anchor, saturated at 1."""
    dims = _grid(state)
    if not state.placed[partner_id]:
        raise ValueError(f"block {partner_id} is not placed")
    if state.circuit.blocks[block_id].z == state.circuit.blocks[partner_id].z:
        raise ValueError(f"blocks {block_id} and {partner_id} share a layer")
    if min_area <= 0:
        raise ValueError("min_area must be positive")
    w = int(state.w[block_id])
    h = int(state.h[block_id])
    x2, y2, w2, h2 = state.rect(partner_id)
    xs = np.arange(dims.width, dtype=np.int64)
    ys = np.arange(dims.height, dtype=np.int64)
    ox = np.clip(np.minimum(xs + w, x2 + w2) - np.maximum(xs, x2), 0, None)
    oy = np.clip(np.minimum(ys + h, y2 + h2) - np.maximum(ys, y2), 0, None)
    vals = np.minimum(1.0, np.outer(ox, oy) / float(min_area))
    return RuleMask(vals, "alignment", block_id)


def position_mask(state: FloorplanState, block_id: int) -> RuleMask:
    """1 where the block fits fully on its layer without touching any placed
    footprint, 0 elsewhere."""
    dims = _grid(state)
    w = int(state.w[block_id])
    h = int(state.h[block_id])
    z = state.circuit.blocks[block_id].z
    vals = np.zeros((dims.width, dims.height), dtype=np.float64)
    if w <= dims.width and h <= dims.height:
        vals[:dims.width - w + 1, :dims.height - h + 1] = 1.0
    for (x2, y2, w2, h2) in state.layer_rects(z, skip=block_id):
        xlo, xhi = max(x2 - w + 1, 0), min(x2 + w2, dims.width)
        ylo, yhi = max(y2 - h + 1, 0), min(y2 + h2, dims.height)
        if xlo < xhi and ylo < yhi:
            vals[xlo:xhi, ylo:yhi] = 0.0
    return RuleMask(vals, "position", block_id)


def wire_mask(state: FloorplanState, block_id: int) -> RuleMask:
    """Wirelength increase if the block lands at each anchor: the sum over
    its nets of how far the anchor's center falls outside the net's current
    bounding box.  Zero inside every box."""
    dims = _grid(state)
    w = int(state.w[block_id])
    h = int(state.h[block_id])
    cx = np.arange(dims.width, dtype=np.float64) + w / 2.0
    cy = np.arange(dims.height, dtype=np.float64) + h / 2.0
    grow_x = np.zeros(dims.width, dtype=np.float64)
    grow_y = np.zeros(dims.height, dtype=np.float64)
    for net in state.circuit.nets:
        if block_id not in net.blocks:
            continue
        pts = [(px, py) for (px, py) in _net_points_excluding(state, net, block_id)]
        if not pts:
            continue
        px = [p[0] for p in pts]
        py = [p[1] for p in pts]
        grow_x += np.clip(min(px) - cx, 0, None) + np.clip(cx - max(px), 0, None)
        grow_y += np.clip(min(py) - cy, 0, None) + np.clip(cy - max(py), 0, None)
    vals = grow_x[:, None] + grow_y[None, :]
    return RuleMask(vals, "wire", block_id)


def _net_points_excluding(state: FloorplanState, net, block_id: int):
    for t in net.terminals:
        term = state.circuit.terminals[t]
        yield float(term.x), float(term.y)
    for b in net.blocks:
        if b != block_id and state.placed[b]:
            x, y, w, h = state.rect(b)
            yield x + w / 2.0, y + h / 2.0


def block_distance_mask(state: FloorplanState, block_id: int, anchor_id: int) -> RuleMask:
    """Manhattan distance between the subject's center at each anchor and a
    placed block's center; the demonstration plug-in rule."""
    dims = _grid(state)
    if not state.placed[anchor_id]:
        raise ValueError(f"block {anchor_id} is not placed")
    w = int(state.w[block_id])
    h = int(state.h[block_id])
    x0, y0, w0, h0 = state.rect(anchor_id)
    cx0 = x0 + w0 / 2.0
    cy0 = y0 + h0 / 2.0
    dx = np.abs(np.arange(dims.width, dtype=np.float64) + w / 2.0 - cx0)
    dy = np.abs(np.arange(dims.height, dtype=np.float64) + h / 2.0 - cy0)
    vals = dx[:, None] + dy[None, :]
    return RuleMask(vals, "block_distance", block_id)


# Per-rule binarization sense: whether small or large values satisfy the rule.
# A grouping threshold of zero means "any contact at all", hence strictly
# positive; other senses are inclusive.
def _binarize_terminal(vals, threshold):
    return (vals <= threshold).astype(np.uint8)


def _binarize_grouping(vals, threshold):
    if threshold <= 0:
        return (vals > 0).astype(np.uint8)
    return (vals >= threshold).astype(np.uint8)


def _binarize_alignment(vals, threshold):
    return (vals >= threshold).astype(np.uint8)


def _binarize_position(vals, threshold):
    return (vals > 0).astype(np.uint8)


def _binarize_block_distance(vals, threshold):
    return (vals <= threshold).astype(np.uint8)


_BINARIZE = {
    "terminal": _binarize_terminal,
    "grouping": _binarize_grouping,
    "alignment": _binarize_alignment,
    "position": _binarize_position,
    "block_distance": _binarize_block_distance,
}


def binarize(mask: RuleMask, threshold: float = 0.0) -> np.ndarray:
    """Cells that satisfy the mask's rule at the given threshold, as uint8."""
    fn = _BINARIZE.get(mask.rule)
    if fn is None:
        raise ValueError(f"no binarization sense for rule {mask.rule!r}")
    return fn(mask.values, threshold)


def availability_mask(position: np.ndarray,
                      terminal: np.ndarray | None = None,
                      grouping: np.ndarray | None = None,
                      alignment: np.ndarray | None = None,
                      extras: tuple[tuple[str, np.ndarray], ...] = (),
                      ) -> AvailabilityResult:
    """Conjunction of binarized masks with relaxation.

    Pass None for rules the block is not subject to.  When the full
    conjunction is empty, droppable masks are abandoned subset by subset in
    order of total severity (extras < alignment < grouping < terminal) until
    some cell survives; the dropped names are recorded.  The position mask is
    the one mask that is never given up: if it is empty the block fits
    nowhere and the result is infeasible."""
    base = (position > 0).astype(np.uint8)
    components = [*extras]
    if alignment is not None:
        components.append(("alignment", alignment))
    if grouping is not None:
        components.append(("grouping", grouping))
    if terminal is not None:
        components.append(("terminal", terminal))

    if not base.any():
        return AvailabilityResult(np.zeros_like(base), tuple(n for n, _ in components), False)

    for drop_bits in range(2 ** len(components)):
        mask = base
        dropped = []
        for idx, (name, comp) in enumerate(components):
            if drop_bits >> idx & 1:
                dropped.append(name)
            else:
                mask = mask & (comp > 0)
        if mask.any():
            return AvailabilityResult(mask.astype(np.uint8), tuple(dropped), True)
    # unreachable: dropping everything leaves base, which is nonempty
    raise AssertionError("relaxation exhausted with a nonempty position mask")


class RulePlugin:
    """Extension point for extra maskable rules.

    A plug-in names itself, says which blocks it constrains, builds a value
    mask, binarizes it, and reports a scalar metric of the current state.
    Its binarized mask joins the availability conjunction and is the first
    kind of mask the relaxation ladder gives up."""

    name = "plugin"

    def applies_to(self, state: FloorplanState, block_id: int) -> bool:
        raise NotImplementedError

    def build(self, state: FloorplanState, block_id: int) -> RuleMask:
        raise NotImplementedError

    def binarize(self, mask: RuleMask) -> np.ndarray:
        raise NotImplementedError

    def metric(self, state: FloorplanState) -> float:
        raise NotImplementedError


class BlockDistanceRule(RulePlugin):
    """Keep one block's center within max_distance of another's."""

    def __init__(self, anchor: int, subject: int, max_distance: float):
        self.anchor = anchor
        self.subject = subject
        self.max_distance = float(max_distance)
        self.name = f"block_distance[{subject}->{anchor}]"

    def applies_to(self, state, block_id):
        return block_id == self.subject and bool(state.placed[self.anchor])

    def build(self, state, block_id):
        return block_distance_mask(state, block_id, self.anchor)

    def binarize(self, mask):
        return _binarize_block_distance(mask.values, self.max_distance)

    def metric(self, state):
        if not (state.placed[self.anchor] and state.placed[self.subject]):
            return 0.0
        xa, ya, wa, ha = state.rect(self.anchor)
        xs, ys, ws, hs = state.rect(self.subject)
        return abs(xa + wa / 2.0 - xs - ws / 2.0) + abs(ya + ha / 2.0 - ys - hs / 2.0)


@dataclasses.dataclass(frozen=True)
class MaskStack:
    """Everything the mask machinery knows about placing one block: value
    masks per rule (None when the rule does not bind the block), their
    binarized forms, and the availability conjunction."""
    block: int
    wire: RuleMask
    position: RuleMask
    terminal: RuleMask | None
    grouping: RuleMask | None
    alignment: RuleMask | None
    plugin_masks: tuple[RuleMask, ...]
    availability: AvailabilityResult

    def named_value_masks(self) -> list[tuple[str, RuleMask]]:
        out = [("wire", self.wire), ("position", self.position)]
        for name, m in (("terminal", self.terminal), ("grouping", self.grouping),
                        ("alignment", self.alignment)):
            if m is not None:
                out.append((name, m))
        for m in self.plugin_masks:
            out.append((m.rule, m))
        return out


def compile_masks(state: FloorplanState, block_id: int, profile,
                  plugins: tuple = ()) -> MaskStack:
    """Build, merge and binarize every mask that applies to one block, then
    form the availability conjunction.

    Vacuous cases stay out of the conjunction: an island with no placed
    member and an alignment pair whose partner is still unplaced cannot
    constrain anything yet."""
    cons = state.circuit.constraints
    blocks = state.circuit.blocks
    dims = state.circuit.dims

    wire = wire_mask(state, block_id)
    position = position_mask(state, block_id)
    pos_bin = binarize(position)

    terminal = None
    term_bin = None
    if profile.uses("boundary"):
        binding = cons.binding_of(block_id)
        if binding is not None:
            per_term = [adjacent_terminal_mask(state, block_id, t)
                        for t in binding.terminals]
            terminal = merge_terminal_masks(per_term, binding.mode)
            term_bin = binarize(terminal, profile.terminal_mask_threshold)

    grouping = None
    group_bin = None
    if profile.uses("grouping"):
        island = cons.group_of(block_id)
        if island is not None:
            members = [adjacent_block_mask(state, block_id, m)
                       for m in island if m != block_id and state.placed[m]]
            grouping = merge_block_masks(members, dims, block_id)
            if members:
                group_bin = binarize(grouping, profile.block_mask_threshold)

    alignment = None
    align_bin = None
    if profile.uses("alignment"):
        per_pair = []
        for pair in cons.pairs_of(block_id):
            partner = pair.other(block_id)
            if not state.placed[partner]:
                continue
            m = alignment_mask(state, block_id, partner, pair.min_area)
            floor_area = profile.alignment_mask_frac * min(
                blocks[pair.a].area, blocks[pair.b].area)
            b = binarize(m, floor_area / pair.min_area)
            per_pair.append((m, b))
        if per_pair:
            vals = per_pair[0][0].values
            combined = per_pair[0][1]
            for m, b in per_pair[1:]:
                vals = np.maximum(vals, m.values)
                combined = combined & b
            alignment = RuleMask(vals, "alignment", block_id, merge="max")
            align_bin = combined

    plugin_masks = []
    extras = []
    for plugin in plugins:
        if not plugin.applies_to(state, block_id):
            continue
        m = plugin.build(state, block_id)
        plugin_masks.append(m)
        extras.append((plugin.name, plugin.binarize(m)))

    avail = availability_mask(pos_bin, terminal=term_bin, grouping=group_bin,
                              alignment=align_bin, extras=tuple(extras))
    return MaskStack(
        block=block_id,
        wire=wire,
        position=position,
        terminal=terminal,
        grouping=grouping,
        alignment=alignment,
        plugin_masks=tuple(plugin_masks),
        availability=avail,
    )
