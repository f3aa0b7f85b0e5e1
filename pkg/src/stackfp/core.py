"""Data model for stacked-die grid floorplans.

Coordinates are integer grid cells.  A block anchored at (x, y) covers the
half-open cell range [x, x+w) x [y, y+h), so two blocks abut exactly when one
anchor coordinate equals the other block's far edge.  Layers are indexed
0..num_layers-1 and blocks never move between layers during placement.
"""

import dataclasses
import math

import numpy as np

# Rule identifiers.  The last four are structural and can never be disabled.
RULE_BOUNDARY = "boundary"      # block must touch bound terminals
RULE_GROUPING = "grouping"      # island members must abut on their layer
RULE_ALIGNMENT = "alignment"    # cross-layer pairs need projected overlap
RULE_PREPLACE = "preplace"      # fixed blocks keep a given position/shape
RULE_OVERLAP = "overlap"        # no two blocks share a cell on a layer
RULE_OUTLINE = "outline"        # blocks stay inside the die outline
RULE_SHAPE = "shape"            # soft blocks keep their aspect-ratio band

ALL_RULES = frozenset({
    RULE_BOUNDARY, RULE_GROUPING, RULE_ALIGNMENT, RULE_PREPLACE,
    RULE_OVERLAP, RULE_OUTLINE, RULE_SHAPE,
})
COMMON_RULES = frozenset({RULE_ALIGNMENT, RULE_OVERLAP, RULE_OUTLINE, RULE_SHAPE})


class FloorplanError(Exception):
    """Base class for package errors."""


class InfeasibleError(FloorplanError):
    """No legal choice exists for the requested operation."""


def shape_from_ar(area: int, ar: float, ar_min: float, ar_max: float) -> tuple[int, int]:
    """Integer (w, h) realizing `area` at aspect ratio w/h as close to `ar` as
    the grid allows.  The ratio is clipped into [ar_min, ar_max] first; the
    height is rounded up so w*h covers the full area (slack is below one row).
    """
    if area <= 0:
        raise ValueError(f"block area must be positive, got {area}")
    if not (0 < ar_min <= ar_max):
        raise ValueError(f"bad aspect ratio band [{ar_min}, {ar_max}]")
    ratio = min(max(ar, ar_min), ar_max)
    w = max(1, math.floor(math.sqrt(area * ratio) + 0.5))
    h = max(1, -(-area // w))
    return w, h


@dataclasses.dataclass(frozen=True)
class GridDims:
    width: int
    height: int
    num_layers: int

    def __post_init__(self):
        if self.width < 1 or self.height < 1 or self.num_layers < 1:
            raise ValueError(f"degenerate grid {self.width}x{self.height}x{self.num_layers}")

    @property
    def cells_per_layer(self) -> int:
        return self.width * self.height


@dataclasses.dataclass(frozen=True)
class Block:
    id: int
    name: str
    area: int
    w: int                  # initial shape; soft blocks may be reshaped per episode
    h: int
    ar_min: float
    ar_max: float
    is_soft: bool
    z: int

    def __post_init__(self):
        if self.area <= 0 or self.w < 1 or self.h < 1:
            raise ValueError(f"block {self.name}: empty geometry")
        if self.is_soft and not (0 < self.ar_min <= self.ar_max):
            raise ValueError(f"block {self.name}: bad aspect band")


@dataclasses.dataclass(frozen=True)
class Terminal:
    id: int
    name: str
    x: int
    y: int
    z: int


@dataclasses.dataclass(frozen=True)
class Net:
    """Connection between blocks and terminals, referenced by id."""
    blocks: tuple[int, ...]
    terminals: tuple[int, ...] = ()

    def __post_init__(self):
        if not self.blocks and not self.terminals:
            raise ValueError("net with no members")
        if len(set(self.blocks)) != len(self.blocks) or len(set(self.terminals)) != len(self.terminals):
            raise ValueError("net lists a member twice")


@dataclasses.dataclass(frozen=True)
class AlignmentPair:
    """Two blocks on different layers whose footprints must overlap in
    projection by at least min_area cells (the score saturates there)."""
    a: int
    b: int
    min_area: float

    def __post_init__(self):
        if self.a == self.b:
            raise ValueError("alignment pair needs two distinct blocks")
        if self.min_area <= 0:
            raise ValueError("alignment min_area must be positive")

    def other(self, block_id: int) -> int:
        return self.b if block_id == self.a else self.a


@dataclasses.dataclass(frozen=True)
class BoundaryBinding:
    """Block that must touch terminals: all of them, or at least one."""
    block: int
    terminals: tuple[int, ...]
    mode: str = "ALL"       # "ALL" | "ANY"

    def __post_init__(self):
        if not self.terminals:
            raise ValueError("boundary binding without terminals")
        if self.mode not in ("ALL", "ANY"):
            raise ValueError(f"unknown binding mode {self.mode!r}")


@dataclasses.dataclass(frozen=True)
class Preplacement:
    block: int
    x: int
    y: int
    z: int
    w: int
    h: int


@dataclasses.dataclass(frozen=True)
class ConstraintSet:
    alignment_pairs: tuple[AlignmentPair, ...] = ()
    groups: tuple[tuple[int, ...], ...] = ()
    boundary_bindings: tuple[BoundaryBinding, ...] = ()
    preplacements: tuple[Preplacement, ...] = ()

    def validate(self, circuit: "Circuit") -> None:
        """Check structural consistency against a circuit; raises ValueError."""
        blocks = circuit.blocks
        n = len(blocks)
        for p in self.alignment_pairs:
            if not (0 <= p.a < n and 0 <= p.b < n):
                raise ValueError(f"alignment pair references unknown block ({p.a}, {p.b})")
            if blocks[p.a].z == blocks[p.b].z:
                raise ValueError(f"alignment pair ({p.a}, {p.b}) lies on one layer")
        seen_in_pair: set[int] = set()
        for p in self.alignment_pairs:
            for b in (p.a, p.b):
                if b in seen_in_pair:
                    raise ValueError(f"block {b} appears in two alignment pairs")
                seen_in_pair.add(b)
        seen_in_group: set[int] = set()
        for g in self.groups:
            if len(g) < 2:
                raise ValueError("group needs at least two members")
            for b in g:
                if not (0 <= b < n):
                    raise ValueError(f"group references unknown block {b}")
            zs = {blocks[b].z for b in g}
            if len(zs) != 1:
                raise ValueError(f"group {g} spans layers {sorted(zs)}")
            for b in g:
                if b in seen_in_group:
                    raise ValueError(f"block {b} appears in two groups")
                seen_in_group.add(b)
        bound = set()
        for bb in self.boundary_bindings:
            if not (0 <= bb.block < n):
                raise ValueError(f"binding references unknown block {bb.block}")
            if bb.block in bound:
                raise ValueError(f"block {bb.block} has two boundary bindings")
            bound.add(bb.block)
            for t in bb.terminals:
                if not (0 <= t < len(circuit.terminals)):
                    raise ValueError(f"binding references unknown terminal {t}")
        pre_ids = set()
        dims = circuit.dims
        for pp in self.preplacements:
            if not (0 <= pp.block < n):
                raise ValueError(f"preplacement references unknown block {pp.block}")
            if pp.block in pre_ids:
                raise ValueError(f"block {pp.block} preplaced twice")
            pre_ids.add(pp.block)
            if pp.x < 0 or pp.y < 0 or pp.x + pp.w > dims.width or pp.y + pp.h > dims.height:
                raise ValueError(f"preplacement of block {pp.block} leaves the outline")
            if not (0 <= pp.z < dims.num_layers):
                raise ValueError(f"preplacement of block {pp.block} on missing layer {pp.z}")
            if blocks[pp.block].z != pp.z:
                raise ValueError(f"preplacement of block {pp.block} disagrees with its layer")
        for i, p1 in enumerate(self.preplacements):
            for p2 in self.preplacements[i + 1:]:
                if p1.z != p2.z:
                    continue
                ox = min(p1.x + p1.w, p2.x + p2.w) - max(p1.x, p2.x)
                oy = min(p1.y + p1.h, p2.y + p2.h) - max(p1.y, p2.y)
                if ox > 0 and oy > 0:
                    raise ValueError(f"preplacements {p1.block} and {p2.block} collide")

    def group_of(self, block_id: int) -> tuple[int, ...] | None:
        for g in self.groups:
            if block_id in g:
                return g
        return None

    def pairs_of(self, block_id: int) -> list[AlignmentPair]:
        return [p for p in self.alignment_pairs if block_id in (p.a, p.b)]

    def binding_of(self, block_id: int) -> BoundaryBinding | None:
        for bb in self.boundary_bindings:
            if bb.block == block_id:
                return bb
        return None

    def preplacement_of(self, block_id: int) -> Preplacement | None:
        for pp in self.preplacements:
            if pp.block == block_id:
                return pp
        return None


@dataclasses.dataclass(frozen=True)
class TaskProfile:
    """Which rules constrain placement, plus mask thresholds and metric
    weights.  The four structural rules are always enabled."""
    enabled_rules: frozenset = COMMON_RULES
    terminal_mask_threshold: float = 0.0    # keep cells with distance <= this
    block_mask_threshold: float = 0.0       # 0 means strictly positive abutment
    alignment_mask_frac: float = 0.1        # of min pair area, as a score floor
    w_alignment: float = 0.5
    w_overlap: float = 0.5
    w_hpwl: float = 1.0
    w_adjacency: float = 4.0
    w_distance: float = 4.0

    def __post_init__(self):
        object.__setattr__(self, "enabled_rules", frozenset(self.enabled_rules))
        missing = COMMON_RULES - self.enabled_rules
        if missing:
            raise ValueError(f"structural rules cannot be disabled: {sorted(missing)}")
        unknown = self.enabled_rules - ALL_RULES
        if unknown:
            raise ValueError(f"unknown rules: {sorted(unknown)}")

    @classmethod
    def for_task(cls, task: int, **overrides) -> "TaskProfile":
        presets = {
            1: COMMON_RULES | {RULE_BOUNDARY},
            2: COMMON_RULES | {RULE_GROUPING},
            3: ALL_RULES,
        }
        if task not in presets:
            raise ValueError(f"task must be 1, 2 or 3, got {task}")
        return cls(enabled_rules=presets[task], **overrides)

    def uses(self, rule: str) -> bool:
        return rule in self.enabled_rules


@dataclasses.dataclass(frozen=True)
class Circuit:
    name: str
    dims: GridDims
    blocks: tuple[Block, ...]
    terminals: tuple[Terminal, ...]
    nets: tuple[Net, ...]
    constraints: ConstraintSet = ConstraintSet()
    utilization: float = 0.80

    def __post_init__(self):
        for i, b in enumerate(self.blocks):
            if b.id != i:
                raise ValueError(f"block ids must be 0..n-1 in order, found {b.id} at {i}")
            if not (0 <= b.z < self.dims.num_layers):
                raise ValueError(f"block {b.name} assigned to missing layer {b.z}")
        for i, t in enumerate(self.terminals):
            if t.id != i:
                raise ValueError(f"terminal ids must be 0..n-1 in order, found {t.id} at {i}")
        for net in self.nets:
            for b in net.blocks:
                if not (0 <= b < len(self.blocks)):
                    raise ValueError(f"net references unknown block {b}")
            for t in net.terminals:
                if not (0 <= t < len(self.terminals)):
                    raise ValueError(f"net references unknown terminal {t}")
        budget = self.utilization * self.dims.cells_per_layer * self.dims.num_layers
        total = sum(b.area for b in self.blocks)
        if total > budget:
            raise ValueError(
                f"total block area {total} exceeds utilization budget {budget:.1f}")
        self.constraints.validate(self)

    @property
    def num_blocks(self) -> int:
        return len(self.blocks)

    def mean_block_area(self) -> float:
        if not self.blocks:
            return 1.0
        return sum(b.area for b in self.blocks) / len(self.blocks)

    def with_constraints(self, constraints: ConstraintSet) -> "Circuit":
        return dataclasses.replace(self, constraints=constraints)


def default_order(circuit: Circuit, preplaced_first: bool = True) -> list[int]:
    """Placement order: preplaced blocks first, then by descending area,
    ties broken by block id."""
    pre = {pp.block for pp in circuit.constraints.preplacements} if preplaced_first else set()
    key = lambda b: (-b.area, b.id)
    head = sorted((b for b in circuit.blocks if b.id in pre), key=key)
    tail = sorted((b for b in circuit.blocks if b.id not in pre), key=key)
    return [b.id for b in head + tail]


class FloorplanState:
    """Mutable placement state over an immutable circuit.

    Block shapes live here because soft blocks are reshaped per episode.
    `order` is a permutation of all block ids and `cursor` the index of the
    next block to place; everything before the cursor is already down.
    """

    def __init__(self, circuit: Circuit, order: list[int] | None = None):
        self.circuit = circuit
        n = circuit.num_blocks
        if order is None:
            order = default_order(circuit)
        if sorted(order) != list(range(n)):
            raise ValueError("order must be a permutation of all block ids")
        self.order = list(order)
        self.cursor = 0
        self.x = np.zeros(n, dtype=np.int64)
        self.y = np.zeros(n, dtype=np.int64)
        self.w = np.array([b.w for b in circuit.blocks], dtype=np.int64)
        self.h = np.array([b.h for b in circuit.blocks], dtype=np.int64)
        self.placed = np.zeros(n, dtype=bool)

    def clone(self) -> "FloorplanState":
        dup = object.__new__(FloorplanState)
        dup.circuit = self.circuit
        dup.order = list(self.order)
        dup.cursor = self.cursor
        dup.x = self.x.copy()
        dup.y = self.y.copy()
        dup.w = self.w.copy()
        dup.h = self.h.copy()
        dup.placed = self.placed.copy()
        return dup

    @property
    def done(self) -> bool:
        return self.cursor >= len(self.order)

    @property
    def current_block(self) -> int:
        if self.done:
            raise InfeasibleError("all blocks are placed")
        return self.order[self.cursor]

    def rect(self, block_id: int) -> tuple[int, int, int, int]:
        return (int(self.x[block_id]), int(self.y[block_id]),
                int(self.w[block_id]), int(self.h[block_id]))

    def placed_ids(self) -> list[int]:
        return [int(i) for i in np.flatnonzero(self.placed)]

    def layer_rects(self, z: int, skip: int | None = None) -> list[tuple[int, int, int, int]]:
        """Rects of placed blocks on layer z, optionally skipping one block."""
        out = []
        for i in self.placed_ids():
            if i == skip or self.circuit.blocks[i].z != z:
                continue
            out.append(self.rect(i))
        return out

    def set_shape(self, block_id: int, ar: float) -> tuple[int, int]:
        blk = self.circuit.blocks[block_id]
        if self.placed[block_id]:
            raise ValueError(f"block {blk.name} is placed, cannot reshape")
        if not blk.is_soft:
            raise ValueError(f"block {blk.name} is hard, cannot reshape")
        w, h = shape_from_ar(blk.area, ar, blk.ar_min, blk.ar_max)
        self.w[block_id] = w
        self.h[block_id] = h
        return w, h

    def place(self, block_id: int, x: int, y: int, validate: bool = True) -> None:
        if self.placed[block_id]:
            raise ValueError(f"block {block_id} is already placed")
        if validate:
            dims = self.circuit.dims
            if x < 0 or y < 0 or x + self.w[block_id] > dims.width or y + self.h[block_id] > dims.height:
                raise ValueError(
                    f"block {block_id} at ({x},{y}) leaves the "
                    f"{dims.width}x{dims.height} outline")
        self.x[block_id] = x
        self.y[block_id] = y
        self.placed[block_id] = True

    def unplace(self, block_id: int) -> None:
        self.placed[block_id] = False

    def apply_preplacements(self) -> None:
        """Pin every preplaced block at its fixed spot and move those blocks
        to the front of the order; the cursor skips past them."""
        pres = self.circuit.constraints.preplacements
        if not pres:
            return
        pre_ids = [pp.block for pp in pres]
        rest = [b for b in self.order if b not in set(pre_ids)]
        ordered_pre = [b for b in self.order if b in set(pre_ids)]
        self.order = ordered_pre + rest
        for pp in pres:
            self.w[pp.block] = pp.w
            self.h[pp.block] = pp.h
            if self.circuit.blocks[pp.block].z != pp.z:
                raise ValueError(
                    f"preplacement of block {pp.block} disagrees with its layer")
            self.place(pp.block, pp.x, pp.y)
        self.cursor = len(ordered_pre)


def occupancy_grid(state: FloorplanState) -> np.ndarray:
    """Binary per-layer coverage, shape (num_layers, W, H), cell [z, x, y]."""
    dims = state.circuit.dims
    grid = np.zeros((dims.num_layers, dims.width, dims.height), dtype=np.uint8)
    for i in state.placed_ids():
        z = state.circuit.blocks[i].z
        x, y, w, h = state.rect(i)
        grid[z, max(0, x):max(0, x + w), max(0, y):max(0, y + h)] = 1
    return grid
