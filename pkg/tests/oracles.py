"""Brute-force reference implementations used to cross-check the package.

Everything here works on plain tuples and explicit cell enumeration, never on
the package's own vectorized code paths.  Rectangles are (x, y, w, h) anchored
at their lower-left cell; a rect covers the half-open cell range
[x, x+w) x [y, y+h).
"""

from fractions import Fraction


def rasterize(rects, width, height):
    """Boolean coverage grid, grid[x][y] = True iff some rect covers the cell."""
    grid = [[False] * height for _ in range(width)]
    for (x, y, w, h) in rects:
        for cx in range(max(0, x), min(width, x + w)):
            for cy in range(max(0, y), min(height, y + h)):
                grid[cx][cy] = True
    return grid


def covered_cells(grid):
    return sum(1 for col in grid for v in col if v)


def overlap_cells(r1, r2):
    """Shared cell count of two rects, by enumerating cells of the first."""
    x1, y1, w1, h1 = r1
    x2, y2, w2, h2 = r2
    count = 0
    for cx in range(x1, x1 + w1):
        for cy in range(y1, y1 + h1):
            if x2 <= cx < x2 + w2 and y2 <= cy < y2 + h2:
                count += 1
    return count


def interval_overlap(a0, a1, b0, b1):
    """Length of [a0,a1) & [b0,b1) by integer enumeration."""
    return sum(1 for v in range(min(a0, b0), max(a1, b1)) if a0 <= v < a1 and b0 <= v < b1)


def adjacency_length(r1, r2):
    """Shared abutment length of two rects on a common layer.

    Abutment in x (one rect's right edge meets the other's left edge) counts
    the y-interval overlap, abutment in y counts the x-interval overlap, any
    other arrangement counts zero.  A corner touch yields zero because the
    facing interval overlap is empty.
    """
    x1, y1, w1, h1 = r1
    x2, y2, w2, h2 = r2
    if x1 + w1 == x2 or x2 + w2 == x1:
        return interval_overlap(y1, y1 + h1, y2, y2 + h2)
    if y1 + h1 == y2 or y2 + h2 == y1:
        return interval_overlap(x1, x1 + w1, x2, x2 + w2)
    return 0


def edge_cells(rect):
    """All cells on the four one-cell-wide edges of a rect."""
    x, y, w, h = rect
    cells = set()
    for cx in range(x, x + w):
        cells.add((cx, y))
        cells.add((cx, y + h - 1))
    for cy in range(y, y + h):
        cells.add((x, cy))
        cells.add((x + w - 1, cy))
    return cells


def terminal_distance(rect, tx, ty):
    """Min Manhattan distance from the terminal to any edge cell of the rect."""
    return min(abs(tx - cx) + abs(ty - cy) for (cx, cy) in edge_cells(rect))


def alignment_fraction(r1, r2, min_area):
    """Projected-intersection score capped at 1, computed on rasterized cells."""
    inter = overlap_cells((r1[0], r1[1], r1[2], r1[3]), (r2[0], r2[1], r2[2], r2[3]))
    return min(1.0, inter / min_area)


def hpwl(points_by_net):
    """Half-perimeter wirelength over nets given as lists of (x, y) points."""
    total = 0.0
    for pts in points_by_net:
        if not pts:
            continue
        xs = [p[0] for p in pts]
        ys = [p[1] for p in pts]
        total += (max(xs) - min(xs)) + (max(ys) - min(ys))
    return total


def position_ok(rect, width, height, placed_same_layer):
    """True iff rect is fully on the grid and collides with no placed rect."""
    x, y, w, h = rect
    if x < 0 or y < 0 or x + w > width or y + h > height:
        return False
    return all(overlap_cells(rect, other) == 0 for other in placed_same_layer)


def center_distance(r1, r2):
    """Manhattan distance between rect centers, exact via Fractions."""
    c1x = Fraction(2 * r1[0] + r1[2], 2)
    c1y = Fraction(2 * r1[1] + r1[3], 2)
    c2x = Fraction(2 * r2[0] + r2[2], 2)
    c2y = Fraction(2 * r2[1] + r2[3], 2)
    return float(abs(c1x - c2x) + abs(c1y - c2y))
