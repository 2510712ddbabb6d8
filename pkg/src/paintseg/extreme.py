"""Extreme-click trimap construction and the rectangle baseline.

Four clicks (top/bottom/left/right of a region) define a tight box. A
Sobel edge-probability map turns boundary tracing into a shortest-path
problem; the four minimum-cost paths between consecutive clicks enclose
a pseudo-mask whose skeleton, together with the clicks and their
centroid, is clamped to definite foreground.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit
from scipy import ndimage

from .errors import BoxOutOfBounds, ClicksOutOfBounds, PointOutsideBox
from .raster import BinaryMask, RasterImage, Trimap, TrimapLabel, to_grayscale

PROB_FLOOR = 1e-3

_FOUR_CONN = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)


@dataclass(frozen=True)
class Box:
    """Inclusive pixel rectangle."""

    x0: int
    y0: int
    x1: int
    y1: int

    def __post_init__(self):
        if self.x1 < self.x0 or self.y1 < self.y0:
            raise ValueError("empty box")

    @property
    def width(self) -> int:
        return self.x1 - self.x0 + 1

    @property
    def height(self) -> int:
        return self.y1 - self.y0 + 1

    def contains(self, x: int, y: int) -> bool:
        return self.x0 <= x <= self.x1 and self.y0 <= y <= self.y1


@dataclass(frozen=True)
class ExtremeClicks:
    top: tuple[int, int]
    bottom: tuple[int, int]
    left: tuple[int, int]
    right: tuple[int, int]

    def __post_init__(self):
        if self.top[1] > self.bottom[1]:
            raise ValueError("top click below bottom click")
        if self.left[0] > self.right[0]:
            raise ValueError("left click right of right click")

    def bounding_box(self) -> Box:
        xs = [p[0] for p in self.points()]
        ys = [p[1] for p in self.points()]
        return Box(min(xs), min(ys), max(xs), max(ys))

    def points(self) -> tuple[tuple[int, int], ...]:
        return (self.top, self.bottom, self.left, self.right)

    def centroid(self) -> tuple[int, int]:
        xs = [p[0] for p in self.points()]
        ys = [p[1] for p in self.points()]
        return (
            int(math.floor(sum(xs) / 4.0 + 0.5)),
            int(math.floor(sum(ys) / 4.0 + 0.5)),
        )


@dataclass(frozen=True)
class EdgeProbabilityMap:
    width: int
    height: int
    prob: np.ndarray = field(repr=False)  # (h, w) in [PROB_FLOOR, 1]


@dataclass(frozen=True)
class BoundaryPath:
    nodes: tuple[tuple[int, int], ...]
    cost: float


def edge_probability(image: RasterImage) -> EdgeProbabilityMap:
    """Sobel gradient magnitude on luma, peak-normalized, floored at 1e-3."""
    luma = to_grayscale(image)
    p = np.pad(luma, 1, mode="edge")
    gx = (
        (p[:-2, 2:] + 2.0 * p[1:-1, 2:] + p[2:, 2:])
        - (p[:-2, :-2] + 2.0 * p[1:-1, :-2] + p[2:, :-2])
    )
    gy = (
        (p[2:, :-2] + 2.0 * p[2:, 1:-1] + p[2:, 2:])
        - (p[:-2, :-2] + 2.0 * p[:-2, 1:-1] + p[:-2, 2:])
    )
    mag = np.hypot(gx, gy)
    peak = mag.max()
    if peak <= 0.0:
        prob = np.full_like(mag, PROB_FLOOR)
    else:
        prob = np.clip(mag / peak, PROB_FLOOR, 1.0)
    return EdgeProbabilityMap(width=image.width, height=image.height, prob=prob)


@njit(cache=True, nogil=True)
def _dijkstra(cost, bw, bh, start, goal):  # pragma: no cover - jitted
    n = bw * bh
    dist = np.full(n, np.inf)
    parent = np.full(n, -1, dtype=np.int64)
    done = np.zeros(n, dtype=np.bool_)
    cap = 8 * n + 16
    hkey = np.empty(cap)
    hidx = np.empty(cap, dtype=np.int64)
    size = 0

    dx = np.array([1, -1, 0, 0, 1, -1, -1, 1], dtype=np.int64)
    dy = np.array([0, 0, 1, -1, 1, -1, 1, -1], dtype=np.int64)

    dist[start] = cost[start]
    hkey[size] = dist[start]
    hidx[size] = start
    size += 1

    while size > 0:
        # pop lexicographic (key, idx) minimum
        kk = hkey[0]
        p = hidx[0]
        size -= 1
        hkey[0] = hkey[size]
        hidx[0] = hidx[size]
        i = 0
        while True:
            l = 2 * i + 1
            r = l + 1
            m = i
            if l < size and (
                hkey[l] < hkey[m] or (hkey[l] == hkey[m] and hidx[l] < hidx[m])
            ):
                m = l
            if r < size and (
                hkey[r] < hkey[m] or (hkey[r] == hkey[m] and hidx[r] < hidx[m])
            ):
                m = r
            if m == i:
                break
            hkey[i], hkey[m] = hkey[m], hkey[i]
            hidx[i], hidx[m] = hidx[m], hidx[i]
            i = m
        if done[p] or kk > dist[p]:
            continue
        done[p] = True
        if p == goal:
            break
        px = p % bw
        py = p // bw
        for d in range(8):
            nx = px + dx[d]
            ny = py + dy[d]
            if nx < 0 or nx >= bw or ny < 0 or ny >= bh:
                continue
            q = ny * bw + nx
            if done[q]:
                continue
            nd = dist[p] + cost[q]
            if nd < dist[q]:
                dist[q] = nd
                parent[q] = p
                # sift up
                j = size
                hkey[j] = nd
                hidx[j] = q
                size += 1
                while j > 0:
                    pa = (j - 1) // 2
                    if hkey[pa] > hkey[j] or (
                        hkey[pa] == hkey[j] and hidx[pa] > hidx[j]
                    ):
                        hkey[pa], hkey[j] = hkey[j], hkey[pa]
                        hidx[pa], hidx[j] = hidx[j], hidx[pa]
                        j = pa
                    else:
                        break
    return dist[goal], parent


def min_cost_path(
    costs: EdgeProbabilityMap,
    a: tuple[int, int],
    b: tuple[int, int],
    box: Box,
) -> BoundaryPath:
    """Dijkstra over 8-connected pixels inside the box; node cost -log prob."""
    if box.x0 < 0 or box.y0 < 0 or box.x1 >= costs.width or box.y1 >= costs.height:
        raise BoxOutOfBounds(f"box {box} exceeds {costs.width}x{costs.height} map")
    for pt in (a, b):
        if not box.contains(*pt):
            raise PointOutsideBox(f"point {pt} outside box {box}")
    sub = costs.prob[box.y0 : box.y1 + 1, box.x0 : box.x1 + 1]
    node_cost = -np.log(np.ascontiguousarray(sub, dtype=np.float64)).reshape(-1)
    bw, bh = box.width, box.height
    start = (a[1] - box.y0) * bw + (a[0] - box.x0)
    goal = (b[1] - box.y0) * bw + (b[0] - box.x0)
    if start == goal:
        return BoundaryPath(nodes=(a,), cost=float(node_cost[start]))
    total, parent = _dijkstra(node_cost, bw, bh, start, goal)
    rev = []
    p = goal
    while p != -1:
        rev.append((p % bw + box.x0, p // bw + box.y0))
        p = parent[p] if p != start else -1
    rev.reverse()
    return BoundaryPath(nodes=tuple(rev), cost=float(total))


def pseudo_mask(
    paths: list[BoundaryPath],
    clicks: ExtremeClicks,
    box: Box,
    width: int,
    height: int,
) -> BinaryMask:
    """Flood fill of the click centroid bounded by the path union.

    Degenerate boundaries (centroid on the paths, or fill leaking to the
    box border) fall back to the whole box.
    """
    boundary = np.zeros((height, width), dtype=bool)
    for path in paths:
        for x, y in path.nodes:
            boundary[y, x] = True

    full_box = np.zeros((height, width), dtype=bool)
    full_box[box.y0 : box.y1 + 1, box.x0 : box.x1 + 1] = True

    cx, cy = clicks.centroid()
    if not box.contains(cx, cy) or boundary[cy, cx]:
        return BinaryMask.from_array(full_box)

    open_in_box = full_box & ~boundary
    comp, _ = ndimage.label(open_in_box, structure=_FOUR_CONN)
    fill = comp == comp[cy, cx]

    border = np.zeros((height, width), dtype=bool)
    border[box.y0, box.x0 : box.x1 + 1] = True
    border[box.y1, box.x0 : box.x1 + 1] = True
    border[box.y0 : box.y1 + 1, box.x0] = True
    border[box.y0 : box.y1 + 1, box.x1] = True
    if (fill & border).any():
        return BinaryMask.from_array(full_box)
    return BinaryMask.from_array(fill | boundary)


def _erode(m: np.ndarray) -> np.ndarray:
    p = np.pad(m, 1, constant_values=False)
    return p[1:-1, 1:-1] & p[:-2, 1:-1] & p[2:, 1:-1] & p[1:-1, :-2] & p[1:-1, 2:]


def _dilate(m: np.ndarray) -> np.ndarray:
    p = np.pad(m, 1, constant_values=False)
    return p[1:-1, 1:-1] | p[:-2, 1:-1] | p[2:, 1:-1] | p[1:-1, :-2] | p[1:-1, 2:]


def morphological_skeleton(mask: BinaryMask) -> BinaryMask:
    """Lantuejoul skeleton with the 3x3 cross: union of erode^k minus its opening."""
    eroded = mask.bits.copy()
    skel = np.zeros_like(eroded)
    while eroded.any():
        skel |= eroded & ~_dilate(_erode(eroded))
        eroded = _erode(eroded)
    return BinaryMask.from_array(skel)


def build_trimap_extr(
    image: RasterImage,
    clicks: ExtremeClicks,
    edges: EdgeProbabilityMap | None = None,
) -> Trimap:
    """Trimap with the pseudo-mask skeleton, clicks and centroid clamped FG."""
    for x, y in clicks.points():
        if not (0 <= x < image.width and 0 <= y < image.height):
            raise ClicksOutOfBounds(
                f"click ({x},{y}) outside {image.width}x{image.height}"
            )
    box = clicks.bounding_box()
    if edges is None:
        edges = edge_probability(image)
    order = [clicks.top, clicks.right, clicks.bottom, clicks.left, clicks.top]
    paths = [min_cost_path(edges, order[i], order[i + 1], box) for i in range(4)]
    pseudo = pseudo_mask(paths, clicks, box, image.width, image.height)

    labels = np.full(
        (image.height, image.width), TrimapLabel.DEFINITE_BG, dtype=np.uint8
    )
    in_box = np.zeros_like(labels, dtype=bool)
    in_box[box.y0 : box.y1 + 1, box.x0 : box.x1 + 1] = True
    labels[in_box & pseudo.bits] = TrimapLabel.PROBABLE_FG
    labels[in_box & ~pseudo.bits] = TrimapLabel.PROBABLE_BG

    clamp = morphological_skeleton(pseudo).bits.copy()
    for x, y in clicks.points():
        clamp[y, x] = True
    cx, cy = clicks.centroid()
    clamp[cy, cx] = True
    labels[clamp] = TrimapLabel.DEFINITE_FG
    return Trimap.from_array(labels)


def build_trimap_rect(box: Box, width: int, height: int) -> Trimap:
    """Rectangle baseline: probable foreground inside, definite background out."""
    if box.x0 < 0 or box.y0 < 0 or box.x1 >= width or box.y1 >= height:
        raise BoxOutOfBounds(f"box {box} exceeds {width}x{height} canvas")
    labels = np.full((height, width), TrimapLabel.DEFINITE_BG, dtype=np.uint8)
    labels[box.y0 : box.y1 + 1, box.x0 : box.x1 + 1] = TrimapLabel.PROBABLE_FG
    return Trimap.from_array(labels)
