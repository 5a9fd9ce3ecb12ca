"""Brute-force reference computations used by the tests.

Nothing here calls into the package's area code; each oracle works from
raw pad parameters.
"""

import math

import numpy as np


def inside_pad(px, py, cx, cy, shape, w, h):
    """Boolean mask of sample points inside one pad outline."""
    dx, dy = np.abs(px - cx), np.abs(py - cy)
    if shape == "rectangle":
        return (dx <= w / 2) & (dy <= h / 2)
    r = min(w, h) / 2
    # stadium = points within r of the core segment; circles have a zero-length core
    ax, ay = w / 2 - r, h / 2 - r
    qx, qy = np.maximum(dx - ax, 0), np.maximum(dy - ay, 0)
    return qx * qx + qy * qy <= r * r


def sampled_union_area(pads, cell=1e-3, bounds=None):
    """Union area by testing cell centers on a regular grid of size ``cell``.

    ``pads`` are (cx, cy, shape, w, h) tuples.
    """
    if bounds is None:
        xmin = min(cx - w / 2 for cx, _, _, w, _ in pads)
        xmax = max(cx + w / 2 for cx, _, _, w, _ in pads)
        ymin = min(cy - h / 2 for _, cy, _, _, h in pads)
        ymax = max(cy + h / 2 for _, cy, _, _, h in pads)
    else:
        xmin, ymin, xmax, ymax = bounds
    nx = int(math.ceil((xmax - xmin) / cell))
    ny = int(math.ceil((ymax - ymin) / cell))
    xs = xmin + (np.arange(nx) + 0.5) * cell
    total = 0
    # row blocks keep memory flat
    for j0 in range(0, ny, 512):
        ys = ymin + (np.arange(j0, min(ny, j0 + 512)) + 0.5) * cell
        px, py = np.meshgrid(xs, ys)
        hit = np.zeros(px.shape, bool)
        for cx, cy, shape, w, h in pads:
            hit |= inside_pad(px, py, cx, cy, shape, w, h)
        total += int(hit.sum())
    return total * cell * cell


def sampled_iou(pred, truth, cell=1e-3):
    pads = list(pred) + list(truth)
    xmin = min(cx - w / 2 for cx, _, _, w, _ in pads)
    xmax = max(cx + w / 2 for cx, _, _, w, _ in pads)
    ymin = min(cy - h / 2 for _, cy, _, _, h in pads)
    ymax = max(cy + h / 2 for _, cy, _, _, h in pads)
    b = (xmin, ymin, xmax, ymax)
    a, t, u = (sampled_union_area(p, cell, b) for p in (pred, truth, pads))
    return (a + t - u) / u


def center_count_area(rects, n=2000):
    """Cells of an n x n grid over the rectangles' bounding box whose center is covered."""
    r = np.asarray(rects, float)
    x0, y0 = r[:, 0].min(), r[:, 1].min()
    cx, cy = (r[:, 2].max() - x0) / n, (r[:, 3].max() - y0) / n
    xs = x0 + (np.arange(n) + 0.5) * cx
    ys = y0 + (np.arange(n) + 0.5) * cy
    g = np.zeros((n, n), bool)
    for a, b, c, d in r:
        g[np.searchsorted(ys, b) : np.searchsorted(ys, d), np.searchsorted(xs, a) : np.searchsorted(xs, c)] = True
    return float(g.sum()) * cx * cy


def _cell_cover(lo, hi, origin, size, n):
    a, b = (lo - origin) / size, (hi - origin) / size
    i0, i1 = max(int(math.floor(a)), 0), min(int(math.ceil(b)), n)
    k = np.arange(i0, i1)
    return i0, i1, np.clip(np.minimum(k + 1, b) - np.maximum(k, a), 0.0, 1.0)


def coverage_grid_area(rects, n=2000):
    """Union area on an n x n grid over the bounding box, each cell weighted by
    its covered fraction.

    Boundary cells count their exact covered share instead of 0 or 1, so the
    only residual error comes from cells holding edges of two different
    rectangles.
    """
    r = np.asarray(rects, float)
    x0, y0 = r[:, 0].min(), r[:, 1].min()
    cx, cy = (r[:, 2].max() - x0) / n, (r[:, 3].max() - y0) / n
    g = np.zeros((n, n), np.float32)
    for a, b, c, d in r:
        i0, i1, fx = _cell_cover(a, c, x0, cx, n)
        j0, j1, fy = _cell_cover(b, d, y0, cy, n)
        block = g[j0:j1, i0:i1]
        np.maximum(block, np.outer(fy, fx).astype(np.float32), out=block)
    return float(g.sum(dtype=np.float64)) * cx * cy


def circle_lens_iou(d, offset):
    """IoU of two equal circles of diameter ``d`` with centers ``offset`` apart."""
    r = d / 2
    if offset >= d:
        return 0.0
    lens = 2 * r * r * math.acos(offset / (2 * r)) - offset / 2 * math.sqrt(4 * r * r - offset * offset)
    return lens / (2 * math.pi * r * r - lens)


def stadium_area(w, h):
    r = min(w, h) / 2
    return w * h - (4 - math.pi) * r * r
