"""Zero-level extraction on rectilinear grids by marching squares."""

from __future__ import annotations

import numpy as np

# edge ids inside a cell: 0 bottom (i0,j0)-(i0,j1), 1 right (i0,j1)-(i1,j1),
# 2 top (i1,j0)-(i1,j1), 3 left (i0,j0)-(i1,j0); rows are y, columns x.
_CASES = {
    0: (),
    1: ((3, 0),),
    2: ((0, 1),),
    3: ((3, 1),),
    4: ((1, 2),),
    6: ((0, 2),),
    7: ((3, 2),),
    8: ((2, 3),),
    9: ((2, 0),),
    11: ((2, 1),),
    12: ((1, 3),),
    13: ((1, 0),),
    14: ((0, 3),),
    15: (),
}


def _edge_key(i, j, edge):
    # canonical global edge identity so neighbouring cells share vertices
    if edge == 0:
        return ("h", i, j)
    if edge == 2:
        return ("h", i + 1, j)
    if edge == 3:
        return ("v", i, j)
    return ("v", i, j + 1)


def _interp(x, y, values, key, level):
    kind, i, j = key
    if kind == "h":
        a, b = values[i, j], values[i, j + 1]
        t = 0.5 if a == b else (level - a) / (b - a)
        return (x[j] + t * (x[j + 1] - x[j]), y[i])
    a, b = values[i, j], values[i + 1, j]
    t = 0.5 if a == b else (level - a) / (b - a)
    return (x[j], y[i] + t * (y[i + 1] - y[i]))


def marching_squares(x, y, values, level: float = 0.0) -> list[np.ndarray]:
    """Polylines of ``values == level`` for ``values[i, j]`` at ``(x[j], y[i])``.

    Saddle cells are resolved by the sign of the cell-average. Each polyline
    is an ``(n, 2)`` array of ``(x, y)`` points; closed loops repeat their
    first point at the end.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    v = np.asarray(values, dtype=float)
    if v.shape != (len(y), len(x)):
        raise ValueError(f"values shape {v.shape} does not match grid ({len(y)}, {len(x)})")
    above = v >= level
    cases = (
        above[:-1, :-1].astype(np.int8)
        | above[:-1, 1:].astype(np.int8) << 1
        | above[1:, 1:].astype(np.int8) << 2
        | above[1:, :-1].astype(np.int8) << 3
    )
    segments = []
    for i, j in zip(*np.nonzero((cases != 0) & (cases != 15))):
        case = int(cases[i, j])
        if case in (5, 10):
            centre = 0.25 * (v[i, j] + v[i, j + 1] + v[i + 1, j] + v[i + 1, j + 1]) >= level
            # the centre sign decides which diagonal pair of corners stays connected
            if case == 5:
                pairs = ((0, 1), (2, 3)) if centre else ((3, 0), (1, 2))
            else:
                pairs = ((3, 0), (1, 2)) if centre else ((0, 1), (2, 3))
        else:
            pairs = _CASES[case]
        for ea, eb in pairs:
            segments.append((_edge_key(i, j, ea), _edge_key(i, j, eb)))
    return [np.array([_interp(x, y, v, key, level) for key in chain]) for chain in _chain(segments)]


def _chain(segments):
    adjacency: dict = {}
    for idx, (a, b) in enumerate(segments):
        adjacency.setdefault(a, []).append(idx)
        adjacency.setdefault(b, []).append(idx)
    used = [False] * len(segments)

    def walk(start_key, first_idx):
        chain = [start_key]
        idx, key = first_idx, start_key
        while idx is not None:
            used[idx] = True
            a, b = segments[idx]
            key = b if a == key else a
            chain.append(key)
            idx = next((n for n in adjacency[key] if not used[n]), None)
        return chain

    chains = []
    # open chains start at vertices of odd degree (grid boundary)
    for key, members in adjacency.items():
        if len(members) == 1 and not used[members[0]]:
            chains.append(walk(key, members[0]))
    for idx in range(len(segments)):
        if not used[idx]:
            chains.append(walk(segments[idx][0], idx))
    return chains


def polylines_to_nan_separated(polylines) -> np.ndarray:
    """Stack polylines into one array with ``NaN`` rows between them."""
    if not polylines:
        return np.empty((0, 2))
    parts = []
    for line in polylines:
        if parts:
            parts.append(np.full((1, 2), np.nan))
        parts.append(np.asarray(line, dtype=float))
    return np.vstack(parts)
