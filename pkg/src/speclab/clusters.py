"""Tracking eigenvalues across increasing truncation sizes."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree


@dataclass
class Track:
    """One eigenvalue followed backwards from the finest level.

    ``path[i]`` is its position at level i, or None where the chain broke.
    """

    path: list[complex | None]

    @property
    def point(self) -> complex:
        return self.path[-1]

    @property
    def complete(self) -> bool:
        return all(p is not None for p in self.path)

    @property
    def drifts(self) -> list[float]:
        if not self.complete:
            return []
        return [abs(b - a) for a, b in zip(self.path, self.path[1:])]

    @property
    def stable(self) -> bool:
        """Matched at every level with non-increasing drift."""
        d = self.drifts
        if not self.complete:
            return False
        return all(later <= earlier + 1e-9 for earlier, later in zip(d, d[1:]))


def greedy_match(a, b, radius: float) -> dict[int, int]:
    """Pairs (index in b -> index in a), closest pairs first, each point used once."""
    a = np.asarray(a, dtype=np.complex128).ravel()
    b = np.asarray(b, dtype=np.complex128).ravel()
    if a.size == 0 or b.size == 0:
        return {}
    ta = cKDTree(np.c_[a.real, a.imag])
    tb = cKDTree(np.c_[b.real, b.imag])
    near = tb.query_ball_tree(ta, radius)
    ii = np.array([i for i, js in enumerate(near) for _ in js], dtype=int)
    jj = np.array([j for js in near for j in js], dtype=int)
    if ii.size == 0:
        return {}
    dist = np.abs(b[ii] - a[jj])
    # closest pairs first; index tie-breaks keep the result deterministic
    order = np.lexsort((jj, ii, dist))
    used_a, out = set(), {}
    for k in order:
        i, j = int(ii[k]), int(jj[k])
        if i in out or j in used_a:
            continue
        out[i] = j
        used_a.add(j)
    return out


def track_clusters(levels: list, radius: float) -> list[Track]:
    """Follow every eigenvalue of the last level back through the earlier levels."""
    if len(levels) < 2:
        raise ValueError("cluster tracking needs at least two levels")
    arrs = [np.asarray(v, dtype=np.complex128).ravel() for v in levels]
    tracks = [[None] * (len(arrs) - 1) + [complex(z)] for z in arrs[-1]]
    current = {i: i for i in range(arrs[-1].size)}  # track -> index in level L
    for L in range(len(arrs) - 1, 0, -1):
        alive = [t for t, idx in current.items() if idx is not None]
        pts = arrs[L][[current[t] for t in alive]] if alive else np.empty(0, complex)
        m = greedy_match(arrs[L - 1], pts, radius)
        nxt = {}
        for pos, t in enumerate(alive):
            j = m.get(pos)
            if j is not None:
                tracks[t][L - 1] = complex(arrs[L - 1][j])
            nxt[t] = j
        current = nxt
    return [Track(p) for p in tracks]
