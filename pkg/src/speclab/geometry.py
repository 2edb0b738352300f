"""Point-to-polyline distances in the complex plane."""

from __future__ import annotations

import numpy as np


def polyline_distance(points, vertices, *, closed: bool = False, chunk: int = 256):
    """Distance from each point to a polyline, plus the length of the nearest segment.

    ``vertices`` are complex; with ``closed=True`` the last vertex joins the first.
    """
    z = np.atleast_1d(np.asarray(points, dtype=np.complex128)).ravel()
    v = np.asarray(vertices, dtype=np.complex128).ravel()
    if v.size == 1:
        return np.abs(z - v[0]), np.zeros(z.size)
    a = v if closed else v[:-1]
    b = np.roll(v, -1) if closed else v[1:]
    seg = b - a
    seglen2 = np.abs(seg) ** 2
    dist = np.empty(z.size)
    near = np.empty(z.size)
    for lo in range(0, z.size, chunk):
        zz = z[lo:lo + chunk, None]
        with np.errstate(invalid="ignore", divide="ignore"):
            t = ((zz - a) * np.conj(seg)).real / seglen2
        t = np.clip(np.nan_to_num(t), 0.0, 1.0)
        d = np.abs(zz - (a + t * seg))
        k = np.argmin(d, axis=1)
        dist[lo:lo + chunk] = d[np.arange(d.shape[0]), k]
        near[lo:lo + chunk] = np.sqrt(seglen2[k])
    return dist, near
