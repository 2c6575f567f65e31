"""Vectorized numpy voxel traversal, used when the compiled kernel is absent.

All beams advance one voxel per iteration; a beam whose start and end keys
differ by a Manhattan distance of n emits exactly n keys (start included,
end excluded), so the walk always terminates on the end voxel.
"""

import numpy as np


def traverse_rays(origins, endpoints, resolution):
    origins = np.ascontiguousarray(origins, dtype=np.float64)
    endpoints = np.ascontiguousarray(endpoints, dtype=np.float64)
    g0 = origins / resolution
    g1 = endpoints / resolution
    d = g1 - g0
    cur = np.floor(g0).astype(np.int64)
    end = np.floor(g1).astype(np.int64)
    rem = np.abs(end - cur)
    counts = rem.sum(axis=1)
    total = int(counts.sum())

    step = np.sign(d).astype(np.int64)
    with np.errstate(divide="ignore", invalid="ignore"):
        tmax = np.where(
            d > 0.0,
            ((cur + 1).astype(np.float64) - g0) / d,
            np.where(d < 0.0, (cur.astype(np.float64) - g0) / d, np.inf),
        )
        tdelta = np.where(d > 0.0, 1.0 / d, np.where(d < 0.0, -1.0 / d, np.inf))
    # float drift can leave an axis with remaining steps but zero direction
    step = np.where((step == 0) & (rem > 0), np.sign(end - cur), step)

    keys = np.empty((total, 3), dtype=np.int32)
    beam_index = np.empty(total, dtype=np.int64)
    offsets = np.concatenate(([0], np.cumsum(counts)))
    active = np.flatnonzero(counts > 0)
    s = 0
    while active.size:
        slot = offsets[active] + s
        keys[slot] = cur[active]
        beam_index[slot] = active
        owed = rem[active] > 0
        # argmin picks the lowest axis on ties; axes with nothing owed are skipped
        t_masked = np.where(owed, tmax[active], np.inf)
        first_owed = np.argmax(owed, axis=1)
        ax = np.argmin(t_masked, axis=1)
        all_inf = ~np.isfinite(t_masked[np.arange(active.size), ax])
        ax = np.where(all_inf, first_owed, ax)
        cur[active, ax] += step[active, ax]
        tmax[active, ax] += tdelta[active, ax]
        rem[active, ax] -= 1
        s += 1
        active = active[counts[active] > s]

    return keys, beam_index, end.astype(np.int32)
