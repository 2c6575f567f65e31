# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled voxel traversal kernel.

Arithmetic mirrors ``_traverse_py`` operation for operation so both backends
return identical keys.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport floor, INFINITY

cnp.import_array()


cdef inline long long _iabs(long long v) nogil:
    return -v if v < 0 else v


def traverse_rays(const double[:, ::1] origins, const double[:, ::1] endpoints, double resolution):
    cdef Py_ssize_t n = origins.shape[0]
    cdef Py_ssize_t b, a, s, total = 0, pos
    cdef double g0[3]
    cdef double g1[3]
    cdef double d[3]
    cdef double tmax[3]
    cdef double tdelta[3]
    cdef long long cur[3]
    cdef long long step[3]
    cdef long long rem[3]
    cdef long long nsteps
    cdef double best

    end_keys = np.empty((n, 3), dtype=np.int32)
    counts = np.empty(n, dtype=np.int64)
    cdef int[:, ::1] ek = end_keys
    cdef long long[::1] cnt = counts

    with nogil:
        for b in range(n):
            nsteps = 0
            for a in range(3):
                ek[b, a] = <int>floor(endpoints[b, a] / resolution)
                nsteps += _iabs(<long long>ek[b, a] - <long long>floor(origins[b, a] / resolution))
            cnt[b] = nsteps
            total += nsteps

    keys = np.empty((total, 3), dtype=np.int32)
    beam_index = np.empty(total, dtype=np.int64)
    cdef int[:, ::1] kv = keys
    cdef long long[::1] bi = beam_index

    with nogil:
        pos = 0
        for b in range(n):
            for a in range(3):
                g0[a] = origins[b, a] / resolution
                g1[a] = endpoints[b, a] / resolution
                d[a] = g1[a] - g0[a]
                cur[a] = <long long>floor(g0[a])
                rem[a] = _iabs(<long long>ek[b, a] - cur[a])
                if d[a] > 0.0:
                    step[a] = 1
                    tmax[a] = (<double>(cur[a] + 1) - g0[a]) / d[a]
                    tdelta[a] = 1.0 / d[a]
                elif d[a] < 0.0:
                    step[a] = -1
                    tmax[a] = (<double>cur[a] - g0[a]) / d[a]
                    tdelta[a] = -1.0 / d[a]
                else:
                    step[a] = 0
                    tmax[a] = INFINITY
                    tdelta[a] = INFINITY
            for s in range(cnt[b]):
                kv[pos, 0] = <int>cur[0]
                kv[pos, 1] = <int>cur[1]
                kv[pos, 2] = <int>cur[2]
                bi[pos] = b
                pos += 1
                # smallest crossing among axes that still owe a step; ties -> lowest axis
                best = INFINITY
                a = -1
                if rem[0] > 0 and (a < 0 or tmax[0] < best):
                    best = tmax[0]
                    a = 0
                if rem[1] > 0 and (a < 0 or tmax[1] < best):
                    best = tmax[1]
                    a = 1
                if rem[2] > 0 and (a < 0 or tmax[2] < best):
                    best = tmax[2]
                    a = 2
                cur[a] += step[a] if step[a] != 0 else (1 if ek[b, a] > cur[a] else -1)
                tmax[a] += tdelta[a]
                rem[a] -= 1

    return keys, beam_index, end_keys
