# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled twins of the kernels in ``_pykernels``."""
import numpy as np

cdef inline long long _abs16(long long word) nogil:
    word &= 0xFFFF
    if word >> 15 == 1:
        word = (~word + 1) & 0xFFFF
    return word


def abs16(long long word):
    return _abs16(word)


def l1_step(long long x, long long y, long long z,
            long long old_x, long long old_y, long long old_z):
    return _abs16(x - old_x) + _abs16(y - old_y) + _abs16(z - old_z)


def deadband_step(long long x, long long y, long long z,
                  long long old_x, long long old_y, long long old_z,
                  long long threshold):
    return _abs16(x - old_x) + _abs16(y - old_y) + _abs16(z - old_z) > threshold


def deadband_run(coords, long long threshold, old=(0, 0, 0), bint initialized=False):
    cdef long long[:, ::1] c = np.ascontiguousarray(coords, dtype=np.int64)
    cdef Py_ssize_t n = c.shape[0]
    out_arr = np.zeros(n, dtype=np.uint8)
    cdef unsigned char[::1] out = out_arr
    cdef long long ox = old[0], oy = old[1], oz = old[2]
    cdef Py_ssize_t i, start = 0
    if not initialized and n:
        ox = c[0, 0]
        oy = c[0, 1]
        oz = c[0, 2]
        out[0] = 1
        start = 1
    with nogil:
        for i in range(start, n):
            if (_abs16(c[i, 0] - ox) + _abs16(c[i, 1] - oy)
                    + _abs16(c[i, 2] - oz)) > threshold:
                ox = c[i, 0]
                oy = c[i, 1]
                oz = c[i, 2]
                out[i] = 1
    return out_arr, (ox, oy, oz)


def edge_sensors(readings, long long threshold):
    cdef Py_ssize_t n = len(readings), i
    cdef Py_ssize_t se = n - 1, es = 0
    cdef long long[16] buf
    if n > 16:
        raise ValueError("at most 16 FSR readings supported")
    for i in range(n):
        buf[i] = readings[i]
    for i in range(n):
        se = i
        if buf[i] > threshold:
            break
    for i in range(n - 1, -1, -1):
        es = i
        if buf[i] > threshold:
            break
    return se, es
