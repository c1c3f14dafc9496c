"""Pure-Python implementations of the per-packet kernels.

These are the reference semantics; ``_speedups.pyx`` mirrors them line for line.
All coordinate arithmetic is done on 16-bit two's-complement words, the way the
switch registers hold them.
"""
import numpy as np

MASK16 = 0xFFFF
SIGN16 = 0x8000


def abs16(word):
    """Magnitude of a 16-bit two's-complement word, as an unsigned value.

    Negative words are negated by bitwise inversion plus one, so 0x8000 maps
    to 32768.
    """
    word &= MASK16
    if word >> 15 == 1:
        word = (~word + 1) & MASK16
    return word


def l1_step(x, y, z, old_x, old_y, old_z):
    return abs16(x - old_x) + abs16(y - old_y) + abs16(z - old_z)


def deadband_step(x, y, z, old_x, old_y, old_z, threshold):
    """True when the packet moves strictly more than ``threshold`` (L1, units)."""
    return l1_step(x, y, z, old_x, old_y, old_z) > threshold


def deadband_run(coords, threshold, old=(0, 0, 0), initialized=False):
    """Filter a whole (N, 3) coordinate stream.

    Returns ``(decisions, old)`` where ``decisions`` is a uint8 array with 1 for
    forwarded samples and ``old`` is the stored coordinate triple afterwards.
    An uninitialized filter forwards the first sample unconditionally.
    """
    coords = np.asarray(coords, dtype=np.int64)
    n = coords.shape[0]
    out = np.zeros(n, dtype=np.uint8)
    ox, oy, oz = (int(v) for v in old)
    start = 0
    if not initialized and n:
        ox, oy, oz = (int(v) for v in coords[0])
        out[0] = 1
        start = 1
    rows = coords.tolist()
    for i in range(start, n):
        x, y, z = rows[i]
        if abs16(x - ox) + abs16(y - oy) + abs16(z - oz) > threshold:
            ox, oy, oz = x, y, z
            out[i] = 1
    return out, (ox, oy, oz)


def edge_sensors(readings, threshold):
    """First and last FSR index reading strictly above ``threshold``.

    Scans run to exhaustion when nothing crosses: ``se`` then ends on the last
    index and ``es`` on 0, so ``es <= se`` flags "nothing to correct".
    """
    n = len(readings)
    se = n - 1
    for i in range(n):
        se = i
        if readings[i] > threshold:
            break
    es = 0
    for i in range(n - 1, -1, -1):
        es = i
        if readings[i] > threshold:
            break
    return se, es
