"""Numpy implementations of the simulation stencils.

Used when the compiled extension is unavailable or disabled. The shifted
slices accumulate in the same (di, dj) order as the compiled per-pixel
loops, and out-of-range neighbors are skipped rather than added as zeros,
so both backends produce bitwise-identical results.
"""

import numpy as np


def laplacian(field):
    """Five-point stencil with replicate (zero-flux) edges."""
    p = np.pad(field, 1, mode="edge")
    up = p[:-2, 1:-1]
    down = p[2:, 1:-1]
    left = p[1:-1, :-2]
    right = p[1:-1, 2:]
    return ((up + down) + left) + right - 4.0 * field


def neighborhood_mean(field, m):
    """Mean over the (2m+1)^2 window excluding the center cell.

    At boundaries the divisor is the count of in-range neighbors.
    """
    n_rows, n_cols = field.shape
    acc = np.zeros_like(field)
    count = np.zeros_like(field)
    for di in range(-m, m + 1):
        for dj in range(-m, m + 1):
            if di == 0 and dj == 0:
                continue
            src_r = slice(max(0, di), n_rows + min(0, di))
            dst_r = slice(max(0, -di), n_rows + min(0, -di))
            src_c = slice(max(0, dj), n_cols + min(0, dj))
            dst_c = slice(max(0, -dj), n_cols + min(0, -dj))
            acc[dst_r, dst_c] += field[src_r, src_c]
            count[dst_r, dst_c] += 1.0
    return acc / count
