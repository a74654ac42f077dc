"""Stencil kernel dispatch.

The compiled extension is preferred when present; the numpy fallback is
numerically identical. Set STCI_KERNELS=python or STCI_KERNELS=compiled
to force a backend (the latter raises if the extension is missing).
"""

import os

import numpy as np

from . import _pykern
from .core import ValidationError

try:
    from . import _simkern
except ImportError:
    _simkern = None

_choice = os.environ.get("STCI_KERNELS", "").lower()
if _choice == "python":
    _impl = _pykern
elif _choice == "compiled":
    if _simkern is None:
        raise ImportError("STCI_KERNELS=compiled but the extension is not built")
    _impl = _simkern
else:
    _impl = _simkern if _simkern is not None else _pykern

BACKEND = "compiled" if _impl is _simkern else "python"


def _as_grid(field):
    arr = np.ascontiguousarray(field, dtype=np.float64)
    if arr.ndim != 2:
        raise ValidationError(f"expected a 2D field, got shape {arr.shape}")
    return arr


def laplacian(field):
    """Five-point Laplacian with replicate (zero-flux) edges.

    out[i][j] = f[i-1][j] + f[i+1][j] + f[i][j-1] + f[i][j+1] - 4 f[i][j],
    with out-of-range neighbors replaced by the edge value.
    """
    arr = _as_grid(field)
    if arr.shape[0] < 2 or arr.shape[1] < 2:
        raise ValidationError("laplacian needs at least a 2x2 grid")
    if not np.isfinite(arr).all():
        raise ValidationError("laplacian input contains non-finite values")
    return _impl.laplacian(arr)


def neighborhood_mean(field, m=1):
    """Mean of the (2m+1)^2 window around each cell, excluding the cell.

    Boundary cells divide by the count of in-range neighbors.
    """
    arr = _as_grid(field)
    if m < 1:
        raise ValidationError("neighborhood radius must be >= 1")
    if 2 * m + 1 > min(arr.shape):
        raise ValidationError(
            f"window of radius {m} does not fit a {arr.shape[0]}x{arr.shape[1]} grid"
        )
    return _impl.neighborhood_mean(arr, m)
