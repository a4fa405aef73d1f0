"""Late fusion of two relapse probability streams."""

import numpy as np

FUSION_SCHEMES = ("mean", "min", "max")


def _require_prob(p):
    arr = np.asarray(p, dtype=np.float64)
    if np.any(arr < 0.0) or np.any(arr > 1.0):
        raise ValueError(f"probability out of [0, 1]: {p!r}")
    return p


def fuse_probabilities(p1, p2, scheme: str = "min"):
    """Elementwise mean/min/max of two probabilities (scalars or arrays)."""
    if scheme not in FUSION_SCHEMES:
        raise ValueError(f"unknown fusion scheme {scheme!r}; pick one of "
                         f"{FUSION_SCHEMES}")
    _require_prob(p1)
    _require_prob(p2)
    a = np.asarray(p1, dtype=np.float64)
    b = np.asarray(p2, dtype=np.float64)
    if scheme == "mean":
        out = (a + b) / 2.0
    elif scheme == "min":
        out = np.minimum(a, b)
    else:
        out = np.maximum(a, b)
    if np.isscalar(p1) and np.isscalar(p2):
        return float(out)
    return out
