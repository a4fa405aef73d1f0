"""Textual persistence of network parameters (RPNET-PARAMS v1).

File layout: a version line, optional `# key value` metadata lines, then one
record per named tensor: a `name rows cols` header line followed by one line
per row of decimal values with 17 significant digits.
"""

import numpy as np

FORMAT_LINE = "RPNET-PARAMS v1"


def _as_2d(arr: np.ndarray) -> np.ndarray:
    arr = np.asarray(arr, dtype=np.float64)
    return arr.reshape(1, -1) if arr.ndim == 1 else arr


def save_tensors(path, tensors: dict, metadata: dict | None = None) -> None:
    """Write named tensors (vectors stored as one row)."""
    lines = [FORMAT_LINE]
    for key, value in (metadata or {}).items():
        lines.append(f"# {key} {value}")
    for name in tensors:
        mat = _as_2d(tensors[name])
        lines.append(f"{name} {mat.shape[0]} {mat.shape[1]}")
        for row in mat:
            lines.append(" ".join(f"{v:.17g}" for v in row))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def load_tensors(path):
    """Returns (tensors dict, metadata dict).  Vectors come back as (1, n)
    arrays; callers reshape as needed."""
    with open(path, encoding="utf-8") as fh:
        lines = [ln.rstrip("\n") for ln in fh]
    if not lines or lines[0] != FORMAT_LINE:
        raise ValueError(f"not a {FORMAT_LINE} file: {path}")
    metadata = {}
    tensors = {}
    i = 1
    while i < len(lines) and lines[i].startswith("# "):
        key, _, value = lines[i][2:].partition(" ")
        metadata[key] = value
        i += 1
    while i < len(lines):
        if not lines[i].strip():
            i += 1
            continue
        name, rows, cols = lines[i].split()
        rows, cols = int(rows), int(cols)
        block = lines[i + 1:i + 1 + rows]
        mat = np.array([[float(v) for v in row.split()] for row in block])
        if mat.shape != (rows, cols):
            raise ValueError(f"tensor {name!r}: expected {rows}x{cols}, "
                             f"parsed {mat.shape}")
        tensors[name] = mat
        i += 1 + rows
    return tensors, metadata
