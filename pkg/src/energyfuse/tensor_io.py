"""Plain-text tensor dumps: a shape header, then one value per line.

17 significant digits round-trip any finite double exactly, so a dump
followed by a load reproduces the array bit for bit.
"""

import numpy as np

from .numeric import ContractError, as_matrix


def format_value(x: float) -> str:
    return format(float(x), ".17g")


def dump_tensor(t, path: str):
    """Write a matrix as "rows cols" then row-major values."""
    a = as_matrix(t)
    rows, cols = a.shape
    lines = [f"{rows} {cols}"]
    lines.extend(format_value(v) for v in a.ravel())
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def load_tensor(path: str) -> np.ndarray:
    """Read a dump back; malformed content reports its line number."""
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise ContractError(f"{path}: empty file (line 1)")
    header = lines[0].split()
    if len(header) != 2:
        raise ContractError(f"{path}: expected 'rows cols' header (line 1)")
    try:
        rows, cols = int(header[0]), int(header[1])
    except ValueError:
        raise ContractError(f"{path}: non-integer header (line 1)") from None
    if rows < 1 or cols < 1:
        raise ContractError(f"{path}: bad shape {rows} x {cols} (line 1)")
    want = rows * cols
    values = []
    for lineno, text in enumerate(lines[1:], start=2):
        body = text.strip()
        if not body:
            continue
        try:
            values.append(float(body))
        except ValueError:
            raise ContractError(f"{path}: bad value {body!r} (line {lineno})") from None
        if len(values) > want:
            raise ContractError(f"{path}: more than {want} values (line {lineno})")
    if len(values) != want:
        raise ContractError(
            f"{path}: expected {want} values, found {len(values)} (line {len(lines)})"
        )
    return np.array(values, dtype=np.float64).reshape(rows, cols)
