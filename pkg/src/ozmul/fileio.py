"""The ``ozm1`` matrix file format.

A header line ``ozm1 <rows> <cols>`` is followed by the entries in row-major
order, one row per line. By default each entry is the 16-hex-digit
big-endian bit pattern of the binary64 value. A header of
``ozm1 <rows> <cols> dec`` marks decimal entries written with the shortest
round-tripping representation.
"""

from __future__ import annotations

import numpy as np

MAGIC = "ozm1"


class FormatError(ValueError):
    pass


def _hex(x: float) -> str:
    return format(int(np.float64(x).view(np.uint64)), "016x")


def dumps(M, fmt: str = "hex") -> str:
    M = np.asarray(M, dtype=np.float64)
    if M.ndim != 2:
        raise ValueError(f"matrix must be 2-D, got shape {M.shape}")
    if fmt not in ("hex", "dec"):
        raise ValueError(f"unknown format {fmt!r}")
    head = f"{MAGIC} {M.shape[0]} {M.shape[1]}" + (" dec" if fmt == "dec" else "")
    enc = _hex if fmt == "hex" else (lambda x: repr(float(x)))
    lines = [head] + [" ".join(enc(x) for x in row) for row in M]
    return "\n".join(lines) + "\n"


def loads(text: str) -> np.ndarray:
    tokens = text.split()
    if len(tokens) < 3 or tokens[0] != MAGIC:
        raise FormatError(f"missing '{MAGIC} <rows> <cols>' header")
    try:
        m, n = int(tokens[1]), int(tokens[2])
    except ValueError:
        raise FormatError("row and column counts must be integers") from None
    body = tokens[3:]
    dec = bool(body) and body[0] == "dec" and len(body) == m * n + 1
    if dec:
        body = body[1:]
    if len(body) != m * n:
        raise FormatError(f"expected {m * n} entries, found {len(body)}")
    if dec:
        vals = np.array([float(x) for x in body], dtype=np.float64)
    else:
        if any(len(x) != 16 for x in body):
            raise FormatError("hex entries must have 16 digits")
        try:
            vals = np.array([int(x, 16) for x in body], dtype=np.uint64).view(np.float64)
        except ValueError:
            raise FormatError("malformed hex entry") from None
    return vals.reshape(m, n)


def write_matrix(path, M, fmt: str = "hex") -> None:
    with open(path, "w") as fh:
        fh.write(dumps(M, fmt))


def read_matrix(path) -> np.ndarray:
    with open(path) as fh:
        return loads(fh.read())
