"""Dense GF(2) linear algebra on bit-packed rows."""

from __future__ import annotations

import numpy as np


def _pack(M) -> tuple[np.ndarray, int]:
    A = np.asarray(M, dtype=np.uint8) & 1
    if A.ndim != 2:
        raise ValueError("expected a 2-D binary matrix")
    return np.packbits(A, axis=1), A.shape[1]


def rank(M) -> int:
    """Rank over GF(2) (xor basis keyed by leading bit)."""
    packed, _ = _pack(M)
    basis: dict[int, int] = {}
    for row in packed:
        r = int.from_bytes(row.tobytes(), "big")
        while r:
            top = r.bit_length() - 1
            piv = basis.get(top)
            if piv is None:
                basis[top] = r
                break
            r ^= piv
    return len(basis)


def rref(M) -> tuple[np.ndarray, list[int]]:
    """Reduced row-echelon form and pivot columns; zero rows are dropped."""
    packed, ncols = _pack(M)
    R = packed.copy()
    pivots: list[int] = []
    row = 0
    nrows = R.shape[0]
    for col in range(ncols):
        if row == nrows:
            break
        byte, shift = divmod(col, 8)
        bit = np.uint8(0x80 >> shift)
        hits = np.flatnonzero(R[row:, byte] & bit)
        if hits.size == 0:
            continue
        piv = row + hits[0]
        if piv != row:
            R[[row, piv]] = R[[piv, row]]
        others = np.flatnonzero(R[:, byte] & bit)
        others = others[others != row]
        R[others] ^= R[row]
        pivots.append(col)
        row += 1
    dense = np.unpackbits(R[:row], axis=1, count=ncols)
    return dense, pivots


def nullspace(M) -> np.ndarray:
    """Basis of {x : M x = 0}, one vector per row."""
    A = np.asarray(M, dtype=np.uint8)
    R, pivots = rref(A)
    ncols = A.shape[1]
    pivset = set(pivots)
    free = [c for c in range(ncols) if c not in pivset]
    basis = np.zeros((len(free), ncols), dtype=np.uint8)
    for i, f in enumerate(free):
        basis[i, f] = 1
        basis[i, pivots] = R[:, f]
    return basis
