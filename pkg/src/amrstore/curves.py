"""Space-filling-curve keys on the 2**bits lattice, for domain splitting.

Morton interleaves coordinate bits directly (x in the least significant
position). Hilbert uses the coordinate-transposition construction: Gray
decoding and axis exchanges turn lattice coordinates into the transposed
form of the Hilbert index, which then interleaves like Morton but with
axis 0 holding the most significant bits. Both are bijections from the
lattice onto range(2**(dim*bits)); Hilbert additionally steps between
face-adjacent cells.
"""

from __future__ import annotations

import numpy as np

CURVES = ("morton", "hilbert")


def morton_key(coords, bits: int) -> int:
    """Interleave dim coordinates of `bits` bits each; x varies fastest."""
    dim = len(coords)
    key = 0
    for b in range(bits):
        for ax in range(dim):
            key |= ((int(coords[ax]) >> b) & 1) << (b * dim + ax)
    return key


def hilbert_key(coords, bits: int) -> int:
    """Hilbert index of a lattice point; dim 1 degenerates to the identity."""
    dim = len(coords)
    if dim == 1:
        return int(coords[0])
    x = [int(c) for c in coords]
    m = 1 << (bits - 1)
    q = m
    while q > 1:
        p = q - 1
        for i in range(dim):
            if x[i] & q:
                x[0] ^= p
            else:
                t = (x[0] ^ x[i]) & p
                x[0] ^= t
                x[i] ^= t
        q >>= 1
    for i in range(1, dim):
        x[i] ^= x[i - 1]
    t = 0
    q = m
    while q > 1:
        if x[dim - 1] & q:
            t ^= q - 1
        q >>= 1
    for i in range(dim):
        x[i] ^= t
    # Transposed form: axis 0 carries the most significant bit of each round.
    key = 0
    for b in range(bits - 1, -1, -1):
        for i in range(dim):
            key = (key << 1) | ((x[i] >> b) & 1)
    return key


def curve_keys(coords: np.ndarray, bits: int, curve: str) -> np.ndarray:
    """Keys for an (n, dim) int array of lattice points, as int64."""
    if curve not in CURVES:
        raise ValueError(f"unknown curve {curve!r}, expected one of {CURVES}")
    fn = morton_key if curve == "morton" else hilbert_key
    return np.fromiter(
        (fn(row, bits) for row in coords.tolist()),
        dtype=np.int64,
        count=len(coords),
    )
