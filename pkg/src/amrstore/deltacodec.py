"""Lossless delta codec for float64 node fields on an AMR tree.

Every refined node predicts its children: the prediction is the father's
value times a constant factor, and each child contributes the XOR of its
own 64-bit pattern with the prediction's. Smooth fields put children
near the prediction, so sibling residues share high zero bits. A sibling
group is stored as one k-bit header n = min(2**k - 1, clz(OR of the
residues)) followed by the low 64-n bits of each residue; the root value
is stored raw. Streams pack MSB-first, groups following the refined
nodes in breadth-first order, which lets a decoder stop at any level
after reading only a prefix.

The best the scheme can do, with every header saturated, approaches
(2**k - 1 - k/2**dim)/64 of the raw size removed; for the default k=4 in
three dimensions that is 14.5/64, a hair above 22.6 percent. Random bit
patterns cost the k-bit headers and gain nothing, bounded by k/2**dim
extra bits per value.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .errors import (
    ContextMismatch,
    InvalidHeaderWidth,
    LengthMismatch,
    StreamTruncated,
)
from .tree import AmrTree

DEFAULT_HEADER_BITS = 4
DEFAULT_FACTOR = 1.0

_FIXED = struct.Struct("<BBdQQQ")  # k, dim, factor, total_values, root_payload, stream_bits


@dataclass(frozen=True)
class CompressedField:
    """One compressed float64 field plus the context needed to undo it."""

    k: int
    dim: int
    factor: float
    total_values: int
    root_payload: int
    stream_bits: int
    stream: bytes

    def to_bytes(self) -> bytes:
        """Serialize: fixed header then the packed stream, zero-padded."""
        head = _FIXED.pack(
            self.k, self.dim,
            self.factor, self.total_values, self.root_payload, self.stream_bits,
        )
        return head + self.stream

    @classmethod
    def from_bytes(cls, buf, offset: int = 0) -> tuple["CompressedField", int]:
        """Parse one serialized field; returns (field, offset past it)."""
        view = memoryview(buf)
        if len(view) - offset < _FIXED.size:
            raise StreamTruncated("serialized field shorter than its fixed header")
        k, dim, factor, total, root, sbits = _FIXED.unpack_from(view, offset)
        offset += _FIXED.size
        nbytes = (sbits + 7) // 8
        if len(view) - offset < nbytes:
            raise StreamTruncated("serialized field stream shorter than declared")
        stream = bytes(view[offset:offset + nbytes])
        return cls(
            k=k, dim=dim, factor=factor, total_values=total,
            root_payload=root, stream_bits=sbits, stream=stream,
        ), offset + nbytes


@dataclass(frozen=True)
class DeltaStats:
    compression_rate: float
    mean_removed_zeros: float
    throughput_mb_s: float
    group_count: int


def compress_field(tree: AmrTree, values, k: int = DEFAULT_HEADER_BITS,
                   factor: float = DEFAULT_FACTOR) -> CompressedField:
    """Compress one float64 value per node, losslessly.

    Lossless for every bit pattern: NaN payloads, infinities, signed
    zeros and denormals all round-trip exactly.
    """
    if not isinstance(k, int) or not 1 <= k <= 6:
        raise InvalidHeaderWidth(f"header width k must be an int in 1..6, got {k!r}")
    if not np.isfinite(factor) or factor == 0.0:
        raise ValueError(f"factor must be finite and nonzero, got {factor!r}")
    vals = np.ascontiguousarray(values, dtype=np.float64).ravel()
    n = tree.node_count
    if vals.size != n:
        raise LengthMismatch(f"{vals.size} values for a {n}-node tree")
    bits = vals.view(np.uint64)
    root_payload = int(bits[0])

    nch = tree.n_children
    G = tree.group_count
    if G == 0:
        return CompressedField(
            k=k, dim=tree.dim, factor=float(factor), total_values=n,
            root_payload=root_payload, stream_bits=0, stream=b"",
        )

    child_bits = bits[1:].reshape(G, nch)
    predictions = vals[tree._refined_index] * factor
    pred_bits = predictions.view(np.uint64)
    residues = child_bits ^ pred_bits[:, None]
    combined = np.bitwise_or.reduce(residues, axis=1)
    removed = np.minimum(_clz64(combined), (1 << k) - 1).astype(np.uint64)

    fields = np.empty((G, nch + 1), dtype=np.uint64)
    fields[:, 0] = removed
    fields[:, 1:] = residues
    widths = np.empty((G, nch + 1), dtype=np.int64)
    widths[:, 0] = k
    widths[:, 1:] = (64 - removed)[:, None]
    stream, total_bits = _pack_bits(fields.ravel(), widths.ravel())
    return CompressedField(
        k=k, dim=tree.dim, factor=float(factor), total_values=n,
        root_payload=root_payload, stream_bits=total_bits, stream=stream,
    )


def decompress_field(cf: CompressedField, tree: AmrTree) -> np.ndarray:
    """Recover every node value. The stream must match the tree exactly."""
    _check_context(cf, tree)
    out, consumed = _decode(cf, tree, tree.depth)
    if consumed != cf.stream_bits:
        raise ContextMismatch(
            f"stream declares {cf.stream_bits} bits but the tree consumes {consumed}"
        )
    return out


def decompress_to_level(cf: CompressedField, tree: AmrTree, level: int) -> np.ndarray:
    """Recover values for nodes at levels <= level only.

    Reads just the stream prefix holding groups whose fathers sit above
    the cut; bits past that prefix are never touched, so a stream
    truncated to the prefix decodes identically.
    """
    if not 0 <= level <= tree.depth:
        raise IndexError(f"level {level} outside [0, {tree.depth}]")
    _check_context(cf, tree)
    out, _ = _decode(cf, tree, level)
    return out


def stream_prefix_bits(cf: CompressedField, tree: AmrTree, level: int) -> int:
    """Bit length of the prefix decompress_to_level(level) will read.

    The group count comes from the refinement array alone; the exact bit
    length additionally walks the group headers inside that prefix, never
    the residue payloads.
    """
    if not 0 <= level <= tree.depth:
        raise IndexError(f"level {level} outside [0, {tree.depth}]")
    _check_context(cf, tree)
    groups = int(tree._group_level_offsets[level])
    bits = _stream_bits_array(cf)
    _, offsets, _ = _walk_headers(bits, cf.k, tree.n_children, groups)
    return int(offsets[-1])


def delta_stats(cf: CompressedField, input_bytes: int | None = None,
                elapsed: float | None = None) -> DeltaStats:
    """Size and speed accounting for one compressed field.

    compression_rate counts the root payload plus the stream against 64
    bits per value; the fixed serialization header is constant overhead
    and excluded. Throughput is mebibytes of input per second, 0 when no
    timing was supplied. A single-node field has no groups: the rate is
    0 and mean_removed_zeros reports 0 over group_count=0.
    """
    nch = 1 << cf.dim
    G = (cf.total_values - 1) // nch
    compressed_bits = 64 + cf.stream_bits
    rate = 1.0 - compressed_bits / (64 * cf.total_values)
    if G > 0:
        bits = _stream_bits_array(cf)
        removed, _, _ = _walk_headers(bits, cf.k, nch, G)
        mean_removed = float(removed.mean())
    else:
        mean_removed = 0.0
    if input_bytes is not None and elapsed is not None:
        if elapsed <= 0:
            raise ValueError("elapsed must be positive")
        throughput = input_bytes / elapsed / 2**20
    else:
        throughput = 0.0
    return DeltaStats(
        compression_rate=rate,
        mean_removed_zeros=mean_removed,
        throughput_mb_s=throughput,
        group_count=G,
    )


def _check_context(cf: CompressedField, tree: AmrTree) -> None:
    if cf.dim != tree.dim:
        raise ContextMismatch(f"field is {cf.dim}-dimensional, tree is {tree.dim}-dimensional")
    if cf.total_values != tree.node_count:
        raise ContextMismatch(
            f"field carries {cf.total_values} values, tree has {tree.node_count} nodes"
        )


def _stream_bits_array(cf: CompressedField) -> np.ndarray:
    raw = np.frombuffer(cf.stream, dtype=np.uint8)
    if raw.size * 8 < cf.stream_bits:
        raise StreamTruncated(
            f"stream holds {raw.size * 8} bits but declares {cf.stream_bits}"
        )
    return np.unpackbits(raw)


def _walk_headers(bits: np.ndarray, k: int, nch: int, groups: int):
    """Sequentially read group headers; returns (removed, offsets, limit).

    offsets[g] is the bit offset of group g; offsets[groups] is one past
    the last needed bit. Only header bits are inspected.
    """
    limit = bits.size
    pow2 = 1 << np.arange(k - 1, -1, -1)
    removed = np.empty(groups, dtype=np.int64)
    offsets = np.empty(groups + 1, dtype=np.int64)
    off = 0
    for g in range(groups):
        offsets[g] = off
        if off + k > limit:
            raise StreamTruncated(f"stream ends inside the header of group {g}")
        n = int(bits[off:off + k] @ pow2)
        removed[g] = n
        off += k + nch * (64 - n)
        if off > limit:
            raise StreamTruncated(f"stream ends inside the residues of group {g}")
    offsets[groups] = off
    return removed, offsets, limit


def _decode(cf: CompressedField, tree: AmrTree, upto_level: int):
    """Shared decoder core; returns (values for levels <= upto_level, bits read)."""
    nch = tree.n_children
    out = np.empty(int(tree._level_starts[upto_level + 1]), dtype=np.float64)
    out_bits = out.view(np.uint64)
    out_bits[0] = np.uint64(cf.root_payload)
    goff = tree._group_level_offsets
    groups = int(goff[upto_level])
    if groups == 0:
        return out, 0

    bits = _stream_bits_array(cf)
    removed, offsets, _ = _walk_headers(bits, cf.k, nch, groups)
    usable = int(offsets[-1])
    if cf.stream_bits < usable:
        raise StreamTruncated(
            f"stream declares {cf.stream_bits} bits but groups need {usable}"
        )

    # Pull every residue out of the stream in one vectorized sweep.
    widths = 64 - removed
    res_starts = offsets[:groups, None] + cf.k + np.arange(nch)[None, :] * widths[:, None]
    residues = np.zeros((groups, nch), dtype=np.uint64)
    maxw = int(widths.max())
    one = np.uint64(1)
    for j in range(maxw):
        m = widths > j
        picked = bits[res_starts[m] + j].astype(np.uint64)
        residues[m] = (residues[m] << one) | picked
    # Undo the prediction level by level; fathers decode before children.
    for L in range(upto_level):
        g0, g1 = int(goff[L]), int(goff[L + 1])
        if g0 == g1:
            continue
        fathers = tree._refined_index[g0:g1]
        pred_bits = (out[fathers] * cf.factor).view(np.uint64)
        out_bits[1 + g0 * nch:1 + g1 * nch] = (residues[g0:g1] ^ pred_bits[:, None]).ravel()
    return out, usable


def _pack_bits(values: np.ndarray, widths: np.ndarray) -> tuple[bytes, int]:
    """MSB-first bit packing of variable-width fields into padded bytes."""
    total = int(widths.sum())
    if total == 0:
        return b"", 0
    ends = np.cumsum(widths)
    starts = ends - widths
    bits = np.zeros(total, dtype=np.uint8)
    maxw = int(widths.max())
    one = np.uint64(1)
    for j in range(maxw):
        m = widths > j
        shift = (widths[m] - 1 - j).astype(np.uint64)
        bits[starts[m] + j] = ((values[m] >> shift) & one).astype(np.uint8)
    return np.packbits(bits).tobytes(), total


def _clz64(x: np.ndarray) -> np.ndarray:
    """Leading-zero count of each uint64; zero maps to 64."""
    x = x.astype(np.uint64, copy=True)
    zero = x == 0
    pos = np.zeros(x.shape, dtype=np.int64)
    for s in (32, 16, 8, 4, 2, 1):
        hi = x >> np.uint64(s)
        m = hi != 0
        pos[m] += s
        x[m] = hi[m]
    out = 63 - pos
    out[zero] = 64
    return out
