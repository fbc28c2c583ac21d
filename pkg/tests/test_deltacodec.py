import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from amrstore import (
    CompressedField,
    ContextMismatch,
    InvalidHeaderWidth,
    LengthMismatch,
    StreamTruncated,
    build_tree,
    children_of,
    compress_field,
    decompress_field,
    decompress_to_level,
    delta_stats,
    stream_prefix_bits,
)
from amrstore.tree import node_levels

from conftest import random_tree


def f64_bits(x):
    return struct.unpack("<Q", struct.pack("<d", x))[0]


def clz64(x):
    return 64 - x.bit_length()


def reference_stream(tree, values, k, factor):
    """Bit-string reference: k-bit group header, then the kept low bits
    of every residue, all most-significant-bit first."""
    out = []
    refined = np.flatnonzero(tree.refinement)
    for father in refined.tolist():
        pred = f64_bits(factor * float(values[father]))
        residues = [f64_bits(float(values[c])) ^ pred for c in children_of(tree, father)]
        acc = 0
        for r in residues:
            acc |= r
        n = min(2 ** k - 1, clz64(acc))
        out.append(format(n, f"0{k}b"))
        for r in residues:
            out.append(format(r, "064b")[n:])
    return "".join(out)


def stream_as_bitstring(cf):
    bits = np.unpackbits(np.frombuffer(cf.stream, dtype=np.uint8))
    return "".join("1" if b else "0" for b in bits[: cf.stream_bits])


def tree_9(dim=3):
    nch = 2 ** dim
    return build_tree(dim, [True] + [False] * nch)


class TestLayout:
    def test_constant_values_cost_396_bits(self):
        t = tree_9()
        cf = compress_field(t, np.full(9, 2.75), k=4)
        # one group: every residue 0, n = 15, cost 4 + 8*(64-15)
        assert cf.stream_bits == 4 + 8 * 49 == 396
        assert cf.root_payload == f64_bits(2.75)

    def test_matches_reference_bitstring(self, rng):
        for _ in range(25):
            t = random_tree(rng, max_nodes=150)
            vals = rng.standard_normal(t.node_count) * 10.0 ** rng.integers(-2, 3)
            k = int(rng.integers(1, 7))
            cf = compress_field(t, vals, k=k)
            assert stream_as_bitstring(cf) == reference_stream(t, vals, k, 1.0)

    def test_reference_with_factor(self, rng):
        t = random_tree(rng, dim=2, max_nodes=100)
        vals = rng.uniform(1, 2, t.node_count)
        cf = compress_field(t, vals, k=4, factor=0.5)
        assert stream_as_bitstring(cf) == reference_stream(t, vals, 4, 0.5)

    def test_single_residue_leading_zeros(self):
        # father 1.0 and son 1.5 differ in one exponent-adjacent bit:
        # residue 0x0008000000000000 has 12 leading zeros
        assert f64_bits(1.0) == 0x3FF0000000000000
        assert f64_bits(1.5) == 0x3FF8000000000000
        r = f64_bits(1.0) ^ f64_bits(1.5)
        assert r == 0x0008000000000000 and clz64(r) == 12
        t = tree_9()
        cf = compress_field(t, [1.0] + [1.5] * 8, k=4)
        assert stream_as_bitstring(cf)[:4] == format(12, "04b")

    def test_header_width_caps_removal(self):
        t = tree_9()
        cf = compress_field(t, np.full(9, 1.0), k=2)
        # identical values remove at most 2^2 - 1 = 3 bits each
        assert cf.stream_bits == 2 + 8 * 61

    def test_serialized_form_round_trips(self, rng):
        t = random_tree(rng, max_nodes=200)
        cf = compress_field(t, rng.standard_normal(t.node_count))
        cf2, consumed = CompressedField.from_bytes(cf.to_bytes())
        assert cf2 == cf
        assert consumed == len(cf.to_bytes())


class TestRoundTrip:
    @given(st.integers(1, 3), st.integers(1, 6), st.integers(0, 2 ** 32 - 1))
    @settings(max_examples=150, deadline=None)
    def test_random_trees_and_values(self, dim, k, seed):
        rng = np.random.default_rng(seed)
        t = random_tree(rng, dim=dim, max_nodes=300)
        vals = rng.standard_normal(t.node_count)
        out = decompress_field(compress_field(t, vals, k=k), t)
        np.testing.assert_array_equal(out, vals)

    def test_special_payloads_bit_exact(self):
        t = tree_9()
        patterns = np.array(
            [
                0x7FF8000000000001,  # quiet NaN, nonstandard payload
                0x7FF0000000000000,  # +inf
                0xFFF0000000000000,  # -inf
                0x0000000000000001,  # smallest denormal
                0x8000000000000000,  # -0.0
                0x7FEFFFFFFFFFFFFF,  # largest finite
                0x0008000000000000,  # denormal
                0xFFFFFFFFFFFFFFFF,  # NaN, all bits set
                0x3FF0000000000000,  # 1.0
            ],
            dtype=np.uint64,
        )
        vals = patterns.view(np.float64)
        out = decompress_field(compress_field(t, vals), t)
        np.testing.assert_array_equal(out.view(np.uint64), patterns)

    def test_nonfinite_father_still_round_trips(self):
        t = tree_9()
        vals = np.array([np.nan] + [1.0] * 8)
        out = decompress_field(compress_field(t, vals), t)
        np.testing.assert_array_equal(out.view(np.uint64), vals.view(np.uint64))

    def test_factor_round_trip(self, rng):
        t = random_tree(rng, max_nodes=300)
        vals = rng.uniform(-5, 5, t.node_count)
        for factor in (1.0, 0.5, 2.0, -1.0, 1.001):
            cf = compress_field(t, vals, factor=factor)
            np.testing.assert_array_equal(decompress_field(cf, t), vals)

    def test_deep_single_path(self):
        bits = []
        for _ in range(12):
            bits.extend([True, False])
        bits[-1] = False
        bits.append(False)
        t = build_tree(1, bits)
        vals = np.linspace(1, 2, t.node_count)
        cf = compress_field(t, vals)
        np.testing.assert_array_equal(decompress_field(cf, t), vals)


class TestPartialDecompression:
    def test_every_level_matches_filtered_full(self, rng):
        t = random_tree(rng, max_nodes=400, p=0.7)
        vals = rng.standard_normal(t.node_count)
        cf = compress_field(t, vals)
        full = decompress_field(cf, t)
        levels = node_levels(t)
        for lv in range(t.depth + 1):
            part = decompress_to_level(cf, t, lv)
            keep = levels <= lv
            assert part.size == int(keep.sum())
            np.testing.assert_array_equal(part, full[keep])

    def test_level_zero_is_root_only(self, rng):
        t = random_tree(rng, max_nodes=100)
        vals = rng.standard_normal(t.node_count)
        cf = compress_field(t, vals)
        out = decompress_to_level(cf, t, 0)
        assert out.size == 1
        assert out[0] == vals[0]

    def test_max_level_equals_full(self, rng):
        t = random_tree(rng, max_nodes=100)
        vals = rng.standard_normal(t.node_count)
        cf = compress_field(t, vals)
        np.testing.assert_array_equal(
            decompress_to_level(cf, t, t.depth), decompress_field(cf, t)
        )

    def test_out_of_range_level(self, rng):
        t = random_tree(rng, max_nodes=50)
        cf = compress_field(t, np.zeros(t.node_count))
        with pytest.raises(IndexError):
            decompress_to_level(cf, t, t.depth + 1)
        with pytest.raises(IndexError):
            decompress_to_level(cf, t, -1)

    def test_reads_only_the_prefix(self, rng):
        # decoding to level L must succeed even when everything past the
        # declared prefix is cut away
        t = random_tree(rng, max_nodes=400, p=0.7)
        vals = rng.standard_normal(t.node_count)
        cf = compress_field(t, vals)
        for lv in range(t.depth + 1):
            nbits = stream_prefix_bits(cf, t, lv)
            nbytes = (nbits + 7) // 8
            cut = CompressedField(
                k=cf.k,
                dim=cf.dim,
                factor=cf.factor,
                total_values=cf.total_values,
                root_payload=cf.root_payload,
                stream_bits=nbits,
                stream=cf.stream[:nbytes],
            )
            want = decompress_to_level(cf, t, lv)
            np.testing.assert_array_equal(decompress_to_level(cut, t, lv), want)

    def test_prefix_bits_monotone(self, rng):
        t = random_tree(rng, max_nodes=300)
        cf = compress_field(t, rng.standard_normal(t.node_count))
        sizes = [stream_prefix_bits(cf, t, lv) for lv in range(t.depth + 1)]
        assert sizes == sorted(sizes)
        assert sizes[0] == 0
        assert sizes[-1] == cf.stream_bits


class TestErrors:
    def test_header_width_must_be_1_to_6(self):
        t = tree_9()
        vals = np.zeros(9)
        for bad in (0, 7, -1, 2.5):
            with pytest.raises(InvalidHeaderWidth):
                compress_field(t, vals, k=bad)

    def test_zero_or_nonfinite_factor(self):
        t = tree_9()
        for bad in (0.0, np.nan, np.inf):
            with pytest.raises(ValueError):
                compress_field(t, np.zeros(9), factor=bad)

    def test_length_mismatch(self):
        with pytest.raises(LengthMismatch):
            compress_field(tree_9(), np.zeros(8))

    def test_truncated_stream(self, rng):
        t = random_tree(rng, max_nodes=200, p=0.7)
        cf = compress_field(t, rng.standard_normal(t.node_count))
        cut = CompressedField(
            k=cf.k,
            dim=cf.dim,
            factor=cf.factor,
            total_values=cf.total_values,
            root_payload=cf.root_payload,
            stream_bits=cf.stream_bits - 1,
            stream=cf.stream,
        )
        with pytest.raises((StreamTruncated, ContextMismatch)):
            decompress_field(cut, t)

    def test_wrong_tree(self, rng):
        t = tree_9()
        cf = compress_field(t, np.arange(9.0))
        other = build_tree(3, [False])
        with pytest.raises(ContextMismatch):
            decompress_field(cf, other)


class TestStats:
    def test_single_node(self):
        t = build_tree(2, [False])
        cf = compress_field(t, [1.0])
        s = delta_stats(cf)
        assert s.group_count == 0
        assert s.compression_rate == 0.0

    def test_constant_tree_rate(self):
        t = tree_9()
        cf = compress_field(t, np.ones(9))
        s = delta_stats(cf)
        # 64 + 396 bits spent on 9 values
        assert s.compression_rate == pytest.approx(1 - (64 + 396) / (64 * 9))
        assert s.mean_removed_zeros == 15.0
        assert s.group_count == 1

    def test_random_patterns_give_header_overhead_only(self):
        rng = np.random.default_rng(5)
        t = build_tree(3, [True] * 9 + [False] * 64 + [False] * 8 * 0)
        # fully refined two-level tree: 1 + 8 + 64 nodes
        vals = rng.integers(0, 2 ** 64, t.node_count, dtype=np.uint64).view(np.float64)
        s = delta_stats(compress_field(t, vals, k=4))
        assert -0.01 < s.compression_rate < 0.01
        assert s.mean_removed_zeros < 1.0

    def test_throughput_reported(self):
        t = tree_9()
        cf = compress_field(t, np.ones(9))
        s = delta_stats(cf, input_bytes=9 * 8, elapsed=0.5)
        assert s.throughput_mb_s == pytest.approx(72 / 0.5 / 2 ** 20)
