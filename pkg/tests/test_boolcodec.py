import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from amrstore import MalformedEncoding, bool_stats, decode_bools, encode_bools


def run_numeral(length):
    """Reference encoder for one run length.

    Digits of (length - 1) in base 26, most significant first; every
    digit is lowercase except the last, which is uppercase to close the
    numeral.
    """
    assert length >= 1
    n = length - 1
    digits = [n % 26]
    n //= 26
    while n:
        digits.append(n % 26)
        n //= 26
    digits.reverse()
    body = "".join(chr(ord("a") + d) for d in digits[:-1])
    return body + chr(ord("A") + digits[-1])


def reference_encode(bits):
    bits = list(bits)
    if not bits:
        return ""
    out = ["1" if bits[0] else "0"]
    run_val, run_len = bits[0], 0
    for b in bits:
        if b == run_val:
            run_len += 1
        else:
            out.append(run_numeral(run_len))
            run_val, run_len = b, 1
    out.append(run_numeral(run_len))
    return "".join(out)


class TestExamples:
    def test_empty(self):
        assert encode_bools([]) == ""
        assert decode_bools("").size == 0

    def test_five_trues(self):
        assert encode_bools([True] * 5) == "1E"

    def test_two_falses(self):
        assert encode_bools([False, False]) == "0B"

    def test_thirty_trues_one_false(self):
        # 29 in bijective form: 1*26 + 3 -> 'b' then final 'D'; then a
        # single false -> 'A'
        assert encode_bools([True] * 30 + [False]) == "1bDA"

    def test_million_trues(self):
        text = encode_bools(np.ones(10 ** 6, dtype=bool))
        assert text == "1" + run_numeral(10 ** 6)
        assert len(text) == 6

    def test_decode_examples(self):
        np.testing.assert_array_equal(decode_bools("1E"), np.ones(5, dtype=bool))
        np.testing.assert_array_equal(
            decode_bools("1bDA"), np.r_[np.ones(30, bool), np.zeros(1, bool)]
        )


class TestAgainstReference:
    @given(st.lists(st.booleans(), max_size=200))
    @settings(max_examples=400, deadline=None)
    def test_encode_matches_reference(self, bits):
        assert encode_bools(bits) == reference_encode(bits)

    def test_single_runs_all_lengths(self):
        for length in list(range(1, 800)) + [26, 27, 675, 676, 677, 17576, 10 ** 6]:
            arr = np.ones(length, dtype=bool)
            assert encode_bools(arr) == "1" + run_numeral(length)

    @given(st.lists(st.booleans(), max_size=500))
    @settings(max_examples=400, deadline=None)
    def test_round_trip(self, bits):
        out = decode_bools(encode_bools(bits))
        assert out.dtype == np.bool_
        assert out.tolist() == bits

    def test_round_trip_large_random(self, rng):
        for _ in range(20):
            n = int(rng.integers(1, 2 * 10 ** 5))
            bits = rng.random(n) < rng.random()
            np.testing.assert_array_equal(decode_bools(encode_bools(bits)), bits)

    def test_round_trip_huge_runs(self):
        parts = [np.ones(10 ** 6, bool), np.zeros(3, bool), np.ones(26 ** 4 + 17, bool)]
        bits = np.concatenate(parts)
        np.testing.assert_array_equal(decode_bools(encode_bools(bits)), bits)


class TestMalformed:
    @pytest.mark.parametrize(
        "text",
        [
            "1",          # value marker with no runs
            "0",
            "1b",         # numeral never terminated
            "1bC b",      # space is not a digit
            "2A",         # bad value marker
            "A",          # missing value marker
            "1É",         # non-ascii
            "1A0B",       # digit position cannot restart a marker
        ],
    )
    def test_rejected(self, text):
        with pytest.raises(MalformedEncoding):
            decode_bools(text)


class TestStats:
    def test_empty(self):
        s = bool_stats([])
        assert s.encoded_bytes == 0
        assert s.ratio_vs_bitfield == 0.0

    def test_million_trues(self):
        s = bool_stats(np.ones(10 ** 6, dtype=bool))
        assert s.bitfield_bytes == 125000
        assert s.encoded_bytes == 6
        assert s.ratio_vs_bitfield == pytest.approx(1 - 6 / 125000)
        assert s.raw_bytes == 10 ** 6

    def test_alternating_is_negative(self):
        s = bool_stats([True, False] * 4)
        assert s.bitfield_bytes == 1
        assert s.encoded_bytes == 9
        assert s.ratio_vs_bitfield < 0
