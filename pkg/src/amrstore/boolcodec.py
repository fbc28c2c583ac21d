"""Run-length codec for boolean arrays over a 52-letter alphabet.

The text starts with '0' or '1', the value of the first run; run values
alternate from there, so only lengths need encoding. Each run length L
is spelled as L-1 in base 26, most significant digit first: digits 0..25
map to 'a'..'z' for every position except the last, which maps to
'A'..'Z'. The case flip terminates a numeral, making the text
self-delimiting without separators.

    [True]*5            -> "1E"
    [False, False, True] -> "0BA"
    [True]*30 + [False] -> "1bDA"

Both directions are vectorized; a million booleans encode in a few
milliseconds.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import ceil

import numpy as np

from .errors import MalformedEncoding

_ORD_A_UP = ord("A")
_ORD_A_LO = ord("a")
# int64 stays exact through 13 base-26 digits; longer numerals take a
# big-int fallback that in practice never runs.
_MAX_VECTOR_DIGITS = 13


def encode_bools(bits) -> str:
    """Encode a boolean sequence; empty input gives the empty string."""
    a = np.asarray(bits, dtype=bool).ravel()
    if a.size == 0:
        return ""
    change = np.flatnonzero(a[1:] != a[:-1])
    starts = np.concatenate(([0], change + 1))
    lengths = np.diff(np.concatenate((starts, [a.size])))
    x = lengths - 1

    ndig = np.ones(x.size, dtype=np.int64)
    p = 26
    xmax = int(x.max())
    while p <= xmax:
        ndig += x >= p
        p *= 26

    ends = 1 + np.cumsum(ndig)
    out = np.empty(int(ends[-1]), dtype=np.uint8)
    out[0] = ord("0") + int(a[0])
    vals = x.copy()
    out[ends - 1] = _ORD_A_UP + vals % 26  # final digit of every numeral
    vals //= 26
    j = 2
    while True:
        m = ndig >= j
        if not m.any():
            break
        out[ends[m] - j] = _ORD_A_LO + vals[m] % 26
        vals[m] //= 26
        j += 1
    return out.tobytes().decode("ascii")


def decode_bools(text: str) -> np.ndarray:
    """Inverse of encode_bools. Raises MalformedEncoding on invalid text."""
    if text == "":
        return np.zeros(0, dtype=bool)
    try:
        codes = np.frombuffer(text.encode("ascii"), dtype=np.uint8)
    except UnicodeEncodeError as e:
        raise MalformedEncoding(f"non-ascii character in encoding: {e}") from None
    first = int(codes[0])
    if first not in (ord("0"), ord("1")):
        raise MalformedEncoding(f"first character must be '0' or '1', got {text[0]!r}")
    body = codes[1:]
    if body.size == 0:
        raise MalformedEncoding("encoding has a value marker but no runs")
    upper = (body >= _ORD_A_UP) & (body <= ord("Z"))
    lower = (body >= _ORD_A_LO) & (body <= ord("z"))
    if not bool((upper | lower).all()):
        bad = int(np.flatnonzero(~(upper | lower))[0])
        raise MalformedEncoding(f"illegal character {chr(int(body[bad]))!r} at position {bad + 1}")
    if not upper[-1]:
        raise MalformedEncoding("unterminated numeral at end of text")

    ends = np.flatnonzero(upper)
    starts = np.concatenate(([0], ends[:-1] + 1))
    nlen = ends - starts + 1
    digits = np.where(upper, body - _ORD_A_UP, body - _ORD_A_LO).astype(np.int64)

    maxlen = int(nlen.max())
    if maxlen <= _MAX_VECTOR_DIGITS:
        vals = np.zeros(ends.size, dtype=np.int64)
        for j in range(maxlen):
            m = nlen > j
            vals[m] = vals[m] * 26 + digits[starts[m] + j]
        run_lengths = vals + 1
    else:
        run_lengths = np.array(
            [_numeral_value(digits[s:s + l]) + 1 for s, l in zip(starts, nlen)],
            dtype=object,
        )

    run_values = (np.arange(ends.size) & 1).astype(bool)
    if first == ord("1"):
        run_values = ~run_values
    return np.repeat(run_values, run_lengths)


def _numeral_value(digits: np.ndarray) -> int:
    v = 0
    for d in digits:
        v = v * 26 + int(d)
    return v


@dataclass(frozen=True)
class BoolCodecStats:
    raw_bytes: int
    bitfield_bytes: int
    encoded_bytes: int
    ratio_vs_bitfield: float


def bool_stats(bits) -> BoolCodecStats:
    """Size accounting against the one-bit-per-entry baseline.

    ratio_vs_bitfield = 1 - encoded/bitfield; negative when run-length
    text loses to the plain bitfield (e.g. alternating input).
    """
    a = np.asarray(bits, dtype=bool).ravel()
    n = int(a.size)
    encoded = len(encode_bools(a))
    bitfield = ceil(n / 8)
    ratio = 0.0 if bitfield == 0 else 1.0 - encoded / bitfield
    return BoolCodecStats(
        raw_bytes=n,
        bitfield_bytes=bitfield,
        encoded_bytes=encoded,
        ratio_vs_bitfield=ratio,
    )
