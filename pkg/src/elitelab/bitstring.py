"""Fixed-length bit strings packed into a Python integer.

Position ``i`` (1-based, as printed left to right) is stored in integer bit
``n - i``, so ``str(BitString.from_str("1000"))`` round-trips and the integer
value reads like the printed string in binary.
"""

from __future__ import annotations

import random


class BitString:
    """Immutable element of {0,1}^n."""

    __slots__ = ("_n", "_v")

    def __init__(self, n: int, value: int = 0):
        if n < 1:
            raise ValueError(f"length must be positive, got {n}")
        if value < 0 or value >> n:
            raise ValueError(f"value {value} does not fit in {n} bits")
        object.__setattr__(self, "_n", n)
        object.__setattr__(self, "_v", value)

    def __setattr__(self, name, value):
        raise AttributeError("BitString is immutable")

    def __reduce__(self):
        return (BitString, (self._n, self._v))

    @classmethod
    def from_str(cls, s: str) -> "BitString":
        s = s.strip()
        if not s or set(s) - {"0", "1"}:
            raise ValueError(f"not a bit string: {s!r}")
        return cls(len(s), int(s, 2))

    @classmethod
    def from_bits(cls, bits) -> "BitString":
        bits = list(bits)
        v = 0
        for b in bits:
            if b not in (0, 1):
                raise ValueError(f"bit values must be 0 or 1, got {b!r}")
            v = (v << 1) | b
        return cls(len(bits), v)

    @classmethod
    def zeros(cls, n: int) -> "BitString":
        return cls(n, 0)

    @classmethod
    def ones(cls, n: int) -> "BitString":
        return cls(n, (1 << n) - 1)

    @classmethod
    def random(cls, n: int, rng: random.Random) -> "BitString":
        return cls(n, rng.getrandbits(n))

    @classmethod
    def from_hex(cls, n: int, text: str) -> "BitString":
        return cls(n, int(text, 16))

    @property
    def n(self) -> int:
        return self._n

    @property
    def value(self) -> int:
        return self._v

    def __len__(self) -> int:
        return self._n

    def __getitem__(self, i: int) -> int:
        """Bit at 1-based position ``i``."""
        if not 1 <= i <= self._n:
            raise IndexError(f"position {i} outside 1..{self._n}")
        return (self._v >> (self._n - i)) & 1

    def bits(self) -> tuple[int, ...]:
        return tuple(int(c) for c in str(self))

    def flip(self, *positions: int) -> "BitString":
        v = self._v
        for i in positions:
            if not 1 <= i <= self._n:
                raise IndexError(f"position {i} outside 1..{self._n}")
            v ^= 1 << (self._n - i)
        return BitString(self._n, v)

    def xor(self, other: "BitString") -> "BitString":
        _check_len(self, other)
        return BitString(self._n, self._v ^ other._v)

    def complement(self) -> "BitString":
        return BitString(self._n, self._v ^ ((1 << self._n) - 1))

    def count_ones(self) -> int:
        return self._v.bit_count()

    def to_hex(self) -> str:
        width = (self._n + 3) // 4
        return format(self._v, f"0{width}x")

    def __str__(self) -> str:
        return format(self._v, f"0{self._n}b")

    def __repr__(self) -> str:
        return f"BitString('{self}')"

    def __eq__(self, other) -> bool:
        if not isinstance(other, BitString):
            return NotImplemented
        return self._n == other._n and self._v == other._v

    def __hash__(self) -> int:
        return hash((self._n, self._v))

    def __lt__(self, other: "BitString") -> bool:
        _check_len(self, other)
        return self._v < other._v


def _check_len(x: BitString, y: BitString) -> None:
    if x.n != y.n:
        raise ValueError(f"length mismatch: {x.n} vs {y.n}")


def hamming(x: BitString, y: BitString) -> int:
    """Number of positions in which ``x`` and ``y`` differ."""
    _check_len(x, y)
    return (x.value ^ y.value).bit_count()
