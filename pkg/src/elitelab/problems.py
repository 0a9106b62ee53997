"""Hidden-parameter pseudo-Boolean problem families with exact integer fitness.

Every instance exposes three evaluation paths that must agree: ``evaluate``
on a :class:`BitString`, ``evaluate_value`` on the packed integer, and
``evaluate_array`` on a ``uint64`` numpy array (only for ``n <= 64``).
"""

from __future__ import annotations

import math
import random
from typing import Iterable, Sequence

import numpy as np

from .bitstring import BitString, hamming

FAMILIES = ("onemax", "doubleonemax", "hiddenpath", "jump")


class InstanceError(ValueError):
    """Invalid family parameters or malformed instance record."""


def _popcount(arr: np.ndarray) -> np.ndarray:
    return np.bitwise_count(arr).astype(np.int64)


class Problem:
    family: str = ""

    def __init__(self, n: int):
        if n < 1:
            raise InstanceError(f"n must be positive, got {n}")
        self.n = n
        self._mask = (1 << n) - 1

    # subclasses implement evaluate_value, evaluate_array, optimum, params, hidden
    def evaluate(self, x: BitString) -> int:
        if x.n != self.n:
            raise ValueError(f"length mismatch: instance n={self.n}, point n={x.n}")
        return self.evaluate_value(x.value)

    __call__ = evaluate

    def evaluate_value(self, v: int) -> int:
        raise NotImplementedError

    def evaluate_array(self, arr: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    @property
    def optimum(self) -> BitString:
        raise NotImplementedError

    @property
    def optimal_value(self) -> int:
        return self.evaluate(self.optimum)

    def is_optimal_value(self, v: int) -> bool:
        return v == self.optimum.value

    @property
    def params(self) -> dict:
        return {}

    def to_record(self) -> str:
        """Canonical one-line text form, parsed back by :func:`parse_record`."""
        parts = [f"family={self.family}", f"n={self.n}"]
        parts += [f"{k}={v}" for k, v in self.params.items()]
        parts += [f"{k}={v}" for k, v in self._hidden_fields()]
        return " ".join(parts)

    def _hidden_fields(self) -> list[tuple[str, str]]:
        raise NotImplementedError

    def __eq__(self, other) -> bool:
        return isinstance(other, Problem) and self.to_record() == other.to_record()

    def __hash__(self) -> int:
        return hash(self.to_record())

    def __repr__(self) -> str:
        return f"<{type(self).__name__} {self.to_record()}>"


class OneMax(Problem):
    """``n - hamming(x, target)``."""

    family = "onemax"

    def __init__(self, target: BitString):
        super().__init__(target.n)
        self.target = target

    def evaluate_value(self, v: int) -> int:
        return self.n - (v ^ self.target.value).bit_count()

    def evaluate_array(self, arr):
        return self.n - _popcount(arr ^ np.uint64(self.target.value))

    @property
    def optimum(self) -> BitString:
        return self.target

    @property
    def optimal_value(self) -> int:
        return self.n

    def _hidden_fields(self):
        return [("target", self.target.to_hex())]


class DoubleOneMax(Problem):
    """Maximum of two OneMax landscapes; ``peak`` is promoted to fitness n+1.

    ``trap`` is the unique second-best point (fitness n), every other point
    scores below n.
    """

    family = "doubleonemax"

    def __init__(self, peak: BitString, trap: BitString):
        super().__init__(peak.n)
        if peak.n != trap.n:
            raise InstanceError("peak and trap must have equal length")
        if peak == trap:
            raise InstanceError("peak and trap must differ")
        self.peak = peak
        self.trap = trap

    def evaluate_value(self, v: int) -> int:
        a = self.peak.value
        if v == a:
            return self.n + 1
        return self.n - min((v ^ a).bit_count(), (v ^ self.trap.value).bit_count())

    def evaluate_array(self, arr):
        a = np.uint64(self.peak.value)
        d = np.minimum(_popcount(arr ^ a), _popcount(arr ^ np.uint64(self.trap.value)))
        f = self.n - d
        f[arr == a] = self.n + 1
        return f

    @property
    def optimum(self) -> BitString:
        return self.peak

    @property
    def optimal_value(self) -> int:
        return self.n + 1

    def _hidden_fields(self):
        return [("peak", self.peak.to_hex()), ("trap", self.trap.to_hex())]


def build_path(z0: BitString, indices: Sequence[int]) -> list[BitString]:
    """Path points ``p_0..p_m``; ``p_j`` flips position ``indices[j-1]`` of ``p_(j-1)``."""
    indices = list(indices)
    if len(set(indices)) != len(indices):
        raise InstanceError(f"path indices must be pairwise distinct: {indices}")
    for i in indices:
        if not 1 <= i <= z0.n:
            raise InstanceError(f"path index {i} outside 1..{z0.n}")
    path = [z0]
    for i in indices:
        path.append(path[-1].flip(i))
    return path


class HiddenPath(Problem):
    """OneMax lifted by n, plus a low-fitness path from the complement of the target.

    The j-th path point (before the end) scores j, the path end scores 2n+1
    and is the unique optimum; every off-path point scores ``n + OneMax(x)``
    with respect to ``target``, so ``target`` is the local optimum at 2n.
    The path has n/4 steps; for n = 4 that is a single step, allowed but
    degenerate.
    """

    family = "hiddenpath"

    def __init__(self, target: BitString, indices: Sequence[int]):
        super().__init__(target.n)
        if target.n % 4:
            raise InstanceError(f"hiddenpath needs n divisible by 4, got n={target.n}")
        length = target.n // 4
        indices = tuple(indices)
        if len(indices) != length:
            raise InstanceError(f"hiddenpath needs exactly n/4={length} path indices, got {len(indices)}")
        self.target = target
        self.indices = indices
        self.path_length = length
        self.path = build_path(target.complement(), indices)
        self._pos = {p.value: j for j, p in enumerate(self.path)}
        order = np.argsort([p.value for p in self.path])
        self._sorted = np.array([self.path[j].value for j in order], dtype=np.uint64)
        self._sorted_fit = np.array(
            [2 * self.n + 1 if j == length else j for j in order], dtype=np.int64
        )

    def evaluate_value(self, v: int) -> int:
        j = self._pos.get(v)
        if j is None:
            return 2 * self.n - (v ^ self.target.value).bit_count()
        return 2 * self.n + 1 if j == self.path_length else j

    def evaluate_array(self, arr):
        f = 2 * self.n - _popcount(arr ^ np.uint64(self.target.value))
        idx = np.searchsorted(self._sorted, arr)
        idx[idx == len(self._sorted)] = 0
        hit = self._sorted[idx] == arr
        f[hit] = self._sorted_fit[idx[hit]]
        return f

    @property
    def optimum(self) -> BitString:
        return self.path[-1]

    @property
    def optimal_value(self) -> int:
        return 2 * self.n + 1

    def _hidden_fields(self):
        return [("target", self.target.to_hex()), ("path", ",".join(map(str, self.indices)))]


class Jump(Problem):
    """OneMax with the k-band below the optimum (and above zero) set to 0.

    The target is arbitrary; the classic function has the all-ones target.
    """

    family = "jump"

    def __init__(self, target: BitString, k: int):
        super().__init__(target.n)
        if not 0 <= k <= target.n // 2 - 1:
            raise InstanceError(f"jump needs 0 <= k <= n/2 - 1, got k={k} for n={target.n}")
        self.target = target
        self.k = k

    def visible(self, m: int) -> bool:
        return m == 0 or m == self.n or self.k < m < self.n - self.k

    def evaluate_value(self, v: int) -> int:
        m = self.n - (v ^ self.target.value).bit_count()
        return m if self.visible(m) else 0

    def evaluate_array(self, arr):
        m = self.n - _popcount(arr ^ np.uint64(self.target.value))
        vis = (m == 0) | (m == self.n) | ((m > self.k) & (m < self.n - self.k))
        return np.where(vis, m, 0)

    @property
    def optimum(self) -> BitString:
        return self.target

    @property
    def optimal_value(self) -> int:
        return self.n

    @property
    def params(self):
        return {"k": self.k}

    def _hidden_fields(self):
        return [("target", self.target.to_hex())]


def validate_family(family: str, n: int, params: dict | None = None) -> None:
    """Raise :class:`InstanceError` if ``family`` cannot be instantiated at ``n``."""
    params = params or {}
    if family not in FAMILIES:
        raise InstanceError(f"unknown family {family!r}; expected one of {', '.join(FAMILIES)}")
    if n < 1:
        raise InstanceError(f"n must be positive, got {n}")
    if family == "hiddenpath" and n % 4:
        raise InstanceError(f"hiddenpath needs n divisible by 4, got n={n}")
    if family == "jump":
        if "k" not in params or params["k"] is None:
            raise InstanceError("jump needs parameter k")
        k = int(params["k"])
        if not 0 <= k <= n // 2 - 1:
            raise InstanceError(f"jump needs 0 <= k <= n/2 - 1, got k={k} for n={n}")


def sample_instance(family: str, n: int, params: dict | None, rng: random.Random) -> Problem:
    """Draw an instance uniformly from the family's instance set."""
    params = params or {}
    validate_family(family, n, params)
    if family == "onemax":
        return OneMax(BitString.random(n, rng))
    if family == "doubleonemax":
        peak = BitString.random(n, rng)
        while True:
            trap = BitString.random(n, rng)
            if trap != peak:
                return DoubleOneMax(peak, trap)
    if family == "hiddenpath":
        target = BitString.random(n, rng)
        return HiddenPath(target, rng.sample(range(1, n + 1), n // 4))
    return Jump(BitString.random(n, rng), int(params["k"]))


def parse_record(text: str) -> Problem:
    """Inverse of :meth:`Problem.to_record`."""
    try:
        fields = dict(tok.split("=", 1) for tok in text.split())
        family = fields["family"]
        n = int(fields["n"])
        if family == "onemax":
            return OneMax(BitString.from_hex(n, fields["target"]))
        if family == "doubleonemax":
            return DoubleOneMax(BitString.from_hex(n, fields["peak"]), BitString.from_hex(n, fields["trap"]))
        if family == "hiddenpath":
            idx = [int(i) for i in fields["path"].split(",") if i]
            return HiddenPath(BitString.from_hex(n, fields["target"]), idx)
        if family == "jump":
            return Jump(BitString.from_hex(n, fields["target"]), int(fields["k"]))
    except (KeyError, ValueError) as exc:
        raise InstanceError(f"malformed instance record {text!r}: {exc}") from exc
    raise InstanceError(f"unknown family in record {text!r}")


def all_points(n: int) -> Iterable[BitString]:
    for v in range(1 << n):
        yield BitString(n, v)


def onemax_eval(target: BitString, x: BitString) -> int:
    return target.n - hamming(x, target)


def jump_regime(n: int, k: int) -> str:
    """Label of the jump-size regime used in reference tables."""
    if k == 0:
        return "k=0"
    if k == n // 2 - 1:
        return "extreme"
    if k <= math.isqrt(n):
        return "short"
    return "long"
