"""Additive arithmetic functions and bulk evaluation by a segmented factoring sieve."""
from __future__ import annotations

import csv
import math
from collections.abc import Callable, Mapping
from dataclasses import dataclass, field
from typing import Iterator, Union

import numpy as np
from sympy import factorint, isprime

from ._parallel import ordered_map
from .errors import ConfigError, ResourceBudgetError

MODES = ("completely-additive", "strongly-additive", "table-with-default")
VALUE_KINDS = ("exact-integer", "real")

DEFAULT_SEGMENT = 1 << 22
DEFAULT_MEMORY_BUDGET = 2 << 30  # bytes

PrimeRule = Union[None, Mapping, Callable]


def primes_upto(n: int) -> np.ndarray:
    """All primes <= n as an ascending int64 array."""
    if n < 2:
        return np.zeros(0, dtype=np.int64)
    # odd-only Eratosthenes: index i stands for 2*i + 1
    sieve = np.ones((n + 1) // 2, dtype=bool)
    sieve[0] = False
    for i in range(1, (math.isqrt(n) - 1) // 2 + 1):
        if sieve[i]:
            p = 2 * i + 1
            sieve[p * p // 2::p] = False
    odd = 2 * np.flatnonzero(sieve).astype(np.int64) + 1
    return np.concatenate([np.array([2], dtype=np.int64), odd])


@dataclass
class AdditiveFunctionSpec:
    """Values of an additive function on prime powers.

    ``prime_rule`` gives f(p); it may be None (constant ``c``), a mapping
    ``{p: value}`` with ``c`` as default, or a callable accepting an int64
    array (or scalar) of primes. ``overrides`` maps ``(p, k)`` to f(p^k) and
    wins over everything else.

    In ``table-with-default`` mode, prime powers with k >= 2 that are not
    overridden take the value ``c``.
    """

    mode: str = "strongly-additive"
    c: float = 1
    prime_rule: PrimeRule = None
    overrides: dict = field(default_factory=dict)
    value_kind: str = "exact-integer"
    name: str = "custom"
    c_estimated: bool = False

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"unknown mode {self.mode!r}; expected one of {MODES}")
        if self.value_kind not in VALUE_KINDS:
            raise ConfigError(f"unknown value_kind {self.value_kind!r}")
        if self.c < 0:
            raise ConfigError("c must be non-negative")
        fixed = list(self.overrides.values())
        if isinstance(self.prime_rule, Mapping):
            fixed += list(self.prime_rule.values())
        for v in fixed:
            if v < 0:
                raise ConfigError(f"negative value {v} in spec")
            if self.is_integer and v != int(v):
                raise ConfigError(f"non-integer value {v} in an exact-integer spec")
        if self.is_integer and self.c != int(self.c):
            raise ConfigError("c must be an integer for an exact-integer spec")

    @property
    def is_integer(self) -> bool:
        return self.value_kind == "exact-integer"

    @property
    def dtype(self):
        return np.int64 if self.is_integer else np.float64

    def _cast(self, v):
        return int(v) if self.is_integer else float(v)

    def prime_value(self, p: int):
        if (p, 1) in self.overrides:
            return self._cast(self.overrides[(p, 1)])
        rule = self.prime_rule
        if rule is None:
            return self._cast(self.c)
        if isinstance(rule, Mapping):
            return self._cast(rule.get(p, self.c))
        return self._cast(rule(p))

    def value(self, p: int, k: int):
        """f(p^k) for a prime p and k >= 1 (k = 0 gives 0)."""
        if k == 0:
            return self._cast(0)
        if (p, k) in self.overrides:
            return self._cast(self.overrides[(p, k)])
        if self.mode == "completely-additive":
            return k * self.prime_value(p)
        if self.mode == "strongly-additive" or k == 1:
            return self.prime_value(p)
        return self._cast(self.c)

    def prime_values(self, primes: np.ndarray) -> np.ndarray:
        """Vectorised f(p) over an array of primes."""
        primes = np.asarray(primes, dtype=np.int64)
        rule = self.prime_rule
        if rule is None:
            out = np.full(primes.shape, self.c, dtype=self.dtype)
        elif isinstance(rule, Mapping):
            out = np.full(primes.shape, self.c, dtype=self.dtype)
            for p, v in rule.items():
                out[primes == p] = v
        else:
            try:
                raw = np.asarray(rule(primes))
                if raw.shape != primes.shape:
                    raise ValueError
            except (TypeError, ValueError):
                raw = np.array([rule(int(p)) for p in primes.tolist()], dtype=np.float64)
            if self.is_integer:
                out = np.rint(raw).astype(np.int64)
                if not np.array_equal(out, raw):
                    raise ConfigError("prime rule returned non-integer values for an exact-integer spec")
            else:
                out = raw.astype(np.float64)
        for (p, k), v in self.overrides.items():
            if k == 1:
                out[primes == p] = v
        return out

    def power_values(self, primes: np.ndarray, k: int) -> np.ndarray:
        """Vectorised f(p^k) over an array of primes."""
        primes = np.asarray(primes, dtype=np.int64)
        if k == 1:
            return self.prime_values(primes)
        if self.mode == "completely-additive":
            out = k * self.prime_values(primes)
        elif self.mode == "strongly-additive":
            out = self.prime_values(primes)
        else:
            out = np.full(primes.shape, self.c, dtype=self.dtype)
        for (p, kk), v in self.overrides.items():
            if kk == k:
                out[primes == p] = v
        return out


OMEGA_BIG = AdditiveFunctionSpec(mode="completely-additive", c=1, name="Omega")
OMEGA = AdditiveFunctionSpec(mode="strongly-additive", c=1, name="omega")
BUILTINS = {"Omega": OMEGA_BIG, "omega": OMEGA}


def evaluate(spec: AdditiveFunctionSpec, n: int):
    """f(n) from the prime factorisation of n."""
    n = int(n)
    if n < 1:
        raise ValueError("n must be positive")
    total = spec._cast(0)
    for p, k in sorted(factorint(n).items()):
        total += spec.value(p, k)
    return total


@dataclass
class FactoredRange:
    lo: int
    hi: int
    values: np.ndarray

    def __len__(self):
        return self.hi - self.lo


def _telescoped(spec, p, k):
    if spec is OMEGA_BIG:
        return 1
    if spec is OMEGA:
        return 1 if k == 1 else 0
    return spec.value(p, k) - spec.value(p, k - 1)


def _sieve_segment(spec, lo, hi, base_primes):
    size = hi - lo
    cof = np.arange(lo, hi, dtype=np.int64)
    vals = np.zeros(size, dtype=spec.dtype)
    for p in base_primes:
        if p * p >= hi:
            break
        pk, k = p, 1
        while pk < hi:
            start = (-lo) % pk
            if start < size:
                cof[start::pk] //= p
                d = _telescoped(spec, p, k)
                if d:
                    vals[start::pk] += d
            pk *= p
            k += 1
    # anything left after removing primes <= sqrt(hi - 1) is a single large prime
    left = cof > 1
    if left.any():
        vals[left] += spec.prime_values(cof[left])
    return vals


def iter_segments(spec: AdditiveFunctionSpec, lo: int, hi: int, segment_size: int = DEFAULT_SEGMENT,
                  threads: int = 1, memory_budget: int = DEFAULT_MEMORY_BUDGET) -> Iterator[tuple[int, np.ndarray]]:
    """Yield ``(seg_lo, values)`` covering [lo, hi) in ascending order."""
    if not 1 <= lo < hi:
        raise ValueError("need 1 <= lo < hi")
    if hi > 2**63 - 1:
        raise ValueError("hi must fit in 64 bits")
    # cofactor + values + slack per in-flight segment
    if 24 * segment_size * max(1, 2 * (threads or 1)) > memory_budget:
        raise ResourceBudgetError(f"segment of {segment_size} values exceeds memory budget {memory_budget}")
    base_primes = primes_upto(math.isqrt(hi - 1)).tolist()
    bounds = [(s, min(s + segment_size, hi)) for s in range(lo, hi, segment_size)]

    def job(b):
        return b[0], _sieve_segment(spec, b[0], b[1], base_primes)

    yield from ordered_map(job, bounds, threads)


def sieve_range(spec: AdditiveFunctionSpec, lo: int, hi: int, segment_size: int = DEFAULT_SEGMENT,
                threads: int = 1, memory_budget: int = DEFAULT_MEMORY_BUDGET) -> FactoredRange:
    """f(n) for every n in [lo, hi) as one dense array."""
    if 8 * (hi - lo) > memory_budget:
        raise ResourceBudgetError(f"range of {hi - lo} values exceeds memory budget {memory_budget}")
    parts = [v for _, v in iter_segments(spec, lo, hi, segment_size, threads, memory_budget)]
    return FactoredRange(lo, hi, np.concatenate(parts))


@dataclass(frozen=True)
class PrimeMoments:
    x: float
    A: float
    B: float


def prime_moments(spec: AdditiveFunctionSpec, x: float) -> PrimeMoments:
    """Sums over p < x of f(p)/p and f(p)^2/p, accumulated in ascending p."""
    if x < 2:
        raise ValueError("x must be >= 2")
    primes = primes_upto(math.ceil(x) - 1)
    primes = primes[primes < x]
    fp = spec.prime_values(primes).astype(np.float64)
    p = primes.astype(np.float64)
    # np.cumsum accumulates strictly left to right
    A = float(np.cumsum(fp / p)[-1]) if len(p) else 0.0
    B = float(np.cumsum(fp * fp / p)[-1]) if len(p) else 0.0
    return PrimeMoments(x, A, B)


def estimate_c(spec: AdditiveFunctionSpec, limit: int = 10**5) -> float:
    """Median of f(p) over p <= limit."""
    return float(np.median(spec.prime_values(primes_upto(limit))))


def _parse_number(text, where):
    try:
        v = int(text)
    except ValueError:
        try:
            v = float(text)
        except ValueError:
            raise ConfigError(f"{where}: cannot parse number {text!r}") from None
    return v


def parse_spec_text(text: str, name: str = "custom") -> AdditiveFunctionSpec:
    """Parse the key=value spec format.

    Recognised lines (``#`` starts a comment)::

        mode = completely-additive | strongly-additive | table-with-default
        c = 1
        value_kind = exact-integer | real
        7 = 2        # f(7) = 2
        2^3 = 5      # f(8) = 5
    """
    mode, c, kind = "strongly-additive", None, None
    prime_rule, overrides = {}, {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        where = f"line {lineno}"
        if "=" not in line:
            raise ConfigError(f"{where}: expected key = value")
        key, val = (s.strip() for s in line.split("=", 1))
        if key == "mode":
            mode = val
        elif key == "c":
            c = _parse_number(val, where)
        elif key == "value_kind":
            kind = val
        elif key.isdigit() or ("^" in key and all(s.strip().isdigit() for s in key.split("^", 1))):
            if "^" in key:
                p, k = (int(s) for s in key.split("^", 1))
            else:
                p, k = int(key), 1
            if not isprime(p) or k < 1:
                raise ConfigError(f"{where}: {key} is not a prime power")
            v = _parse_number(val, where)
            if k == 1:
                prime_rule[p] = v
            else:
                overrides[(p, k)] = v
        else:
            raise ConfigError(f"{where}: unknown key {key!r}")
    values = list(prime_rule.values()) + list(overrides.values()) + ([c] if c is not None else [])
    if kind is None:
        kind = "exact-integer" if all(float(v).is_integer() for v in values) else "real"
    spec = AdditiveFunctionSpec(mode=mode, c=c if c is not None else 0, prime_rule=prime_rule or None,
                                overrides=overrides, value_kind=kind, name=name)
    if c is None:
        est = estimate_c(spec)
        if spec.is_integer:
            est = int(round(est))
        spec.c = est
        spec.c_estimated = True
    return spec


def load_spec(source: str) -> AdditiveFunctionSpec:
    """Built-in name (``Omega``, ``omega``) or path to a spec file."""
    if source in BUILTINS:
        return BUILTINS[source]
    try:
        with open(source) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read spec {source!r}: {exc}") from None
    return parse_spec_text(text, name=source)


def write_values_csv(fh, rows: Iterator[tuple[int, np.ndarray]]):
    """Write ``n,value`` rows for ``(seg_lo, values)`` segments."""
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["n", "value"])
    for lo, vals in rows:
        fmt = [repr(float(v)) for v in vals] if vals.dtype.kind == "f" else vals.tolist()
        w.writerows(zip(range(lo, lo + len(vals)), fmt))
