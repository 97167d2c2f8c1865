"""Block occurrence counting over digit streams."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Optional, Sequence, Union

import numpy as np

from .additive import DEFAULT_SEGMENT, AdditiveFunctionSpec, iter_segments
from .digits import ALPHABET, LengthSchedule, _exact, check_base, digit_matrix, k_y, stream_from_values
from .errors import ConfigError, PreconditionError, ResourceBudgetError

MAX_TABLE = 1 << 24


@dataclass(frozen=True)
class Block:
    base: int
    digits: tuple

    def __post_init__(self):
        check_base(self.base)
        if not self.digits:
            raise ConfigError("a block needs at least one digit")
        if any(not 0 <= d < self.base for d in self.digits):
            raise ConfigError(f"block digit out of range for base {self.base}")

    @classmethod
    def parse(cls, text: str, base: int) -> "Block":
        try:
            digits = tuple(ALPHABET.index(ch) for ch in text.lower())
        except ValueError:
            raise ConfigError(f"bad block {text!r}") from None
        return cls(base, digits)

    @property
    def k(self) -> int:
        return len(self.digits)

    @property
    def code(self) -> int:
        v = 0
        for d in self.digits:
            v = v * self.base + d
        return v

    def __str__(self):
        return "".join(ALPHABET[d] for d in self.digits)


def block_label(code: int, k: int, base: int) -> str:
    out = []
    for _ in range(k):
        code, d = divmod(code, base)
        out.append(ALPHABET[d])
    return "".join(reversed(out))


def _table_size(base, k):
    size = base ** k
    if size > MAX_TABLE:
        raise ResourceBudgetError(f"{base}^{k} block table is too large")
    return size


def block_codes(digits: np.ndarray, k: int, base: int) -> np.ndarray:
    """Integer code of the block starting at every position 0 .. L-k."""
    n = len(digits) - k + 1
    if n <= 0:
        return np.zeros(0, dtype=np.int64)
    code = np.zeros(n, dtype=np.int64)
    for j in range(k):
        code = code * base + digits[j:j + n]
    return code


@dataclass
class BlockCensus:
    """Counts of every length-k block, indexed by block code (most significant digit first).

    ``head``/``tail`` keep the first/last k-1 digits so censuses of adjacent
    chunks can be merged exactly.
    """

    base: int
    k: int
    counts: np.ndarray
    positions: int
    length: int = 0
    head: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.uint8))
    tail: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.uint8))

    def count(self, block: Union[Block, str]) -> int:
        if isinstance(block, str):
            block = Block.parse(block, self.base)
        return int(self.counts[block.code])

    def as_dict(self, nonzero: bool = True) -> dict:
        idx = np.flatnonzero(self.counts) if nonzero else range(len(self.counts))
        return {block_label(int(i), self.k, self.base): int(self.counts[i]) for i in idx}

    def frequencies(self) -> np.ndarray:
        if self.positions == 0:
            return np.zeros(len(self.counts))
        return self.counts / self.positions


def census(stream: Sequence[int], k: int, base: int) -> BlockCensus:
    """Every overlapping length-k block of ``stream``."""
    if k < 1:
        raise ValueError("k must be >= 1")
    check_base(base)
    digits = np.asarray(stream, dtype=np.int64)
    codes = block_codes(digits, k, base)
    counts = np.bincount(codes, minlength=_table_size(base, k)).astype(np.int64)
    keep = k - 1
    d8 = digits.astype(np.uint8)
    return BlockCensus(base, k, counts, len(codes), len(digits),
                       head=d8[:keep].copy(), tail=d8[len(d8) - min(keep, len(d8)):].copy())


def merge(c1: BlockCensus, c2: BlockCensus, boundary: Optional[Sequence[int]] = None) -> BlockCensus:
    """Census of the concatenation of the two underlying streams.

    ``boundary`` defaults to the last k-1 digits of the first stream followed
    by the first k-1 digits of the second; every block inside it straddles
    the junction.
    """
    if (c1.base, c1.k) != (c2.base, c2.k):
        raise ValueError("cannot merge censuses with different base or k")
    k, base = c1.k, c1.base
    if c1.length == 0:
        return c2
    if c2.length == 0:
        return c1
    if boundary is None:
        boundary = np.concatenate([c1.tail, c2.head])
    boundary = np.asarray(boundary, dtype=np.int64)
    if len(boundary) > 2 * (k - 1):
        raise ValueError("boundary longer than 2(k-1)")
    counts = c1.counts + c2.counts
    cross = block_codes(boundary, k, base)
    np.add.at(counts, cross, 1)
    keep = k - 1
    joined_head = np.concatenate([c1.head, c2.head])[:keep] if len(c1.head) < keep else c1.head
    if len(c2.tail) < keep:
        joined_tail = np.concatenate([c1.tail, c2.tail])[-keep:] if keep else c2.tail
    else:
        joined_tail = c2.tail
    return BlockCensus(base, k, counts, c1.positions + c2.positions + len(cross), c1.length + c2.length,
                       head=joined_head.copy(), tail=joined_tail.copy())


def census_chunks(chunks: Iterable[np.ndarray], k: int, base: int) -> BlockCensus:
    """Census of a stream delivered in pieces, merged left to right."""
    total = census(np.zeros(0, dtype=np.uint8), k, base)
    for chunk in chunks:
        total = merge(total, census(chunk, k, base))
    return total


def chi_square(c: BlockCensus) -> float:
    """Pearson statistic of the block counts against the uniform distribution."""
    if c.positions <= 0:
        raise ValueError("chi-square of an empty census")
    expected = c.positions / len(c.counts)
    return float(np.sum((c.counts - expected) ** 2) / expected)


def theta_ind(z, block: Block) -> int:
    """1 iff the fractional part of z lies in [0.a1..ak, 0.a1..ak + b^-k).

    Floats are compared through their exact rational value, so the only
    error is whatever rounding already happened when ``z`` was formed.
    """
    q = Fraction(z)
    frac = q - math.floor(q)
    low = Fraction(block.code, block.base ** block.k)
    return int(low <= frac < low + Fraction(1, block.base ** block.k))


def theta_ind_int(value: int, m: int, block: Block) -> int:
    """theta_ind(value / b^m, block) for integer ``value`` via digit comparison."""
    k, b = block.k, block.base
    if m < k:
        raise ValueError("m must be >= block length")
    return int((int(value) // b ** (m - k)) % b ** k == block.code)


@dataclass
class CountReport:
    x: int
    y: float
    base: int
    block: str
    eps: float
    n_star: int
    n_formula: int
    u_part: int
    v_part: int
    length: int
    K_x: int
    synthetic_K: bool
    u_range: tuple
    v_range: tuple

    @property
    def boundary_occurrences(self) -> int:
        return self.n_star - self.n_formula

    @property
    def star_frequency(self) -> float:
        """n_star over scanned positions (L - k + 1)."""
        positions = self.length - len(self.block) + 1
        return self.n_star / positions if positions > 0 else 0.0

    @property
    def normalized(self) -> float:
        """n_formula / (x K_y(x)), the normalisation used in the asymptotic argument."""
        return self.n_formula / (self.x * self.K_x)


def _m_window_counts(vals, ks, block, m_lo, m_hi):
    """Sum over n and m in [m_lo, m_hi] (m in [k, ks[n]]) of the digit-match indicator."""
    k, b, target = block.k, block.base, block.code
    total = 0
    v = np.floor(vals).astype(np.int64) if vals.dtype.kind == "f" else vals
    modulus = b ** k
    for m in range(max(m_lo, k), m_hi + 1):
        shift = b ** (m - k)
        if shift > np.iinfo(np.int64).max:
            hit = np.full(len(v), target == 0)
        else:
            hit = (v // shift) % modulus == target
        total += int(np.count_nonzero(hit & (ks >= m)))
    return total


def count_formula(spec: AdditiveFunctionSpec, schedule: LengthSchedule, block: Block, x: int,
                  eps=0.1, threads: int = 1, segment_size: int = DEFAULT_SEGMENT) -> CountReport:
    """Occurrences of ``block`` in theta_{f,y} up to f_y(x), counted two ways.

    ``n_formula`` sums the indicator over n <= x and k <= m <= K_y(n), i.e.
    occurrences lying inside one f_y(n). ``n_star`` scans the concatenated
    stream, so it also sees occurrences straddling two strings.
    """
    if block.base != schedule.base:
        raise ConfigError("block and schedule bases differ")
    k, b = block.k, block.base
    if k > k_y(1, schedule):
        raise PreconditionError(f"block length {k} exceeds the shortest string length {k_y(1, schedule)}")
    e = _exact(eps)
    Kx = k_y(x, schedule)
    KY = k_y(x, schedule.rescaled(min(schedule.y, 0.5)))
    cK = k_y(x, schedule.rescaled(0.5))
    u_range = (math.ceil(e * cK), math.floor((1 - e) * KY))
    v_range = (math.ceil((1 + e) * KY), Kx)

    n_formula = u_part = v_part = n_star = length = 0
    carry = np.zeros(0, dtype=np.uint8)
    for lo, vals in iter_segments(spec, 1, x + 1, segment_size, threads):
        ks = schedule.lengths(np.arange(lo, lo + len(vals)))
        kmax = int(ks.max())
        n_formula += _m_window_counts(vals, ks, block, k, kmax)
        u_part += _m_window_counts(vals, ks, block, *u_range)
        v_part += _m_window_counts(vals, ks, block, *v_range)
        digits = stream_from_values(vals, ks, b)
        length += len(digits)
        joined = np.concatenate([carry, digits])
        n_star += int(np.count_nonzero(block_codes(joined, k, b) == block.code))
        carry = joined[len(joined) - min(k - 1, len(joined)):] if k > 1 else carry[:0]
    return CountReport(x=x, y=schedule.y, base=b, block=str(block), eps=float(eps), n_star=n_star,
                       n_formula=n_formula, u_part=u_part, v_part=v_part, length=length, K_x=Kx,
                       synthetic_K=schedule.synthetic, u_range=u_range, v_range=v_range)


def bias_census(values_iter: Iterable[np.ndarray], window: Sequence[int], base: int) -> BlockCensus:
    """Census of the digits of floor(f(n)) at fixed positions, one block per n.

    ``window`` lists positions (1 = least significant) in reading order,
    e.g. ``[4]`` or ``[4, 3]``.
    """
    check_base(base)
    if not window or min(window) < 1:
        raise ValueError("window positions must be >= 1")
    k = len(window)
    counts = np.zeros(_table_size(base, k), dtype=np.int64)
    total = 0
    for vals in values_iter:
        code = np.zeros(len(vals), dtype=np.int64)
        for pos in window:
            code = code * base + digit_matrix(vals, 1, base, low=pos)[:, 0]
        counts += np.bincount(code, minlength=len(counts))
        total += len(vals)
    return BlockCensus(base, k, counts, total, total)


def write_census_csv(fh, c: BlockCensus, all_blocks: bool = True):
    """``block,count,frequency`` rows, then a trailer ``TOTAL,<positions>,<chi2>``."""
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["block", "count", "frequency"])
    idx = range(len(c.counts)) if all_blocks else np.flatnonzero(c.counts).tolist()
    freqs = c.frequencies()
    for i in idx:
        w.writerow([block_label(i, c.k, c.base), int(c.counts[i]), repr(float(freqs[i]))])
    chi = chi_square(c) if c.positions > 0 else float("nan")
    w.writerow(["TOTAL", c.positions, repr(chi)])


COUNT_COLUMNS = ["x", "n_star", "n_formula", "u_part", "v_part", "boundary_occurrences"]


def write_count_csv(fh, reports: Iterable[CountReport]):
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(COUNT_COLUMNS)
    for r in reports:
        w.writerow([r.x, r.n_star, r.n_formula, r.u_part, r.v_part, r.boundary_occurrences])
