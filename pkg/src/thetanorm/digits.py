"""Base-b truncation, the K_y length schedule, and concatenated digit streams."""
from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, Optional

import numpy as np

from .additive import DEFAULT_MEMORY_BUDGET, DEFAULT_SEGMENT, AdditiveFunctionSpec, iter_segments
from .errors import ConfigError, ResourceBudgetError

ALPHABET = "0123456789abcdefghijklmnopqrstuvwxyz"
E_E = math.exp(math.e)

STREAM_MAGIC = b"TD"
_HEADER = struct.Struct("<2sB5s")  # magic, base, 40-bit little-endian length


def check_base(b: int) -> int:
    if not isinstance(b, (int, np.integer)) or not 2 <= b <= 36:
        raise ConfigError(f"base must be an integer in [2, 36], got {b!r}")
    return int(b)


def _floor_int(z) -> int:
    if isinstance(z, (int, np.integer)):
        return int(z)
    return math.floor(z)


def digit_of(z, position: int, base: int) -> int:
    """Digit of floor(z) at ``position`` (1 = least significant)."""
    if position < 1:
        raise ValueError("position must be >= 1")
    return (_floor_int(z) // base ** (position - 1)) % base


def truncate(z, m: int, base: int) -> str:
    """Last ``m`` base-b digits of floor(z), zero padded to exactly ``m`` characters."""
    check_base(base)
    if z < 0:
        raise ValueError("z must be non-negative")
    if m < 1:
        raise ValueError("m must be >= 1")
    v = _floor_int(z) % base ** m
    out = []
    for _ in range(m):
        v, d = divmod(v, base)
        out.append(ALPHABET[d])
    return "".join(reversed(out))


@dataclass(frozen=True)
class LengthSchedule:
    """K_y(x) = ceil(y * logloglog x / log b) for x > e^e, else 1.

    ``forced_K`` replaces the formula by a constant. That is a synthetic
    setting: the natural schedule never exceeds 2 at any feasible x.
    """

    y: float
    base: int
    forced_K: Optional[int] = None

    def __post_init__(self):
        check_base(self.base)
        if not self.y > 0:
            raise ConfigError("y must be positive")
        if self.forced_K is not None and self.forced_K < 1:
            raise ConfigError("forced_K must be >= 1")

    @property
    def synthetic(self) -> bool:
        return self.forced_K is not None

    def rescaled(self, y: float) -> "LengthSchedule":
        """Schedule for another y; a forced length scales by y'/y, rounded up."""
        if self.forced_K is None:
            return LengthSchedule(y, self.base)
        k = math.ceil(Fraction(self.forced_K) * Fraction(str(y)) / Fraction(str(self.y)))
        return LengthSchedule(y, self.base, max(1, k))

    def lengths(self, n: np.ndarray) -> np.ndarray:
        """K_y at every entry of ``n`` (vectorised; the only implementation)."""
        n = np.asarray(n, dtype=np.float64)
        if self.forced_K is not None:
            return np.full(n.shape, self.forced_K, dtype=np.int64)
        out = np.ones(n.shape, dtype=np.int64)
        big = n > E_E
        if big.any():
            lll = np.log(np.log(np.log(n[big])))
            out[big] = np.maximum(np.ceil(self.y * lll / math.log(self.base)), 1).astype(np.int64)
        return out


def k_y(x, schedule: LengthSchedule) -> int:
    return int(schedule.lengths(np.array([x], dtype=np.float64))[0])


def calK(x, base: int) -> int:
    return k_y(x, LengthSchedule(0.5, base))


def digit_matrix(values: np.ndarray, width: int, base: int, low: int = 1) -> np.ndarray:
    """Digits of floor(values) at positions ``low + width - 1`` down to ``low``, one row per value."""
    v = np.floor(values).astype(np.int64) if values.dtype.kind == "f" else values.astype(np.int64)
    out = np.zeros((len(v), width), dtype=np.uint8)
    limit = np.iinfo(np.int64).max
    for j in range(width):
        power = base ** (low - 1 + width - 1 - j)
        if power <= limit:  # higher positions of an int64 are all zero
            out[:, j] = (v // power) % base
    return out


def _runs(ks: np.ndarray):
    """Split an array into maximal runs of equal value: yields (start, stop, value)."""
    if len(ks) == 0:
        return
    cuts = np.flatnonzero(np.diff(ks)) + 1
    starts = np.concatenate([[0], cuts])
    stops = np.concatenate([cuts, [len(ks)]])
    for s, e in zip(starts.tolist(), stops.tolist()):
        yield s, e, int(ks[s])


def stream_from_values(values: np.ndarray, ks: np.ndarray, base: int) -> np.ndarray:
    """Concatenate T_b(values[i], ks[i]) into one uint8 digit array."""
    parts = [digit_matrix(values[s:e], k, base).ravel() for s, e, k in _runs(ks)]
    return np.concatenate(parts) if parts else np.zeros(0, dtype=np.uint8)


def stream_length(schedule: LengthSchedule, n_max: int, chunk: int = DEFAULT_SEGMENT) -> int:
    if schedule.forced_K is not None:
        return schedule.forced_K * n_max
    total = 0
    for s in range(1, n_max + 1, chunk):
        total += int(schedule.lengths(np.arange(s, min(s + chunk, n_max + 1))).sum())
    return total


def iter_stream(spec: AdditiveFunctionSpec, schedule: LengthSchedule, n_max: int,
                segment_size: int = DEFAULT_SEGMENT, threads: int = 1) -> Iterator[np.ndarray]:
    """The digits of theta_{f,y} for n <= n_max, chunk by chunk."""
    for lo, vals in iter_segments(spec, 1, n_max + 1, segment_size, threads):
        ks = schedule.lengths(np.arange(lo, lo + len(vals)))
        yield stream_from_values(vals, ks, schedule.base)


def build_stream(spec: AdditiveFunctionSpec, schedule: LengthSchedule, n_max: int,
                 budget: int = DEFAULT_MEMORY_BUDGET, threads: int = 1) -> np.ndarray:
    """(f_y(1))(f_y(2))...(f_y(n_max)) as a uint8 digit array."""
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    length = stream_length(schedule, n_max)
    if length > budget:
        raise ResourceBudgetError(f"stream of {length} digits exceeds budget {budget}")
    return np.concatenate(list(iter_stream(spec, schedule, n_max, threads=threads)))


def _exact(eps) -> Fraction:
    return Fraction(str(eps)) if isinstance(eps, float) else Fraction(eps)


def window_bounds(eps, K: int) -> tuple[int, int]:
    """(high, low) inclusive digit positions ceil((1-eps)K) .. max(ceil(eps K), 1)."""
    e = _exact(eps)
    return math.ceil((1 - e) * K), max(math.ceil(e * K), 1)


def build_window_stream(spec: AdditiveFunctionSpec, eps, base: int, n_max: int,
                        forced_calK: Optional[int] = None, threads: int = 1) -> np.ndarray:
    """Concatenate the digits of floor(f(n)) from position ceil((1-eps)calK(n)) down to max(ceil(eps calK(n)), 1)."""
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    check_base(base)
    sched = LengthSchedule(0.5, base, forced_calK)
    parts = []
    for lo, vals in iter_segments(spec, 1, n_max + 1, threads=threads):
        Ks = sched.lengths(np.arange(lo, lo + len(vals)))
        for s, e, K in _runs(Ks):
            hi_pos, lo_pos = window_bounds(eps, K)
            if hi_pos >= lo_pos:
                parts.append(digit_matrix(vals[s:e], hi_pos - lo_pos + 1, base, low=lo_pos).ravel())
    return np.concatenate(parts) if parts else np.zeros(0, dtype=np.uint8)


def to_text(digits: np.ndarray) -> str:
    table = np.frombuffer(ALPHABET.encode(), dtype=np.uint8)
    return table[digits].tobytes().decode()


def from_text(text: str, base: int) -> np.ndarray:
    text = text.strip()
    lut = np.full(256, 255, dtype=np.uint8)
    for i, ch in enumerate(ALPHABET[:base]):
        lut[ord(ch)] = i
        lut[ord(ch.upper())] = i
    raw = np.frombuffer(text.encode("ascii", errors="replace"), dtype=np.uint8)
    digits = lut[raw]
    if (digits == 255).any():
        bad = text[int(np.flatnonzero(digits == 255)[0])]
        raise ConfigError(f"character {bad!r} is not a base-{base} digit")
    return digits


def to_binary(digits: np.ndarray, base: int) -> bytes:
    """8-byte header (magic ``TD``, base, 40-bit length) followed by one byte per digit."""
    n = len(digits)
    if n >= 1 << 40:
        raise ResourceBudgetError("stream too long for the binary format")
    return _HEADER.pack(STREAM_MAGIC, base, n.to_bytes(5, "little")) + digits.astype(np.uint8).tobytes()


def from_binary(blob: bytes) -> tuple[np.ndarray, int]:
    if len(blob) < _HEADER.size:
        raise ConfigError("truncated stream header")
    magic, base, raw_len = _HEADER.unpack_from(blob)
    if magic != STREAM_MAGIC:
        raise ConfigError("not a digit stream file (bad magic)")
    n = int.from_bytes(raw_len, "little")
    body = np.frombuffer(blob, dtype=np.uint8, offset=_HEADER.size)
    if len(body) != n:
        raise ConfigError(f"stream header says {n} digits, file has {len(body)}")
    check_base(base)
    if n and int(body.max()) >= base:
        raise ConfigError("digit out of range for the header's base")
    return body.copy(), base
