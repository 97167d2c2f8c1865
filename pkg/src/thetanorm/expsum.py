"""Exponential sums of additive functions and their Selberg-Delange main terms."""
from __future__ import annotations

import cmath
import csv
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from sympy import integer_nthroot

from .additive import DEFAULT_SEGMENT, AdditiveFunctionSpec, iter_segments, primes_upto
from .digits import check_base
from .errors import ConfigError, NumericError

MAX_MODULUS = 1 << 31
_HIST_LIMIT = 1 << 22

# Lanczos approximation, g = 7, nine terms
_LANCZOS_G = 7
_LANCZOS = (
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
)


def complex_gamma(z: complex) -> complex:
    """Gamma function on the complex plane (reflection + Lanczos series)."""
    z = complex(z)
    if z.imag == 0 and z.real <= 0 and z.real == math.floor(z.real):
        raise NumericError(f"Gamma has a pole at {z.real:g}")
    if z.real < 0.5:
        return cmath.pi / (cmath.sin(cmath.pi * z) * complex_gamma(1 - z))
    z -= 1
    acc = _LANCZOS[0]
    for i, coef in enumerate(_LANCZOS[1:], 1):
        acc += coef / (z + i)
    t = z + _LANCZOS_G + 0.5
    return math.sqrt(2 * math.pi) * t ** (z + 0.5) * cmath.exp(-t) * acc


def reciprocal_gamma(z: complex) -> complex:
    """1/Gamma(z); entire, and exactly 0 at the poles of Gamma."""
    z = complex(z)
    if z.imag == 0 and z.real <= 0 and z.real == math.floor(z.real):
        return 0j
    return 1 / complex_gamma(z)


def modulus(base: int, m: int) -> int:
    check_base(base)
    if m < 1:
        raise ConfigError("m must be >= 1")
    return base ** m


def residue_phases(r: np.ndarray, M: int) -> np.ndarray:
    """e(r / M) for integer residues 0 <= r < M.

    The quadrant is split off exactly, so multiples of M/4 land on 1, i, -1, -i.
    """
    r = np.asarray(r, dtype=np.int64)
    quad, rem = np.divmod(4 * r, M)
    ang = (np.pi / 2) * (rem / M)
    c, s = np.cos(ang), np.sin(ang)
    re = np.select([quad == 0, quad == 1, quad == 2], [c, -s, -c], s)
    im = np.select([quad == 0, quad == 1, quad == 2], [s, c, -s], -c)
    return re + 1j * im


def unit_phases(a: int, values, M: int, integer: bool) -> np.ndarray:
    """e(a * v / M) for every v, via the exact residue a*v mod M for integer values."""
    values = np.asarray(values)
    if integer:
        return residue_phases(((a % M) * (values.astype(np.int64) % M)) % M, M)
    t = a * values.astype(np.float64) / M
    ang = 2 * np.pi * (t - np.floor(t))
    return np.cos(ang) + 1j * np.sin(ang)


def _residues(a, vals, M):
    return ((a % M) * (vals % M)) % M


@dataclass
class ExpSumRecord:
    x_grid: np.ndarray
    sums: np.ndarray
    spec_name: str
    a: int
    m: int
    base: int

    @property
    def normalized(self) -> np.ndarray:
        return np.abs(self.sums) / self.x_grid


def _check_grid(x_grid):
    grid = np.asarray([int(x) for x in x_grid], dtype=np.int64)
    if len(grid) == 0 or grid[0] < 1 or np.any(np.diff(grid) <= 0):
        raise ConfigError("x grid must be non-empty, positive and strictly increasing")
    return grid


def _sum_histogram(hist, M) -> complex:
    """Sum of count * e(r/M), in ascending r, with correctly rounded components."""
    if isinstance(hist, np.ndarray):
        r = np.flatnonzero(hist)
        cnt = hist[r].astype(np.float64)
    else:
        r = np.array(sorted(hist), dtype=np.int64)
        cnt = np.array([hist[i] for i in r.tolist()], dtype=np.float64)
    ph = residue_phases(r, M)
    return complex(math.fsum((cnt * ph.real).tolist()), math.fsum((cnt * ph.imag).tolist()))


def exp_sum(spec: AdditiveFunctionSpec, a: int, m: int, base: int, x_grid: Sequence[int],
            threads: int = 1, segment_size: int = DEFAULT_SEGMENT) -> ExpSumRecord:
    """S(x) = sum_{n <= x} e(a f(n) / b^m) at every grid point.

    For integer-valued f the sum is formed from exact residue counts, so the
    result does not depend on how [1, x] is segmented or on ``threads``.
    """
    if a == 0:
        raise ConfigError("a must be non-zero")
    M = modulus(base, m)
    grid = _check_grid(x_grid)
    xmax = int(grid[-1])
    sums = np.zeros(len(grid), dtype=np.complex128)
    if spec.is_integer:
        if M > MAX_MODULUS:
            raise NumericError(f"b^m = {M} is too large for exact residue arithmetic")
        hist = np.zeros(M, dtype=np.int64) if M <= _HIST_LIMIT else Counter()
        gi = 0
        for lo, vals in iter_segments(spec, 1, xmax + 1, segment_size, threads):
            hi = lo + len(vals)
            start = 0
            while True:
                stop = len(vals) if gi >= len(grid) or grid[gi] >= hi else int(grid[gi]) - lo + 1
                res = _residues(a, vals[start:stop], M)
                if isinstance(hist, np.ndarray):
                    hist += np.bincount(res, minlength=M)
                else:
                    u, c = np.unique(res, return_counts=True)
                    hist.update(dict(zip(u.tolist(), c.tolist())))
                start = stop
                if gi < len(grid) and grid[gi] < hi:
                    sums[gi] = _sum_histogram(hist, M)
                    gi += 1
                else:
                    break
    else:
        running = 0j
        gi = 0
        for lo, vals in iter_segments(spec, 1, xmax + 1, segment_size, threads):
            hi = lo + len(vals)
            start = 0
            while True:
                stop = len(vals) if gi >= len(grid) or grid[gi] >= hi else int(grid[gi]) - lo + 1
                ph = unit_phases(a, vals[start:stop], M, integer=False)
                running += complex(math.fsum(ph.real.tolist()), math.fsum(ph.imag.tolist()))
                start = stop
                if gi < len(grid) and grid[gi] < hi:
                    sums[gi] = running
                    gi += 1
                else:
                    break
    if not np.all(np.isfinite(sums)):
        raise NumericError("non-finite exponential sum")
    return ExpSumRecord(grid, sums, spec.name, a, m, base)


def naive_exp_sum(values: Sequence, a: int, M: int) -> complex:
    """Term-by-term sum of exp(2 pi i a v / M); reference path for tests."""
    return sum(cmath.exp(2j * cmath.pi * a * v / M) for v in values)


@dataclass
class CoefficientSystem:
    """Unimodular multiplicative coefficients a_{p^k} for a fixed cutoff x.

    p^k <= x       : e(a f(p^k) / b^m)
    p <= x < p^k   : e(a (f(p^{k-1}) + f(p)) / b^m)
    p > x          : e(a k c / b^m)
    """

    spec: AdditiveFunctionSpec
    a: int
    M: int
    x: int

    def coefficients(self, primes: np.ndarray, k: int) -> np.ndarray:
        primes = np.asarray(primes, dtype=np.int64)
        spec = self.spec
        integer = spec.is_integer and float(spec.c).is_integer()
        root = int(integer_nthroot(self.x, k)[0])
        vals = np.zeros(len(primes), dtype=np.float64 if not integer else np.int64)
        small = primes <= root
        mid = (primes > root) & (primes <= self.x)
        big = primes > self.x
        if small.any():
            vals[small] = spec.power_values(primes[small], k)
        if mid.any():
            vals[mid] = spec.power_values(primes[mid], k - 1) + spec.prime_values(primes[mid])
        if big.any():
            vals[big] = k * spec.c
        return unit_phases(self.a, vals, self.M, integer)


@dataclass
class SDPrediction:
    x_grid: np.ndarray
    c_prime: complex
    main_terms: np.ndarray
    g_values: np.ndarray
    G_cprime: complex
    gamma_recip: complex
    P: int
    last_increment: float
    tail_estimate: float
    converged: bool
    correction_logs: np.ndarray = field(default_factory=lambda: np.zeros(0))


def euler_G(z: complex, P: int) -> tuple[complex, float]:
    """prod_{p <= P} (1 - z/p)^{-1} (1 - 1/p)^z and the modulus of the last log-increment."""
    p = primes_upto(P).astype(np.float64)
    z = complex(z)
    base_log = np.log1p(-1.0 / p)
    if z.imag == 0:
        terms = -np.log1p(-z.real / p) + z.real * base_log
    else:
        terms = -np.log1p(-z / p) + z * base_log
    total = np.cumsum(terms)[-1]
    return complex(np.exp(total)), float(abs(terms[-1]))


def _correction_log(system: CoefficientSystem, c_prime: complex, primes: np.ndarray, cutoff=1e-18) -> complex:
    """sum_p log(E_p (1 - c'/p)) with E_p = 1 + sum_k a_{p^k} p^{-k}.

    Uses E_p (1 - c'/p) = 1 + sum_k (a_{p^k} - c' a_{p^{k-1}}) p^{-k}, so a
    factor whose coefficients are c'^k is exactly 1.
    """
    d = np.zeros(len(primes), dtype=np.complex128)
    prev = np.ones(len(primes), dtype=np.complex128)
    pf = primes.astype(np.float64)
    k = 1
    active = len(primes)
    while active:
        lim = cutoff ** (-1.0 / k)
        active = int(np.searchsorted(primes, lim, side="right"))
        if active == 0:
            break
        cur = system.coefficients(primes[:active], k)
        diff = cur - c_prime * prev[:active]
        d[:active] += diff * pf[:active] ** (-k)
        prev[:active] = cur
        k += 1
    return complex(np.cumsum(np.log1p(d))[-1]) if len(d) else 0j


def c_prime_of(spec: AdditiveFunctionSpec, a: int, M: int) -> complex:
    return complex(unit_phases(a, np.array([spec.c]), M, spec.is_integer and float(spec.c).is_integer())[0])


def sd_main_term(spec: AdditiveFunctionSpec, a: int, m: int, base: int, x_grid: Sequence[int],
                 P: int = 10**6, tol: float = 1e-6) -> SDPrediction:
    """x (log x)^{c'-1} G(1; c') / Gamma(c') at each grid point, c' = e(a c / b^m).

    G(1; c') is split as G(c') times a product over p <= min(x, P) that
    carries the x-dependent prime-power coefficients; primes above x give
    factors equal to 1.
    """
    if P < 100:
        raise ConfigError("P must be >= 100")
    grid = _check_grid(x_grid)
    if grid[0] < 3:
        raise ConfigError("grid points must be >= 3")
    M = modulus(base, m)
    cp = c_prime_of(spec, a, M)
    G, last = euler_G(cp, P)
    tail = abs(cp * cp - cp) / (2 * P * math.log(P))
    rg = reciprocal_gamma(cp)
    primes = primes_upto(P)
    g_values = np.zeros(len(grid), dtype=np.complex128)
    logs = np.zeros(len(grid), dtype=np.complex128)
    mains = np.zeros(len(grid), dtype=np.complex128)
    for i, x in enumerate(grid.tolist()):
        system = CoefficientSystem(spec, a, M, x)
        ps = primes[primes <= x]
        logs[i] = _correction_log(system, cp, ps)
        g_values[i] = G * cmath.exp(logs[i])
        mains[i] = x * cmath.exp((cp - 1) * math.log(math.log(x))) * g_values[i] * rg
    if not (np.all(np.isfinite(mains)) and np.all(np.isfinite(g_values))):
        raise NumericError("non-finite Selberg-Delange prediction")
    return SDPrediction(grid, cp, mains, g_values, G, rg, P, last, tail, tail <= tol, logs)


def phase_prediction(c: float, a: int, m: int, base: int, x_grid: Sequence[int]) -> np.ndarray:
    """x e(a c log log x / b^m) at each grid point."""
    M = modulus(base, m)
    grid = _check_grid(x_grid)
    out = np.zeros(len(grid), dtype=np.complex128)
    for i, x in enumerate(grid.tolist()):
        t = a * c * math.log(math.log(x)) / M
        out[i] = x * cmath.exp(2j * math.pi * (t - math.floor(t)))
    return out


@dataclass
class DecayProfile:
    x: np.ndarray
    ratio: np.ndarray
    slope: Optional[float]
    verdict: str


def decay_profile(record: ExpSumRecord, covariate: str = "loglog", slope_tol: float = 1e-3) -> DecayProfile:
    """|S(x)|/x with a least-squares trend of log(|S|/x) against log x or log log x."""
    if len(record.x_grid) == 0:
        raise ValueError("empty record")
    ratio = record.normalized
    xs = record.x_grid.astype(np.float64)
    if np.all(ratio == 0):
        return DecayProfile(record.x_grid, ratio, None, "vanishing")
    if len(xs) < 2 or np.any(ratio == 0):
        return DecayProfile(record.x_grid, ratio, None, "insufficient-data")
    if covariate == "log":
        t = np.log(xs)
    elif covariate == "loglog":
        t = np.log(np.log(xs))
    else:
        raise ConfigError(f"unknown covariate {covariate!r}")
    slope = float(np.polyfit(t, np.log(ratio), 1)[0])
    return DecayProfile(record.x_grid, ratio, slope, "decay" if slope < -slope_tol else "no decay")


EXPSUM_COLUMNS = ["x", "S_re", "S_im", "S_abs", "S_abs_over_x", "pred_re", "pred_im", "pred_abs", "ratio_abs"]


def write_expsum_csv(fh, record: ExpSumRecord, predictions: np.ndarray):
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(EXPSUM_COLUMNS)
    for x, s, p in zip(record.x_grid.tolist(), record.sums, predictions):
        if abs(p) > 0:
            ratio = abs(s) / abs(p)
        else:
            ratio = float("nan") if abs(s) == 0 else float("inf")
        w.writerow([x] + [repr(float(v)) for v in (s.real, s.imag, abs(s), abs(s) / x, p.real, p.imag, abs(p), ratio)])
