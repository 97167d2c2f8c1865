"""Finite-x diagnostics for "almost constant on primes", "weakly additive", and Erdos-Kac statistics.

Both classifier conditions are limit statements; every verdict here reads
"consistent-with-..." and never claims the asymptotic property itself.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from .additive import AdditiveFunctionSpec, iter_segments, prime_moments, primes_upto
from .blocks import BlockCensus, bias_census
from .digits import E_E
from .errors import ConfigError

DEFAULT_DELTA = 0.25
DEFAULT_EPS_GRID = (0.1, 0.2, 0.4, 0.8)
DEFAULT_X_GRID = (10**3, 10**4, 10**5, 10**6, 10**7)


def _loglog_power(x, power):
    # below e^e, log log x <= 1 and the damping is switched off
    return math.log(math.log(x)) ** power if x > E_E else 1.0


def b_eps_values(fp: np.ndarray, c: float, x: float, eps: float) -> np.ndarray:
    return np.minimum(2.0, np.abs(np.asarray(fp, dtype=np.float64) - c) / _loglog_power(x, eps / 4))


def b_eps(spec: AdditiveFunctionSpec, c: float, x: float, p: int, eps: float) -> float:
    """min{2, |f(p) - c| / (log log x)^(eps/4)}."""
    return float(b_eps_values(np.array([spec.prime_value(p)]), c, x, eps)[0])


def c_eps(spec: AdditiveFunctionSpec, x: float, p: int, k: int, eps: float) -> float:
    """min{2, |f(p^k) - f(p^{k-1}) - f(p)| / (log log x)^(1 + eps/4)}."""
    dev = abs(spec.value(p, k) - spec.value(p, k - 1) - spec.value(p, 1))
    return min(2.0, dev / _loglog_power(x, 1 + eps / 4))


@dataclass
class ClassifierRow:
    x: int
    eps: float
    acp_ratio: Optional[float] = None
    weak_product: Optional[float] = None
    anomaly: bool = False


@dataclass
class ClassifierReport:
    x_grid: tuple
    eps_grid: tuple
    delta: float
    c: float
    rows: list = field(default_factory=list)
    acp_verdicts: dict = field(default_factory=dict)
    weak_verdicts: dict = field(default_factory=dict)

    def cell(self, x, eps) -> ClassifierRow:
        for r in self.rows:
            if r.x == x and r.eps == eps:
                return r
        raise KeyError((x, eps))

    @property
    def acp_verdict(self) -> str:
        ok = self.acp_verdicts and all(v == "consistent-with-ACP" for v in self.acp_verdicts.values())
        return "consistent-with-ACP" if ok else "not-consistent-with-ACP"

    @property
    def weak_verdict(self) -> str:
        ok = self.weak_verdicts and all(v == "consistent-with-WA" for v in self.weak_verdicts.values())
        return "consistent-with-WA" if ok else "not-consistent-with-WA"


def _check_grids(x_grid, eps_grid):
    xs = tuple(int(x) for x in x_grid)
    if not xs or any(b <= a for a, b in zip(xs, xs[1:])) or xs[0] < 3:
        raise ConfigError("x grid must be increasing and start at >= 3")
    es = tuple(float(e) for e in eps_grid)
    if not es or any(e <= 0 for e in es):
        raise ConfigError("eps values must be positive")
    return xs, es


def acp_verdict(values: Sequence[float]) -> str:
    dec = all(b < a for a, b in zip(values, values[1:]))
    return "consistent-with-ACP" if dec else "not-consistent-with-ACP"


def weak_verdict(values: Sequence[float], anomaly: bool = False) -> str:
    gaps = [abs(1 - v) for v in values]
    ok = not anomaly and all(b <= a for a, b in zip(gaps, gaps[1:]))
    return "consistent-with-WA" if ok else "not-consistent-with-WA"


def acp_diagnostic(spec: AdditiveFunctionSpec, c: Optional[float] = None, delta: float = DEFAULT_DELTA,
                   eps_grid=DEFAULT_EPS_GRID, x_grid=DEFAULT_X_GRID) -> list[ClassifierRow]:
    """exp(sum_{p <= x} B_eps(x, p) / p^(1 - delta)) / log x on the grid."""
    if not 0 < delta < 0.5:
        raise ConfigError("delta must lie in (0, 1/2)")
    xs, es = _check_grids(x_grid, eps_grid)
    c = spec.c if c is None else c
    primes = primes_upto(xs[-1])
    fp = spec.prime_values(primes)
    weight = primes.astype(np.float64) ** (delta - 1)
    rows = []
    for eps in es:
        for x in xs:
            n = int(np.searchsorted(primes, x, side="right"))
            terms = b_eps_values(fp[:n], c, x, eps) * weight[:n]
            total = float(np.cumsum(terms)[-1]) if n else 0.0
            rows.append(ClassifierRow(x, eps, acp_ratio=math.exp(total) / math.log(x)))
    return rows


def weak_diagnostic(spec: AdditiveFunctionSpec, eps_grid=DEFAULT_EPS_GRID,
                    x_grid=DEFAULT_X_GRID) -> list[ClassifierRow]:
    """prod_{p <= x} (1 - sum_{p^k <= x, k >= 2} C_eps(x, p, k) / p^k) on the grid."""
    xs, es = _check_grids(x_grid, eps_grid)
    primes = primes_upto(math.isqrt(xs[-1]))
    # deviations |f(p^k) - f(p^{k-1}) - f(p)| for every p^k <= max x, k >= 2
    devs = []
    k = 2
    while True:
        ps = primes[primes <= int(round(xs[-1] ** (1 / k))) + 1]
        ps = np.array([p for p in ps.tolist() if p ** k <= xs[-1]], dtype=np.int64)
        if len(ps) == 0:
            break
        dev = np.abs(spec.power_values(ps, k) - spec.power_values(ps, k - 1) - spec.prime_values(ps))
        devs.append((k, ps, dev.astype(np.float64)))
        k += 1
    rows = []
    for eps in es:
        for x in xs:
            damp = _loglog_power(x, 1 + eps / 4)
            inner = np.zeros(len(primes))
            clipped = False
            for k, ps, dev in devs:
                ok = np.array([p ** k <= x for p in ps.tolist()], dtype=bool)
                kern = dev[ok] / damp
                clipped = clipped or bool(np.any(kern >= 2.0))
                inner[: int(ok.sum())] += np.minimum(2.0, kern) / ps[ok].astype(np.float64) ** k
            factors = 1.0 - inner
            # a saturated kernel means the deviation left the regime the product measures
            anomaly = clipped or bool(np.any(factors <= 0))
            product = float(np.cumprod(factors)[-1]) if len(factors) else 1.0
            rows.append(ClassifierRow(x, eps, weak_product=product, anomaly=anomaly))
    return rows


def classify(spec: AdditiveFunctionSpec, c: Optional[float] = None, delta: float = DEFAULT_DELTA,
             eps_grid=DEFAULT_EPS_GRID, x_grid=DEFAULT_X_GRID) -> ClassifierReport:
    xs, es = _check_grids(x_grid, eps_grid)
    c = spec.c if c is None else c
    acp = acp_diagnostic(spec, c, delta, es, xs)
    weak = weak_diagnostic(spec, es, xs)
    rows = []
    for a, w in zip(acp, weak):
        rows.append(ClassifierRow(a.x, a.eps, a.acp_ratio, w.weak_product, w.anomaly))
    rep = ClassifierReport(xs, es, delta, c, rows)
    for eps in es:
        cells = [r for r in rows if r.eps == eps]
        rep.acp_verdicts[eps] = acp_verdict([r.acp_ratio for r in cells])
        rep.weak_verdicts[eps] = weak_verdict([r.weak_product for r in cells], any(r.anomaly for r in cells))
    return rep


def write_classify_csv(fh, rep: ClassifierReport):
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["x", "eps", "acp_ratio", "weak_product", "verdict"])
    for r in rep.rows:
        verdict = f"{rep.acp_verdicts[r.eps]};{rep.weak_verdicts[r.eps]}"
        if r.anomaly:
            verdict += ";anomaly"
        w.writerow([r.x, repr(r.eps), repr(r.acp_ratio), repr(r.weak_product), verdict])


@dataclass
class EkReport:
    x: int
    histogram: dict
    mean: Fraction
    variance: Fraction
    A: float
    B: float
    loglog: float
    within: dict  # t -> fraction of n with |f(n) - log log x| <= t sqrt(log log x)
    within_counts: dict

    @property
    def total(self) -> int:
        return sum(self.histogram.values())


def ek_stats(spec: AdditiveFunctionSpec, x: int, threads: int = 1) -> EkReport:
    """Exact histogram of f(n), n <= x, with moments and concentration around log log x."""
    if x < 3:
        raise ConfigError("x must be >= 3")
    if not spec.is_integer:
        raise ConfigError("ek_stats needs an integer-valued function")
    hist = np.zeros(0, dtype=np.int64)
    for _, vals in iter_segments(spec, 1, x + 1, threads=threads):
        h = np.bincount(vals)
        if len(h) > len(hist):
            hist = np.concatenate([hist, np.zeros(len(h) - len(hist), dtype=np.int64)])
        hist[: len(h)] += h
    histogram = {v: int(cnt) for v, cnt in enumerate(hist.tolist()) if cnt}
    s1 = sum(v * cnt for v, cnt in histogram.items())
    s2 = sum(v * v * cnt for v, cnt in histogram.items())
    mean = Fraction(s1, x)
    variance = Fraction(s2, x) - mean * mean
    L = math.log(math.log(x))
    sd = math.sqrt(L)
    within, within_counts = {}, {}
    for t in (1, 2, 3):
        n = sum(cnt for v, cnt in histogram.items() if abs(v - L) <= t * sd)
        within_counts[t] = n
        within[t] = n / x
    mom = prime_moments(spec, x)
    return EkReport(x, histogram, mean, variance, mom.A, mom.B, L, within, within_counts)


def write_ek_csv(fh, rep: EkReport):
    """``value,count`` rows, then summary rows keyed in the first column."""
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["value", "count"])
    for v in sorted(rep.histogram):
        w.writerow([v, rep.histogram[v]])
    summary = [("x", rep.x), ("mean", repr(float(rep.mean))), ("variance", repr(float(rep.variance))),
               ("A_x", repr(rep.A)), ("B_x", repr(rep.B)), ("loglog_x", repr(rep.loglog))]
    for t in (1, 2, 3):
        summary.append((f"within_{t}sd_count", rep.within_counts[t]))
        summary.append((f"within_{t}sd", repr(rep.within[t])))
    w.writerows(summary)


def bias_demo(spec: AdditiveFunctionSpec, base: int, x: int, window: Sequence[int], threads: int = 1) -> BlockCensus:
    """Census of the digits of floor(f(n)) at high ``window`` positions over n <= x."""
    values = (vals for _, vals in iter_segments(spec, 1, x + 1, threads=threads))
    return bias_census(values, window, base)
