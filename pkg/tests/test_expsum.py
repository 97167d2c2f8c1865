import cmath
import io
import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from thetanorm.additive import OMEGA, OMEGA_BIG, AdditiveFunctionSpec, primes_upto, sieve_range
from thetanorm.errors import ConfigError, NumericError
from thetanorm.expsum import (ExpSumRecord, complex_gamma, c_prime_of, decay_profile, euler_G, exp_sum,
                              phase_prediction, reciprocal_gamma, residue_phases, sd_main_term,
                              write_expsum_csv)

from oracles import naive_exp_sum


def test_liouville_small():
    rec = exp_sum(OMEGA_BIG, 1, 1, 2, [10])
    assert rec.sums[0] == 0
    # brute force: lambda(1..10) = 1,-1,-1,1,-1,1,-1,-1,1,1
    assert sum((-1) ** v for v in [0, 1, 1, 2, 1, 2, 1, 3, 2, 2]) == 0


def test_liouville_known_values():
    rec = exp_sum(OMEGA_BIG, 1, 1, 2, [1000, 10**4, 10**5])
    assert rec.sums.imag.tolist() == [0.0, 0.0, 0.0]
    assert rec.sums.real.tolist() == [-14.0, -94.0, -288.0]


@pytest.mark.parametrize("spec,b,m", [(OMEGA, 10, 1), (OMEGA_BIG, 2, 3), (OMEGA, 3, 2)])
def test_a_equal_modulus_gives_x(spec, b, m):
    rec = exp_sum(spec, b ** m, m, b, [7, 100, 12345])
    assert rec.sums.tolist() == [7, 100, 12345]


def test_omega_against_naive():
    vals = sieve_range(OMEGA, 1, 1001).values
    s = exp_sum(OMEGA, 1, 1, 10, [1000]).sums[0]
    assert abs(s - naive_exp_sum(vals, 1, 10)) < 1e-9


def test_real_spec_against_naive():
    spec = AdditiveFunctionSpec(mode="strongly-additive", c=1, prime_rule=lambda p: 1 + p ** -0.5,
                                value_kind="real")
    vals = sieve_range(spec, 1, 5001).values
    s = exp_sum(spec, 3, 1, 10, [5000]).sums[0]
    assert abs(s - naive_exp_sum(vals, 3, 10)) < 1e-9


def test_large_modulus_counter_path():
    vals = sieve_range(OMEGA_BIG, 1, 3001).values
    s = exp_sum(OMEGA_BIG, 7, 8, 10, [3000]).sums[0]
    assert abs(s - naive_exp_sum(vals, 7, 10**8)) < 1e-9


def test_conjugation_and_periodicity():
    grid = [100, 5000, 30000]
    s = exp_sum(OMEGA, 3, 2, 10, grid).sums
    assert np.allclose(exp_sum(OMEGA, -3, 2, 10, grid).sums, np.conj(s), rtol=1e-12, atol=1e-9)
    assert np.array_equal(exp_sum(OMEGA, 103, 2, 10, grid).sums, s)


@settings(max_examples=30, deadline=None)
@given(st.integers(-50, 50).filter(bool), st.integers(1, 3), st.sampled_from([2, 3, 10]), st.integers(1, 3000))
def test_triangle_bound(a, m, b, x):
    s = exp_sum(OMEGA_BIG, a, m, b, [x]).sums[0]
    assert abs(s) <= x * (1 + 1e-12)


def test_partition_and_threads_determinism():
    grid = [10**3, 10**4, 2 * 10**5]
    ref = exp_sum(OMEGA, 1, 1, 10, grid).sums
    for seg, th in ((1000, 1), (777, 4), (1 << 16, 8)):
        assert exp_sum(OMEGA, 1, 1, 10, grid, threads=th, segment_size=seg).sums.tobytes() == ref.tobytes()


def test_bad_arguments():
    with pytest.raises(ConfigError):
        exp_sum(OMEGA, 0, 1, 10, [10])
    with pytest.raises(ConfigError):
        exp_sum(OMEGA, 1, 1, 10, [10, 5])
    with pytest.raises(NumericError):
        exp_sum(OMEGA, 1, 10, 10, [10])


def test_residue_phases_exact_quadrants():
    z = residue_phases(np.array([0, 1, 2, 3]), 4)
    assert z.tolist() == [1, 1j, -1, -1j]


def test_gamma_examples():
    assert complex_gamma(1) == pytest.approx(1, rel=1e-10)
    assert complex_gamma(0.5) == pytest.approx(math.sqrt(math.pi), rel=1e-10)
    with pytest.raises(NumericError):
        complex_gamma(-2)
    assert reciprocal_gamma(-1) == 0 and reciprocal_gamma(0) == 0


def _disk_points(n, seed):
    rng = np.random.default_rng(seed)
    r = 0.5 * np.sqrt(rng.random(n))
    t = 2 * np.pi * rng.random(n)
    return 1 + r * np.exp(1j * t)


def test_gamma_against_mpmath():
    for z in _disk_points(500, 3):
        ref = complex(mpmath.gamma(mpmath.mpc(z.real, z.imag)))
        assert abs(complex_gamma(z) - ref) <= 1e-10 * abs(ref)
    for z in (3.7 + 2j, -2.5 + 0.1j, 0.1 - 5j):
        ref = complex(mpmath.gamma(mpmath.mpc(z.real, z.imag)))
        assert abs(complex_gamma(z) - ref) <= 1e-10 * abs(ref)


def test_gamma_functional_equation():
    for z in _disk_points(1000, 11):
        lhs, rhs = complex_gamma(z + 1), z * complex_gamma(z)
        assert abs(lhs - rhs) <= 1e-9 * abs(rhs)


def test_euler_G_at_one():
    for P in (10**3, 10**5):
        G, _ = euler_G(1, P)
        assert abs(G - 1) <= 1e-12


def test_euler_G_against_mpmath():
    z = cmath.exp(2j * math.pi / 10)
    G, _ = euler_G(z, 2000)
    mz = mpmath.mpc(z.real, z.imag)
    ref = mpmath.mpf(1)
    for p in primes_upto(2000).tolist():
        ref *= (1 - mz / p) ** -1 * (1 - mpmath.mpf(1) / p) ** mz
    assert abs(G - complex(ref)) < 1e-10


def test_main_term_c_prime_one():
    # a = b^m puts every coefficient at 1: main term is exactly x
    pred = sd_main_term(OMEGA, 10, 1, 10, [100, 10**4], P=1000)
    assert pred.c_prime == 1
    assert np.allclose(pred.main_terms, [100, 10**4], rtol=1e-12, atol=0)


def test_omega_correction_is_trivial_below_x():
    # for omega every a_{p^k} with p^k <= x equals c'
    pred = sd_main_term(OMEGA, 1, 1, 10, [10**3], P=1000)
    assert abs(pred.c_prime - cmath.exp(2j * math.pi / 10)) < 1e-15
    assert np.all(np.isfinite(pred.main_terms))


def _mp_main_term(c, x, P):
    """x (log x)^{c-1} G(1; c) / Gamma(c) for omega, in multiprecision."""
    mpmath.mp.dps = 30
    cp = mpmath.mpc(c.real, c.imag)
    G = mpmath.mpf(1)
    for p in primes_upto(P).tolist():
        p = mpmath.mpf(p)
        G *= (1 - cp / p) ** -1 * (1 - 1 / p) ** cp
        if p <= x:
            K = int(mpmath.floor(mpmath.log(x) / mpmath.log(p) + mpmath.mpf("1e-20")))
            while p ** (K + 1) <= x:
                K += 1
            inside = sum(cp / p ** k for k in range(1, K + 1))
            beyond = cp * cp / (p ** K * (p - 1))
            G *= (1 + inside + beyond) * (1 - cp / p)
    val = x * mpmath.log(x) ** (cp - 1) * G / mpmath.gamma(cp)
    return complex(val)


def test_main_term_against_multiprecision():
    c = cmath.exp(2j * math.pi / 10)
    pred = sd_main_term(OMEGA, 1, 1, 10, [10**5], P=10**4)
    ref = _mp_main_term(c, 10**5, 10**4)
    assert abs(pred.main_terms[0] - ref) <= 1e-8 * abs(ref)


def test_main_term_pole_gives_zero():
    # Omega, b=2: c' = e(1/2) = -1, a pole of Gamma
    pred = sd_main_term(OMEGA_BIG, 1, 1, 2, [1000], P=1000)
    assert pred.c_prime == -1 and pred.main_terms[0] == 0


def test_main_term_tail_and_convergence():
    pred = sd_main_term(OMEGA, 1, 1, 10, [1000], P=10**5)
    c = pred.c_prime
    assert pred.tail_estimate == pytest.approx(abs(c * c - c) / (2 * 10**5 * math.log(10**5)))
    assert pred.converged
    assert not sd_main_term(OMEGA, 1, 1, 10, [1000], P=1000, tol=1e-9).converged
    with pytest.raises(ConfigError):
        sd_main_term(OMEGA, 1, 1, 10, [1000], P=10)


def test_c_prime():
    assert c_prime_of(OMEGA, 5, 10) == -1
    assert c_prime_of(OMEGA, 10, 10) == 1


def test_phase_prediction():
    grid = [100, 10**4, 10**6]
    v = phase_prediction(1, 10, 1, 10, grid)
    assert np.allclose(np.abs(v), grid, rtol=1e-14)
    v = phase_prediction(1, 3, 2, 7, grid)
    assert np.allclose(np.abs(v), grid, rtol=1e-14)


def test_phase_prediction_first_order():
    b, m = 2, 30
    for x in (10**3, 10**6):
        L = math.log(math.log(x))
        v = phase_prediction(1, 1, m, b, [x])[0]
        approx = x * (1 + 2j * math.pi * L / b ** m)
        assert abs(v - x) / x < 10 * L / b ** m
        assert abs(v - approx) / x < 1e-12


def test_decay_profile_examples():
    grid = np.array([10, 100, 1000])
    flat = decay_profile(ExpSumRecord(grid, grid.astype(complex), "f", 1, 1, 2))
    assert flat.ratio.tolist() == [1, 1, 1] and flat.verdict == "no decay"
    zero = decay_profile(ExpSumRecord(grid, np.zeros(3, complex), "f", 1, 1, 2))
    assert zero.ratio.tolist() == [0, 0, 0] and zero.verdict == "vanishing"
    rec = exp_sum(OMEGA_BIG, 1, 1, 2, [10**3, 10**4, 10**5, 10**6])
    prof = decay_profile(rec)
    assert np.all(prof.ratio < 0.1)
    with pytest.raises(ConfigError):
        decay_profile(rec, covariate="weird")


def test_decay_profile_single_point():
    rec = ExpSumRecord(np.array([10]), np.array([3 + 0j]), "f", 1, 1, 2)
    assert decay_profile(rec).verdict == "insufficient-data"


def test_expsum_csv():
    rec = exp_sum(OMEGA_BIG, 1, 1, 2, [10])
    buf = io.StringIO()
    write_expsum_csv(buf, rec, np.array([0j]))
    lines = buf.getvalue().splitlines()
    assert lines[0] == "x,S_re,S_im,S_abs,S_abs_over_x,pred_re,pred_im,pred_abs,ratio_abs"
    assert lines[1] == "10,0.0,0.0,0.0,0.0,0.0,0.0,0.0,nan"
