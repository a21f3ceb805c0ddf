import math

import mpmath
import pytest
from mpmath import mp, mpc, mpf

from app.utils.errors import DomainError
from app.utils.numerics import (
    complex_pow,
    erfc_complex,
    erfc_reference,
    log_gamma_real,
    polylog_direct,
    polylog_leading,
    principal_log,
    resolve_bits,
)


def test_resolve_bits_floor():
    assert resolve_bits(10) == 64
    assert resolve_bits(300) == 300


def test_principal_log_negative_axis():
    value = principal_log(-1, bits=128)
    assert value.real == 0
    with mp.workprec(128):
        assert mpmath.almosteq(value.imag, mp.pi)


def test_principal_log_of_zero():
    with pytest.raises(DomainError):
        principal_log(0)


def test_complex_pow_examples():
    assert mpmath.almosteq(complex_pow(4, 0.5, bits=128), 2)
    with mp.workprec(128):
        assert mpmath.almosteq(complex_pow(-1, mpf(1) / 2, bits=128), mpc(0, 1), rel_eps=mpf(10) ** -30)
        u = 1 - mpmath.expj(-mp.pi)
        assert mpmath.almosteq(complex_pow(u, mpf(1) / 2, bits=128), mpmath.sqrt(2), rel_eps=mpf(10) ** -30)


def test_complex_pow_zero():
    assert complex_pow(0, 2) == 0
    with pytest.raises(DomainError):
        complex_pow(0, -1)
    with pytest.raises(DomainError):
        complex_pow(0, 0)


def test_complex_pow_branch_consistency():
    with mp.workprec(128):
        for z in (mpc(0.3, 1.7), mpc(-2, 0.5), mpc(5, -3)):
            product = complex_pow(z, 0.37, bits=128) * complex_pow(z, -0.37, bits=128)
            assert abs(product - 1) < mpf(10) ** -35


@pytest.mark.parametrize("z", [0, 0.5, complex(1, 1), complex(-2, 3), complex(3.5, -0.2), complex(6, 2),
                               complex(-7, -1), complex(0.1, 9.5), complex(8, 0)])
def test_erfc_matches_reference(z):
    value = erfc_complex(z, bits=128)
    reference = erfc_reference(z, bits=128)
    assert abs(value - reference) <= mpf(10) ** -13 * max(abs(reference), mpf(10) ** -300)


def test_erfc_at_zero():
    assert erfc_complex(0, bits=128) == 1


def test_erfc_reflection_and_conjugation():
    with mp.workprec(128):
        for z in (mpc(0.7, 0.4), mpc(4.5, 1.0), mpc(-1.2, 2.2)):
            assert abs(erfc_complex(z, 128) + erfc_complex(-z, 128) - 2) < mpf(10) ** -13
            assert abs(erfc_complex(mpmath.conj(z), 128) - mpmath.conj(erfc_complex(z, 128))) < mpf(10) ** -13


def test_erfc_large_argument_limit():
    with mp.workprec(128):
        z = mpf(8)
        scaled = mpmath.exp(z * z) * z * erfc_complex(z, 128)
        assert abs(scaled - 1 / mpmath.sqrt(mp.pi)) < 0.01
        gap = 1 / mpmath.sqrt(mp.pi) - scaled
        assert float(gap) == pytest.approx(float(1 / (2 * mpmath.sqrt(mp.pi) * z ** 2)), rel=1e-2)


def test_log_gamma_real():
    assert log_gamma_real(1, bits=128) == 0
    with mp.workprec(128):
        assert mpmath.almosteq(log_gamma_real(0.5, 128), mpmath.log(mpmath.sqrt(mp.pi)))
        assert mpmath.almosteq(log_gamma_real(11, 128), mpmath.log(mpmath.factorial(10)))
    with pytest.raises(DomainError):
        log_gamma_real(0)


def test_polylog_closed_forms():
    p = mpf("0.3")
    with mp.workprec(128):
        assert mpmath.almosteq(polylog_direct(-1, p, bits=128), p / (1 - p) ** 2, rel_eps=mpf(10) ** -25)
        assert mpmath.almosteq(polylog_direct(0, p, bits=128), p / (1 - p), rel_eps=mpf(10) ** -25)


def test_polylog_domain():
    with pytest.raises(DomainError):
        polylog_direct(-1, 1.0)
    with pytest.raises(DomainError):
        polylog_leading(10, 1.5)


def test_polylog_leading_ratio_tends_to_one():
    for beta in (50, 100, 200, 400):
        for p in (0.3, 0.6):
            with mp.workprec(128):
                ratio = polylog_direct(-beta, p, bits=128) / polylog_leading(beta, p, bits=128)
            assert abs(float(ratio) - 1) <= math.log(beta) / math.sqrt(beta)
