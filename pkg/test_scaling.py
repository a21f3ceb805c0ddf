import math

import mpmath
import pytest
from mpmath import mp, mpc, mpf

from app.models.state import InterArrivalLaw, PrecisionPolicy
from app.pinning import scaling
from app.pinning.renewal import renewal_table
from app.pinning.zeros import count_zeros_in_rectangle
from app.utils.errors import DomainError

FIRST_ZEROS = [
    (complex(1.225, 2.547), 0.017),
    (complex(2.026, 3.162), 0.015),
    (complex(2.629, 3.656), 0.013),
    (complex(3.132, 4.083), 0.011),
    (complex(3.573, 4.466), 0.010),
    (complex(3.969, 4.817), 0.009),
    (complex(4.332, 5.141), 0.008),
]


def test_f0_at_origin():
    with mp.workprec(128):
        assert mpmath.almosteq(scaling.f0(0), 1 / mpmath.sqrt(mp.pi))


def test_f0_conjugation():
    zeta = mpc(0.7, -1.3)
    with mp.workprec(128):
        assert abs(scaling.f0(mpmath.conj(zeta)) - mpmath.conj(scaling.f0(zeta))) < mpf(10) ** -30


@pytest.mark.parametrize("zeta", [mpc(0.4, 0.9), mpc(-1.1, 0.3), mpc(2.0, 2.5)])
def test_f0_prime_matches_numerical_derivative(zeta):
    with mp.workprec(128):
        numeric = mpmath.diff(lambda z: scaling.f0(z), zeta)
        assert abs(numeric - scaling.f0_prime(zeta)) < mpf(10) ** -12 * max(1, abs(numeric))


def test_f1_prime_matches_numerical_derivative():
    zeta = mpc(0.8, 1.2)
    with mp.workprec(128):
        numeric = mpmath.diff(lambda z: scaling.f1_f2_values(z)[0], zeta)
        assert abs(numeric - scaling.f1_prime(zeta)) < mpf(10) ** -12 * abs(numeric)


@pytest.mark.parametrize("zeta, shifted", [(mpc(-0.7, 0.4), False), (mpc(0.6, 0.3), True), (mpc(-2, -1), False)])
def test_integral_representation(zeta, shifted):
    with mp.workprec(128):
        expected = scaling.f0(zeta)
        if shifted:
            expected -= 2 * zeta * mpmath.exp(zeta ** 2)
        assert abs(scaling.f0_integral_representation(zeta) - expected) < mpf(10) ** -25


def test_integral_representation_singular_line():
    with pytest.raises(DomainError):
        scaling.f0_integral_representation(mpc(0, 1))


def test_seed_close_to_first_zero():
    seed = complex(scaling.asymptotic_zero_seed(1))
    assert abs(seed - FIRST_ZEROS[0][0]) == pytest.approx(FIRST_ZEROS[0][1], abs=1.5e-3)
    with pytest.raises(DomainError):
        scaling.asymptotic_zero_seed(0)


def test_first_zeros_and_gaps():
    rows = scaling.first_zeros_table(len(FIRST_ZEROS))
    assert [r["n"] for r in rows] == list(range(1, 8))
    for row, (zeta, gap) in zip(rows, FIRST_ZEROS):
        assert abs(complex(row["re"], row["im"]) - zeta) <= 1e-3 + 1e-9
        assert abs(row["gap"] - gap) <= 1e-3 + 1e-9


def test_first_two_zeros_certified():
    found = scaling.f0_zeros(2, certify=True, sweep=False)
    assert all(z.certified for z in found)
    for z, (zeta, _) in zip(found, FIRST_ZEROS):
        assert abs(complex(mpc(z.zeta)) - zeta) <= 5e-4
        assert z.residual < 1e-30


def test_rectangle_holds_seven_zeros():
    assert count_zeros_in_rectangle(lambda z: scaling.f0(z, bits=64), 0.0, 4.5, 0.0, 6.0) == 7


def test_no_zeros_in_left_half():
    assert count_zeros_in_rectangle(lambda z: scaling.f0(z, bits=64), -4.0, -0.2, -4.0, 4.0) == 0


def test_f0_zeros_validation():
    with pytest.raises(DomainError):
        scaling.f0_zeros(0)


def test_closest_zero_expansion():
    z0, z1, z2 = scaling.zero_expansion(1)
    assert abs(complex(z1) - complex(-2.493, 3.120)) < 2e-3
    with mp.workprec(scaling.SCALING_BITS):
        assert abs(z1 + scaling.f1_at_zero(z0) / scaling.f0_prime(z0)) < mpf(10) ** -15
        F1, F2 = scaling.f1_f2_values(z0)
        assert abs(F1 - scaling.f1_at_zero(z0)) < mpf(10) ** -15
        assert abs(F2 - scaling.f2_at_zero(z0)) < mpf(10) ** -15
        assert abs(scaling.f1_prime(z0) - scaling.f1_prime_at_zero(z0)) < mpf(10) ** -15
        root = mpmath.sqrt(100)
        assert abs(scaling.expansion_prediction(1, 100) - (z0 / root + z1 / 100 + z2 / root ** 3)) < mpf(10) ** -30


def test_scaling_limit_within_first_correction():
    law = InterArrivalLaw.special(0.5)
    grid = [complex(x, y) for x in (-2, 0, 2) for y in (-2, 0, 2)]
    fine = scaling.scaling_limit_check(law, 10000, grid)
    coarse = scaling.scaling_limit_check(law, 2500, grid)
    assert fine["max_deviation"] <= 1.3 * fine["f1_budget"]
    assert 1.0 <= coarse["max_deviation"] / fine["max_deviation"] <= 4.0
    assert len(fine["points"]) == 9


def test_scaling_limit_from_table():
    table = renewal_table(InterArrivalLaw.special(0.5), 150, PrecisionPolicy(base_bits=128, per_degree_bits=0.5))
    by_table = scaling.scaling_limit_check(table, 150, [complex(1, 1)])
    by_law = scaling.scaling_limit_check(table.law, 150, [complex(1, 1)])
    assert by_table["max_deviation"] == pytest.approx(by_law["max_deviation"], rel=1e-6)


def test_first_correction_converges():
    law = InterArrivalLaw.special(0.5)
    zeta = complex(1, 1)
    coarse, target = scaling.first_correction(law, 400, zeta)
    fine, _ = scaling.first_correction(law, 3600, zeta)
    assert abs(fine - target) < abs(coarse - target)
    assert abs(fine - target) < 0.2 * abs(target)


def test_derivative_scaling():
    assert scaling.scaling_derivative_check(InterArrivalLaw.special(0.5), 2500, complex(0.5, 0.5)) < 0.1


def test_scaling_limit_needs_half_special():
    with pytest.raises(DomainError):
        scaling.scaling_limit_check(InterArrivalLaw(kind="mixture-powerlaw", alpha=0.5), 100, [0])
    with pytest.raises(DomainError):
        scaling.scaling_limit_check(InterArrivalLaw.special(0.4), 100, [0])


@pytest.mark.slow
def test_closest_zero_error_scaling():
    from app.pinning.zeros import refine_zero_newton

    law = InterArrivalLaw.special(0.5)
    errors = []
    for N in (256, 1024):
        with mp.workprec(scaling.SCALING_BITS):
            prediction = scaling.expansion_prediction(1, N)
            h1 = refine_zero_newton(law, N, prediction, bits=scaling.SCALING_BITS)
            errors.append(float(abs(math.sqrt(N) * (h1 - prediction))))
    assert 8 / 3 <= errors[0] / errors[1] <= 24
