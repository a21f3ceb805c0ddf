import math

import mpmath
import numpy as np
import pytest
from mpmath import mp, mpf

from app.models.state import InterArrivalLaw
from app.pinning import critcurve
from app.utils.errors import DomainError


def _arctan0(t):
    return math.atan(t) + (math.pi if t < 0 else 0.0)


def _components(alpha, theta):
    # real-variable form of the curve, term by term, independent of the complex power
    s = math.sin(theta / 2)
    half = alpha * (math.pi - theta) / 2
    denominator = 1 - 2 ** alpha * s ** alpha * math.cos(half)
    f1 = -0.5 * math.log(2 ** (2 * alpha) * math.sin(half) ** 2 * s ** (2 * alpha) + denominator ** 2)
    f2 = _arctan0(2 ** alpha * math.sin(half) * s ** alpha / denominator)
    return f1, f2


@pytest.mark.parametrize("alpha", [0.2, 0.3, 0.5, 0.8])
def test_curve_matches_real_components(alpha):
    for theta in (0.01, math.pi / 3, 1.9, 3.0):
        f1, f2 = _components(alpha, theta)
        h = complex(critcurve.curve_point(alpha, theta, bits=96))
        assert abs(h.real - f1) < 1e-12
        assert abs(h.imag - f2) < 1e-12
        x, y = critcurve.curve_xy(alpha, theta, bits=96)
        assert abs(float(x) - f1) < 1e-12
        assert abs(float(y) - f2) < 1e-12


def test_curve_endpoints():
    assert critcurve.curve_point(0.5, 0) == 0
    with mp.workprec(128):
        end = critcurve.curve_point(0.5, mp.pi, bits=128)
        assert mpmath.almosteq(end.real, -mpmath.log(mpmath.sqrt(2) - 1))
        assert mpmath.almosteq(end.imag, mp.pi)
    with pytest.raises(DomainError):
        critcurve.curve_xy(0.5, 4.0)


def test_lower_half_is_conjugate():
    upper = critcurve.curve_point(0.5, 1.2, bits=96)
    lower = critcurve.curve_point(0.5, 2 * math.pi - 1.2, bits=96)
    assert abs(complex(lower) - complex(upper).conjugate()) < 1e-15


def test_curve_increasing_in_both_coordinates():
    thetas = np.linspace(0.01, math.pi, 200)
    xs, ys = zip(*(critcurve._curve_xy_float(0.5, t) for t in thetas))
    assert np.all(np.diff(xs) > 0)
    assert np.all(np.diff(ys) > 0)


@pytest.mark.parametrize("h, kind", [
    (1, "Localized"),
    (math.log(2), "Localized"),
    (-1, "Delocalized"),
    (complex(-1, 1.5), "Delocalized"),
    (complex(0.2, 2.5), "Delocalized"),
    (complex(1.0, 2.0), "Localized"),
])
def test_classify(h, kind):
    assert critcurve.classify(0.5, h).kind == kind
    assert critcurve.classify_algebraic(0.5, h, bits=96).kind == kind


def test_classify_on_curve_and_periodicity():
    h = complex(critcurve.curve_point(0.5, 1.3, bits=96))
    assert critcurve.classify(0.5, h).kind == "Critical"
    assert critcurve.classify(0.5, h + 2j * math.pi).kind == "Critical"
    assert critcurve.classify(0.5, h + 0.01).kind == "Localized"
    assert critcurve.classify(0.5, h - 0.01).kind == "Delocalized"


def test_pole_on_unit_circle_along_curve():
    for theta in (0.3, 1.5, 3.0):
        with mp.workprec(128):
            h = critcurve.curve_point(0.5, theta, bits=128)
            assert abs(abs(critcurve.pole_location(0.5, h, bits=128)) - 1) < mpf(10) ** -30
    with pytest.raises(DomainError):
        critcurve.pole_location(0.5, 0)


def test_free_energy_values():
    with mp.workprec(128):
        assert mpmath.almosteq(critcurve.free_energy(0.5, mpmath.log(2), bits=128), mpmath.log(mpf(4) / 3))
    assert critcurve.physical_free_energy(0.5, -1) == 0
    assert float(critcurve.physical_free_energy(0.5, 1)) > 0
    with pytest.raises(DomainError):
        critcurve.free_energy(0.5, -2)


def test_free_energy_general_matches_special_closed_form():
    law = InterArrivalLaw.special(0.5)
    value, bound = critcurve.free_energy_general(law, math.log(2), n_max=2048, with_bound=True, bits=80)
    assert float(value) == pytest.approx(math.log(4 / 3), abs=1e-12)
    assert float(bound) < 1e-100
    assert critcurve.free_energy_general(law, -0.5) == 0


def test_free_energy_general_mixture_below_h():
    mixture = critcurve.free_energy_general(InterArrivalLaw(kind="mixture-powerlaw", alpha=0.5), 1.0, n_max=2048)
    assert 0 < float(mixture) < 1


def test_arclength_and_inverse():
    half = critcurve.arclength(0.5, math.pi, bits=64)
    assert float(critcurve.total_length(0.5, bits=64)) == pytest.approx(2 * float(half))
    assert critcurve.arclength(0.5, 0) == 0
    s = half / 3
    theta = critcurve.theta_at_arclength(0.5, s, bits=64)
    assert float(critcurve.arclength(0.5, theta, bits=64)) == pytest.approx(float(s), rel=1e-8)
    with pytest.raises(DomainError):
        critcurve.theta_at_arclength(0.5, 2 * half)


def test_arclength_at_least_chord():
    end = critcurve.curve_point(0.5, math.pi, bits=64)
    assert float(critcurve.arclength(0.5, math.pi, bits=64)) > abs(complex(end))


def test_mu_cdf_runs_from_zero_to_one():
    half = critcurve.arclength(0.5, math.pi, bits=64)
    assert critcurve.mu_cdf(0.5, 0) == 0
    assert float(critcurve.mu_cdf(0.5, half, bits=64)) == pytest.approx(1.0)


@pytest.mark.parametrize("theta", [0.5, 1.5, 2.8])
def test_density_from_free_energy_jump(theta):
    direct = float(critcurve.mu_density_theta(0.5, theta, bits=80))
    jump = float(critcurve.mu_density_jump(0.5, theta, bits=80))
    assert jump == pytest.approx(direct, rel=1e-5)


def test_closed_form_densities():
    assert critcurve.mu_density_closed_form(0.5, 0) == 0
    assert float(critcurve.mu_density_closed_form(0.5, 10)) == pytest.approx(math.sqrt(2), rel=1e-8)
    assert float(critcurve.mu_density_closed_form(1 / 3, 0.1, variable="small-s")) > 0
    with pytest.raises(DomainError):
        critcurve.mu_density_closed_form(0.3, 0.1)
    with pytest.raises(DomainError):
        critcurve.mu_density_closed_form(0.5, 2.0, variable="x")
    with pytest.raises(DomainError):
        critcurve.mu_density_closed_form(0.5, 0.1, variable="theta")


@pytest.mark.parametrize("h", [1, complex(1.0, 1.0), -1, complex(-0.5, 2.0)])
def test_free_energy_from_limit_measure(h):
    value = float(critcurve.free_energy_from_measure(h, alpha=0.5, bits=64))
    expected = float(critcurve.physical_free_energy(0.5, h, bits=64))
    assert value == pytest.approx(expected, abs=1e-7)


def test_tangent_angle_at_origin():
    assert float(critcurve.tangent_angle(0.5, 1e-12, bits=80)) == pytest.approx(math.pi / 4, abs=1e-5)
    assert float(critcurve.tangent_angle(0.8, 1e-12, bits=80)) == pytest.approx(0.4 * math.pi, abs=1e-4)


def test_sample_curve():
    curve = critcurve.sample_curve(0.5, resolution=64)
    assert len(curve.points) == len(curve.thetas) == len(curve.arclengths) == 64
    assert curve.arclengths[0] == 0
    upper = [s for t, s in zip(curve.thetas, curve.arclengths) if 0 < t <= math.pi]
    lower = [s for t, s in zip(curve.thetas, curve.arclengths) if t > math.pi]
    assert all(b > a for a, b in zip(upper, upper[1:]))
    assert all(s < 0 for s in lower)
    assert np.max(np.abs(critcurve.curve_array(0.5, curve.thetas) - np.array(curve.points))) < 1e-12
    densities = critcurve.curve_densities(curve)
    assert densities[0] is None
    assert all(d > 0 for d in densities[1:])
    rows = curve.to_rows(densities)
    assert len(rows) == 64
    with pytest.raises(DomainError):
        critcurve.sample_curve(0.5, resolution=1)
