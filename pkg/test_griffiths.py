import math

import mpmath
import pytest
from mpmath import mp, mpf

from app.models.state import PrecisionPolicy
from app.pinning import griffiths
from app.pinning.scaling import zero_expansion
from app.utils.artifacts import ArtifactStore
from app.utils.errors import DomainError
from app.utils.numerics import polylog_direct


@pytest.fixture(scope="module")
def run():
    return griffiths.build_griffiths_run(0.5, n0=3, n_max=40, policy=PrecisionPolicy(base_bits=128),
                                         store=ArtifactStore())


@pytest.fixture(scope="module")
def consts():
    return griffiths.griffiths_constants(0.5)


def test_window_geometry():
    assert griffiths.window_center(0.5, 0.5, 100) == 72
    assert griffiths.window_half_width(100) == pytest.approx(10 * math.log(100))
    assert griffiths.required_n_max(0.5, 0.5, 100) == 72 + 47


def test_constants_reference_digits(consts):
    assert round(consts.a, 5) == 1.12247
    assert round(consts.b1, 5) == 1.27356
    assert consts.C1 < 0
    assert consts.C2 == pytest.approx(math.log(2) ** -0.5 / abs(complex(consts.z0)))
    assert consts.b == pytest.approx(consts.b1 * math.sqrt(2 * math.log(2)))


def test_window_scaling_only_moves_c_and_c1(consts):
    plain = griffiths.griffiths_constants(0.5, window_scaled=False)
    assert (plain.a, plain.b, plain.d, plain.A, plain.B, plain.C) == (consts.a, consts.b, consts.d, consts.A,
                                                                      consts.B, consts.C)
    assert plain.c != consts.c
    assert plain.C1 != consts.C1


def test_expanded_b2_equals_compact_form():
    z0, z1, z2 = zero_expansion(1)
    with mp.workprec(128):
        assert abs(griffiths._expanded_b2(z0, z1, z2) - griffiths.compact_b2(z0, z1, z2)) < mpf(10) ** -25


def test_constants_reject_bad_p():
    with pytest.raises(DomainError):
        griffiths.griffiths_constants(1.0)


def test_run_holds_every_order(run):
    assert sorted(run.zero_store) == list(range(3, 41))
    assert all(run.zero_store[n].count == n - 1 for n in run.zero_store)


@pytest.mark.parametrize("k", [1, 2, 3])
def test_taylor_coefficients_match_derivatives(run, k):
    with mp.workprec(run.precision_bits):
        numeric = mpmath.diff(lambda h: griffiths.reduced_free_energy(run, h), 0, k, h=mpf(10) ** -10)
        numeric /= mpmath.factorial(k)
        t_k = griffiths.taylor_coefficient(run, k)
        assert abs(numeric.imag) < mpf(10) ** -12 * abs(numeric)
        assert abs(numeric.real - t_k) < mpf(10) ** -10 * abs(t_k)
    assert run.coefficients[k] == pytest.approx(float(t_k))


def test_raw_sum_is_real(run):
    for k in (5, 12, 20):
        raw = griffiths.raw_taylor_sum(run, k)
        assert abs(raw.imag) <= mpf(10) ** -20 * max(abs(raw), mpf(10) ** -300)
        assert mpmath.almosteq(raw.real, griffiths.taylor_coefficient(run, k), rel_eps=mpf(10) ** -20)


def test_closest_pair_and_window_dominate(run):
    k = 25
    full = griffiths.taylor_coefficient(run, k)
    assert abs(griffiths.leading_pair_coefficient(run, k) / full - 1) < 0.1
    assert abs(griffiths.truncated_coefficient(run, k) / full - 1) < 0.1


def test_orders_beyond_the_run_are_rejected(run):
    with pytest.raises(DomainError):
        griffiths.taylor_coefficient(run, 60)
    with pytest.raises(DomainError):
        griffiths.taylor_coefficient(run, 0)


def test_sweep_rows_and_manifest(run, consts):
    rows = griffiths.griffiths_sweep(run, consts, [10, 15, 20])
    assert [r["k"] for r in rows] == [10, 15, 20]
    for r in rows:
        assert math.isfinite(r["t_k"])
        assert r["prediction"] == pytest.approx(griffiths.griffiths_prediction(consts, r["k"]))
        assert -1 <= r["cos"] <= 1
    manifest = griffiths.griffiths_manifest(run, consts, rows)
    assert manifest["n_max"] == 40
    assert manifest["constants"]["a"] == consts.a
    assert 0 <= manifest["band_fraction"] <= 1


def test_band_fraction_skips_small_cosines():
    rows = [
        {"ratio": 1.0, "cos": 0.9},
        {"ratio": 3.0, "cos": 0.5},
        {"ratio": 7.0, "cos": 0.05},
        {"ratio": None, "cos": 0.0},
    ]
    assert griffiths.band_fraction(rows) == 0.5
    assert griffiths.band_fraction([]) == 0.0


def test_prediction_rejects_order_zero(consts):
    with pytest.raises(DomainError):
        griffiths.griffiths_prediction(consts, 0)


@pytest.mark.parametrize("beta, p", [(100, 0.3), (200, 0.6)])
def test_polylog_window_sum(beta, p):
    result = griffiths.polylog_window_sum(beta, p, bits=128)
    with mp.workprec(128):
        gap = abs(result["window_sum"] / polylog_direct(-beta, p, bits=128) - 1)
    assert float(gap) <= math.exp(-(math.log(beta) * math.log(p)) ** 2 / 8)
    assert result["ratio"] == pytest.approx(1.0, abs=math.log(beta) / math.sqrt(beta))


def test_modulated_window_sum():
    result = griffiths.polylog_window_sum(200, 0.5, modulator="exp-cos", C=0.5, d=0.3, bits=128)
    assert float(result["ratio"]) == pytest.approx(1.0, abs=0.2)
    silent = griffiths.polylog_window_sum(200, 0.5, modulator="exp-sin", C=0.5, d=0, bits=128)
    assert silent["window_sum"] == 0
    assert silent["ratio"] is None


def test_window_sum_validation():
    with pytest.raises(DomainError):
        griffiths.polylog_window_sum(5, 0.5)
    with pytest.raises(DomainError):
        griffiths.polylog_window_sum(100, 0.5, modulator="gauss")


def test_equidistribution(consts):
    assert griffiths.equidistribution_ks(consts.a, consts.b, consts.c, 5000) < 0.05
    with pytest.raises(DomainError):
        griffiths.equidistribution_ks(math.pi / 2, 0.0, 0.0, 100)


@pytest.mark.slow
def test_band_at_full_size():
    policy = PrecisionPolicy()
    consts = griffiths.griffiths_constants(0.5)
    run = griffiths.build_griffiths_run(0.5, n_max=300, policy=policy, store=ArtifactStore())
    rows = griffiths.griffiths_sweep(run, consts, range(40, 121))
    assert griffiths.band_fraction(rows) >= 0.95
