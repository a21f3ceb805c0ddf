import math

import mpmath
import pytest
from mpmath import mp, mpf

from app.models.state import InterArrivalLaw, PrecisionPolicy
from app.pinning import critcurve, zeros
from app.pinning.partition import partition_derivative, partition_polynomial, partition_value
from app.pinning.renewal import renewal_table
from app.utils.artifacts import ArtifactStore, load_zero_set, save_zero_set
from app.utils.errors import ContourError, DomainError

POLICY = PrecisionPolicy(base_bits=192, per_degree_bits=1.5)


@pytest.fixture(scope="module")
def table_60():
    return renewal_table(InterArrivalLaw.special(0.5), 60, POLICY)


@pytest.fixture(scope="module")
def zero_set_20(table_60):
    return zeros.find_all_zeros(partition_polynomial(table_60, 20), POLICY)


@pytest.fixture(scope="module")
def curve():
    return critcurve.sample_curve(0.5, resolution=512)


def test_two_step_zero(table_60):
    zs = zeros.find_all_zeros(partition_polynomial(table_60, 2), POLICY)
    assert zs.count == 1
    with mp.workprec(zs.precision_bits):
        assert mpmath.almosteq(zs.zeros[0], mpmath.mpc(-mpmath.log(2), mp.pi))
    assert zeros.zeros_in_w(zs)[0] == pytest.approx(-0.5)


def test_degree_one_rejected(table_60):
    with pytest.raises(DomainError):
        zeros.find_all_zeros(partition_polynomial(table_60, 1), POLICY)


def test_zero_set_invariants(zero_set_20):
    zs = zero_set_20
    assert zs.count == 19
    assert zs.converged
    assert not [f for f in zs.flags if not f.startswith("loose-pair")]
    assert max(zs.residuals) < 1e-40
    slack = mpf(2) ** (-(zs.precision_bits // 2))
    assert not [z for z in zs.zeros if abs(z.imag) <= slack]
    on_pi = [z for z in zs.zeros if abs(z.imag - mp.pi) <= slack]
    for z in zs.zeros:
        assert -mp.pi < z.imag <= mp.pi
        if 0 < z.imag and z not in on_pi:
            assert mpmath.conj(z) in zs.zeros
    # odd degree in w: an odd number of negative real roots
    assert len(on_pi) % 2 == 1
    assert len(zs.upper_half()) == (19 + len(on_pi)) // 2


def test_zeros_annihilate_partition_function(table_60, zero_set_20):
    with mp.workprec(table_60.precision_bits):
        scale = abs(partition_value(table_60, 20, 0))
        for z in zero_set_20.zeros:
            assert abs(partition_value(table_60, 20, z)) < mpf(10) ** -40 * scale


def test_ordering_by_modulus(zero_set_20):
    moduli = [abs(complex(z.real, abs(z.imag))) for z in zero_set_20.as_complex()]
    assert moduli == sorted(moduli)


@pytest.mark.parametrize("h", [complex(0.3, 0.2), complex(-0.8, 2.9), complex(1.5, -1.0)])
def test_product_identity(table_60, zero_set_20, h):
    poly = partition_polynomial(table_60, 20)
    assert zeros.product_identity_gap(poly, zero_set_20, h) <= mpf(10) ** -20


def test_refine_newton_from_both_sources(table_60, zero_set_20):
    target = zero_set_20.zeros[0]
    seed = complex(target) + complex(1e-3, -1e-3)
    from_table = zeros.refine_zero_newton(table_60, 20, seed)
    from_law = zeros.refine_zero_newton(table_60.law, 20, seed, bits=160)
    with mp.workprec(160):
        assert abs(from_table - target) < mpf(10) ** -30
        assert abs(from_law - target) < mpf(10) ** -20


def _table_evaluator(table, N):
    def evaluate(h):
        return partition_value(table, N, h), partition_derivative(table, N, h)
    return evaluate


def test_disk_counts(table_60, zero_set_20):
    points = zero_set_20.as_complex()
    target = points[0]
    radius = 0.5 * min(abs(target - z) for z in points[1:])
    evaluate = _table_evaluator(table_60, 20)
    assert zeros.count_zeros_in_disk(evaluate, target, radius, quadrature_points=256) == 1
    assert zeros.count_zeros_in_disk(evaluate, complex(3.0, 0.0), 0.5, quadrature_points=256) == 0


def test_disk_through_a_zero_is_rejected(table_60, zero_set_20):
    target = zero_set_20.as_complex()[0]
    evaluate = _table_evaluator(table_60, 20)
    with pytest.raises(ContourError):
        zeros.count_zeros_in_disk(evaluate, target + 0.05, 0.05, quadrature_points=256)


def test_rectangle_count(table_60, zero_set_20):
    points = zero_set_20.as_complex()
    heights = sorted({round(abs(z.imag), 12) for z in points})
    middle = len(heights) // 2
    y1 = (heights[middle - 1] + heights[middle]) / 2
    region = zeros.zero_free_region(zero_set_20)
    x0, x1 = region["min_re"] - 0.5, region["max_re"] + 0.5
    expected = sum(1 for z in points if abs(z.imag) < y1)

    def f(h):
        return partition_value(table_60, 20, h)

    assert zeros.count_zeros_in_rectangle(f, x0, x1, -y1, y1) == expected


def test_zero_free_region(zero_set_20):
    region = zeros.zero_free_region(zero_set_20)
    assert region["min_re"] < region["max_re"]
    assert region["min_abs_im"] > 0


def test_distance_to_curve_shrinks(table_60, zero_set_20, curve):
    larger = zeros.find_all_zeros(partition_polynomial(table_60, 60), POLICY)
    small = zeros.distance_stats(zero_set_20, curve)
    large = zeros.distance_stats(larger, curve)
    assert large["max"] < small["max"]
    assert len(large["distances"]) == 59
    assert 0 <= large["delocalized_fraction"] <= 1


def test_project_to_curve_recovers_theta(curve):
    point = complex(critcurve.curve_point(0.5, 1.234, bits=64))
    distance, theta = zeros.project_to_curve(point, curve)
    assert distance < 1e-9
    assert theta == pytest.approx(1.234, abs=1e-6)


def test_angle_uniformity(zero_set_20, curve):
    value = zeros.angle_uniformity_ks(zero_set_20, curve)
    assert 0 < value < 0.5


def test_alpha_mismatch_rejected(zero_set_20):
    with pytest.raises(DomainError):
        zeros.distance_stats(zero_set_20, critcurve.sample_curve(0.3, resolution=32))


def test_empirical_measure(zero_set_20):
    measure = zeros.empirical_measure(zero_set_20)
    assert len(measure.atoms) == 19
    assert measure.mass() == pytest.approx(1.0)
    on_pi = sum(1 for z in measure.atoms if abs(z.imag - math.pi) < 1e-9)
    assert measure.mean().imag == pytest.approx(on_pi * math.pi / 19, abs=1e-9)


def test_lacunary_mixture_zero_set():
    law = InterArrivalLaw(kind="mixture-lacunary", alpha=0.5)
    table = renewal_table(law, 25, POLICY)
    zs = zeros.find_all_zeros(partition_polynomial(table, 25), POLICY)
    assert zs.count == 24
    assert zs.converged
    assert zeros.product_identity_gap(partition_polynomial(table, 25), zs, complex(0.1, 0.4)) <= mpf(10) ** -20


def test_zero_set_round_trip(tmp_path, zero_set_20):
    path = save_zero_set(zero_set_20, str(tmp_path / "zeros.json"))
    loaded = load_zero_set(path)
    assert loaded.zeros == zero_set_20.zeros
    assert loaded.residuals == zero_set_20.residuals
    assert loaded.law == zero_set_20.law


def test_artifact_store_caches_zero_sets(tmp_path):
    store = ArtifactStore(cache_dir=str(tmp_path / "cache"), output_dir=str(tmp_path / "out"))
    law = InterArrivalLaw.special(0.5)
    first = store.zero_set(law, 12, POLICY)
    second = store.zero_set(law, 12, POLICY)
    assert first.zeros == second.zeros
    assert len(list((tmp_path / "cache").iterdir())) >= 2


def test_cached_zero_set_keeps_the_table_precision(tmp_path, table_60):
    store = ArtifactStore(cache_dir=str(tmp_path / "cache"))
    law = table_60.law
    assert table_60.precision_bits > POLICY.bits_for(12)
    computed = store.zero_set(law, 12, POLICY, table=table_60)
    cached = store.zero_set(law, 12, POLICY, table=table_60)
    assert computed.precision_bits == cached.precision_bits == table_60.precision_bits
    assert cached.zeros == computed.zeros
    own = store.zero_set(law, 12, POLICY)
    assert own.precision_bits == POLICY.bits_for(12)


@pytest.mark.slow
def test_closest_zero_certificate():
    assert zeros.certify_expansion(InterArrivalLaw.special(0.5), 256) == 1


@pytest.mark.slow
def test_large_zero_set():
    policy = PrecisionPolicy()
    table = renewal_table(InterArrivalLaw.special(0.5), 500, policy)
    poly = partition_polynomial(table, 500)
    zs = zeros.find_all_zeros(poly, policy)
    assert zs.count == 499
    assert zs.converged
    for x, y in ((0.2, 0.1), (-0.7, 2.2), (0.9, -3.0)):
        assert zeros.product_identity_gap(poly, zs, complex(x, y)) <= mpf(10) ** -20
    assert math.isfinite(zeros.distance_stats(zs, critcurve.sample_curve(0.5, 1024))["max"])
