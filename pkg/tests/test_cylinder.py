import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from polyheat.cylinder import (AtomicMeasure, TimePartition, cylinder_set_measure,
                               fresnel_cylinder_closed, fresnel_cylinder_quadrature,
                               total_variation_estimate)
from polyheat.kernel import validate_params

GAUSS = validate_params(2, -0.5)
QUARTIC = validate_params(4, -1)
Q_I = validate_params(4, 1j)
CUBIC = validate_params(3, 1j)


def atoms(*pairs):
    return AtomicMeasure.from_atoms(pairs)


# ---------------------------------------------------------------- domain types
def test_measure_merges_duplicate_points():
    nu = atoms(((1.0, 2.0), 1.0), ((1.0, 2.0), 2j), ((0.0, 0.0), -1.0))
    assert len(nu) == 2
    assert nu.total_variation == pytest.approx(1.0 + math.sqrt(5.0))
    assert dict(nu.atoms)[(1.0, 2.0)] == 1 + 2j


def test_measure_drops_cancelled_atoms():
    nu = atoms(((0.5,), 1.0), ((0.5,), -1.0), ((1.0,), 3.0))
    assert nu.atoms == [((1.0,), 3.0)]


def test_measure_fourier_transform():
    nu = atoms(((1.0,), 1.0), ((-1.0,), 1.0))
    assert abs(nu(0.3) - 2 * math.cos(0.3)) < 1e-15


def test_empty_measure_needs_dim():
    with pytest.raises(ValueError):
        AtomicMeasure.from_atoms([])
    assert len(AtomicMeasure.from_atoms([], dim=2)) == 0


def test_measure_dimension_check():
    with pytest.raises(ValueError, match="dimension mismatch"):
        AtomicMeasure.from_atoms([((1.0, 2.0), 1.0)], dim=3)


@pytest.mark.parametrize("nodes", [(), (0.5, 0.5), (0.6, 0.2), (-0.1,), (1.0,)])
def test_partition_rejects(nodes):
    with pytest.raises(ValueError):
        TimePartition(1.0, nodes)


def test_partition_increments():
    part = TimePartition(1.0, (0.0, 0.25, 0.7))
    assert part.n == 3
    assert np.allclose(part.increments(), [0.25, 0.45, 0.3])


# ---------------------------------------------------------------- closed form
def test_closed_zero_frequency_is_one():
    assert fresnel_cylinder_closed(atoms(((0.0,), 1.0)), TimePartition(1.0, (0.25,)), Q_I) == 1


def test_closed_single_atom():
    val = fresnel_cylinder_closed(atoms(((1.0,), 1.0)), TimePartition(1.0, (0.25,)), Q_I)
    assert abs(val - complex(math.cos(0.75), math.sin(0.75))) < 1e-15


def test_closed_two_steps():
    val = fresnel_cylinder_closed(atoms(((1.0, 1.0), 1.0)), TimePartition(1.0, (0.2, 0.6)), CUBIC)
    assert abs(val - cmath.exp(3.6j)) < 1e-14


def test_closed_dimension_mismatch():
    with pytest.raises(ValueError, match="dimension mismatch"):
        fresnel_cylinder_closed(atoms(((1.0,), 1.0)), TimePartition(1.0, (0.2, 0.6)), CUBIC)


def test_closed_degenerate_partition_continuity():
    val = fresnel_cylinder_closed(atoms(((1.3,), 1.0)), TimePartition(1.0, (1.0 - 1e-8,)), Q_I)
    assert abs(val - 1.0) < 1e-7


points = st.lists(st.floats(-3, 3), min_size=2, max_size=2)
weights = st.complex_numbers(max_magnitude=3, allow_nan=False, allow_infinity=False)
measures = st.lists(st.tuples(points, weights), min_size=1, max_size=6)
param_choices = st.sampled_from([(2, -0.5), (3, 1j), (3, -2j), (4, 1j), (4, -1 + 1j), (5, 1j)])


@settings(max_examples=60, deadline=None)
@given(measures, param_choices, st.floats(0.0, 0.45), st.floats(0.05, 0.5))
def test_closed_norm_bound(raw, pa, t1, gap):
    nu = AtomicMeasure.from_atoms([(tuple(y), w) for y, w in raw])
    part = TimePartition(1.0, (t1, t1 + gap))
    assert abs(fresnel_cylinder_closed(nu, part, validate_params(*pa))) <= nu.total_variation + 1e-12


@settings(max_examples=40, deadline=None)
@given(measures, measures, weights, weights, param_choices)
def test_closed_linear_in_weights(r1, r2, a, b, pa):
    nu1 = AtomicMeasure.from_atoms([(tuple(y), w) for y, w in r1])
    nu2 = AtomicMeasure.from_atoms([(tuple(y), w) for y, w in r2])
    combo = AtomicMeasure.from_atoms([(p, a * w) for p, w in nu1.atoms]
                                     + [(p, b * w) for p, w in nu2.atoms], dim=2)
    part = TimePartition(1.0, (0.1, 0.55))
    params = validate_params(*pa)
    lhs = fresnel_cylinder_closed(combo, part, params)
    rhs = a * fresnel_cylinder_closed(nu1, part, params) + b * fresnel_cylinder_closed(nu2, part, params)
    scale = abs(a) * nu1.total_variation + abs(b) * nu2.total_variation
    assert abs(lhs - rhs) <= 1e-12 * max(1.0, scale)


# ---------------------------------------------------------------- quadrature side
def test_quadrature_normalization():
    val = fresnel_cylinder_quadrature(atoms(((0.0,), 1.0)), TimePartition(1.0, (0.25,)), CUBIC)
    assert abs(val - 1.0) < 1e-6


def test_quadrature_single_atom():
    nu, part = atoms(((1.0,), 1.0)), TimePartition(1.0, (0.25,))
    quad = fresnel_cylinder_quadrature(nu, part, CUBIC)
    assert abs(quad - fresnel_cylinder_closed(nu, part, CUBIC)) < 1e-5


def test_quadrature_two_nodes():
    nu, part = atoms(((1.0, -1.0), 0.5 + 0.5j)), TimePartition(1.0, (0.3, 0.7))
    quad = fresnel_cylinder_quadrature(nu, part, CUBIC)
    assert abs(quad - fresnel_cylinder_closed(nu, part, CUBIC)) < 1e-4


def test_quadrature_decaying_kernel_two_atoms():
    nu = atoms(((0.5, 1.0), 1.0), ((-1.0, 0.25), -0.5j))
    part = TimePartition(1.0, (0.2, 0.5))
    quad = fresnel_cylinder_quadrature(nu, part, QUARTIC)
    assert abs(quad - fresnel_cylinder_closed(nu, part, QUARTIC)) < 1e-8


def test_quadrature_dimension_unsupported():
    nu = atoms(((0.0,) * 4, 1.0))
    with pytest.raises(ValueError, match="dimension unsupported"):
        fresnel_cylinder_quadrature(nu, TimePartition(1.0, (0.1, 0.2, 0.3, 0.4)), CUBIC)


# ---------------------------------------------------------------- cylinder sets
def _normal_mass(a, b, mean, var):
    s = math.sqrt(2.0 * var)
    return 0.5 * (math.erf((b - mean) / s) - math.erf((a - mean) / s))


def test_set_measure_probability_normalization():
    val = cylinder_set_measure(TimePartition(1.0, (0.5,)), [(-12.0, 12.0)], 0.0, GAUSS)
    assert abs(val - 1.0) < 1e-6


def test_set_measure_matches_normal_law():
    # x_1 ~ N(x0, t_1) under the heat kernel, anchored at t_0 = 0
    val = cylinder_set_measure(TimePartition(2.0, (0.7,)), [(-0.4, 1.1)], 0.3, GAUSS)
    assert abs(val - _normal_mass(-0.4, 1.1, 0.3, 0.7)) < 1e-10


def test_set_measure_additive():
    part = TimePartition(1.0, (0.4,))
    a, b, c = -1.0, 0.3, 2.0
    left = cylinder_set_measure(part, [(a, b)], 0.0, QUARTIC)
    right = cylinder_set_measure(part, [(b, c)], 0.0, QUARTIC)
    whole = cylinder_set_measure(part, [(a, c)], 0.0, QUARTIC)
    assert abs(left + right - whole) < 1e-8


def test_set_measure_additive_two_nodes():
    part = TimePartition(1.0, (0.3, 0.6))
    box2 = (-0.5, 1.0)
    left = cylinder_set_measure(part, [(-1.0, 0.0), box2], 0.2, QUARTIC)
    right = cylinder_set_measure(part, [(0.0, 1.5), box2], 0.2, QUARTIC)
    whole = cylinder_set_measure(part, [(-1.0, 1.5), box2], 0.2, QUARTIC)
    assert abs(left + right - whole) < 1e-8


def test_set_measure_exceeds_one_for_sign_changing_kernel():
    part = TimePartition(1.0, (0.5,))
    masses = [abs(cylinder_set_measure(part, [(-b, b)], 0.0, QUARTIC))
              for b in np.arange(0.5, 4.01, 0.25)]
    assert max(masses) > 1.0


def test_set_measure_anchor_at_zero_time():
    # t_1 = 0 pins x_1 to x0: indicator of the box
    part = TimePartition(1.0, (0.0,))
    assert cylinder_set_measure(part, [(0.0, 1.0)], 0.5, QUARTIC) == 1
    assert cylinder_set_measure(part, [(0.0, 1.0)], 2.0, QUARTIC) == 0


def test_set_measure_rejects_bad_boxes():
    part = TimePartition(1.0, (0.5,))
    with pytest.raises(ValueError):
        cylinder_set_measure(part, [(1.0, 0.0)], 0.0, GAUSS)
    with pytest.raises(ValueError, match="dimension mismatch"):
        cylinder_set_measure(part, [(0.0, 1.0), (0.0, 1.0)], 0.0, GAUSS)


# ---------------------------------------------------------------- total variation
@pytest.mark.parametrize("nodes", [(0.5,), (0.25, 0.5), (0.125, 0.25, 0.5)])
def test_variation_probability_kernel(nodes):
    est = total_variation_estimate(TimePartition(1.0, nodes), 0.25, 8.0, 0.0, GAUSS)
    assert abs(est - 1.0) < 1e-4


def test_variation_grows_with_nodes():
    one = total_variation_estimate(TimePartition(1.0, (0.5,)), 0.25, 6.0, 0.0, QUARTIC)
    two = total_variation_estimate(TimePartition(1.0, (0.25, 0.5)), 0.25, 6.0, 0.0, QUARTIC)
    three = total_variation_estimate(TimePartition(1.0, (0.125, 0.25, 0.5)), 0.25, 6.0, 0.0, QUARTIC)
    assert one < two < three
    assert two - one > 0.01


def test_variation_rejects_pinned_first_node():
    with pytest.raises(ValueError, match="first node must be positive"):
        total_variation_estimate(TimePartition(1.0, (0.0, 0.5)), 0.25, 4.0, 0.0, GAUSS)


def test_variation_rejects_bad_grid():
    with pytest.raises(ValueError):
        total_variation_estimate(TimePartition(1.0, (0.5,)), 0.0, 4.0, 0.0, GAUSS)
