import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from polyheat.dyson import PlaneWaveState
from polyheat.kernel import validate_params
from polyheat.spectral import (AliasingError, GridState, IncommensurateError, dft, free_step,
                               idft, sample_potential, sample_state, strang_refined, strang_solve,
                               wavenumbers)

TWO_PI = 2 * math.pi
Q_I = validate_params(4, 1j)
CUBIC = validate_params(3, 1j)
QUARTIC = validate_params(4, -1)
RNG = np.random.default_rng(20261016)


def pw(*atoms):
    return PlaneWaveState.from_atoms(atoms)


def random_vector(n):
    return RNG.standard_normal(n) + 1j * RNG.standard_normal(n)


# ---------------------------------------------------------------- transforms
def test_dft_constant_spike():
    out = dft(np.full(16, 2.0 - 1j))
    assert abs(out[0] - (2.0 - 1j) * 4.0) < 1e-14
    assert np.max(np.abs(out[1:])) < 1e-14


@pytest.mark.parametrize("n", [8, 64, 1024])
def test_dft_parseval_and_round_trip(n):
    v = random_vector(n)
    assert abs(np.linalg.norm(dft(v)) - np.linalg.norm(v)) < 1e-12 * np.linalg.norm(v)
    assert np.max(np.abs(idft(dft(v)) - v)) < 1e-12


@pytest.mark.parametrize("n", [0, 6, 12, 100])
def test_dft_bad_length(n):
    with pytest.raises(ValueError, match="bad length"):
        dft(np.ones(n))
    with pytest.raises(ValueError, match="bad length"):
        idft(np.ones(n))


def test_wavenumbers_layout():
    k = wavenumbers(8, TWO_PI)
    assert k.tolist() == [0, 1, 2, 3, -4, -3, -2, -1]
    assert wavenumbers(8, 4 * math.pi)[4] == -2.0


# ---------------------------------------------------------------- GridState
@pytest.mark.parametrize("N, L, values", [
    (4, 1.0, np.ones(4)),
    (12, 1.0, np.ones(12)),
    (8, 0.0, np.ones(8)),
    (8, 1.0, np.ones(7)),
    (8, 1.0, np.r_[np.ones(7), np.nan]),
])
def test_grid_state_validation(N, L, values):
    with pytest.raises(ValueError):
        GridState(N, L, values)


def test_grid_state_is_immutable():
    g = GridState(8, 1.0, np.ones(8))
    with pytest.raises(ValueError):
        g.values[0] = 2.0


# ---------------------------------------------------------------- sampling
def test_sample_constant():
    g = sample_state(pw((0.0, 1.0)), 16, TWO_PI)
    assert np.all(g.values == 1.0)


def test_sample_plane_wave():
    g = sample_state(pw((1.0, 1.0)), 16, TWO_PI)
    assert np.max(np.abs(g.values - np.exp(1j * g.x))) < 1e-15


def test_sample_incommensurate():
    with pytest.raises(IncommensurateError, match="incommensurate frequency"):
        sample_state(pw((0.5, 1.0)), 16, TWO_PI)


def test_sample_aliasing():
    with pytest.raises(AliasingError, match="aliasing"):
        sample_potential(pw((8.0, 1.0)), 16, TWO_PI)
    sample_potential(pw((7.0, 1.0)), 16, TWO_PI)


def test_sample_other_period():
    g = sample_state(pw((0.5, 1.0)), 16, 4 * math.pi)
    assert np.max(np.abs(g.values - np.exp(0.5j * g.x))) < 1e-15


# ---------------------------------------------------------------- free_step
def test_free_step_eigenfunction():
    g = sample_state(pw((1.0, 1.0)), 64, TWO_PI)
    out = free_step(g, 1.0, QUARTIC)
    assert np.max(np.abs(out.values - math.exp(-1.0) * np.exp(1j * g.x))) < 1e-12


def test_free_step_zero_time():
    g = GridState(32, 3.0, random_vector(32))
    assert np.max(np.abs(free_step(g, 0.0, Q_I).values - g.values)) < 1e-14


param_choices = st.sampled_from([(2, -0.5), (3, 1j), (3, -2j), (4, 1j), (4, -1 + 0.5j), (5, 1j)])


@settings(max_examples=40, deadline=None)
@given(param_choices, st.floats(0.0, 2.0), st.integers(0, 2**32 - 1))
def test_free_step_contracts(pa, dt, seed):
    v = np.random.default_rng(seed).standard_normal(32) + 0j
    g = GridState(32, TWO_PI, v)
    assert free_step(g, dt, validate_params(*pa)).norm() <= g.norm() * (1 + 1e-13)


# ---------------------------------------------------------------- strang_solve
def _standard_grid(N=64):
    u0 = sample_state(pw((0.0, 1.0)), N, TWO_PI)
    V = sample_potential(pw((1.0, 0.4)), N, TWO_PI)
    return u0, V


def test_strang_without_potential_is_free():
    u0 = sample_state(pw((0.0, 1.0), (2.0, 0.5j), (-3.0, 0.25)), 64, TWO_PI)
    free = free_step(u0, 1.3, Q_I).values
    for steps in (1, 7, 64):
        out = strang_solve(u0, np.zeros(64), 1.3, steps, Q_I).values
        assert np.max(np.abs(out - free)) < 1e-12


@pytest.mark.parametrize("c", [-0.3, 0.5j])
def test_strang_constant_potential(c):
    u0 = sample_state(pw((0.0, 1.0), (1.0, 0.5)), 64, TWO_PI)
    out = strang_solve(u0, np.full(64, c), 1.0, 5, Q_I).values
    assert np.max(np.abs(out - cmath.exp(c) * free_step(u0, 1.0, Q_I).values)) < 1e-12


@pytest.mark.parametrize("params", [CUBIC, Q_I])
def test_strang_second_order(params):
    u0, V = _standard_grid()
    ref = strang_solve(u0, V, 1.0, 4096, params).values
    errs = [np.max(np.abs(strang_solve(u0, V, 1.0, s, params).values - ref)) for s in (32, 64, 128)]
    for a, b in zip(errs, errs[1:]):
        assert 3.2 <= a / b <= 4.8


def test_strang_unitary_case():
    # imaginary alpha and imaginary-valued V: every split factor is an isometry
    u0 = sample_state(pw((0.0, 1.0), (1.0, 0.5 - 0.25j)), 64, TWO_PI)
    V = sample_potential(pw((1.0, 0.3j), (-1.0, 0.3j), (0.0, -0.5j)), 64, TWO_PI)
    assert np.max(np.abs(V.real)) < 1e-15
    out = strang_solve(u0, V, 2.0, 50, Q_I)
    assert abs(out.norm() - u0.norm()) < 1e-10


def test_strang_dissipative_norm_decreases_per_step():
    g = GridState(64, TWO_PI, random_vector(64))
    norms = [g.norm()]
    for _ in range(10):
        g = strang_solve(g, np.zeros(64), 0.01, 1, QUARTIC)
        norms.append(g.norm())
    assert all(b <= a for a, b in zip(norms, norms[1:]))


def test_strang_grid_refinement():
    state, pot = pw((0.0, 1.0), (2.0, 0.3)), pw((1.0, 0.4), (-1.0, 0.2j))
    coarse = strang_solve(sample_state(state, 64, TWO_PI), sample_potential(pot, 64, TWO_PI),
                          0.5, 40, CUBIC)
    fine = strang_solve(sample_state(state, 128, TWO_PI), sample_potential(pot, 128, TWO_PI),
                        0.5, 40, CUBIC)
    assert np.max(np.abs(fine.values[::2] - coarse.values)) < 1e-10


def test_strang_rejects_bad_input():
    u0, V = _standard_grid()
    with pytest.raises(ValueError):
        strang_solve(u0, V, 1.0, 0, Q_I)
    with pytest.raises(ValueError):
        strang_solve(u0, V[:10], 1.0, 4, Q_I)


def test_strang_refined_meets_tolerance():
    u0, V = _standard_grid()
    ref = strang_solve(u0, V, 1.0, 8192, Q_I).values
    sol, steps = strang_refined(u0, V, 1.0, Q_I, tol=1e-6)
    assert steps > 32
    assert np.max(np.abs(sol.values - ref)) < 1e-6
