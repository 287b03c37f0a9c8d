import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from helpers import random_potential
from oracles import dop853_fundamental, picard_fundamental
from qgs.edge import dual_functionals, e_solution, principal_sqrt, solve_fundamental, transfer_matrices
from qgs.graph import EdgeData, EdgePotential


def edge(L, pot=None):
    return EdgeData(L, pot if pot is not None else EdgePotential.uniform(L))


def test_free_solution_closed_form():
    sol = solve_fundamental(edge(np.pi / 2), 0, 4.0)
    C, dC, S, dS = sol.endpoint
    assert C == pytest.approx(-1.0, abs=1e-12)
    assert S == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize("c, z", [(0.7, 3.0), (-1.2, 2 + 1j), (2.5, 0.5)])
def test_constant_potential_is_a_shift(c, z):
    L = 1.3
    sol = solve_fundamental(edge(L, EdgePotential.uniform(L, [c])), 0, z)
    k = np.sqrt(complex(z - c))
    assert np.allclose(sol.C, np.cos(k * sol.grid), atol=1e-9)


def test_linear_potential_matches_volterra_iteration():
    pot = EdgePotential.uniform(1.0, [0.0, 1.0])
    z = 1 + 1j
    C, _, S, _ = solve_fundamental(edge(1.0, pot), 0, z).endpoint
    Cp, Sp = picard_fundamental(lambda x: x, 1.0, z)
    assert abs(C - Cp) < 1e-9 and abs(S - Sp) < 1e-9


@given(st.integers(0, 2**32 - 1), st.floats(-5, 80), st.floats(0, 20))
def test_matches_dop853(seed, re, im):
    rng = np.random.default_rng(seed)
    L = rng.uniform(0.5, 1.5)
    pot = random_potential(rng, L)
    z = complex(re, im)
    got = solve_fundamental(edge(L, pot), 0, z).endpoint
    ref = dop853_fundamental(pot, L, z)
    scale = max(1.0, max(abs(r[0]) for r in ref))
    assert max(abs(g - r[0]) for g, r in zip(got, ref)) <= 1e-8 * scale


@given(st.integers(0, 2**32 - 1), st.floats(-5, 200), st.floats(-30, 30))
def test_wronskian_and_conjugation(seed, re, im):
    rng = np.random.default_rng(seed)
    L = rng.uniform(0.5, 1.5)
    e = edge(L, random_potential(rng, L))
    z = complex(re, im)
    sol = solve_fundamental(e, 1, z)
    assert np.allclose(sol.wronskian(), 1.0, rtol=1e-9, atol=1e-9)
    bar = solve_fundamental(e, 1, np.conj(z))
    for a, b in ((sol.C, bar.C), (sol.S, bar.S), (sol.dC, bar.dC), (sol.dS, bar.dS)):
        assert np.allclose(np.conj(a), b, rtol=1e-10, atol=1e-10 * np.max(np.abs(a)))


def test_real_spectral_parameter_gives_real_solutions():
    pot = EdgePotential.uniform(1.0, [0.3, -0.5, 0.8])
    Phi = transfer_matrices(pot, [-3.0, 0.0, 7.5], np.linspace(0, 1, 9))
    assert np.all(Phi.imag == 0)


def test_e_solution_is_outgoing_exponential():
    z = 3 + 2j
    sol = solve_fundamental(edge(1.1), 0, z)
    E, dE = e_solution(sol, z)
    k = principal_sqrt(z)
    assert E == pytest.approx(np.exp(-1j * k * 1.1), rel=1e-10)
    assert dE == pytest.approx(-1j * k * np.exp(-1j * k * 1.1), rel=1e-10)
    assert np.allclose(sol.E, np.exp(-1j * k * sol.grid), rtol=1e-10)
    with pytest.raises(ValueError):
        e_solution(sol, z + 1)


def test_principal_branch():
    assert principal_sqrt(-4 + 0j) == pytest.approx(2j)
    assert principal_sqrt(1 + 1e-3j).imag > 0


def test_reversal_consistency():
    rng = np.random.default_rng(3)
    L = 1.2
    e = edge(L, random_potential(rng, L))
    z = 2 + 0.7j
    fwd = solve_fundamental(e, 0, z)
    back = solve_fundamental(e, 1, z)
    # g(x) = E_rev(L - x) solves the forward equation, so it is g(0) C + g'(0) S
    g = back.E[::-1]
    g0, dg0 = back.E[-1], -back.dE[-1]
    assert np.allclose(g, g0 * fwd.C + dg0 * fwd.S, rtol=1e-9, atol=1e-9 * np.max(np.abs(g)))


def test_tolerance_refinement_is_stable():
    rng = np.random.default_rng(5)
    pot = random_potential(rng, 1.0)
    a = transfer_matrices(pot, 50 + 3j, [1.0], rtol=1e-8)
    b = transfer_matrices(pot, 50 + 3j, [1.0], rtol=1e-9)
    assert np.max(np.abs(a - b)) <= 10 * 1e-8 * np.max(np.abs(a))


def test_growth_and_derivative_ratio_trends():
    rng = np.random.default_rng(9)
    L = 0.5
    e = edge(L, random_potential(rng, L))
    ims = np.array([50, 100, 200, 400, 800])
    mags, ratios = [], []
    for im in ims:
        z = 1 + 1j * im
        E, dE = e_solution(solve_fundamental(e, 0, z), z)
        mags.append(abs(E))
        ratios.append(abs(dE / E + 1j * principal_sqrt(z)))
    # |E(L)| outgrows Im z and the logarithmic derivative approaches -i sqrt(z)
    assert np.all(np.diff(mags) > 0)
    assert np.all(np.diff(np.array(mags) / ims) > 0)
    assert np.all(np.diff(ratios) < 0)


@pytest.mark.parametrize("zeta_frac", [0.3, 1.0])
@pytest.mark.parametrize("z", [2 + 1j, 40 + 5j, -1 + 0.2j])
def test_dual_functionals_recover_initial_data(zeta_frac, z):
    rng = np.random.default_rng(11)
    L = 1.1
    e = edge(L, random_potential(rng, L))
    df = dual_functionals(e, 0, z, zeta_frac * L)
    assert df.sigma1 > 0 and df.sigma2 > 0 and df.sigma1 * df.sigma2 - abs(df.sigma3) ** 2 > 0
    Phi = transfer_matrices(e.potential, z, df.nodes)[0]
    C, S = Phi[:, 0, 0], Phi[:, 0, 1]
    assert df.value_at_origin(C) == pytest.approx(1.0, abs=1e-8)
    assert df.value_at_origin(S) == pytest.approx(0.0, abs=1e-8)
    assert df.derivative_at_origin(S) == pytest.approx(1.0, abs=1e-8)
    assert df.derivative_at_origin(C) == pytest.approx(0.0, abs=1e-8)
    f = (0.3 - 2j) * C + (1.5 + 0.5j) * S
    assert df.value_at_origin(f) == pytest.approx(0.3 - 2j, abs=1e-8)
    assert df.derivative_at_origin(f) == pytest.approx(1.5 + 0.5j, abs=1e-8)


def test_dual_functionals_reject_bad_cutoff():
    with pytest.raises(ValueError):
        dual_functionals(edge(1.0), 0, 1 + 1j, 1.5)
