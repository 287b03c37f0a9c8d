import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import cycle, random_graph, random_potential, random_unitary, star
from oracles import GreenOracle, dirichlet_green, star_eigenvalues
from qgs.conditions import boundary_matrices, delta_unitary, dirichlet_unitary, kirchhoff_unitary, neumann_unitary
from qgs.edge import dual_functionals, gauss_panels, principal_sqrt, transfer_matrices
from qgs.graph import RootedQuantumGraph, make_quantum_graph, split_at_root, total_length
from qgs.greens import (
    GreenEvaluation,
    evolution_operator,
    green_coefficients,
    green_diagonal,
    green_pointwise,
    kirchhoff_coefficients,
    resolvent_trace,
    smoothed_spectral_density,
    theta_matrix,
)
from qgs.spectral import eigenvalues_up_to


def triangle_delta():
    return make_quantum_graph(3, [(0, 1), (1, 2), (2, 0)], [1.0, 1.3, 0.8], conditions={1: ("delta", 0.7)})


def general_graph(seed):
    """Random graph whose vertices of degree >= 2 carry generic (non-symmetric) unitaries."""
    rng = np.random.default_rng(seed)
    base = random_graph(rng, 3, 4)
    conds = {v: random_unitary(rng, base.graph.degree(v)) for v in range(base.vertex_count)}
    pots = [ed.potential for ed in base.edge_data]
    return make_quantum_graph(base.vertex_count, base.graph.edges, base.lengths, pots, conds)


@pytest.mark.parametrize("z", [1 + 1j, 10 + 0.3j, -2 + 5j, 30 - 2j])
def test_dirichlet_interval_closed_form(z):
    L = np.pi
    q = make_quantum_graph(2, [(0, 1)], L, conditions="dirichlet")
    for x0 in (0.4, 1.7):
        ev = GreenEvaluation(RootedQuantumGraph(q, 0, x0), z)
        for y in (0.1, x0, 1.2, 3.0):
            assert ev((0, x0), (0, y)) == pytest.approx(dirichlet_green(x0, y, z, L), abs=1e-9)
        # reversed-bond addressing names the same points
        assert ev((1, L - x0), (1, L - 0.1)) == pytest.approx(dirichlet_green(x0, 0.1, z, L), abs=1e-9)


@pytest.mark.parametrize("seed", range(5))
def test_general_conditions_match_direct_oracle(seed):
    q = general_graph(seed)
    rng = np.random.default_rng(100 + seed)
    z = complex(rng.uniform(-3, 20), rng.uniform(0.2, 4))
    ey = int(rng.integers(q.edge_count))
    ty = float(rng.uniform(0.1, 0.9) * q.lengths[ey])
    oracle = GreenOracle(q, (ey, ty), z)
    # first argument x, second argument y: G(x, y) is the oracle solution evaluated at x
    for _ in range(4):
        ex = int(rng.integers(q.edge_count))
        tx = float(rng.uniform(0.05, 0.95) * q.lengths[ex])
        ev = GreenEvaluation(RootedQuantumGraph(q, 2 * ex, tx), z)
        assert ev((2 * ex, tx), (2 * ey, ty)) == pytest.approx(oracle((ex, tx)), abs=1e-8)


@pytest.mark.parametrize("seed", range(3))
def test_hermitian_symmetry_for_general_conditions(seed):
    q = general_graph(seed)
    z = 3 + 1.5j
    x, y = (0, 0.3 * q.lengths[0]), (2 * (q.edge_count - 1) + 1, 0.6 * q.lengths[-1])
    gxy = GreenEvaluation(RootedQuantumGraph(q, *x), z)(x, y)
    gyx_bar = GreenEvaluation(RootedQuantumGraph(q, *y), np.conj(z))(y, x)
    assert gxy == pytest.approx(np.conj(gyx_bar), abs=1e-9)


@settings(max_examples=20)
@given(st.integers(0, 2**32 - 1), st.floats(-5, 60), st.floats(0.01, 20))
def test_herglotz_and_symmetry(seed, re, im):
    rng = np.random.default_rng(seed)
    q = random_graph(rng)
    z = complex(re, im)
    b = int(rng.integers(q.graph.bond_count))
    x = (b, float(rng.uniform(0.05, 0.95) * q.bond_length(b)))
    c = int(rng.integers(q.graph.bond_count))
    y = (c, float(rng.uniform(0.05, 0.95) * q.bond_length(c)))
    assert green_diagonal(q, x, [z])[0].imag > 0
    assert green_diagonal(q, x, [np.conj(z)])[0].imag < 0
    ev = GreenEvaluation(RootedQuantumGraph(q, *x), z)
    gxy = ev(x, y)
    assert gxy == pytest.approx(GreenEvaluation(RootedQuantumGraph(q, *y), z)(y, x), abs=1e-8)
    assert np.conj(gxy) == pytest.approx(GreenEvaluation(RootedQuantumGraph(q, *x), np.conj(z))(x, y), abs=1e-8)
    assert ev(x, x) == pytest.approx(green_diagonal(q, x, [z])[0], abs=1e-9)


def test_inverse_imaginary_envelope():
    q = triangle_delta()
    lams = np.linspace(0.5, 30, 120)
    pts = [(0, 0.2), (2, 0.5), (5, 0.4)]
    env = []
    for eta in (0.2, 0.1, 0.05, 0.025):
        env.append(eta * max(np.max(np.abs(green_diagonal(q, x, lams + 1j * eta))) for x in pts))
    assert max(env) <= 2 * min(env) * 1.5


def test_root_derivative_jump_is_minus_one():
    q = general_graph(7)
    z = 2 + 1j
    b, x0, h = 0, 0.37 * q.bond_length(0), 1e-7
    L = q.bond_length(b)
    ev = GreenEvaluation(RootedQuantumGraph(q, b, x0), z)
    right = green_pointwise(ev, (b, x0), (b, x0 + h), dy=True)
    left = green_pointwise(ev, (b, x0), (b ^ 1, L - x0 + h), dy=True)
    assert right + left == pytest.approx(-1.0, abs=1e-5)
    assert ev((b, x0), (b, x0 + h)) == pytest.approx(ev((b, x0), (b ^ 1, L - x0 + h)), abs=1e-5)


def test_derivatives_agree_with_dual_functional_and_oracle():
    q = general_graph(3)
    z = 4 + 0.8j
    x = (0, 0.45 * q.lengths[0])
    ev = GreenEvaluation(RootedQuantumGraph(q, *x), z)
    e = q.edge_count - 1 if q.edge_count > 1 else 0
    L = q.lengths[e]
    zeta = 0.3 * L if e == 0 else L
    # t -> G((e, t), x) solves the edge equation at z away from x, so the dual
    # functionals read off its value and derivative at the edge origin
    df = dual_functionals(q.edge_data[e], 0, z, zeta)
    vals = np.array([GreenEvaluation(RootedQuantumGraph(q, 2 * e, float(t)), z)((2 * e, float(t)), x) for t in df.nodes])
    g0 = df.value_at_origin(vals)
    dg0 = df.derivative_at_origin(vals)
    oracle = GreenOracle(q, (0, x[1]), z)
    p = next(i for i, pc in enumerate(oracle.pieces) if pc[0] == e and pc[1] == 0.0)
    assert g0 == pytest.approx(oracle.coef[2 * p], abs=1e-8)
    assert dg0 == pytest.approx(oracle.coef[2 * p + 1], abs=1e-7)
    # interior derivative in the first argument against a central difference
    t, h = 0.5 * L, 1e-5
    d = green_pointwise(GreenEvaluation(RootedQuantumGraph(q, 2 * e, t), z), (2 * e, t), x, dx=True)
    fd = (oracle((e, t + h)) - oracle((e, t - h))) / (2 * h)
    assert d == pytest.approx(fd, abs=1e-6)


def test_kirchhoff_fast_path_matches_general_route():
    for q in (cycle(5, [1.0, 0.7, 1.3, 0.9, 1.1]), star(3, 1.0, leaves="kirchhoff")):
        for z in (1 + 1j, 20 + 0.5j, -3 + 2j):
            rq = RootedQuantumGraph(q, 2, 0.3)
            a = green_coefficients(rq, z)
            b = kirchhoff_coefficients(rq, z)
            assert np.max(np.abs(a - b)) <= 1e-12 * max(1.0, np.max(np.abs(a)))
    with pytest.raises(ValueError):
        kirchhoff_coefficients(RootedQuantumGraph(triangle_delta(), 0, 0.5), 1 + 1j)


def test_neumann_series_needs_contraction():
    rq = RootedQuantumGraph(triangle_delta(), 0, 0.5)
    with pytest.raises(ValueError, match="neumann_series"):
        green_coefficients(rq, 2 + 0.01j, "neumann_series")
    a = green_coefficients(rq, 2 + 200j, "neumann_series")
    b = green_coefficients(rq, 2 + 200j, "direct")
    assert np.max(np.abs(a - b)) <= 1e-10 * np.max(np.abs(b))
    with pytest.raises(ValueError):
        green_coefficients(rq, 2 - 1j)


def test_contraction_at_large_imaginary_part():
    rng = np.random.default_rng(12)
    q = random_graph(rng)
    conds = {v: ("delta", 2.0 * (-1) ** v) for v in range(q.vertex_count)}
    q = make_quantum_graph(q.vertex_count, q.graph.edges, q.lengths, [ed.potential for ed in q.edge_data], conds)
    assert max(bm.lambda_norm for bm in q.boundary) <= 2
    for re in (1.0, 2.5, 4.0):
        assert evolution_operator(q, complex(re, 200)).inverse_norm() < 0.5


def test_evolution_operator_structure():
    q = cycle(3, [1.0, 1.3, 0.8])
    sp = split_at_root(RootedQuantumGraph(q, 0, 0.5))
    qa = sp.graph
    nb = qa.graph.bond_count
    for z in (1 + 1j, 5 + 0.2j):
        es = evolution_operator(qa, z, sp.vertex)
        k = principal_sqrt(z)
        for v in range(qa.vertex_count):
            assert np.allclose(es.sigma_blocks[v], [[0, 1], [1, 0]], atol=1e-12)
        L = np.array([qa.bond_length(b) for b in range(nb)])
        assert np.allclose(es.D, np.exp(-1j * k * L), rtol=1e-10)
        nz = np.nonzero(es.source)[0]
        assert sorted(nz) == sorted(qa.beta[sp.vertex])
        assert np.allclose(es.source[nz], 1 / (2j * k))
        J = np.arange(nb) ^ 1
        SJ = es.S[:, J]
        origin = np.array([qa.graph.origin(b) for b in range(nb)])
        assert np.all(SJ[origin[:, None] != origin[None, :]] == 0)


@settings(max_examples=15)
@given(st.sampled_from(["kirchhoff", "dirichlet", "neumann", "delta"]), st.integers(1, 5), st.floats(-4, 4), st.floats(0.1, 50), st.floats(0.01, 30))
def test_theta_bound(kind, d, alpha, re, im):
    U = {"kirchhoff": kirchhoff_unitary(d), "dirichlet": dirichlet_unitary(d), "neumann": neumann_unitary(d), "delta": delta_unitary(d, alpha)}[kind]
    k = principal_sqrt(complex(re, im))
    Lam = abs(k.imag / k.real)
    T = theta_matrix(boundary_matrices(U), k)
    assert np.linalg.norm(T, 2) ** 2 <= np.sqrt(1 + Lam**2) + Lam + 1e-10


def test_dirichlet_trace():
    q = make_quantum_graph(2, [(0, 1)], np.pi, conditions="dirichlet")
    z = 1j
    K = 20000
    k = np.arange(1, K + 1)
    partial = np.sum(1 / (k**2 - z))
    tail = 1 / K  # sum_{k>K} 1/k^2 < 1/K, and the z shift is far smaller
    tr = resolvent_trace(q, z)
    assert abs(tr - partial) <= tail + 1e-6
    sq = np.sqrt(z)
    closed = 1 / (2 * z) - np.pi * np.cos(np.pi * sq) / np.sin(np.pi * sq) / (2 * sq)
    assert tr == pytest.approx(closed, abs=1e-8)
    assert resolvent_trace(q, np.conj(z)) == pytest.approx(np.conj(tr), abs=1e-12)


def test_star_trace_against_spectral_module():
    q = star(3)
    z = 4 + 1j
    cut = 1.0e4
    sd = eigenvalues_up_to(q, cut)
    partial = np.sum(sd.multiplicities / (sd.eigenvalues - z))
    ref, mult = star_eigenvalues(1e9)
    tail = np.sum(mult[ref > cut] / (ref[ref > cut] - z)) + total_length(q) / (np.pi * np.sqrt(1e9))
    assert resolvent_trace(q, z, tol=1e-10) == pytest.approx(partial + tail, abs=1e-5)


def test_smoothed_density():
    q = triangle_delta()
    L = total_length(q)
    sd = eigenvalues_up_to(q, 2000.0)  # the omitted Lorentzian tail is below 1e-7
    grid = np.linspace(0.5, 40, 25)
    eps = 0.1
    dens = smoothed_spectral_density(q, grid, eps)
    lor = np.array([np.sum(sd.multiplicities * eps / ((lam - sd.eigenvalues) ** 2 + eps**2)) for lam in grid]) / (np.pi * L)
    assert np.allclose(dens, lor, atol=1e-6)
    # mass over a window between spectral gaps counts the eigenvalues inside
    lo, hi = 0.5 * (sd.eigenvalues[1] + sd.eigenvalues[2]), 0.5 * (sd.eigenvalues[3] + sd.eigenvalues[4])
    eps = 0.05
    x, w = gauss_panels(lo, hi, (), eps, order=8)
    mass = np.sum(w * smoothed_spectral_density(q, x, eps)) * L
    inside = sd.count(hi) - sd.count(lo)
    # Lorentzian tails leak about 2 eps / (pi * distance) per eigenvalue across the window edges
    assert mass == pytest.approx(inside, abs=0.1)
    gap = lo
    vals = [smoothed_spectral_density(q, [gap], e)[0] for e in (0.1, 0.05, 0.025)]
    assert vals[0] > vals[1] > vals[2]
    with pytest.raises(ValueError):
        smoothed_spectral_density(q, grid, 0.0)


def test_continuity_in_edge_length():
    def g(h):
        q = make_quantum_graph(3, [(0, 1), (1, 2), (2, 0)], [1.0, 1.3 + h, 0.8], conditions={1: ("delta", 0.7)})
        return green_diagonal(q, (0, 0.4), [1 + 5j])[0]

    base = g(0.0)
    slopes = [(g(h) - base) / h for h in (1e-3, 5e-4, 2.5e-4)]
    assert abs(slopes[1] - slopes[2]) < 0.6 * abs(slopes[0] - slopes[1]) + 1e-9
    assert abs(slopes[2]) < 10


def test_green_rejects_real_z():
    q = triangle_delta()
    with pytest.raises(ValueError):
        GreenEvaluation(RootedQuantumGraph(q, 0, 0.5), 3.0)
    with pytest.raises(ValueError):
        green_diagonal(q, (0, 0.5), [3.0])
