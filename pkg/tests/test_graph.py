import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from helpers import cycle, random_graph, star
from qgs.errors import GraphValidationError
from qgs.graph import (
    CombinatorialGraph,
    EdgePotential,
    RootedQuantumGraph,
    ValidationBounds,
    add_root_vertex,
    build_quantum_graph,
    combinatorial_ball,
    make_quantum_graph,
    split_at_root,
    total_length,
    validate_bounds,
)


def test_triangle_has_six_bonds():
    q = build_quantum_graph({"vertices": 3, "edges": [{"u": 0, "v": 1, "length": 1}, {"u": 1, "v": 2, "length": 1}, {"u": 2, "v": 0, "length": 1}]})
    assert q.vertex_count == 3
    assert q.graph.bond_count == 6
    assert q.kirchhoff_everywhere and q.potential_free


def test_dirichlet_edge_has_empty_robin_part():
    q = make_quantum_graph(2, [(0, 1)], np.pi, conditions="dirichlet")
    for bm in q.boundary:
        assert bm.lambda_norm == 0.0
        assert np.allclose(bm.P_D, 1)


def test_non_unitary_condition_is_rejected():
    with pytest.raises(GraphValidationError, match="non-unitary"):
        make_quantum_graph(3, [(0, 1), (1, 2)], conditions={1: [[1, 1], [0, 1]]})


@pytest.mark.parametrize(
    "edges, msg",
    [([(0, 1), (1, 0)], "both join"), ([(0, 0)], "self-loop"), ([(0, 1), (2, 3)], "disconnected"), ([(0, 5)], "outside")],
)
def test_structural_errors(edges, msg):
    with pytest.raises(GraphValidationError, match=msg):
        CombinatorialGraph(4 if msg != "self-loop" else 1, edges)


def test_bounds_name_the_offender():
    q = star(3)
    with pytest.raises(GraphValidationError, match="degree 3"):
        validate_bounds(q, ValidationBounds(D=2, m=0.5, M=2))
    q = make_quantum_graph(2, [(0, 1)], 3.0)
    with pytest.raises(GraphValidationError, match="edge 0 length"):
        validate_bounds(q, ValidationBounds(D=3, m=0.5, M=2))
    q = make_quantum_graph(2, [(0, 1)], 1.0, potentials=[[0, 5.0]])
    with pytest.raises(GraphValidationError, match="potential"):
        validate_bounds(q, ValidationBounds(D=3, m=0.5, M=2, M_W=2))
    q = make_quantum_graph(3, [(0, 1), (1, 2)], conditions={1: ("delta", 10.0)})
    with pytest.raises(GraphValidationError, match="Robin norm"):
        validate_bounds(q, ValidationBounds(D=3, m=0.5, M=2, M_Lambda=1))


def test_total_length_examples():
    assert total_length(cycle(3)) == 3
    assert total_length(make_quantum_graph(2, [(0, 1)], np.pi)) == np.pi
    assert total_length(make_quantum_graph(4, [(0, 1), (0, 2), (0, 3)], [0.5, 1.0, 1.5])) == 3.0


def test_add_root_vertex_splits_edge():
    q = make_quantum_graph(2, [(0, 1)], 1.0, potentials=[lambda x: x])
    qa = add_root_vertex(RootedQuantumGraph(q, 0, 0.3))
    assert sorted(qa.lengths) == pytest.approx([0.3, 0.7])
    v = qa.vertex_count - 1
    assert np.array_equal(qa.conditions[v], [[0, 1], [1, 0]])
    # first bond at the new vertex heads back to the origin of the root bond
    first, second = qa.beta[v]
    assert qa.graph.terminus(first) == 0 and qa.graph.terminus(second) == 1
    near = qa.edge_data[0].potential
    assert near.length == pytest.approx(0.3)
    assert near(np.linspace(0, 0.3, 7)) == pytest.approx(np.linspace(0, 0.3, 7), abs=1e-15)
    far = qa.edge_data[1].potential
    assert far(np.linspace(0, 0.7, 7)) == pytest.approx(0.3 + np.linspace(0, 0.7, 7), abs=1e-15)
    validate_bounds(qa, ValidationBounds(D=2, m=0.3, M=1.0))


def test_reversed_bond_root_uses_reflected_potential():
    q = make_quantum_graph(2, [(0, 1)], 1.0, potentials=[lambda x: x])
    sp = split_at_root(RootedQuantumGraph(q, 1, 0.3))  # 0.3 from vertex 1
    W = sp.graph.bond_potential(2 * sp.near_edge)
    # the near piece starts at vertex 1, where the potential is 1
    assert W(0.0) == pytest.approx(1.0) and W(0.3) == pytest.approx(0.7)


@pytest.mark.parametrize("offset", [0.0, 1.0, -0.1])
def test_root_must_be_interior(offset):
    with pytest.raises(GraphValidationError):
        RootedQuantumGraph(cycle(3), 0, offset)


def test_ball_examples():
    path = CombinatorialGraph(3, [(0, 1), (1, 2)])
    b = combinatorial_ball(path, 1, 1)
    assert len(b.vertex_map) == 3 and b.graph.edge_count == 2
    c5 = cycle(5).graph
    b = combinatorial_ball(c5, 0, 2)
    assert len(b.vertex_map) == 5 and b.graph.edge_count == 5
    b = combinatorial_ball(c5, 3, 0)
    assert len(b.vertex_map) == 1 and b.graph.edge_count == 0


def test_file_format_beta_by_neighbours():
    spec = {
        "vertices": 3,
        "edges": [{"u": 0, "v": 1, "length": 1}, {"u": 0, "v": 2, "length": 2}],
        "beta": [[2, 1], [0], [0]],
    }
    q = build_quantum_graph(spec)
    assert [q.graph.terminus(b) for b in q.beta[0]] == [2, 1]


@given(st.integers(0, 2**32 - 1))
def test_potential_reflection_is_exact(seed):
    rng = np.random.default_rng(seed)
    L = rng.uniform(0.5, 1.5)
    knots = np.sort(np.concatenate([[0, L], rng.uniform(0, L, 5)]))
    pot = EdgePotential(knots, rng.normal(size=len(knots)))
    rev = pot.reversed()
    assert np.array_equal(rev(L - pot.knots), pot.values)
    assert rev.reversed() is pot


@given(st.integers(0, 2**32 - 1))
def test_restriction_is_exact(seed):
    rng = np.random.default_rng(seed)
    pot = EdgePotential.uniform(1.0, rng.normal(size=9))
    a, b = np.sort(rng.uniform(0, 1, 2))
    part = pot.restrict(a, b)
    x = np.linspace(0, b - a, 33)
    assert np.allclose(part(x), pot(a + x), atol=1e-14)


@given(st.integers(0, 2**32 - 1))
def test_graph_invariants(seed):
    rng = np.random.default_rng(seed)
    q = random_graph(rng, 2, 6)
    g = q.graph
    assert sum(g.degree(v) for v in range(g.vertex_count)) == g.bond_count
    v = int(rng.integers(g.vertex_count))
    for r in range(4):
        inner = set(combinatorial_ball(g, v, r).vertex_map)
        outer = set(combinatorial_ball(g, v, r + 1).vertex_map)
        assert inner <= outer
    b = int(rng.integers(g.bond_count))
    x0 = float(rng.uniform(0.01, 0.99) * q.bond_length(b))
    qa = add_root_vertex(RootedQuantumGraph(q, b, x0))
    assert total_length(qa) == pytest.approx(total_length(q), rel=1e-15)
    assert qa.vertex_count == q.vertex_count + 1 and qa.edge_count == q.edge_count + 1
