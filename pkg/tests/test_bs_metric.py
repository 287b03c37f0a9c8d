import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from helpers import cycle, random_graph, relabelled
from qgs.bs_metric import (
    ball_isomorphisms,
    bs_distance,
    data_distance,
    green_diagonal_functional,
    reroot_average_check,
    rooted_ball,
    sample_root,
    sample_roots,
)
from qgs.graph import RootedQuantumGraph, make_quantum_graph


def path(lengths=(1.0, 1.0), potentials=None):
    n = len(lengths)
    return make_quantum_graph(n + 1, [(i, i + 1) for i in range(n)], list(lengths), potentials)


def rooted(q, bond=0, frac=0.5):
    return RootedQuantumGraph(q, bond, frac * q.bond_length(bond))


def test_identical_balls_admit_the_identity():
    rq = rooted(path())
    b = rooted_ball(rq, 1)
    assert tuple(range(b.size)) in ball_isomorphisms(b, b)


def test_cycle_balls_match_until_the_short_cycle_closes():
    r4, r6 = rooted(cycle(4)), rooted(cycle(6))
    assert ball_isomorphisms(rooted_ball(r4, 1), rooted_ball(r6, 1))
    assert not ball_isomorphisms(rooted_ball(r4, 2), rooted_ball(r6, 2))


def test_unequal_radii_rejected():
    rq = rooted(path())
    with pytest.raises(ValueError):
        ball_isomorphisms(rooted_ball(rq, 1), rooted_ball(rq, 2))


def _best(b1, b2):
    return min(data_distance(phi, b1, b2) for phi in ball_isomorphisms(b1, b2))


def test_data_distance_examples():
    a = rooted(path((1.0, 1.0)))
    b = rooted(path((1.0, 1.01)))
    ba, bb = rooted_ball(a, 2), rooted_ball(b, 2)
    assert _best(ba, ba) == 0.0
    assert _best(ba, bb) == pytest.approx(0.01, abs=1e-12)

    lin = rooted(make_quantum_graph(2, [(0, 1)], 1.0, [lambda x: x]))
    sq = rooted(make_quantum_graph(2, [(0, 1)], 1.0, [lambda x: x**2]))
    assert _best(rooted_ball(lin, 1), rooted_ball(sq, 1)) == pytest.approx(0.25, abs=1e-4)


def test_unitary_discrepancy_is_an_operator_norm():
    a = rooted(path(), frac=0.3)
    b = rooted(make_quantum_graph(3, [(0, 1), (1, 2)], 1.0, conditions={1: ("delta", 2.0)}), frac=0.3)
    ba, bb = rooted_ball(a, 1), rooted_ball(b, 1)
    a1 = int(np.flatnonzero(ba.ball.vertex_map == 1)[0])
    b1 = int(np.flatnonzero(bb.ball.vertex_map == 1)[0])
    ref = np.linalg.norm(ba.condition(a1) - bb.condition(b1), 2)
    assert ref > 0
    assert _best(ba, bb) == pytest.approx(ref, rel=1e-12)


def test_length_change_inside_first_ball_ties_at_one_third():
    # root 0.5 from the origin of an edge stretched from 1 to 1.5: the far half differs by 0.5
    q1 = cycle(6)
    q2 = cycle(6, [1.5, 1, 1, 1, 1, 1])
    rep = bs_distance(RootedQuantumGraph(q1, 0, 0.5), RootedQuantumGraph(q2, 0, 0.5))
    assert rep.radii[1].delta == pytest.approx(0.5)
    assert rep.exact and rep.d == pytest.approx(1 / 3, abs=1e-15)


def test_long_cycle_against_itself_is_only_bounded():
    rq = RootedQuantumGraph(cycle(40), 0, 0.5)
    rep = bs_distance(rq, rq, k_max=5)
    assert not rep.exact and rep.status == "upper bound only" and rep.d is None
    assert rep.d_upper <= 1 / 6 and rep.d_lower == 0.0
    json.dumps(rep.to_dict())


def test_saturated_identical_graphs_are_at_distance_zero():
    rq = rooted(cycle(3, [1.0, 1.3, 0.8]), frac=0.37)
    rep = bs_distance(rq, rq)
    assert rep.exact and rep.d == 0.0 and rep.to_dict()["alpha"] == [None, None]


def test_strict_mode_respects_bond_orderings():
    edges = [(0, 1), (0, 2), (0, 3)]
    a = make_quantum_graph(4, edges, 1.0)
    b = make_quantum_graph(4, edges, 1.0, beta=[[2, 0, 4], [1], [3], [5]])
    ra, rb = RootedQuantumGraph(a, 0, 0.4), RootedQuantumGraph(b, 0, 0.4)
    assert bs_distance(ra, rb).d_upper == 0.0
    assert bs_distance(ra, rb, strict=True).d_upper > 0.0


def test_orderings_matter_for_generic_unitaries():
    rng = np.random.default_rng(0)
    A = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    U, _ = np.linalg.qr(A)
    edges = [(0, 1), (0, 2), (0, 3)]
    a = make_quantum_graph(4, edges, 1.0, conditions={0: U})
    b = make_quantum_graph(4, edges, 1.0, conditions={0: U}, beta=[[2, 0, 4], [1], [3], [5]])
    rep = bs_distance(RootedQuantumGraph(a, 0, 0.4), RootedQuantumGraph(b, 0, 0.4))
    assert rep.d_upper > 0.0


def test_k_max_validation():
    rq = rooted(path())
    with pytest.raises(ValueError):
        bs_distance(rq, rq, k_max=0)


@settings(max_examples=10)
@given(st.integers(0, 2**32 - 1))
def test_relabelling_leaves_distance_zero(seed):
    rng = np.random.default_rng(seed)
    q = random_graph(rng, 2, 4)
    perm = rng.permutation(q.vertex_count)
    q2, new_id = relabelled(q, perm)
    e = int(rng.integers(q.edge_count))
    t = float(rng.uniform(0.1, 0.9)) * q.lengths[e]
    rep = bs_distance(RootedQuantumGraph(q, 2 * e, t), RootedQuantumGraph(q2, 2 * new_id[e], t), k_max=4)
    assert rep.d_upper == 0.0


@settings(max_examples=10)
@given(st.integers(0, 2**32 - 1))
def test_symmetry_and_monotone_deltas(seed):
    rng = np.random.default_rng(seed)
    r1 = sample_root(random_graph(rng, 2, 4), rng)
    r2 = sample_root(random_graph(rng, 2, 4), rng)
    ab, ba = bs_distance(r1, r2, k_max=3), bs_distance(r2, r1, k_max=3)
    assert (ab.d_lower, ab.d_upper) == (ba.d_lower, ba.d_upper)
    assert ab.monotone and 0.0 <= ab.d_lower <= ab.d_upper <= 1.0


def test_root_sampling_is_length_weighted():
    q = make_quantum_graph(3, [(0, 1), (1, 2)], [1.0, 3.0])
    edges, offsets = sample_roots(q, 10_000, 42)
    assert abs(np.mean(edges == 1) - 0.75) <= 0.02
    assert np.all((offsets > 0) & (offsets < q.lengths[edges]))
    assert stats.kstest(offsets / q.lengths[edges], "uniform").pvalue > 0.01


def test_root_sampling_on_one_edge_and_determinism():
    q = make_quantum_graph(2, [(0, 1)], 2.0)
    edges, _ = sample_roots(q, 100, 1)
    assert np.all(edges == 0)
    q = cycle(5, [0.5, 1.0, 1.5, 2.0, 2.5])
    a, b = sample_roots(q, 50, 9), sample_roots(q, 50, 9)
    assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])
    assert sample_root(q, 3) == sample_root(q, 3)


def test_reroot_constant_functional():
    lhs, rhs = reroot_average_check(cycle(3, [1.0, 1.3, 0.8]), lambda rq: 1.0, n=4)
    assert lhs == pytest.approx(1.0, abs=1e-13) and rhs == pytest.approx(1.0, abs=1e-13)


def test_reroot_edge_label_functional():
    q = make_quantum_graph(4, [(0, 1), (1, 2), (2, 0), (2, 3)], [1.0, 2.0, 0.5, 1.5])
    mean = float(np.dot(np.arange(4), q.lengths) / q.lengths.sum())
    lhs, rhs = reroot_average_check(q, lambda rq: float(rq.canonical[0]), n=4)
    assert lhs == pytest.approx(mean, abs=1e-13) and rhs == pytest.approx(mean, abs=1e-13)


def test_reroot_green_diagonal():
    q = cycle(3, [1.0, 1.3, 0.8], conditions={1: ("delta", 0.7)})
    lhs, rhs = reroot_average_check(q, green_diagonal_functional(2 + 1j), n=12)
    assert abs(lhs - rhs) <= 1e-10 and lhs.real > 0


def test_functional_part_validation():
    with pytest.raises(ValueError):
        green_diagonal_functional(1j, part="abs")
    f = green_diagonal_functional(3 - 2j, part="complex")
    v = f(RootedQuantumGraph(cycle(3), 0, 0.4))
    assert v.imag < 0 and not math.isnan(v.real)
