"""Shared graph builders for the test suite."""
from __future__ import annotations

import numpy as np

from qgs.graph import EdgePotential, make_quantum_graph


def cycle(n, length=1.0, **kw):
    return make_quantum_graph(n, [(i, (i + 1) % n) for i in range(n)], length, **kw)


def star(n, length=1.0, leaves="neumann"):
    conds = {v: leaves for v in range(1, n + 1)}
    return make_quantum_graph(n + 1, [(0, v) for v in range(1, n + 1)], length, conditions=conds)


def complete(n, length=1.0, **kw):
    return make_quantum_graph(n, [(i, j) for i in range(n) for j in range(i + 1, n)], length, **kw)


def interval(length=1.0, conditions="kirchhoff", potential=None):
    return make_quantum_graph(2, [(0, 1)], length, potentials=None if potential is None else [potential], conditions=conditions)


def random_potential(rng, length, knots=9, lip=1.0, cap=1.0):
    """Clipped random walk: Lipschitz constant at most ``lip``, sup at most ``cap``."""
    x = np.linspace(0.0, length, knots)
    h = x[1] - x[0]
    steps = rng.uniform(-lip * h, lip * h, knots - 1)
    v = np.clip(np.concatenate([[rng.uniform(-cap, cap)], steps]).cumsum(), -cap, cap)
    return EdgePotential(x, v)


def random_graph(rng, n_min=2, n_max=5, p=0.6, delta_fraction=0.5, potentials=True):
    """Connected simple graph, lengths in [0.5, 1.5], bounded potentials and mixed Kirchhoff/delta conditions."""
    while True:
        n = int(rng.integers(n_min, n_max + 1))
        edges = [(i, j) for i in range(n) for j in range(i + 1, n) if rng.random() < p]
        if not edges:
            continue
        seen, stack = {0}, [0]
        adj = {v: set() for v in range(n)}
        for u, v in edges:
            adj[u].add(v)
            adj[v].add(u)
        while stack:
            u = stack.pop()
            for w in adj[u] - seen:
                seen.add(w)
                stack.append(w)
        if len(seen) == n:
            break
    L = rng.uniform(0.5, 1.5, len(edges))
    pots = [random_potential(rng, L[e]) for e in range(len(edges))] if potentials else None
    conds = {v: ("delta", float(rng.uniform(-2, 2))) for v in range(n) if rng.random() < delta_fraction}
    return make_quantum_graph(n, edges, L, potentials=pots, conditions=conds)


def random_unitary(rng, d):
    A = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    Q, R = np.linalg.qr(A)
    return Q * (np.diag(R) / np.abs(np.diag(R)))[None, :]


def relabelled(q, perm):
    """Same quantum graph with vertices renamed by ``perm`` and edges listed in reverse."""
    g = q.graph
    order = list(range(g.edge_count))[::-1]
    edges = [(perm[g.edges[e][0]], perm[g.edges[e][1]]) for e in order]
    new_id = {e: i for i, e in enumerate(order)}
    conds = {perm[v]: q.conditions[v] for v in range(g.vertex_count)}
    beta = [None] * g.vertex_count
    for v in range(g.vertex_count):
        beta[perm[v]] = [2 * new_id[b >> 1] + (b & 1) for b in q.beta[v]]
    pots = [q.edge_data[e].potential for e in order]
    return make_quantum_graph(g.vertex_count, edges, [q.lengths[e] for e in order], pots, conds, beta), new_id
