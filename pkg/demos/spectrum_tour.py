"""Eigenvalues of a small graph by two independent routes.

Loads the lollipop graph (a delta vertex, a Dirichlet tail and two edge
potentials), lists its spectrum below 120 from the secular scan, and
compares against the Richardson-extrapolated finite-element values.
"""
from pathlib import Path

import numpy as np

from qgs import eigenvalues_up_to, empirical_measure, parse_graph_file
from qgs.fem import fem_richardson

HERE = Path(__file__).parent

q = parse_graph_file(HERE / "graphs" / "lollipop_delta.json")
sd = eigenvalues_up_to(q, 120.0)
ev = sd.counted()
fem = fem_richardson(q, 64, len(ev))

print(f"{len(ev)} eigenvalues below 120 ({sd.count(120.0)} with multiplicity)")
print(f"{'secular':>14} {'FEM':>14} {'|diff|':>10}")
for a, b in zip(ev, fem):
    print(f"{a:14.8f} {b:14.8f} {abs(a - b):10.2e}")

mu = empirical_measure(sd)
edges = np.linspace(0.0, 120.0, 7)
print("\nspectral mass per window (divided by total length):")
for lo, hi, m in mu.histogram(edges):
    print(f"  ({lo:5.1f}, {hi:5.1f}]  {m:.4f}")
