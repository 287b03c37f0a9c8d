"""Green's function, resolvent trace and smoothed density on the 3-star.

The equilateral star with Neumann leaves has eigenvalues (n pi)^2 and
((n + 1/2) pi)^2 (the latter double), so its resolvent trace has a closed
form to compare against the quadrature of the diagonal.
"""
import numpy as np

from qgs import RootedQuantumGraph, add_root_vertex, green_diagonal, make_quantum_graph, resolvent_trace, smoothed_spectral_density
from qgs.greens import evolution_operator, green_coefficients

star = make_quantum_graph(4, [(0, 1), (0, 2), (0, 3)], 1.0, conditions={1: "neumann", 2: "neumann", 3: "neumann"})

z = 4 + 1j
k = np.sqrt(z)
closed = -1 / (2 * z) - np.cos(k) / np.sin(k) / (2 * k) + np.tan(k) / k
trace = resolvent_trace(star, z, tol=1e-10)
print(f"trace at z = {z}: quadrature {trace:.12f}")
print(f"                   closed form {closed:.12f}")

x0 = (0, 0.37)
for eta in (1.0, 0.1, 0.01):
    g = green_diagonal(star, x0, [np.pi**2 + 1j * eta])[0]
    print(f"G(x0, x0) at pi^2 + {eta}i: {g:.6f}   (Im G * eta = {g.imag * eta:.4f})")

print("\nnorm of (SD)^-1 along Re z = 2, and what the Neumann series gives:")
rq = RootedQuantumGraph(star, 0, 0.5)
split = add_root_vertex(rq)
root = split.vertex_count - 1
for im in (1, 5, 20, 100):
    z = complex(2, im)
    norm = evolution_operator(split, z, root).inverse_norm()
    direct = green_coefficients(rq, z, "direct")
    try:
        series = green_coefficients(rq, z, "neumann_series")
        note = f"series/direct gap {np.max(np.abs(series - direct)):.1e}"
    except ValueError:
        note = "series not permitted"
    print(f"  Im z = {im:4d}: |(SD)^-1| = {norm:.3e}  {note}")

grid = np.linspace(1.0, 30.0, 8)
dens = smoothed_spectral_density(star, grid, 0.5)
print("\nsmoothed density (eps = 0.5):")
for lam, d in zip(grid, dens):
    print(f"  lambda = {lam:6.2f}  {d:.5f}")
