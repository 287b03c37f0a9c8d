"""Fast end-to-end checks against closed forms, run by ``qgs selftest``."""
from __future__ import annotations

import math
from pathlib import Path
from typing import Callable

import numpy as np

__all__ = ["CHECKS", "run_selftest"]


def _dirichlet_interval():
    from .graph import make_quantum_graph
    from .spectral import eigenvalues_up_to

    q = make_quantum_graph(2, [(0, 1)], math.pi, conditions="dirichlet")
    ev = eigenvalues_up_to(q, 100.0).counted()
    ref = np.arange(1, 11) ** 2
    err = float(np.max(np.abs(ev - ref) / ref)) if len(ev) == len(ref) else math.inf
    return err < 1e-8, f"max relative error {err:.2e} over {len(ev)} eigenvalues"


def _routes_agree():
    from .graph import make_quantum_graph
    from .spectral import eigenvalues_up_to

    q = make_quantum_graph(4, [(0, 1), (1, 2), (2, 3), (3, 0), (0, 2)])
    a = eigenvalues_up_to(q, 60.0, method="scattering")
    b = eigenvalues_up_to(q, 60.0, method="scan")
    ok = np.array_equal(a.multiplicities, b.multiplicities) and np.allclose(a.eigenvalues, b.eigenvalues, atol=1e-7)
    return bool(ok), f"{len(a.eigenvalues)} distinct eigenvalues by both routes"


def _green_checks():
    from .graph import RootedQuantumGraph, make_quantum_graph
    from .greens import GreenEvaluation

    q = make_quantum_graph(3, [(0, 1), (1, 2), (2, 0)], [1.0, 1.3, 0.8], conditions={1: ("delta", 0.7)})
    z = 2.0 + 0.5j
    ev = GreenEvaluation(RootedQuantumGraph(q, 0, 0.4), z)
    x, y = (0, 0.4), (3, 0.5)
    g_diag = ev(x, x)
    sym = abs(ev(x, y) - GreenEvaluation(RootedQuantumGraph(q, 3, 0.5), z)(y, x))
    ok = g_diag.imag > 0 and sym < 1e-8
    return ok, f"Im G(x,x) = {g_diag.imag:.4g}, symmetry residual {sym:.1e}"


def _bs_cycles():
    from .bs_metric import bs_distance
    from .graph import RootedQuantumGraph, make_quantum_graph

    def cyc(n):
        return make_quantum_graph(n, [(i, (i + 1) % n) for i in range(n)], 1.0)

    rep = bs_distance(RootedQuantumGraph(cyc(4), 0, 0.5), RootedQuantumGraph(cyc(6), 0, 0.5), 6)
    return rep.exact and abs(rep.d - 1 / 3) < 1e-15, f"d = {rep.d_lower:.6g}..{rep.d_upper:.6g}"


def _lift_length():
    from .ensembles import EnsembleSpec, generate, n_lift
    from .graph import total_length

    base = generate(EnsembleSpec("complete"), 4)
    q = n_lift(base, 8, 0)
    return total_length(q) == 8 * total_length(base), f"lift length {total_length(q):g}"


def _config_roundtrip():
    from .io import RunConfig

    cfg = RunConfig("spectrum", {"graph": "g.json", "lmax": 100.0}, seed=3)
    back = RunConfig.from_json(cfg.to_json())
    return back == cfg and back.config_hash == cfg.config_hash, f"hash {cfg.config_hash}"


CHECKS: dict[str, Callable[[], tuple[bool, str]]] = {
    "spectrum.dirichlet_interval": _dirichlet_interval,
    "spectrum.routes_agree": _routes_agree,
    "greens.herglotz_symmetry": _green_checks,
    "bs_metric.cycles": _bs_cycles,
    "ensembles.lift_length": _lift_length,
    "io.config_roundtrip": _config_roundtrip,
}


def run_selftest(run_pytest: bool = False, echo=print) -> int:
    """Run every check; with ``run_pytest`` also the repository test suite when present."""
    failures = 0
    for name, fn in CHECKS.items():
        try:
            ok, detail = fn()
        except Exception as exc:  # a crash is a failure, report and continue
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        failures += not ok
        echo(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
    if run_pytest:
        tests = Path(__file__).resolve().parents[2] / "tests"
        if not tests.is_dir():
            echo(f"FAIL pytest: no test directory at {tests}")
            failures += 1
        else:
            import pytest

            code = pytest.main(["-q", str(tests)])
            failures += code != 0
            echo(f"{'PASS' if code == 0 else 'FAIL'} pytest: exit code {int(code)}")
    return 1 if failures else 0
