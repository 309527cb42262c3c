# Copyright 2026 The lindloc Contributors
# SPDX-License-Identifier: Apache-2.0

"""Smoke test for the Python bindings.

Uses an installed ``lindloc`` module if there is one. Otherwise builds the
extension with cargo and imports it from a temporary directory.
"""

import cmath
import importlib
import shutil
import subprocess
import sys
import tempfile
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent


def load():
    try:
        return importlib.import_module("lindloc")
    except ImportError:
        pass
    subprocess.run(["cargo", "build", "--release", "-p", "lindloc-py"], cwd=ROOT, check=True)
    lib = ROOT / "target" / "release" / "liblindloc_py.so"
    tmp = Path(tempfile.mkdtemp())
    shutil.copy(lib, tmp / "lindloc.so")
    sys.path.insert(0, str(tmp))
    return importlib.import_module("lindloc")


def site_state(n, x):
    return [[complex(i == x and j == x) for j in range(n)] for i in range(n)]


def trace(m):
    return sum(m[i][i] for i in range(len(m)))


def main():
    ll = load()
    print("lindloc", ll.__version__)

    lat = ll.Lattice.chain(12)
    assert len(lat) == 12
    assert lat.distance(0, 11) == 11

    model = ll.Model.dephasing(lat).compose(ll.Model.anderson(lat, 1.0, [0.0] * 12))
    assert model.dim == 12
    assert model.validate_locality()["pass"]

    rho = site_state(12, 3)
    out = ll.evolve(model, rho, 0.5)
    assert abs(trace(out) - 1) < 1e-10

    abel = ll.abel_average(model, rho, 0.1)
    assert abs(trace(abel) - 1) < 1e-10

    steady = ll.steady_states(model)
    assert len(steady) == 1
    assert abs(steady[0][5][5] - 1 / 12) < 1e-8

    k = ll.coherence_kernel(model, 1, 10, 0.1)
    assert k["quadrature"]["converged"]
    report = ll.coherence_bound(model, rho, 1, 10, 0.1)
    assert report["satisfied"], report

    ct = ll.ct_verify(model, [complex(0.5, e) for e in (-4.0, 0.0, 4.0)])
    assert ct["violations"] == 0, ct

    moments = ll.fractional_moments(model, 4.0, 0.5, complex(0.05, 0.3), [(5, 5), (5, 8)], 200, 7)
    again = ll.fractional_moments(model, 4.0, 0.5, complex(0.05, 0.3), [(5, 5), (5, 8)], 200, 7)
    assert moments == again

    fit = ll.fit_exponential_decay([(d, 2.0 * cmath.exp(-0.7 * d).real) for d in range(1, 8)])
    assert abs(fit["mu"] - 0.7) < 1e-9 and abs(fit["C"] - 2.0) < 1e-9

    gap = lat.dirichlet_gap(list(range(3, 8)))
    assert abs(gap - 4 * cmath.sin(cmath.pi / 12).real ** 2) < 1e-10

    try:
        ll.Lattice.chain(0)
    except ll.LindlocError as e:
        print("rejected empty chain:", e)
    else:
        raise AssertionError("empty chain accepted")

    print("smoke test passed")


if __name__ == "__main__":
    main()
