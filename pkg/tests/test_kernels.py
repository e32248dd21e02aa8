import os
import subprocess
import sys

import numpy as np
import pytest

from hybrid_koopman import _kernels
from hybrid_koopman.classical_koopman import build_liouvillian
from hybrid_koopman.phase_space import build_grid, hamiltonian_field

backends = [_kernels.python_backend]
if _kernels.compiled_backend is not None:
    backends.append(_kernels.compiled_backend)


@pytest.mark.parametrize("backend", backends, ids=lambda b: b.__name__.rsplit(".", 1)[-1])
@pytest.mark.parametrize("boundary", ["periodic", "zero"])
def test_liouvillian_kernel_matches_matrix(backend, boundary, rng):
    g = build_grid((-3, 3, -2, 2), 9, 7, boundary=boundary)
    H = np.cos(g.q) * g.p + 0.3 * g.p**2
    L = build_liouvillian(hamiltonian_field(H, g))
    psi = rng.standard_normal(g.size) + 1j * rng.standard_normal(g.size)
    out = backend.liouvillian_apply(g.as_2d(psi), g.as_2d(L.field.alpha), g.as_2d(L.field.beta),
                                    0.5 / g.dq, 0.5 / g.dp, g.periodic)
    assert np.allclose(out.reshape(-1), L.matrix @ psi, atol=1e-12)


@pytest.mark.parametrize("backend", backends, ids=lambda b: b.__name__.rsplit(".", 1)[-1])
@pytest.mark.parametrize("periodic", [True, False])
def test_bilinear_sample(backend, periodic, rng):
    f = rng.random((6, 5))
    fq = np.array([0.0, 2.0, 2.5, 5.5, -0.5, 10.0])
    fp = np.array([0.0, 3.0, 3.5, 1.0, 2.0, 2.0])
    out = backend.bilinear_sample(f, fq, fp, periodic)
    assert out[0] == pytest.approx(f[0, 0])
    assert out[1] == pytest.approx(f[2, 3])
    assert out[2] == pytest.approx(0.25 * (f[2, 3] + f[3, 3] + f[2, 4] + f[3, 4]))
    if periodic:
        assert out[3] == pytest.approx(0.5 * (f[5, 1] + f[0, 1]))
        assert out[5] == pytest.approx(f[4, 2])
    else:
        assert out[3] == pytest.approx(0.5 * f[5, 1])
        assert out[5] == 0.0


@pytest.mark.skipif(_kernels.compiled_backend is None, reason="extension not built")
def test_backends_agree(rng):
    a, b = _kernels.python_backend, _kernels.compiled_backend
    psi = rng.standard_normal((12, 10)) + 1j * rng.standard_normal((12, 10))
    al, be = rng.standard_normal((12, 10)), rng.standard_normal((12, 10))
    for per in (True, False):
        assert np.allclose(a.liouvillian_apply(psi, al, be, 1.3, 0.7, per),
                           b.liouvillian_apply(psi, al, be, 1.3, 0.7, per), atol=1e-13)
    f = rng.random((12, 10))
    fq, fp = rng.uniform(-3, 15, 50), rng.uniform(-3, 13, 50)
    for per in (True, False):
        assert np.allclose(a.bilinear_sample(f, fq, fp, per), b.bilinear_sample(f, fq, fp, per))


def test_pure_python_switch():
    code = "import hybrid_koopman._kernels as k; print(k.BACKEND)"
    env = dict(os.environ, HYBRID_KOOPMAN_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"
