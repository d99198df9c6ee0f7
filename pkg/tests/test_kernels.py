"""Backend equivalence and independent checks of the two hot kernels."""

import itertools
import math

import numpy as np
import pytest

from fockworks import _kernels_py
from fockworks.optics import fourier_matrix, random_unitary

try:
    from fockworks import _kernels as compiled
except ImportError:
    compiled = None

BACKENDS = [_kernels_py] + ([compiled] if compiled is not None else [])


def permanent_by_enumeration(mat):
    # independent of Ryser: direct sum over permutations
    n = len(mat)
    total = 0j
    for perm in itertools.permutations(range(n)):
        prod = 1.0 + 0j
        for i, j in enumerate(perm):
            prod *= mat[i][j]
        total += prod
    return total


@pytest.mark.parametrize("kernels", BACKENDS, ids=lambda k: k.BACKEND)
class TestPermanent:
    def test_empty_matrix(self, kernels):
        assert kernels.permanent(np.zeros((0, 0), dtype=complex)) == 1

    def test_one_by_one(self, kernels):
        assert kernels.permanent(np.array([[2.5 + 1j]])) == 2.5 + 1j

    @pytest.mark.parametrize("n", [2, 3, 4, 5, 6])
    def test_matches_enumeration(self, kernels, n, rng):
        mat = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
        assert abs(kernels.permanent(mat) - permanent_by_enumeration(mat)) < 1e-10

    def test_all_ones(self, kernels):
        # permanent of the all-ones n x n matrix is n!
        assert abs(kernels.permanent(np.ones((5, 5), dtype=complex)) - math.factorial(5)) < 1e-9


@pytest.mark.parametrize("kernels", BACKENDS, ids=lambda k: k.BACKEND)
class TestExpansion:
    def test_identity_passthrough(self, kernels):
        out = kernels.expand_basis_state(np.eye(3, dtype=complex), (2, 0, 1))
        assert set(out) == {(2, 0, 1)}
        assert abs(out[(2, 0, 1)] - 1) < 1e-12

    def test_norm_preserved(self, kernels, rng):
        u = random_unitary(4, rng).matrix
        out = kernels.expand_basis_state(u, (2, 1, 0, 0))
        assert abs(sum(abs(a) ** 2 for a in out.values()) - 1) < 1e-12

    def test_photon_conservation(self, kernels, rng):
        u = random_unitary(3, rng).matrix
        out = kernels.expand_basis_state(u, (1, 2, 0))
        assert all(sum(occ) == 3 for occ in out)

    def test_wide_state_fallback_agrees(self, kernels):
        # 32 modes cannot pack into 64-bit keys; exercises the tuple path
        u = fourier_matrix(31).matrix
        occ = tuple([2] + [0] * 31)
        out = kernels.expand_basis_state(u, occ)
        assert abs(sum(abs(a) ** 2 for a in out.values()) - 1) < 1e-10


@pytest.mark.skipif(compiled is None, reason="compiled kernels not built")
class TestBackendsAgree:
    @pytest.mark.parametrize("occ", [(1, 1, 0), (2, 1, 0), (3, 0, 0)])
    def test_expansion_identical(self, occ, rng):
        u = random_unitary(3, rng).matrix
        a = _kernels_py.expand_basis_state(u, occ)
        b = compiled.expand_basis_state(u, occ)
        assert set(a) == set(b)
        assert all(abs(a[k] - b[k]) < 1e-13 for k in a)

    def test_permanent_identical(self, rng):
        mat = rng.normal(size=(7, 7)) + 1j * rng.normal(size=(7, 7))
        assert abs(_kernels_py.permanent(mat) - compiled.permanent(mat)) < 1e-9
