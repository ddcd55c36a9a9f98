import numpy as np
import pytest


def random_density(dim, rng, rank=None):
    """Random full-rank (or given-rank) density matrix."""
    rank = rank or dim
    g = rng.standard_normal((dim, rank)) + 1j * rng.standard_normal((dim, rank))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def random_hermitian_unit_trace(dim, rng):
    h = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    h = 0.5 * (h + h.conj().T)
    return h - (np.trace(h).real - 1.0) / dim * np.eye(dim)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
