import numpy as np
import pytest

from reenact.facemodel import synthesize_basis


@pytest.fixture(scope="session")
def basis():
    """Standard test basis: 512 vertices, paper-scale coefficient dimensions."""
    return synthesize_basis(seed=7, vertex_count=512, dims=(80, 80, 64))


@pytest.fixture(scope="session")
def small_basis():
    """Coarse basis with reduced coefficient dimensions for fast solver tests."""
    return synthesize_basis(seed=11, vertex_count=170, dims=(8, 8, 6))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
