import pytest

from slipflow.basis import build_basis
from slipflow.domain import Slab, Torus


@pytest.fixture(scope="session")
def torus_basis8():
    return build_basis(Torus(), 8)


@pytest.fixture(scope="session")
def torus_basis16():
    return build_basis(Torus(), 16)


@pytest.fixture(scope="session")
def slab_basis12():
    return build_basis(Slab(friction=1.0), 12)


@pytest.fixture(scope="session")
def slab_free16():
    """Friction-free slab, where vertical profiles have closed forms.

    Sixteen modes are needed before the first mean-shear profile (a half
    cosine, gradient energy pi^2/4) outranks the low toroidal modes.
    """
    return build_basis(Slab(friction=0.0), 16)
