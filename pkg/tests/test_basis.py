import numpy as np
import pytest

from sipcontrol.basis import BasisSet, custom_basis, fourier_basis
from sipcontrol.errors import ConstructionError, DomainError


def test_fourier_requires_odd_count():
    with pytest.raises(ConstructionError):
        fourier_basis(10, 1.0)
    fourier_basis(1, 1.0)
    fourier_basis(11, 1.0)


def test_sample_layout_and_values():
    b = fourier_basis(5, 1.0)
    ts = np.array([0.0, 0.25, 0.5])
    psi = b.sample(ts)
    assert psi.shape == (5, 3)
    assert np.allclose(psi[0], 1.0)
    # rows 1..2 are sin(2 pi k t), rows 3..4 are cos(2 pi k t)
    assert np.allclose(psi[1], np.sin(2 * np.pi * ts))
    assert np.allclose(psi[2], np.sin(4 * np.pi * ts))
    assert np.allclose(psi[3], np.cos(2 * np.pi * ts))
    assert np.allclose(psi[4], np.cos(4 * np.pi * ts))


def test_horizon_scaling_makes_harmonics_periodic():
    b = fourier_basis(5, 7.0)
    assert np.allclose(b.evaluate(0.0), b.evaluate(7.0))


def test_sample_outside_domain_raises():
    b = fourier_basis(3, 1.0)
    with pytest.raises(DomainError):
        b.sample([1.5])
    with pytest.raises(DomainError):
        b.sample([-0.5])


def test_gram_is_orthogonal_for_full_periods():
    b = fourier_basis(7, 1.0)
    gram = b.gram()
    expected = np.diag([1.0, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5])
    assert np.allclose(gram, expected, atol=1e-12)


def test_gram_positive_definite_and_cached():
    b = fourier_basis(21, 3.0)
    g1 = b.gram()
    assert np.all(np.linalg.eigvalsh(g1) > 0)
    assert b.gram() is g1


def test_custom_basis_accepts_independent_functions():
    b = custom_basis([lambda t: np.ones_like(t), lambda t: t, lambda t: t**2], 1.0)
    assert b.n_funcs == 3
    assert b.gram().shape == (3, 3)


def test_custom_basis_rejects_dependent_functions():
    with pytest.raises(ConstructionError):
        custom_basis([lambda t: t, lambda t: 2.0 * t], 1.0)


def test_bad_construction():
    with pytest.raises(ConstructionError):
        fourier_basis(0, 1.0)
    with pytest.raises(ConstructionError):
        fourier_basis(3, -1.0)
    with pytest.raises(ConstructionError):
        BasisSet("polynomial", 3, 1.0)
