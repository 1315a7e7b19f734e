import numpy as np
import pytest

from parametric_modes.grid import KernelMatrix, make_grid
from parametric_modes.modes import (DecompositionError, PairingAmbiguityError, extract_mode_structure, svd_modes,
                                    synthesize_state, verify_appendix)
from parametric_modes.propagator import FIBER, PropagationConfig, PumpModel, bogoliubov_residual, propagate


def overlaps(grid, u, v):
    return np.abs(np.sum(grid.weights * np.conj(u) * v, axis=1))


def test_svd_modes_reconstruct_and_orthonormal(small_grid):
    rng = np.random.default_rng(3)
    n = small_grid.n
    K = KernelMatrix(rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n)), small_grid, small_grid)
    m = svd_modes(K)
    rebuilt = np.einsum("k,ki,kj->ij", m.singular_values, m.left, m.right)
    np.testing.assert_allclose(rebuilt, K.values, atol=1e-10)
    gram = (np.conj(m.left) * small_grid.weights) @ m.left.T
    np.testing.assert_allclose(gram, np.eye(n), atol=1e-10)
    assert np.all(np.diff(m.singular_values) <= 0)
    peaks = m.left[np.arange(n), np.abs(m.left).argmax(axis=1)]
    assert np.all(np.abs(peaks.imag) < 1e-12) and np.all(peaks.real > 0)


def test_svd_rejects_non_finite(small_grid):
    vals = np.zeros((small_grid.n, small_grid.n))
    vals[0, 0] = np.nan
    with pytest.raises(DecompositionError):
        svd_modes(KernelMatrix(vals, small_grid, small_grid))


def test_synthetic_structure_recovered(small_grid, mode_families):
    pa, pb, fa, fb = mode_families(4)
    r = np.array([0.8, 0.5, 0.3, 0.1])
    r /= np.linalg.norm(r)
    st = synthesize_state(r, 3.0, pa, pb, fa, fb, small_grid)
    assert bogoliubov_residual(st) < 1e-13
    m = extract_mode_structure(st)
    assert m.n_modes_kept == 4
    assert m.G == pytest.approx(3.0, abs=1e-12)
    np.testing.assert_allclose(m.r, r, atol=1e-12)
    for got, want in ((m.psi_a, pa), (m.psi_b, pb), (m.phi_a, fa), (m.phi_b, fb)):
        assert overlaps(small_grid, got, want).min() > 1 - 1e-12
    np.testing.assert_allclose(m.reconstruct_h2a(), st.h2a, atol=1e-12)
    np.testing.assert_allclose(m.reconstruct_h2b(), st.h2b, atol=1e-12)


def test_synthetic_appendix_checks_pass(small_grid, mode_families):
    pa, pb, fa, fb = mode_families(3)
    r = np.array([0.7, 0.6, 0.2])
    r /= np.linalg.norm(r)
    st = synthesize_state(r, 2.5, pa, pb, fa, fb, small_grid)
    m = extract_mode_structure(st)
    rep = verify_appendix(st, m)
    assert rep.modes_evaluated == 3 and rep.modes_skipped == 0
    assert rep.passes()
    assert np.abs(rep.gain_mismatch).max() < 1e-12


def test_appendix_floor_skips_weak_modes(small_grid, mode_families):
    pa, pb, fa, fb = mode_families(3)
    r = np.array([0.999, 0.04, 0.02])
    st = synthesize_state(r / np.linalg.norm(r), 1.0, pa, pb, fa, fb, small_grid)
    rep = verify_appendix(st, extract_mode_structure(st), floor=0.1)
    assert rep.modes_evaluated == 1 and rep.modes_skipped == 2


def test_degenerate_modes_are_ambiguous(small_grid, mode_families):
    pa, pb, fa, fb = mode_families(3)
    r = np.array([0.6, 0.6, 0.3])
    st = synthesize_state(r / np.linalg.norm(r), 3.0, pa, pb, fa, fb, small_grid)
    with pytest.raises(PairingAmbiguityError):
        extract_mode_structure(st)


def test_zero_kernel_has_no_modes(small_grid):
    st = propagate(PropagationConfig(PumpModel(0.0, *FIBER), small_grid, 5))
    with pytest.raises(DecompositionError):
        extract_mode_structure(st)


def test_propagated_modes_consistent():
    grid = make_grid(-6, 6, 61)
    st = propagate(PropagationConfig(PumpModel(2.0, *FIBER), grid, 100))
    m = extract_mode_structure(st)
    assert abs(np.sum(m.r ** 2) - 1) < 1e-12
    assert np.all(np.diff(m.r) <= 0)
    scale = np.abs(st.h2a).max()
    assert np.abs(m.reconstruct_h2a() - st.h2a).max() < 1e-6 * scale
    assert np.abs(m.reconstruct_h2b() - st.h2b).max() < 1e-6 * scale
    rep = verify_appendix(st, m)
    assert rep.worst_overlap() > 1 - 1e-5


def test_truncation_controls_kept_modes(small_grid, mode_families):
    pa, pb, fa, fb = mode_families(4)
    r = np.array([0.9, 0.4, 1e-3, 1e-5])
    st = synthesize_state(r / np.linalg.norm(r), 1.0, pa, pb, fa, fb, small_grid)
    assert extract_mode_structure(st, truncation=1e-8).n_modes_kept == 4
    assert extract_mode_structure(st, truncation=1e-4).n_modes_kept == 3
