"""Temporal-mode structure of the transfer kernels.

Every kernel is decomposed with an SVD of its symmetrized matrix, so mode
functions come out orthonormal under the grid's quadrature weights.  The
commutator identities force the four decompositions to share mode functions:

    h1a(W, W') = sum_k cosh(r_k G) psi_a_k(W) phi_a_k(W')
    h2a(W, W') = sum_k sinh(r_k G) psi_a_k(W) conj(phi_b_k(W'))
    h1b(W, W') = sum_k cosh(r_k G) psi_b_k(W) phi_b_k(W')
    h2b(W1', W2) = sum_k sinh(r_k G) psi_b_k(W2) conj(phi_a_k(W1'))

``G`` and ``r_k`` are read off ``h2a`` alone; ``h1a`` and ``h1b`` are only used
to check these relations (:func:`verify_appendix`).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .grid import FrequencyGrid, KernelMatrix, desymmetrize, symmetrize
from .propagator import TransferState

TRUNCATION = 1e-8
DEGENERACY = 1e-10
APPENDIX_FLOOR = 0.1


class DecompositionError(RuntimeError):
    pass


class PairingAmbiguityError(DecompositionError):
    """Degenerate singular values whose a-side and b-side modes cannot be matched."""


@dataclass(frozen=True)
class SVDModes:
    """``K(W, W') = sum_k s_k left[k](W) right[k](W')`` with weighted-orthonormal rows."""

    singular_values: np.ndarray
    left: np.ndarray
    right: np.ndarray


def _svd(M: np.ndarray):
    try:
        return scipy.linalg.svd(M, full_matrices=False, lapack_driver="gesdd")
    except (np.linalg.LinAlgError, ValueError):
        pass
    try:
        return scipy.linalg.svd(M, full_matrices=False, lapack_driver="gesvd")
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise DecompositionError(f"SVD failed: {exc}") from exc


def _degenerate_groups(s: np.ndarray, rel: float = DEGENERACY) -> list[list[int]]:
    groups, current = [], [0]
    for k in range(1, len(s)):
        if s[k - 1] - s[k] <= rel * s[k - 1] and s[k - 1] > 0:
            current.append(k)
        else:
            groups.append(current)
            current = [k]
    groups.append(current)
    return [g for g in groups if len(g) > 1]


def svd_modes(K: KernelMatrix) -> SVDModes:
    """Weighted SVD of a sampled kernel, singular values descending.

    Each left function is rotated so its largest-modulus sample is real and
    positive; the right function absorbs the conjugate phase.  Within a group
    of degenerate singular values modes are ordered by the centroid of the
    left function on the grid.
    """
    if not np.isfinite(K.values).all():
        raise DecompositionError("kernel has non-finite entries")
    U, s, Vh = _svd(symmetrize(K))
    left = (U / K.row_grid.sqrt_weights[:, None]).T
    right = Vh / K.col_grid.sqrt_weights[None, :]

    peak = np.argmax(np.abs(left), axis=1)
    phase = left[np.arange(len(s)), peak]
    phase = np.where(np.abs(phase) > 0, phase / np.where(phase == 0, 1, np.abs(phase)), 1.0)
    left = left / phase[:, None]
    right = right * phase[:, None]

    order = np.arange(len(s))
    idx = np.arange(K.row_grid.n)
    for group in _degenerate_groups(s):
        dens = np.abs(left[group]) ** 2 * K.row_grid.weights
        centroid = (dens @ idx) / dens.sum(axis=1)
        order[group] = np.asarray(group)[np.argsort(centroid, kind="stable")]
    return SVDModes(s[order], left[order], right[order])


@dataclass(frozen=True)
class ModeStructure:
    """Mode decomposition of one transfer state.

    Mode-function arrays have one row per kept mode.
    """

    G: float
    r: np.ndarray
    psi_a: np.ndarray
    psi_b: np.ndarray
    phi_a: np.ndarray
    phi_b: np.ndarray
    sv_h2a: np.ndarray
    n_modes_kept: int
    grid_a: FrequencyGrid
    grid_b: FrequencyGrid
    meta: dict = field(default_factory=dict, compare=False)

    @property
    def squeezing(self) -> np.ndarray:
        """Per-mode squeezing parameters ``r_k G``."""
        return self.r * self.G

    def reconstruct_h2a(self) -> np.ndarray:
        return np.einsum("k,ki,kj->ij", np.sinh(self.squeezing), self.psi_a, np.conj(self.phi_b))

    def reconstruct_h2b(self) -> np.ndarray:
        return np.einsum("k,kj,ki->ij", np.sinh(self.squeezing), self.psi_b, np.conj(self.phi_a))


def _unitary_part(coeff, rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
    """``rows^T diag(coeff) cols`` plus a unit-gain map between the orthogonal complements."""
    comp_rows = scipy.linalg.null_space(rows.conj())
    comp_cols = scipy.linalg.null_space(cols.conj())
    return rows.T @ (coeff[:, None] * cols) + comp_rows @ comp_cols.T


def synthesize_state(r, G: float, psi_a, psi_b, phi_a, phi_b, grid_a: FrequencyGrid,
                     grid_b: FrequencyGrid | None = None) -> TransferState:
    """Kernels of the Bogoliubov transformation with the given mode structure.

    Mode-function rows must be orthonormal under the grid weights.  Directions
    outside the given modes pass through with unit gain, so the result
    satisfies the commutator identities to rounding error.
    """
    grid_b = grid_a if grid_b is None else grid_b
    rG = np.asarray(r, dtype=float) * G
    c, s = np.cosh(rG), np.sinh(rG)
    sa, sb = grid_a.sqrt_weights, grid_b.sqrt_weights
    Pa, Pb = np.atleast_2d(psi_a) * sa, np.atleast_2d(psi_b) * sb
    Fa, Fb = np.atleast_2d(phi_a) * sa, np.atleast_2d(phi_b) * sb
    H1a = _unitary_part(c, Pa, Fa)
    H1b = _unitary_part(c, Pb, Fb)
    H2a = Pa.T @ (s[:, None] * Fb.conj())
    H2b = Fa.conj().T @ (s[:, None] * Pb)
    return TransferState.from_kernels(
        1.0, grid_a, grid_b,
        desymmetrize(H1a - np.eye(grid_a.n), grid_a, grid_a).values,
        desymmetrize(H2a, grid_a, grid_b).values,
        desymmetrize(H1b - np.eye(grid_b.n), grid_b, grid_b).values,
        desymmetrize(H2b, grid_a, grid_b).values,
    )


def _pair_b_side(state: TransferState, psi_a, phi_a, s_a) -> np.ndarray:
    """Permutation of b-side modes matching the a-side order.

    Pairing follows the descending singular values.  Inside a degenerate group
    the overlap ``<psi_a_k| h1a |conj(phi_a_l)>`` (which equals
    ``cosh(r_k G) delta_kl`` for correctly paired modes) decides; if that matrix
    is not a permutation the pairing is ambiguous.
    """
    n = len(s_a)
    perm = np.arange(n)
    groups = _degenerate_groups(s_a)
    if not groups:
        return perm
    w = state.grid_a.weights
    bra = np.conj(psi_a) * w
    ket = np.conj(phi_a) * w
    overlap = bra @ np.conj(phi_a).T + bra @ state.h1a_bar @ ket.T
    for group in groups:
        block = np.abs(overlap[np.ix_(group, group)])
        scale = block.max()
        best = block.argmax(axis=1)
        dominant = block[np.arange(len(group)), best]
        rest = block.copy()
        rest[np.arange(len(group)), best] = 0
        if len(set(best)) != len(group) or dominant.min() < (1 - 1e-6) * scale or rest.max() > 1e-6 * scale:
            raise PairingAmbiguityError(
                f"singular values {[float(s_a[k]) for k in group]} are degenerate and the mode "
                "overlaps do not identify a unique a/b pairing")
        perm[group] = np.asarray(group)[best]
    return perm


def extract_mode_structure(state: TransferState, truncation: float = TRUNCATION) -> ModeStructure:
    """Global gain, normalized mode coefficients and mode functions of ``state``.

    ``sinh(r_k G)`` are the singular values of ``h2a``; modes with
    ``s_k < s_1 * truncation`` are dropped.
    """
    ga, gb = state.grid_a, state.grid_b
    a_side = svd_modes(state.kernel("h2a"))
    s = a_side.singular_values
    if s.size == 0 or not s[0] > 0:
        raise DecompositionError("h2a vanishes; no modes to extract")
    n = int(np.count_nonzero(s >= s[0] * truncation))

    b_side = svd_modes(KernelMatrix(state.h2b.T, gb, ga))
    n = min(n, len(b_side.singular_values))
    psi_a, phi_b = a_side.left[:n], np.conj(a_side.right[:n])
    psi_b, phi_a = b_side.left[:n], np.conj(b_side.right[:n])

    perm = _pair_b_side(state, psi_a, phi_a, s[:n])
    psi_b, phi_a = psi_b[perm], phi_a[perm]

    rG = np.arcsinh(s[:n])
    G = float(np.sqrt(np.sum(rG ** 2)))
    return ModeStructure(G, rG / G, psi_a, psi_b, phi_a, phi_b, s.copy(), n, ga, gb)


@dataclass(frozen=True)
class AppendixReport:
    """Per-mode deviations from the shared-mode relations, for modes above the floor."""

    modes_evaluated: int
    modes_skipped: int
    cosh_sinh_defect_a: np.ndarray
    cosh_sinh_defect_b: np.ndarray
    psi_overlap_a: np.ndarray
    psi_overlap_b: np.ndarray
    phi_overlap_a: np.ndarray
    phi_overlap_b: np.ndarray
    gain_mismatch: np.ndarray
    floor: float = APPENDIX_FLOOR

    def worst_defect(self) -> float:
        d = np.concatenate([np.abs(self.cosh_sinh_defect_a), np.abs(self.cosh_sinh_defect_b)])
        return float(d.max()) if d.size else 0.0

    def worst_overlap(self) -> float:
        o = np.concatenate([self.psi_overlap_a, self.psi_overlap_b, self.phi_overlap_a, self.phi_overlap_b])
        return float(o.min()) if o.size else 1.0

    def passes(self, defect_tol: float = 1e-5, overlap_tol: float = 1e-5) -> bool:
        return self.worst_defect() < defect_tol and self.worst_overlap() > 1 - overlap_tol

    def to_dict(self) -> dict:
        return {
            "floor": self.floor,
            "modes_evaluated": self.modes_evaluated,
            "modes_skipped": self.modes_skipped,
            "cosh_sinh_defect_a": self.cosh_sinh_defect_a.tolist(),
            "cosh_sinh_defect_b": self.cosh_sinh_defect_b.tolist(),
            "psi_overlap_a": self.psi_overlap_a.tolist(),
            "psi_overlap_b": self.psi_overlap_b.tolist(),
            "phi_overlap_a": self.phi_overlap_a.tolist(),
            "phi_overlap_b": self.phi_overlap_b.tolist(),
            "gain_mismatch": self.gain_mismatch.tolist(),
        }


def _with_identity(h_bar: np.ndarray, grid: FrequencyGrid) -> KernelMatrix:
    # the delta function samples to diag(1/w); its symmetrized image is exactly I
    return KernelMatrix(h_bar + np.diag(1.0 / grid.weights), grid, grid)


def _overlaps(grid: FrequencyGrid, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    return np.abs(np.sum(grid.weights * np.conj(u) * v, axis=1))


def verify_appendix(state: TransferState, modes: ModeStructure, floor: float = APPENDIX_FLOOR) -> AppendixReport:
    """Decompose all four kernels independently and compare their modes."""
    ga, gb = state.grid_a, state.grid_b
    h1a = svd_modes(_with_identity(state.h1a_bar, ga))
    h1b = svd_modes(_with_identity(state.h1b_bar, gb))
    h2a = svd_modes(state.kernel("h2a"))
    h2b = svd_modes(KernelMatrix(state.h2b.T, gb, ga))

    n = int(np.count_nonzero(modes.squeezing >= floor))
    n = min(n, len(h2b.singular_values), len(h1a.singular_values), len(h1b.singular_values))
    ca, cb = h1a.singular_values[:n], h1b.singular_values[:n]
    sa, sb = h2a.singular_values[:n], h2b.singular_values[:n]
    return AppendixReport(
        modes_evaluated=n,
        modes_skipped=modes.n_modes_kept - n,
        cosh_sinh_defect_a=(ca - sa) * (ca + sa) - 1.0,
        cosh_sinh_defect_b=(cb - sb) * (cb + sb) - 1.0,
        psi_overlap_a=_overlaps(ga, h1a.left[:n], h2a.left[:n]),
        psi_overlap_b=_overlaps(gb, h1b.left[:n], h2b.left[:n]),
        phi_overlap_a=_overlaps(ga, h1a.right[:n], np.conj(h2b.right[:n])),
        phi_overlap_b=_overlaps(gb, h1b.right[:n], np.conj(h2a.right[:n])),
        gain_mismatch=np.abs(np.arcsinh(sa) - np.arcsinh(sb)),
        floor=floor,
    )
