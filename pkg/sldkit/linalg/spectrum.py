from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from sldkit.errors import SolverError
from sldkit.linalg.density import ComplexMatrix, DensityMatrix, dagger, frozen

DEFAULT_RANK_TOL = 1e-10


class EigenFailure(SolverError):
    pass


class EmptySupport(SolverError):
    pass


@dataclass(frozen=True, eq=False)
class Spectrum:
    """Eigen-decomposition of a density matrix, eigenvalues in descending order.

    Columns of ``eigenvectors`` are the eigenvectors. The first ``support_rank``
    columns span the support of the state.
    """

    eigenvalues: NDArray[np.float64]
    eigenvectors: ComplexMatrix
    support_rank: int
    support_projector: ComplexMatrix
    rank_tol: float = DEFAULT_RANK_TOL

    @property
    def dim(self) -> int:
        return int(self.eigenvalues.shape[0])

    @property
    def is_full_rank(self) -> bool:
        return self.support_rank == self.dim

    @property
    def kernel_projector(self) -> ComplexMatrix:
        return np.eye(self.dim, dtype=np.complex128) - self.support_projector

    def reconstruct(self) -> ComplexMatrix:
        v = self.eigenvectors
        return (v * self.eigenvalues) @ dagger(v)

    def to_eigenbasis(self, m: ComplexMatrix) -> ComplexMatrix:
        return dagger(self.eigenvectors) @ m @ self.eigenvectors

    def from_eigenbasis(self, m: ComplexMatrix) -> ComplexMatrix:
        return self.eigenvectors @ m @ dagger(self.eigenvectors)


def spectral_decompose(rho: DensityMatrix, rank_tol: float = DEFAULT_RANK_TOL) -> Spectrum:
    try:
        values, vectors = np.linalg.eigh(rho.mat)
    except np.linalg.LinAlgError as exc:
        raise EigenFailure(f"Hermitian eigensolver did not converge: {exc}") from exc

    values = values[::-1].copy()
    vectors = np.ascontiguousarray(vectors[:, ::-1])
    # (-psd_tol, rank_tol] is round-off around an exact zero.
    values[values <= rank_tol] = 0.0

    support_rank = int(np.count_nonzero(values > rank_tol))
    support = vectors[:, :support_rank]
    projector = support @ dagger(support)
    return Spectrum(
        eigenvalues=frozen(values),
        eigenvectors=frozen(vectors),
        support_rank=support_rank,
        support_projector=frozen(projector),
        rank_tol=rank_tol,
    )


def support_inverse(spectrum: Spectrum) -> ComplexMatrix:
    """Inverse of the state restricted to its support, zero on the kernel."""
    m = spectrum.support_rank
    if m == 0:
        raise EmptySupport("Spectrum has no eigenvalue above rank_tol")
    support = spectrum.eigenvectors[:, :m]
    return (support / spectrum.eigenvalues[:m]) @ dagger(support)


def eigenvalue_clusters(
    spectrum: Spectrum, tol: float
) -> list[tuple[float, NDArray[np.intp]]]:
    """Group support eigenvalues that agree within ``tol``; returns (mean value, indices)."""
    clusters: list[tuple[float, NDArray[np.intp]]] = []
    values = spectrum.eigenvalues[: spectrum.support_rank]
    start = 0
    for idx in range(1, len(values) + 1):
        if idx == len(values) or abs(values[idx] - values[start]) > tol:
            members = np.arange(start, idx)
            clusters.append((float(np.mean(values[members])), members))
            start = idx
    return clusters
