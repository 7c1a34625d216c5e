import logging

import numpy as np
import scipy.linalg
from scipy.sparse.linalg import ArpackNoConvergence, LinearOperator, eigsh

from data.constants import DEFAULT_REGULARIZATION_EPS
from peps.effective import LocalEigProblem
from utils.errors import SingularEnvironmentError

logger = logging.getLogger(__name__)

# whitened problems up to this size are diagonalized densely
DENSE_LIMIT = 400
LANCZOS_VECTORS = (40, 80)


def _kron_apply(vector: np.ndarray, matrix: np.ndarray, phys: int) -> np.ndarray:
    """(I_d (x) matrix) @ vector."""
    return (vector.reshape(phys, -1) @ matrix.T).ravel()


def _lowest_dense(projected: np.ndarray) -> tuple[float, np.ndarray]:
    values, vectors = scipy.linalg.eigh((projected + projected.conj().T) / 2, subset_by_index=[0, 0])
    return float(values[0]), vectors[:, 0]


def _lowest_pair(h_eff: np.ndarray, whitening: np.ndarray, phys: int, start: np.ndarray | None,
                 site: int) -> tuple[float, np.ndarray]:
    """
    Lowest eigenpair of W^dag H_eff W with W = I_d (x) whitening, in whitened coordinates.

    Small problems go to a dense solver; larger ones to Lanczos on the implicit operator, warm-started from `start`
    and retried with more Lanczos vectors before falling back to the dense solver.
    """
    kept = whitening.shape[1]
    size = phys * kept
    full = np.kron(np.eye(phys), whitening)
    if size <= DENSE_LIMIT:
        return _lowest_dense(full.conj().T @ h_eff @ full)

    def matvec(coords: np.ndarray) -> np.ndarray:
        spread = _kron_apply(coords.ravel(), whitening, phys)
        return ((h_eff @ spread).reshape(phys, -1) @ whitening.conj()).ravel()

    operator = LinearOperator((size, size), matvec=matvec, dtype=np.complex128)
    for ncv in LANCZOS_VECTORS:
        try:
            values, vectors = eigsh(operator, k=1, which='SA', v0=start, ncv=min(ncv, size - 1))
            return float(values[0]), vectors[:, 0]
        except ArpackNoConvergence:
            logger.warning(f'Site {site}: Lanczos did not converge with {ncv} vectors')
    return _lowest_dense(full.conj().T @ h_eff @ full)


def solve_local_gevp(problem: LocalEigProblem, eps: float = DEFAULT_REGULARIZATION_EPS,
                     ) -> tuple[float, np.ndarray, float]:
    """
    Smallest generalized eigenpair of H_eff A = xi N_eff A on the well-conditioned part of N_eff.

    N_eff = I_d (x) M is diagonalized through its virtual block M, directions with eigenvalue <= eps * lambda_max
    are dropped, the rest is whitened and H_eff is diagonalized in that basis. The result is mapped back to full
    coordinates and scaled so that A^dag N_eff A = 1. Solution, deviation, dropped-direction count and condition
    number are also stored on `problem`.

    Args:
        problem (LocalEigProblem): The (H_eff, N_eff) pair; a current tensor, if any, seeds the iterative solver.
        eps (float): Relative eigenvalue cutoff in (0, 1).

    Returns:
        tuple[float, np.ndarray, float]: xi_min, A_min and the deviation |xi_min - A^dag H A / A^dag N A|.

    Raises:
        SingularEnvironmentError: If N_eff is numerically zero or not finite, or no direction survives the cutoff.
    """
    h_eff = problem.h_eff
    block = problem.norm_block if problem.norm_block is not None else problem.n_eff
    if not (np.all(np.isfinite(h_eff)) and np.all(np.isfinite(block))):
        raise SingularEnvironmentError(f'Non-finite effective matrices at site {problem.site}', site=problem.site)
    phys = problem.dimension // block.shape[0]
    weights, directions = scipy.linalg.eigh(block)
    largest = weights[-1]
    if not np.isfinite(largest) or largest <= np.finfo(float).tiny:
        raise SingularEnvironmentError(f'N_eff at site {problem.site} is numerically zero '
                                       f'(largest eigenvalue {largest:.3e})', site=problem.site)

    keep = weights > eps * largest
    if not keep.any():
        raise SingularEnvironmentError(f'No N_eff direction at site {problem.site} survives the cutoff '
                                       f'eps = {eps:.3e}', site=problem.site)
    roots = np.sqrt(weights[keep])
    whitening = directions[:, keep] / roots

    start = None
    if problem.current is not None:
        start = ((problem.current.reshape(phys, -1) @ directions[:, keep].conj()) * roots).ravel()
        if not np.linalg.norm(start) > 0.0:
            start = None

    xi, coords = _lowest_pair(h_eff, whitening, phys, start, problem.site)
    vector = _kron_apply(coords, whitening, phys)
    vector = vector / np.sqrt(np.vdot(vector, _kron_apply(vector, block, phys)).real)
    deviation = abs(xi - problem.quotient(vector))

    problem.xi = xi
    problem.vector = vector
    problem.deviation = deviation
    problem.dropped_directions = phys * int(np.count_nonzero(~keep))
    problem.condition_number = float(largest / weights[keep][0])
    if problem.regularized:
        logger.debug(f'Site {problem.site}: dropped {problem.dropped_directions} of {problem.dimension} '
                     f'N_eff directions, deviation {deviation:.3e}')
    return xi, vector, deviation
