"""Simultaneous unitary similarity of matrix tuples.

Decides whether a unitary U exists with A_k U = U B_k for all k, by computing
the nullspace of the stacked Sylvester system and extracting a unitary from
the polar factor of an invertible intertwiner.  For *-closed families (the
caller passes adjoint pairs along, or the family is already closed under
conjugate transpose in the matching order) the polar factor of any invertible
intertwiner is itself an intertwiner, so a small number of randomized
combinations decides the question at these sizes.
"""

from __future__ import annotations

import numpy as np

__all__ = ["unitary_intertwiner"]


def _polar_unitary(X: np.ndarray) -> np.ndarray:
    u, _, vh = np.linalg.svd(X)
    return u @ vh


def _residual(U, pairs, scale) -> float:
    worst = 0.0
    for a, b in pairs:
        worst = max(worst, float(np.max(np.abs(a @ U - U @ b))))
    return worst / scale


def unitary_intertwiner(
    mats_a, mats_b, seed: int = 0, tries: int = 6, null_tol: float = 1e-10
):
    """Best unitary U for the system {A_k U = U B_k} and its residual.

    Returns (U, residual); the residual is relative to the matrix scale.  The
    adjoint equations A_k^* U = U B_k^* are appended automatically so that the
    intertwiner space is a *-bimodule and polar decomposition stays inside it.
    """
    pairs = [(np.asarray(a, dtype=np.complex128), np.asarray(b, dtype=np.complex128))
             for a, b in zip(mats_a, mats_b)]
    pairs += [(np.conj(a.T), np.conj(b.T)) for a, b in pairs]
    size = pairs[0][0].shape[0]
    scale = 1.0 + max(float(np.max(np.abs(a))) + float(np.max(np.abs(b)))
                      for a, b in pairs)

    eye = np.eye(size)
    rows = [np.kron(a, eye) - np.kron(eye, b.T) for a, b in pairs]
    system = np.vstack(rows) / scale
    _, svals, vh = np.linalg.svd(system, full_matrices=False)
    svals = np.concatenate([svals, np.zeros(vh.shape[0] - len(svals))])
    null_vectors = [vh[k].conj().reshape(size, size)
                    for k in range(vh.shape[0]) if svals[k] <= null_tol]

    candidates = []
    if null_vectors:
        candidates.extend(null_vectors)
        rng = np.random.default_rng(seed)
        basis = np.stack(null_vectors)
        for _ in range(tries):
            w = rng.standard_normal(len(null_vectors)) + 1j * rng.standard_normal(
                len(null_vectors)
            )
            candidates.append(np.tensordot(w, basis, axes=1))
    else:
        # no intertwiner subspace: report the least-violating unitary
        candidates.append(vh[-1].conj().reshape(size, size))

    best_u, best_r = None, np.inf
    for x in candidates:
        u = _polar_unitary(x)
        r = _residual(u, pairs, scale)
        if r < best_r:
            best_u, best_r = u, r
    return best_u, best_r
