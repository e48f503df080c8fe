"""Canonical-connection geometry of a bundle given by a Gram jet.

With respect to a holomorphic frame with Gram matrix H, the canonical
(metric-compatible, holomorphy-compatible) connection has matrix
``dH * H^-1`` per holomorphic direction, the curvature components are

    K_{i jbar} = (d_i dbar_j H - d_i H * H^-1 * dbar_j H) * H^-1,

and covariant derivatives of a bundle map with representing matrix Phi are

    (Phi_{z_i})    = d_i Phi - d_i H * H^-1 * Phi + Phi * d_i H * H^-1
    (Phi_{zbar_i}) = dbar_i Phi.

Representing matrices act from the left; mixed covariant derivatives are
evaluated in the fixed order "all z_i first, then all zbar_j" (the order
matters and no symmetrization is performed).

Direction arguments are 1-based throughout, matching the z1..zm naming of
the expression grammar.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import comb

import numpy as np

from .jetcore import HermJet, HoloJet, OrderError, index_table

__all__ = [
    "MapJet",
    "CurvatureRequest",
    "connection",
    "curvature",
    "curvature_tower",
    "cov_deriv",
    "cov_deriv_mixed",
    "adjoint_map",
    "map_adjoint_jet",
    "L_tensor",
    "K1j_recursion",
    "Q_value",
    "Q_jet",
    "Q_recursion",
    "normalize_frame",
    "normalized_defect",
    "hermitian_sqrt",
]


# a bundle map travels as the jet of its representing matrix in the working
# frame; the alias marks that role at call sites
MapJet = HermJet


@dataclass(frozen=True)
class CurvatureRequest:
    """A covariant-derivative order pattern for one curvature component:
    r holomorphic steps in z_i, then t conjugate steps in zbar_j."""

    i: int
    j: int
    r: int = 0
    t: int = 0

    def __post_init__(self):
        if self.r < 0 or self.t < 0:
            raise ValueError("derivative orders must be non-negative")


def curvature_tower(H: HermJet, request: CurvatureRequest) -> HermJet:
    """Jet of (K_{i jbar})_{z_i^r zbar_j^t} per the request's order pattern."""
    k = curvature(H, request.i, request.j)
    return cov_deriv_mixed(k, H, request.i, request.r, request.j, request.t)


def _e(dim: int, i: int, times: int = 1) -> tuple:
    """Multi-index times * e_i for a 1-based direction i."""
    return tuple(times if k == i - 1 else 0 for k in range(dim))


def _zero(dim: int) -> tuple:
    return (0,) * dim


def connection(H: HermJet, i: int) -> HermJet:
    """Jet of the connection matrix in direction z_i: d_i H * H^-1."""
    return H.deriv(i - 1) * H.inv()


def curvature(H: HermJet, i: int, j: int) -> HermJet:
    """Jet of the curvature component K_{i jbar} = dbar_j(d_i H * H^-1)."""
    if H.holo_order < 1 or H.anti_order < 1:
        raise OrderError("curvature needs jet orders >= (1, 1)")
    return connection(H, i).deriv(j - 1, conjugate=True)


def cov_deriv(Phi: HermJet, H: HermJet, direction: int, conjugate: bool = False) -> HermJet:
    """Covariant derivative of the bundle map represented by Phi."""
    if conjugate:
        return Phi.deriv(direction - 1, conjugate=True)
    conn = connection(H, direction)
    return Phi.deriv(direction - 1) - conn * Phi + Phi * conn


def cov_deriv_mixed(Phi: HermJet, H: HermJet, i: int, r: int, j: int, t: int) -> HermJet:
    """(Phi)_{z_i^r zbar_j^t}: r holomorphic steps first, then t conjugate steps."""
    out = Phi
    for _ in range(r):
        out = cov_deriv(out, H, i)
    for _ in range(t):
        out = cov_deriv(out, H, j, conjugate=True)
    return out


def adjoint_map(M: np.ndarray, H_value: np.ndarray) -> np.ndarray:
    """Representing matrix of the adjoint bundle map: H M^* H^-1."""
    return H_value @ np.conj(M.T) @ np.linalg.inv(H_value)


def map_adjoint_jet(Phi: HermJet, H: HermJet) -> HermJet:
    """Jet of z -> H(z) Phi(z)^* H(z)^-1, the adjoint map's matrix."""
    return H * Phi.adjoint() * H.inv()


def L_tensor(H: HermJet, j: int, l: int) -> np.ndarray:
    """Value at the center of
    (d_{z1}^l dbar_j H - d_{z1}^l H * H^-1 * dbar_j H) * H^-1."""
    dim = H.dim
    h0inv = np.linalg.inv(H.value())
    mixed = H.extract(_e(dim, 1, l), _e(dim, j))
    pure = H.extract(_e(dim, 1, l), _zero(dim))
    bar = H.extract(_zero(dim), _e(dim, j))
    return (mixed - pure @ h0inv @ bar) @ h0inv


def K1j_recursion(H: HermJet, j: int, n: int) -> np.ndarray:
    """Value of the matrix representing (K_{1 jbar})_{z_1^(n-1)} at the center,
    by the recursion J_1 = L_j^1, J_n = L_j^n - sum binom(n,i) d^i H H^-1 J_{n-i}."""
    if n < 1:
        raise ValueError("recursion order must be >= 1")
    dim = H.dim
    h0inv = np.linalg.inv(H.value())
    g = [None] + [
        H.extract(_e(dim, 1, i), _zero(dim)) @ h0inv for i in range(1, n)
    ]
    js = [L_tensor(H, j, 1)]
    for k in range(2, n + 1):
        acc = L_tensor(H, j, k)
        for i in range(1, k):
            acc = acc - comb(k, i) * (g[i] @ js[k - i - 1])
        js.append(acc)
    return js[-1]


def Q_value(H: HermJet, j: int, n: int = 1) -> np.ndarray:
    """Value of (dbar_{z1}^n d_j H - d_j H * H^-1 * dbar_{z1}^n H) * H^-1."""
    dim = H.dim
    h0inv = np.linalg.inv(H.value())
    mixed = H.extract(_e(dim, j), _e(dim, 1, n))
    holo = H.extract(_e(dim, j), _zero(dim))
    anti = H.extract(_zero(dim), _e(dim, 1, n))
    return (mixed - holo @ h0inv @ anti) @ h0inv


def Q_jet(H: HermJet, j: int) -> HermJet:
    """Jet of dbar_{z1}(d_j H * H^-1), the matrix of the (j, 1bar) curvature."""
    return connection(H, j).deriv(0, conjugate=True)


def Q_recursion(H: HermJet, j: int, n: int) -> np.ndarray:
    """Value of dbar_{z1}^n applied to dbar_{z1}(d_j H * H^-1) at the center,
    computed from lower orders:

        dbar^n Q = Q^(n+1) - sum_{i=1}^n binom(n+1, i) (dbar^{n-i} Q) dbar^i H H^-1
    """
    if n < 0:
        raise ValueError("derivative order must be >= 0")
    dim = H.dim
    h0inv = np.linalg.inv(H.value())
    hbar = [None] + [
        H.extract(_zero(dim), _e(dim, 1, i)) @ h0inv for i in range(1, n + 1)
    ]
    qs = [Q_value(H, j, 1)]
    for k in range(1, n + 1):
        acc = Q_value(H, j, k + 1)
        for i in range(1, k + 1):
            acc = acc - comb(k + 1, i) * (qs[k - i] @ hbar[i])
        qs.append(acc)
    return qs[n]


def hermitian_sqrt(M: np.ndarray) -> np.ndarray:
    """Positive square root of a Hermitian positive-definite matrix."""
    w, v = np.linalg.eigh(M)
    if w.min() <= 0.0:
        raise ValueError(f"matrix not positive definite (min eigenvalue {w.min():.2e})")
    return (v * np.sqrt(w)) @ np.conj(v.T)


def normalize_frame(H: HermJet, n: int) -> tuple[HoloJet, HermJet]:
    """Holomorphic frame change A with A(z0) H A(z0)^* normalized at the center.

    The normalized Gram satisfies Hnorm(z0) = I and vanishing pure-holomorphic
    derivatives d^a Hnorm(z0) = 0 for 1 <= |a| <= n (conjugates vanish by
    symmetry).  A is built as H(z0)^{1/2} * [H(z, zbar frozen)]^{-1}; the
    post-condition is verified, not assumed.
    """
    if H.holo_order < n or H.anti_order < n:
        raise OrderError(f"normalization to order {n} needs jet orders >= ({n},{n})")
    root = hermitian_sqrt(H.value())
    frozen = H.holo_part()  # H(z, zbar0) as a holomorphic jet
    A = HoloJet.constant(root, H.center, frozen.order) * frozen.inv()
    Hnorm = A.as_herm(H.anti_order) * H * A.adjoint_as_herm(H.holo_order)
    defect = normalized_defect(Hnorm, n)
    scale = 1.0 + float(np.max(np.abs(H.coeffs)))
    if defect > 1e-8 * scale:
        raise ArithmeticError(
            f"frame normalization failed (defect {defect:.2e}); "
            "Gram jet is likely ill-conditioned"
        )
    return A, Hnorm


def normalized_defect(Hnorm: HermJet, n: int) -> float:
    """Max violation of the normalized-frame conditions up to order n."""
    worst = float(np.max(np.abs(Hnorm.value() - np.eye(Hnorm.rank))))
    for alpha in index_table(Hnorm.dim, min(n, Hnorm.holo_order)):
        if 0 < sum(alpha):
            worst = max(worst, float(np.max(np.abs(Hnorm.extract(alpha)))))
    return worst
