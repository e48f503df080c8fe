"""Finite-dimensional quotient-space models of adjoint shift tuples.

For a reproducing kernel entered as a Gram expression K(z, zbar) and a base
point z0, the functions vanishing to order n at z0 have as orthocomplement
the span of the kernel jets; in that jet basis the compressed adjoint shifts
take the rigid form

    S_j^* |_quotient  =  z0_j * Id + P_j,

where P_j is the j-th derivative-lowering generator on the multi-index jet
basis.  Unitary equivalence of two such models is decided twice and
cross-checked: once through the contact machinery on the induced bundles and
once directly on the whitened shift tuples.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .contact import (
    classify,
    combine_verdicts,
    jet_gram,
    pointwise_normalized_decide,
)
from .jetcore import table_size
from .kernelexpr import BundleSpec
from .pascal import multi_pascal_generator
from .simeq import unitary_intertwiner

__all__ = ["QuotientModel", "quotient_model", "unitary_equiv_check", "EquivReport"]

_MAX_DIRECT_DIM = 64


@dataclass(frozen=True)
class QuotientModel:
    """Jet-basis model of the quotient space at a point.

    gram is the jet Gram of the kernel derivatives; shifts[j-1] represents the
    compressed adjoint of the j-th shift in the same basis.
    """

    kernel: BundleSpec
    center: tuple
    order: int
    gram: np.ndarray
    shifts: tuple

    @property
    def dim(self) -> int:
        return self.kernel.dimension

    @property
    def rank(self) -> int:
        return self.kernel.rank

    @property
    def size(self) -> int:
        return self.gram.shape[0]


def quotient_model(kernel: BundleSpec, center, order: int) -> QuotientModel:
    """Build the quotient model of the kernel at `center` to jet order `order`."""
    center = tuple(complex(c) for c in center)
    h = kernel.gram_jet(center, order, order)
    gram = jet_gram(h, order)
    eigs = np.linalg.eigvalsh(gram)
    if eigs.min() <= 0.0:
        raise ValueError(
            f"kernel {kernel.label!r} is not positive definite at {center} "
            f"(min jet-Gram eigenvalue {eigs.min():.2e})"
        )
    size = table_size(kernel.dimension, order) * kernel.rank
    shifts = tuple(
        center[j - 1] * np.eye(size)
        + multi_pascal_generator(kernel.dimension, order, j, kernel.rank)
        for j in range(1, kernel.dimension + 1)
    )
    return QuotientModel(kernel, center, order, gram, shifts)


@dataclass
class EquivReport:
    equivalent: bool
    contact_verdict: str
    direct_verdict: str
    agreement: bool
    residuals: dict

    def as_dict(self) -> dict:
        return {
            "equivalent": self.equivalent,
            "contact_verdict": self.contact_verdict,
            "direct_verdict": self.direct_verdict,
            "agreement": self.agreement,
            "residuals": {k: float(v) for k, v in sorted(self.residuals.items())},
        }


def direct_equiv_check(a: QuotientModel, b: QuotientModel, tol: float,
                       seed: int = 0) -> tuple[str, float]:
    """Whiten both Grams and search for a unitary intertwining the shift
    tuples; returns (verdict, residual)."""
    if a.size > _MAX_DIRECT_DIM or b.size > _MAX_DIRECT_DIM:
        raise ValueError(f"direct check limited to dimension {_MAX_DIRECT_DIM}")
    la = np.linalg.cholesky(a.gram)
    lb = np.linalg.cholesky(b.gram)
    lai, lbi = np.linalg.inv(la), np.linalg.inv(lb)
    whitened_a = [lai @ s @ la for s in a.shifts]
    whitened_b = [lbi @ s @ lb for s in b.shifts]
    _, resid = unitary_intertwiner(whitened_a, whitened_b, seed=seed)
    return classify(resid, tol), resid


def unitary_equiv_check(a: QuotientModel, b: QuotientModel, tol: float = 1e-8,
                        seed: int = 0) -> EquivReport:
    """Two independent verdicts on unitary equivalence of the quotient models,
    with an agreement flag."""
    if (a.dim, a.rank, a.order) != (b.dim, b.rank, b.order):
        raise ValueError("models differ in dimension, rank or jet order")
    if a.center != b.center:
        raise ValueError("models sit at different base points")

    n = a.order
    ha = a.kernel.gram_jet(a.center, n + 1, n + 1)
    hb = b.kernel.gram_jet(b.center, n + 1, n + 1)
    contact_verdict, contact_res = pointwise_normalized_decide(ha, hb, n, tol, seed)
    direct_verdict, direct_res = direct_equiv_check(a, b, tol, seed)

    residuals = dict(contact_res)
    residuals["shift-intertwiner"] = direct_res
    verdict = combine_verdicts([contact_verdict, direct_verdict])
    return EquivReport(
        equivalent=(verdict == "verified"),
        contact_verdict=contact_verdict,
        direct_verdict=direct_verdict,
        agreement=contact_verdict == direct_verdict,
        residuals=residuals,
    )
