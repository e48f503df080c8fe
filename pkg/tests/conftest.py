"""Shared construction helpers for the test suite."""

from __future__ import annotations

import numpy as np
import pytest

from jetcontact.jetcore import HermJet, table_size
from jetcontact.kernelexpr import Add, Mul, Neg, conjugate_expr, parse_kernel


def random_herm_jet(dim, rank, holo_order, anti_order, rng, scale=0.2):
    """Random polynomial Gram jet: Hermitian-symmetric with c00 near I."""
    big = max(holo_order, anti_order)
    size = table_size(dim, big)
    c = (rng.standard_normal((size, size, rank, rank))
         + 1j * rng.standard_normal((size, size, rank, rank))) * scale
    jet = HermJet((0.0,) * dim, big, big, rank, c)
    jet = (jet + jet.adjoint()).scale(0.5)
    cc = np.array(jet.coeffs)
    cc[0, 0] = np.eye(rank) + 0.05 * (cc[0, 0] + np.conj(cc[0, 0].T))
    return HermJet((0.0,) * dim, big, big, rank, cc).truncate(holo_order, anti_order)


def random_holo_jet(dim, rank, order, rng, scale=0.3):
    """Random holomorphic jet with a well-conditioned constant term."""
    from jetcontact.jetcore import HoloJet

    na = table_size(dim, order)
    c = (rng.standard_normal((na, rank, rank))
         + 1j * rng.standard_normal((na, rank, rank))) * scale
    c[0] = np.eye(rank) + 0.2 * c[0]
    return HoloJet((0.0,) * dim, order, rank, c)


# -- expression-level matrix algebra for building verified pairs ------------


def expr_sum(terms):
    out = terms[0]
    for t in terms[1:]:
        out = Add(out, t)
    return out


def parse_grid(rows):
    return [[parse_kernel(e) if isinstance(e, str) else e for e in row] for row in rows]


def expr_matmul(a, b):
    a, b = parse_grid(a), parse_grid(b)
    size = len(a)
    return [
        [expr_sum([Mul(a[i][k], b[k][j]) for k in range(size)]) for j in range(size)]
        for i in range(size)
    ]


def expr_conj_transpose(a):
    a = parse_grid(a)
    size = len(a)
    return [[conjugate_expr(a[j][i]) for j in range(size)] for i in range(size)]


def conjugated_gram(h_entries, a_inv_entries):
    """Entries of A^-1 H (A^-1)^* for expression grids."""
    return expr_matmul(expr_matmul(a_inv_entries, h_entries), expr_conj_transpose(a_inv_entries))


def unitriangular_pair(corner: str):
    """A = [[1, corner], [0, 1]] and its inverse, as expression grids."""
    a = parse_grid([["1", corner], ["0", "1"]])
    a_inv = [[a[0][0], Neg(a[0][1])], [a[1][0], a[1][1]]]
    return a, a_inv


PAIR_GRAMS_M2 = [
    # positive-definite rank-2 Gram grids on a neighbourhood of the test grid
    [
        ["exp(z1*zb1 + z2*zb2)", "0.2*z1*zb2"],
        ["0.2*z2*zb1", "pow(1 - 0.25*(z1*zb1 + z2*zb2), -2)"],
    ],
    [
        ["pow(1 - 0.5*z1*zb1 - 0.5*z2*zb2, -1)", "0.1*(z1 + z2)*zb2"],
        ["0.1*z2*(zb1 + zb2)", "exp(0.5*z1*zb1 + z2*zb2) + 0.3*z1*z2*zb1*zb2"],
    ],
]

PAIR_CORNERS_M2 = [
    "0.3*z1 + 0.1*z2 + 0.2*z1*z2",
    "0.25*z2 - 0.15*z1*z1",
    "0.2*z1 - 0.1*z2 + 0.05*z2*z2",
    "0.4*z1*z2 + 0.1*z1",
    "0.35*z2 + 0.2*z1*z1*z2",
]

SCALAR_GRAMS_M2 = [
    "exp(z1*zb1 + z2*zb2)",
    "pow(1 - 0.5*z1*zb1 - 0.4*z2*zb2, -1)",
    "pow(1 - 0.3*(z1*zb1 + z2*zb2), -2)",
    "exp(0.7*z1*zb1 + 0.2*(z1*zb2 + z2*zb1) + 0.8*z2*zb2)",
    "exp(z1*zb1) * pow(1 - 0.4*z2*zb2, -1)",
]

SCALAR_FACTORS_M2 = [
    "exp(0.3*z1 + 0.2*z2)",
    "1 + 0.2*z1 + 0.1*z2*z2",
    "exp(0.1*z1*z2)",
    "1 + 0.15*z1*z2 - 0.1*z2",
    "exp(-0.2*z2 + 0.1*z1)",
]


def constructed_scalar_pair(gram: str, factor: str):
    """Rank-1 pair (H, Ht) with Ht = |factor|^-2 * H, plus the factor as the
    corner candidate (so H = factor * Ht * conj(factor))."""
    h = parse_grid([[gram]])
    inv = parse_kernel(f"pow({factor}, -1)")
    ht = [[Mul(Mul(inv, conjugate_expr(inv)), h[0][0])]]
    return h, ht, [[parse_kernel(factor)]]


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
