"""Deciding and verifying order-n contact between Hermitian bundles.

Two settings are covered, both driven by Gram jets:

* point-wise contact -- the n-jet fibers of the two bundles admit a linear
  isometry intertwining the jet-lowering (Pascal) maps.  With a candidate
  frame change A this is the certificate check
  ``jet_gram(H) = Lambda_A jet_gram(Ht) Lambda_A^*``; without a candidate the
  decision runs in normalized frames, where the intertwiner must be block
  diagonal with a unitary corner.

* contact along the coordinate slice Z = {z1 = 0} -- a holomorphically
  varying isometry of transverse z1-jets.  Verification runs two independent
  routes at every grid point and compares them:

  - analytic: extend the corner map A0 through the first-column recursion,
    check the full transverse block-Gram isometry, and check the holomorphy
    conditions that glue the extension along Z;
  - geometric: check that A0 intertwines the transverse curvature and its
    covariant derivatives (orders r, t <= n-1) and the mixed components
    (K_{1 jbar})_{z1^r} for the tangential directions j >= 2.

Verdicts are grid-based: "verified" means every residual is below tolerance
at every requested point, "refuted" means some residual exceeds 10x the
tolerance, anything else is "inconclusive".
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import comb

import numpy as np

from .geometry import (
    K1j_recursion,
    L_tensor,
    cov_deriv_mixed,
    curvature,
    normalize_frame,
)
from .jetcore import (
    HermJet,
    HoloJet,
    index_positions,
    index_table,
    multi_index_factorial,
)
from .kernelexpr import BundleSpec, eval_holo_jet, parse_kernel
from .pascal import multi_lambda_from_jet, pascal_expand, pascal_from_column
from .simeq import unitary_intertwiner

__all__ = [
    "ContactProblem",
    "PointReport",
    "ContactReport",
    "jet_gram",
    "pointwise_verify",
    "pointwise_rank1_decide",
    "pointwise_normalized_decide",
    "extend_A_sequence",
    "extend_A_sequence_jets",
    "holomorphy_conditions",
    "geometric_conditions",
    "alongZ_check",
    "check_problem",
    "VERIFIED",
    "REFUTED",
    "INCONCLUSIVE",
]

VERIFIED = "verified"
REFUTED = "refuted"
INCONCLUSIVE = "inconclusive"


def _e1(dim: int, times: int) -> tuple:
    return tuple(times if k == 0 else 0 for k in range(dim))


def classify(residual: float, tol: float) -> str:
    if residual < tol:
        return VERIFIED
    if residual > 10.0 * tol:
        return REFUTED
    return INCONCLUSIVE


def combine_verdicts(verdicts) -> str:
    verdicts = list(verdicts)
    if any(v == REFUTED for v in verdicts):
        return REFUTED
    if any(v == INCONCLUSIVE for v in verdicts):
        return INCONCLUSIVE
    return VERIFIED


def _rel(diff: np.ndarray, *refs) -> float:
    scale = 1.0 + max((float(np.max(np.abs(r))) for r in refs), default=0.0)
    return float(np.max(np.abs(diff))) / scale


# ---------------------------------------------------------------------------
# jet Gram matrices


def jet_gram(H: HermJet, n: int, variables: str = "all") -> np.ndarray:
    """Block Gram matrix of the n-jet frame.

    variables="all": rows/columns run over all multi-indices |I| <= n in the
    fixed graded order (z1-major within a degree); variables="z1": only
    transverse derivatives 0..n.  Block (I, J) is d^I dbar^J H at the center.
    """
    l = H.rank
    if variables == "z1":
        blocks = [_e1(H.dim, k) for k in range(n + 1)]
    elif variables == "all":
        blocks = list(index_table(H.dim, n))
    else:
        raise ValueError(f"unknown variable selection {variables!r}")
    size = len(blocks)
    out = np.empty((size * l, size * l), dtype=np.complex128)
    for p, alpha in enumerate(blocks):
        for q, beta in enumerate(blocks):
            out[p * l : (p + 1) * l, q * l : (q + 1) * l] = H.extract(alpha, beta)
    return out


# ---------------------------------------------------------------------------
# point-wise checks


def pointwise_verify(
    H: HermJet, Ht: HermJet, candidate: HoloJet, n: int, tol: float
) -> tuple[str, dict]:
    """Certificate check: the candidate's jet transition matrix is an isometry
    of the full multi-index jet Grams."""
    lam = multi_lambda_from_jet(candidate.truncate(n), n)
    g = jet_gram(H, n)
    gt = jet_gram(Ht, n)
    resid = _rel(g - lam @ gt @ np.conj(lam.T), g, gt)
    residuals = {f"jet-gram-isometry(n={n})": resid}
    return classify(resid, tol), residuals


def pointwise_rank1_decide(H: HermJet, Ht: HermJet, n: int, tol: float) -> tuple[str, dict]:
    """Candidate-free decision for line bundles: normalize both frames at the
    center; contact holds iff the normalized jet Grams agree entrywise (the
    remaining scalar freedom is a phase, which cancels)."""
    if H.rank != 1 or Ht.rank != 1:
        raise ValueError("rank-1 decision procedure called on higher rank")
    _, hn = normalize_frame(H, n)
    _, htn = normalize_frame(Ht, n)
    g = jet_gram(hn, n)
    gt = jet_gram(htn, n)
    resid = _rel(g - gt, g, gt)
    return classify(resid, tol), {f"normalized-jet-gram(n={n})": resid}


def pointwise_normalized_decide(
    H: HermJet, Ht: HermJet, n: int, tol: float, seed: int = 0
) -> tuple[str, dict]:
    """Candidate-free decision for any rank: in normalized frames a jet
    isometry must be block diagonal with unitary corner A0, so contact holds
    iff some unitary intertwines all normalized jet-Gram blocks."""
    if H.rank == 1:
        return pointwise_rank1_decide(H, Ht, n, tol)
    _, hn = normalize_frame(H, n)
    _, htn = normalize_frame(Ht, n)
    blocks = list(index_table(H.dim, n))
    mats_a, mats_b = [], []
    for alpha in blocks:
        for beta in blocks:
            mats_a.append(hn.extract(alpha, beta))
            mats_b.append(htn.extract(alpha, beta))
    _, resid = unitary_intertwiner(mats_a, mats_b, seed=seed)
    return classify(resid, tol), {f"normalized-block-similarity(n={n})": resid}


# ---------------------------------------------------------------------------
# the transverse extension along Z


def extend_A_sequence(H: HermJet, Ht: HermJet, A0: np.ndarray, n: int) -> list[np.ndarray]:
    """Values A_1..A_n of the unique candidate extension of the corner map A0:

        A_l = d^l H H^-1 A0 - sum_{i=1}^l binom(l,i) A_{l-i} d^i Ht Ht^-1

    (all transverse z1-derivatives, evaluated at the common center)."""
    dim = H.dim
    h0inv = np.linalg.inv(H.value())
    ht0inv = np.linalg.inv(Ht.value())
    dh = [H.extract(_e1(dim, i)) @ h0inv for i in range(n + 1)]
    dht = [Ht.extract(_e1(dim, i)) @ ht0inv for i in range(n + 1)]
    seq = [np.asarray(A0, dtype=np.complex128)]
    for l in range(1, n + 1):
        acc = dh[l] @ seq[0]
        for i in range(1, l + 1):
            acc = acc - comb(l, i) * (seq[l - i] @ dht[i])
        seq.append(acc)
    return seq[1:]


def extend_A_sequence_jets(
    H: HermJet, Ht: HermJet, A0: HermJet, n: int
) -> list[HermJet]:
    """Tangential jets (along Z) of A_1..A_n from the same recursion; inputs
    are restricted to the slice so the arithmetic happens in functions on Z."""
    hz = H.freeze_variable(0)
    htz = Ht.freeze_variable(0)
    hzinv = hz.inv()
    htzinv = htz.inv()

    def transverse(jet, i):
        for _ in range(i):
            jet = jet.deriv(0)
        return jet.freeze_variable(0)

    dh = [None] + [transverse(H, i) * hzinv for i in range(1, n + 1)]
    dht = [None] + [transverse(Ht, i) * htzinv for i in range(1, n + 1)]
    seq = [A0.freeze_variable(0)]
    for l in range(1, n + 1):
        acc = dh[l] * seq[0]
        for i in range(1, l + 1):
            acc = acc - (seq[l - i] * dht[i]).scale(comb(l, i))
        seq.append(acc)
    return seq[1:]


def holomorphy_conditions(
    H: HermJet, Ht: HermJet, A_seq: list[np.ndarray], n: int
) -> dict:
    """Residuals of the gluing conditions that make the extension holomorphic:

        L_j^l = sum_{i=1}^l binom(l,i) A_{l-i} Lt_j^i A0^-1

    for 1 <= l <= n and every tangential direction 2 <= j <= m.  A_seq is
    (A0, A1, ..., An)."""
    a0inv = np.linalg.inv(A_seq[0])
    out = {}
    for j in range(2, H.dim + 1):
        lt = [None] + [L_tensor(Ht, j, i) for i in range(1, n + 1)]
        for l in range(1, n + 1):
            lhs = L_tensor(H, j, l)
            rhs = np.zeros_like(lhs)
            for i in range(1, l + 1):
                rhs = rhs + comb(l, i) * (A_seq[l - i] @ lt[i] @ a0inv)
            out[f"holomorphy(l={l},j={j})"] = _rel(lhs - rhs, lhs, rhs)
    return out


def geometric_conditions(H: HermJet, Ht: HermJet, A0: np.ndarray, n: int) -> dict:
    """Residuals of the curvature conditions intertwined by the corner map:

    * isometry of A0 itself: H = A0 Ht A0^*;
    * transverse tower: (K_{1 1bar})_{z1^r zbar1^t} A0 = A0 (Kt_{1 1bar})_{...}
      for r, t <= n-1;
    * mixed tower: (K_{1 jbar})_{z1^r} A0 = A0 (Kt_{1 jbar})_{z1^r} for
      r <= n-1 and tangential j >= 2.
    """
    A0 = np.asarray(A0, dtype=np.complex128)
    out = {}
    h0, ht0 = H.value(), Ht.value()
    out["isometry"] = _rel(h0 - A0 @ ht0 @ np.conj(A0.T), h0, ht0)
    k = curvature(H, 1, 1)
    kt = curvature(Ht, 1, 1)
    for r in range(n):
        kr = cov_deriv_mixed(k, H, 1, r, 1, 0)
        ktr = cov_deriv_mixed(kt, Ht, 1, r, 1, 0)
        for t in range(n):
            lhs = cov_deriv_mixed(kr, H, 1, 0, 1, t).value()
            rhs = cov_deriv_mixed(ktr, Ht, 1, 0, 1, t).value()
            out[f"transverse-curvature(r={r},t={t})"] = _rel(
                lhs @ A0 - A0 @ rhs, lhs, rhs
            )
    for j in range(2, H.dim + 1):
        for r in range(n):
            lhs = K1j_recursion(H, j, r + 1)
            rhs = K1j_recursion(Ht, j, r + 1)
            out[f"mixed-curvature(j={j},r={r})"] = _rel(lhs @ A0 - A0 @ rhs, lhs, rhs)
    return out


def tangential_curvature_conditions(H: HermJet, Ht: HermJet, n: int = 1) -> dict:
    """Equality of the purely tangential curvature components (rank 1 only):
    a necessary condition for a holomorphic isometric corner map to exist."""
    out = {}
    for i in range(2, H.dim + 1):
        for j in range(2, H.dim + 1):
            lhs = curvature(H, i, j).value()
            rhs = curvature(Ht, i, j).value()
            out[f"tangential-curvature(i={i},j={j})"] = _rel(lhs - rhs, lhs, rhs)
    return out


# ---------------------------------------------------------------------------
# problems and reports


@dataclass(frozen=True)
class ContactProblem:
    """A contact question between two bundles at a set of points."""

    bundle_a: BundleSpec
    bundle_b: BundleSpec
    order: int
    mode: str = "pointwise"  # "pointwise" | "along-z"
    points: tuple = ((0.0,),)
    candidate: object = None  # expression grid, constant matrix, or None
    tolerance: float = 1e-8
    seed: int = 0

    def __post_init__(self):
        if self.bundle_a.dimension != self.bundle_b.dimension:
            raise ValueError("bundles live over different ambient dimensions")
        if self.bundle_a.rank != self.bundle_b.rank:
            raise ValueError("bundles have different ranks")
        if self.order < 1:
            raise ValueError("contact order must be >= 1")
        if self.mode not in ("pointwise", "along-z"):
            raise ValueError(f"unknown mode {self.mode!r}")
        object.__setattr__(
            self, "points", tuple(tuple(complex(c) for c in p) for p in self.points)
        )
        if self.mode == "along-z":
            for p in self.points:
                if abs(p[0]) > 1e-12:
                    raise ValueError(f"point {p} does not lie on the slice z1 = 0")
        object.__setattr__(self, "candidate", _normalize_candidate(self.candidate))

    @property
    def dim(self) -> int:
        return self.bundle_a.dimension

    @property
    def rank(self) -> int:
        return self.bundle_a.rank

    def candidate_jet(self, center, order: int) -> HoloJet | None:
        cand = self.candidate
        if cand is None:
            return None
        if isinstance(cand, np.ndarray):
            return HoloJet.constant(cand, center, order)
        grid = [
            [eval_holo_jet(e, center, order, self.dim) for e in row] for row in cand
        ]
        return HoloJet.from_entries(grid)


def _normalize_candidate(cand):
    if cand is None or isinstance(cand, np.ndarray):
        return cand
    if isinstance(cand, (int, float, complex)):
        return np.array([[cand]], dtype=np.complex128)
    if isinstance(cand, str):
        return [[parse_kernel(cand)]]
    return [
        [parse_kernel(e) if isinstance(e, str) else e for e in row] for row in cand
    ]


@dataclass
class PointReport:
    point: tuple
    verdict: str
    residuals: dict = field(default_factory=dict)
    route_verdicts: dict = field(default_factory=dict)
    route_agreement: bool = True

    def as_dict(self) -> dict:
        return {
            "point": [[c.real, c.imag] for c in self.point],
            "verdict": self.verdict,
            "residuals": {k: float(v) for k, v in sorted(self.residuals.items())},
            "route_verdicts": dict(sorted(self.route_verdicts.items())),
            "route_agreement": self.route_agreement,
        }


@dataclass
class ContactReport:
    mode: str
    order: int
    tolerance: float
    points: list
    verdict: str
    route_agreement: bool

    def as_dict(self) -> dict:
        return {
            "mode": self.mode,
            "order": self.order,
            "tolerance": self.tolerance,
            "points": [p.as_dict() for p in self.points],
            "verdict": self.verdict,
            "route_agreement": self.route_agreement,
        }


def _assemble(mode, order, tol, point_reports) -> ContactReport:
    verdict = combine_verdicts(p.verdict for p in point_reports)
    agree = all(p.route_agreement for p in point_reports)
    return ContactReport(mode, order, tol, list(point_reports), verdict, agree)


# ---------------------------------------------------------------------------
# drivers


def _pointwise_at(problem: ContactProblem, point) -> PointReport:
    n = problem.order
    tol = problem.tolerance
    orders = n + 1
    h = problem.bundle_a.gram_jet(point, orders, orders)
    ht = problem.bundle_b.gram_jet(point, orders, orders)
    residuals = {}
    routes = {}

    decide_verdict, decide_res = pointwise_normalized_decide(
        h, ht, n, tol, seed=problem.seed
    )
    residuals.update(decide_res)
    routes["normalized-decide"] = decide_verdict

    cand = problem.candidate_jet(point, n)
    if cand is not None:
        cand_verdict, cand_res = pointwise_verify(h, ht, cand, n, tol)
        residuals.update(cand_res)
        routes["candidate-verify"] = cand_verdict
        verdict = combine_verdicts([decide_verdict, cand_verdict])
        # a failing candidate does not refute contact itself, but the two
        # routes are still reported and compared
        agreement = decide_verdict == cand_verdict
    else:
        verdict = decide_verdict
        agreement = True
    return PointReport(tuple(point), verdict, residuals, routes, agreement)


def _alongz_at(problem: ContactProblem, point) -> PointReport:
    n = problem.order
    tol = problem.tolerance
    dim = problem.dim
    orders = n + 1
    h = problem.bundle_a.gram_jet(point, orders, orders)
    ht = problem.bundle_b.gram_jet(point, orders, orders)

    residuals = {}
    shared = {}  # existence conditions for the corner map, counted in both routes

    if problem.rank == 1:
        a0 = np.array([[np.sqrt(h.value()[0, 0].real / ht.value()[0, 0].real)]])
        shared.update(tangential_curvature_conditions(h, ht))
        cand_jet = None
    else:
        cand_jet = problem.candidate_jet(point, n)
        if cand_jet is None:
            raise ValueError(
                "a candidate corner map A0 is required for rank >= 2 bundles"
            )
        a0 = cand_jet.value()

    # analytic route: unique extension + transverse block-Gram isometry + gluing
    a_seq = [a0] + extend_A_sequence(h, ht, a0, n)
    lam = pascal_expand(pascal_from_column(np.stack(a_seq)))
    g = jet_gram(h, n, "z1")
    gt = jet_gram(ht, n, "z1")
    analytic = {f"jet-gram-isometry(n={n})": _rel(g - lam @ gt @ np.conj(lam.T), g, gt)}
    analytic.update(holomorphy_conditions(h, ht, a_seq, n))
    analytic.update(shared)

    # geometric route: curvature towers intertwined by the corner map
    geometric = geometric_conditions(h, ht, a0, n)
    geometric.update(shared)

    analytic_verdict = classify(max(analytic.values()), tol)
    geometric_verdict = classify(max(geometric.values()), tol)

    residuals.update(analytic)
    residuals.update(geometric)

    # spot-check: contact along Z implies point-wise contact here (full jets)
    if problem.rank == 1:
        spot_verdict, spot_res = pointwise_rank1_decide(h, ht, n, tol)
    else:
        full_cand = _full_candidate_from_slice(h, ht, cand_jet, n)
        spot_verdict, spot_res = pointwise_verify(h, ht, full_cand, n, tol)
    residuals.update({f"pointwise-spot-check:{k}": v for k, v in spot_res.items()})

    routes = {
        "analytic": analytic_verdict,
        "geometric": geometric_verdict,
        "pointwise-spot-check": spot_verdict,
    }
    verdict = combine_verdicts([analytic_verdict, geometric_verdict, spot_verdict])
    agreement = analytic_verdict == geometric_verdict
    return PointReport(tuple(point), verdict, residuals, routes, agreement)


def _full_candidate_from_slice(
    h: HermJet, ht: HermJet, a0_jet: HoloJet, n: int
) -> HoloJet:
    """Assemble the full multi-index candidate jet at a point of Z from the
    tangential jets of the extension sequence: d^(i1, I') A = d^I' A_{i1}."""
    dim = h.dim
    a_jets = [a0_jet.as_herm(h.anti_order).freeze_variable(0)]
    a_jets += extend_A_sequence_jets(h, ht, a_jets[0], n)
    table = index_table(dim, n)
    coeffs = np.zeros((len(table), h.rank, h.rank), dtype=np.complex128)
    pos = index_positions(dim, n)
    for idx in table:
        k = idx[0]
        tang = (0,) + idx[1:]
        coeffs[pos[idx]] = a_jets[k].extract(tang) / multi_index_factorial(idx)
    return HoloJet(h.center, n, h.rank, coeffs)


def alongZ_check(problem: ContactProblem) -> ContactReport:
    """Run both verification routes at every grid point on Z."""
    reports = [_alongz_at(problem, p) for p in problem.points]
    return _assemble("along-z", problem.order, problem.tolerance, reports)


def pointwise_check(problem: ContactProblem) -> ContactReport:
    reports = [_pointwise_at(problem, p) for p in problem.points]
    return _assemble("pointwise", problem.order, problem.tolerance, reports)


def check_problem(problem: ContactProblem) -> ContactReport:
    if problem.mode == "along-z":
        return alongZ_check(problem)
    return pointwise_check(problem)
