"""Truncated multivariate Taylor-series (jet) arithmetic over complex matrices.

A jet stores the Taylor coefficients of a matrix-valued function at a center
point, truncated by *total* order.  Two flavours exist:

* :class:`HoloJet` -- expansion of a holomorphic function in ``z - z0``.
* :class:`HermJet` -- expansion of a real-analytic function in the pair
  ``(z - z0, conj(z) - conj(z0))``, indexed by a pair of multi-indices.

Coefficients are stored in normalized form, i.e. divided by the multi-index
factorials, so that multiplication of jets is plain coefficient convolution.
Derivative values are recovered on extraction by multiplying the factorials
back (orders stay small enough that this is exact in double precision).

Multi-indices are plain tuples of non-negative ints.  All tables enumerate
them in graded order (total degree first, then z1-major within a degree),
which makes truncation to a lower order a prefix slice.

All jets are immutable after construction; every operation returns a new jet.
Binary operations truncate to the minimum operand orders.
"""

from __future__ import annotations

from functools import lru_cache
from itertools import product as _cartesian
from math import comb, factorial

import numpy as np

__all__ = [
    "DimensionError",
    "SingularityError",
    "OrderError",
    "HermJet",
    "HoloJet",
    "index_table",
    "index_positions",
    "multi_index_order",
    "multi_index_factorial",
    "multi_index_binom",
    "jet_mul",
    "jet_inv",
    "jet_func",
    "jet_extract",
]


class DimensionError(ValueError):
    """Mismatched centers, ranks or ambient dimensions."""


class SingularityError(ArithmeticError):
    """Inversion, division, log or real power hit a singular constant term."""


class OrderError(ValueError):
    """A derivative index exceeds the truncation order of the jet."""


# ---------------------------------------------------------------------------
# multi-index tables


def multi_index_order(alpha) -> int:
    return sum(alpha)


def multi_index_factorial(alpha) -> int:
    out = 1
    for a in alpha:
        out *= factorial(a)
    return out


def multi_index_binom(alpha, beta) -> int:
    """Product of per-component binomials; 0 unless beta <= alpha componentwise."""
    out = 1
    for a, b in zip(alpha, beta):
        if b > a:
            return 0
        out *= comb(a, b)
    return out


@lru_cache(maxsize=None)
def index_table(dim: int, order: int) -> tuple[tuple[int, ...], ...]:
    """All multi-indices of length `dim` with total order <= `order`, graded."""
    if dim < 1 or order < 0:
        raise ValueError(f"invalid index table request dim={dim} order={order}")
    idx = [i for i in _cartesian(range(order + 1), repeat=dim) if sum(i) <= order]
    idx.sort(key=lambda i: (sum(i), tuple(-c for c in i)))
    return tuple(idx)


@lru_cache(maxsize=None)
def index_positions(dim: int, order: int) -> dict:
    return {i: k for k, i in enumerate(index_table(dim, order))}


def table_size(dim: int, order: int) -> int:
    return comb(order + dim, dim)


@lru_cache(maxsize=None)
def _mul_plan(dim: int, order: int):
    """Index triples (k, i, j) with table[i] + table[j] = table[k]."""
    table = index_table(dim, order)
    pos = index_positions(dim, order)
    ks, is_, js = [], [], []
    for i, a in enumerate(table):
        for j, b in enumerate(table):
            c = tuple(x + y for x, y in zip(a, b))
            if sum(c) <= order:
                ks.append(pos[c])
                is_.append(i)
                js.append(j)
    return np.asarray(ks), np.asarray(is_), np.asarray(js)


@lru_cache(maxsize=None)
def _mul_plan_pair(dim: int, holo_order: int, anti_order: int):
    """Flattened convolution plan over both index axes, grouped by output
    position for segment summation."""
    kh, ih, jh = _mul_plan(dim, holo_order)
    ka, ia, ja = _mul_plan(dim, anti_order)
    IH = np.repeat(ih, len(ka))
    JH = np.repeat(jh, len(ka))
    KH = np.repeat(kh, len(ka))
    IA = np.tile(ia, len(kh))
    JA = np.tile(ja, len(kh))
    KA = np.tile(ka, len(kh))
    key = KH * table_size(dim, anti_order) + KA
    order = np.argsort(key, kind="stable")
    key = key[order]
    starts = np.flatnonzero(np.concatenate(([True], key[1:] != key[:-1])))
    return IH[order], IA[order], JH[order], JA[order], key[starts], starts


@lru_cache(maxsize=None)
def _deriv_plan(dim: int, order: int, var: int):
    """For d/dz_var: output position k -> (input position of idx+e_var, idx[var]+1)."""
    table_out = index_table(dim, order - 1)
    pos_in = index_positions(dim, order)
    src = np.empty(len(table_out), dtype=np.intp)
    mult = np.empty(len(table_out))
    for k, a in enumerate(table_out):
        up = list(a)
        up[var] += 1
        src[k] = pos_in[tuple(up)]
        mult[k] = a[var] + 1
    return src, mult


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr, dtype=np.complex128)
    arr.flags.writeable = False
    return arr


def _check_same_frame(a, b):
    if a.dim != b.dim or a.rank != b.rank:
        raise DimensionError(
            f"jet mismatch: dim {a.dim} vs {b.dim}, rank {a.rank} vs {b.rank}"
        )
    if a.center != b.center:
        raise DimensionError(f"jet centers differ: {a.center} vs {b.center}")


# ---------------------------------------------------------------------------
# Hermitian-pair jets


class HermJet:
    """Jet of a matrix-valued real-analytic function of (z, conj(z)).

    Attributes
    ----------
    center : tuple of complex, length ``dim``
    holo_order, anti_order : truncation orders in z and conj(z)
    rank : matrix size
    coeffs : ndarray of shape (Na, Nb, rank, rank) with the normalized
        coefficient of (alpha, beta) at position (pos(alpha), pos(beta)).
    """

    __slots__ = ("center", "holo_order", "anti_order", "rank", "coeffs", "_inv_cache")

    def __init__(self, center, holo_order, anti_order, rank, coeffs):
        self.center = tuple(complex(c) for c in center)
        self.holo_order = int(holo_order)
        self.anti_order = int(anti_order)
        self.rank = int(rank)
        self._inv_cache = None
        coeffs = np.asarray(coeffs, dtype=np.complex128)
        expected = (
            table_size(self.dim, self.holo_order),
            table_size(self.dim, self.anti_order),
            self.rank,
            self.rank,
        )
        if coeffs.shape != expected:
            raise DimensionError(
                f"coefficient array has shape {coeffs.shape}, expected {expected}"
            )
        self.coeffs = _freeze(coeffs)

    # -- constructors -------------------------------------------------------

    @property
    def dim(self) -> int:
        return len(self.center)

    @classmethod
    def constant(cls, value, center, holo_order, anti_order) -> "HermJet":
        value = np.atleast_2d(np.asarray(value, dtype=np.complex128))
        rank = value.shape[0]
        dim = len(center)
        coeffs = np.zeros(
            (table_size(dim, holo_order), table_size(dim, anti_order), rank, rank),
            dtype=np.complex128,
        )
        coeffs[0, 0] = value
        return cls(center, holo_order, anti_order, rank, coeffs)

    @classmethod
    def zero(cls, center, holo_order, anti_order, rank=1) -> "HermJet":
        return cls.constant(np.zeros((rank, rank)), center, holo_order, anti_order)

    @classmethod
    def identity(cls, center, holo_order, anti_order, rank) -> "HermJet":
        return cls.constant(np.eye(rank), center, holo_order, anti_order)

    @classmethod
    def coordinate(cls, var: int, center, holo_order, anti_order) -> "HermJet":
        """Scalar jet of the coordinate function z_var (0-based)."""
        jet = cls.constant(center[var], center, holo_order, anti_order)
        if holo_order >= 1:
            c = np.array(jet.coeffs)
            e = tuple(1 if k == var else 0 for k in range(len(center)))
            c[index_positions(len(center), holo_order)[e], 0, 0, 0] = 1.0
            return cls(center, holo_order, anti_order, 1, c)
        return jet

    @classmethod
    def conj_coordinate(cls, var: int, center, holo_order, anti_order) -> "HermJet":
        """Scalar jet of conj(z_var)."""
        jet = cls.constant(np.conj(center[var]), center, holo_order, anti_order)
        if anti_order >= 1:
            c = np.array(jet.coeffs)
            e = tuple(1 if k == var else 0 for k in range(len(center)))
            c[0, index_positions(len(center), anti_order)[e], 0, 0] = 1.0
            return cls(center, holo_order, anti_order, 1, c)
        return jet

    @classmethod
    def from_entries(cls, entries) -> "HermJet":
        """Assemble a matrix jet from an l x l grid of scalar jets."""
        rows = len(entries)
        first = entries[0][0]
        coeffs = np.zeros(first.coeffs.shape[:2] + (rows, rows), dtype=np.complex128)
        for p in range(rows):
            if len(entries[p]) != rows:
                raise DimensionError("entry grid is not square")
            for q in range(rows):
                e = entries[p][q]
                _check_same_frame(first, e)
                if e.rank != 1:
                    raise DimensionError("entries must be scalar jets")
                if (e.holo_order, e.anti_order) != (first.holo_order, first.anti_order):
                    raise DimensionError("entry jets must share truncation orders")
                coeffs[:, :, p, q] = e.coeffs[:, :, 0, 0]
        return cls(first.center, first.holo_order, first.anti_order, rows, coeffs)

    # -- ring operations ----------------------------------------------------

    def truncate(self, holo_order=None, anti_order=None) -> "HermJet":
        p = self.holo_order if holo_order is None else min(holo_order, self.holo_order)
        q = self.anti_order if anti_order is None else min(anti_order, self.anti_order)
        na, nb = table_size(self.dim, p), table_size(self.dim, q)
        return HermJet(self.center, p, q, self.rank, self.coeffs[:na, :nb])

    def __add__(self, other) -> "HermJet":
        _check_same_frame(self, other)
        p = min(self.holo_order, other.holo_order)
        q = min(self.anti_order, other.anti_order)
        a, b = self.truncate(p, q), other.truncate(p, q)
        return HermJet(self.center, p, q, self.rank, a.coeffs + b.coeffs)

    def __sub__(self, other) -> "HermJet":
        return self + (-other)

    def __neg__(self) -> "HermJet":
        return HermJet(
            self.center, self.holo_order, self.anti_order, self.rank, -self.coeffs
        )

    def scale(self, scalar) -> "HermJet":
        return HermJet(
            self.center,
            self.holo_order,
            self.anti_order,
            self.rank,
            self.coeffs * complex(scalar),
        )

    def __mul__(self, other) -> "HermJet":
        """Truncated Cauchy product (matrix product on the values)."""
        _check_same_frame(self, other)
        p = min(self.holo_order, other.holo_order)
        q = min(self.anti_order, other.anti_order)
        a, b = self.truncate(p, q), other.truncate(p, q)
        IH, IA, JH, JA, out_keys, starts = _mul_plan_pair(self.dim, p, q)
        prod = a.coeffs[IH, IA] @ b.coeffs[JH, JA]
        sums = np.add.reduceat(prod, starts, axis=0)
        na, nb = table_size(self.dim, p), table_size(self.dim, q)
        out = np.zeros((na * nb, self.rank, self.rank), dtype=np.complex128)
        out[out_keys] = sums
        return HermJet(
            self.center, p, q, self.rank, out.reshape(na, nb, self.rank, self.rank)
        )

    def inv(self) -> "HermJet":
        """Multiplicative inverse by Newton iteration on the truncated ring.

        The result is memoized; jets are immutable so the cache is sound.
        """
        if self._inv_cache is not None:
            return self._inv_cache
        c0 = self.coeffs[0, 0]
        try:
            c0inv = np.linalg.inv(c0)
        except np.linalg.LinAlgError as exc:
            raise SingularityError("constant term is singular") from exc
        if np.linalg.cond(c0) > 1e13:
            raise SingularityError("constant term is numerically singular")
        ident = HermJet.identity(
            self.center, self.holo_order, self.anti_order, self.rank
        )
        x = HermJet.constant(c0inv, self.center, self.holo_order, self.anti_order)
        # error valuation doubles each step; nilpotency index is p+q+1
        steps = max(1, (self.holo_order + self.anti_order + 1).bit_length())
        for _ in range(steps):
            x = x * (ident.scale(2.0) - self * x)
        object.__setattr__(self, "_inv_cache", x)
        return x

    # -- analytic functions (scalar jets only) ------------------------------

    def compose_series(self, derivs_at_c0) -> "HermJet":
        """Evaluate sum_k derivs_at_c0[k]/k! * (self - c0)^k by Horner."""
        if self.rank != 1:
            raise DimensionError("analytic functions apply to scalar jets only")
        shifted = np.array(self.coeffs)
        shifted[0, 0] = 0.0
        u = HermJet(self.center, self.holo_order, self.anti_order, 1, shifted)
        coefs = [d / factorial(k) for k, d in enumerate(derivs_at_c0)]
        acc = HermJet.constant(
            coefs[-1], self.center, self.holo_order, self.anti_order
        )
        for c in reversed(coefs[:-1]):
            acc = acc * u + HermJet.constant(
                c, self.center, self.holo_order, self.anti_order
            )
        return acc

    def exp(self) -> "HermJet":
        k = self.holo_order + self.anti_order
        e0 = np.exp(complex(self.coeffs[0, 0, 0, 0]))
        return self.compose_series([e0] * (k + 1))

    def log(self) -> "HermJet":
        c0 = complex(self.coeffs[0, 0, 0, 0])
        if c0.real <= 0.0:
            raise SingularityError(
                "log needs a constant term with positive real part"
            )
        k = self.holo_order + self.anti_order
        derivs = [np.log(c0)]
        for j in range(1, k + 1):
            derivs.append((-1.0) ** (j - 1) * factorial(j - 1) / c0**j)
        return self.compose_series(derivs)

    def power(self, exponent) -> "HermJet":
        """Integer powers for any jet; real powers for scalar jets (principal branch)."""
        if isinstance(exponent, (int, np.integer)) or (
            isinstance(exponent, float) and exponent.is_integer()
        ):
            n = int(exponent)
            if n < 0:
                return self.inv().power(-n)
            out = HermJet.identity(
                self.center, self.holo_order, self.anti_order, self.rank
            )
            base = self
            while n:
                if n & 1:
                    out = out * base
                base = base * base if n > 1 else base
                n >>= 1
            return out
        c0 = complex(self.coeffs[0, 0, 0, 0]) if self.rank == 1 else None
        if c0 is None:
            raise DimensionError("real powers apply to scalar jets only")
        if c0.real <= 0.0:
            raise SingularityError(
                "real power needs a constant term with positive real part"
            )
        p = float(exponent)
        k = self.holo_order + self.anti_order
        derivs, fall = [], 1.0
        for j in range(k + 1):
            derivs.append(fall * c0 ** complex(p - j))
            fall *= p - j
        return self.compose_series(derivs)

    # -- calculus ------------------------------------------------------------

    def deriv(self, var: int, conjugate: bool = False) -> "HermJet":
        """Jet of the partial derivative in z_var (or conj(z_var)); 0-based var."""
        if not 0 <= var < self.dim:
            raise DimensionError(f"direction {var} outside dimension {self.dim}")
        if conjugate:
            if self.anti_order < 1:
                raise OrderError("anti-holomorphic order exhausted")
            src, mult = _deriv_plan(self.dim, self.anti_order, var)
            coeffs = self.coeffs[:, src] * mult[None, :, None, None]
            return HermJet(
                self.center, self.holo_order, self.anti_order - 1, self.rank, coeffs
            )
        if self.holo_order < 1:
            raise OrderError("holomorphic order exhausted")
        src, mult = _deriv_plan(self.dim, self.holo_order, var)
        coeffs = self.coeffs[src] * mult[:, None, None, None]
        return HermJet(
            self.center, self.holo_order - 1, self.anti_order, self.rank, coeffs
        )

    def extract(self, alpha, beta=None) -> np.ndarray:
        """Derivative value d^alpha dbar^beta at the center (factorials restored)."""
        alpha = tuple(alpha)
        beta = (0,) * self.dim if beta is None else tuple(beta)
        if len(alpha) != self.dim or len(beta) != self.dim:
            raise DimensionError("multi-index length differs from jet dimension")
        if multi_index_order(alpha) > self.holo_order:
            raise OrderError(f"holomorphic index {alpha} beyond order {self.holo_order}")
        if multi_index_order(beta) > self.anti_order:
            raise OrderError(f"anti-holomorphic index {beta} beyond order {self.anti_order}")
        pa = index_positions(self.dim, self.holo_order)[alpha]
        pb = index_positions(self.dim, self.anti_order)[beta]
        return np.array(
            self.coeffs[pa, pb]
            * (multi_index_factorial(alpha) * multi_index_factorial(beta))
        )

    def value(self) -> np.ndarray:
        return np.array(self.coeffs[0, 0])

    def adjoint(self) -> "HermJet":
        """Jet of the pointwise conjugate transpose z -> f(z)^*.

        Swapping the index roles turns orders (p, q) into (q, p); per the
        truncation policy the result is cut to the square part min(p, q).
        """
        square = self.truncate(
            min(self.holo_order, self.anti_order), min(self.holo_order, self.anti_order)
        )
        return HermJet(
            self.center,
            square.holo_order,
            square.anti_order,
            self.rank,
            np.conj(square.coeffs.transpose(1, 0, 3, 2)),
        )

    def freeze_variable(self, var: int) -> "HermJet":
        """Jet of the restriction z_var = center[var] (as a jet constant in z_var).

        Restricted jets form a subring: products of frozen jets stay frozen.
        """
        mask_h = np.array(
            [idx[var] == 0 for idx in index_table(self.dim, self.holo_order)]
        )
        mask_a = np.array(
            [idx[var] == 0 for idx in index_table(self.dim, self.anti_order)]
        )
        coeffs = self.coeffs * mask_h[:, None, None, None] * mask_a[None, :, None, None]
        return HermJet(self.center, self.holo_order, self.anti_order, self.rank, coeffs)

    def hermitian_defect(self) -> float:
        """Max coefficient deviation from Gram symmetry c[b,a] = c[a,b]^*."""
        return float(np.max(np.abs((self - self.adjoint()).coeffs)))

    def holo_part(self, order=None) -> "HoloJet":
        """The beta = 0 slice as a holomorphic jet."""
        order = self.holo_order if order is None else order
        j = self.truncate(order, self.anti_order)
        return HoloJet(self.center, order, self.rank, j.coeffs[:, 0])

    def __repr__(self):
        return (
            f"HermJet(center={self.center}, orders=({self.holo_order},"
            f"{self.anti_order}), rank={self.rank})"
        )


# ---------------------------------------------------------------------------
# holomorphic jets


class HoloJet:
    """Jet of a matrix-valued holomorphic function; coefficients (Na, rank, rank)."""

    __slots__ = ("center", "order", "rank", "coeffs")

    def __init__(self, center, order, rank, coeffs):
        self.center = tuple(complex(c) for c in center)
        self.order = int(order)
        self.rank = int(rank)
        coeffs = np.asarray(coeffs, dtype=np.complex128)
        expected = (table_size(self.dim, self.order), self.rank, self.rank)
        if coeffs.shape != expected:
            raise DimensionError(
                f"coefficient array has shape {coeffs.shape}, expected {expected}"
            )
        self.coeffs = _freeze(coeffs)

    @property
    def dim(self) -> int:
        return len(self.center)

    @classmethod
    def constant(cls, value, center, order) -> "HoloJet":
        value = np.atleast_2d(np.asarray(value, dtype=np.complex128))
        rank = value.shape[0]
        coeffs = np.zeros(
            (table_size(len(center), order), rank, rank), dtype=np.complex128
        )
        coeffs[0] = value
        return cls(center, order, rank, coeffs)

    @classmethod
    def coordinate(cls, var: int, center, order) -> "HoloJet":
        jet = cls.constant(center[var], center, order)
        if order >= 1:
            c = np.array(jet.coeffs)
            e = tuple(1 if k == var else 0 for k in range(len(center)))
            c[index_positions(len(center), order)[e], 0, 0] = 1.0
            return cls(center, order, 1, c)
        return jet

    @classmethod
    def from_entries(cls, entries) -> "HoloJet":
        rows = len(entries)
        first = entries[0][0]
        coeffs = np.zeros(first.coeffs.shape[:1] + (rows, rows), dtype=np.complex128)
        for p in range(rows):
            for q in range(rows):
                e = entries[p][q]
                if e.order != first.order or e.center != first.center:
                    raise DimensionError("entry jets must share center and order")
                coeffs[:, p, q] = e.coeffs[:, 0, 0]
        return cls(first.center, first.order, rows, coeffs)

    def truncate(self, order) -> "HoloJet":
        p = min(order, self.order)
        return HoloJet(self.center, p, self.rank, self.coeffs[: table_size(self.dim, p)])

    def __add__(self, other) -> "HoloJet":
        _check_same_frame(self, other)
        p = min(self.order, other.order)
        return HoloJet(
            self.center,
            p,
            self.rank,
            self.truncate(p).coeffs + other.truncate(p).coeffs,
        )

    def __neg__(self) -> "HoloJet":
        return HoloJet(self.center, self.order, self.rank, -self.coeffs)

    def __sub__(self, other) -> "HoloJet":
        return self + (-other)

    def __mul__(self, other) -> "HoloJet":
        _check_same_frame(self, other)
        p = min(self.order, other.order)
        a, b = self.truncate(p), other.truncate(p)
        ks, is_, js = _mul_plan(self.dim, p)
        prod = a.coeffs[is_] @ b.coeffs[js]
        out = np.zeros(
            (table_size(self.dim, p), self.rank, self.rank), dtype=np.complex128
        )
        np.add.at(out, ks, prod)
        return HoloJet(self.center, p, self.rank, out)

    def inv(self) -> "HoloJet":
        herm = self.as_herm(anti_order=0)
        return herm.inv().holo_part()

    def deriv(self, var: int) -> "HoloJet":
        if self.order < 1:
            raise OrderError("holomorphic order exhausted")
        src, mult = _deriv_plan(self.dim, self.order, var)
        return HoloJet(
            self.center,
            self.order - 1,
            self.rank,
            self.coeffs[src] * mult[:, None, None],
        )

    def extract(self, alpha) -> np.ndarray:
        alpha = tuple(alpha)
        if multi_index_order(alpha) > self.order:
            raise OrderError(f"index {alpha} beyond order {self.order}")
        pa = index_positions(self.dim, self.order)[alpha]
        return np.array(self.coeffs[pa] * multi_index_factorial(alpha))

    def value(self) -> np.ndarray:
        return np.array(self.coeffs[0])

    def as_herm(self, anti_order: int) -> "HermJet":
        """Promote to a HermJet that is constant in the conjugate variables."""
        coeffs = np.zeros(
            (
                table_size(self.dim, self.order),
                table_size(self.dim, anti_order),
                self.rank,
                self.rank,
            ),
            dtype=np.complex128,
        )
        coeffs[:, 0] = self.coeffs
        return HermJet(self.center, self.order, anti_order, self.rank, coeffs)

    def adjoint_as_herm(self, holo_order: int) -> "HermJet":
        """HermJet of z -> A(z)^*, an anti-holomorphic function."""
        coeffs = np.zeros(
            (
                table_size(self.dim, holo_order),
                table_size(self.dim, self.order),
                self.rank,
                self.rank,
            ),
            dtype=np.complex128,
        )
        coeffs[0] = np.conj(self.coeffs.transpose(0, 2, 1))
        return HermJet(self.center, holo_order, self.order, self.rank, coeffs)

    def __repr__(self):
        return f"HoloJet(center={self.center}, order={self.order}, rank={self.rank})"


# ---------------------------------------------------------------------------
# functional aliases for the operation surface


def jet_mul(a: HermJet, b: HermJet) -> HermJet:
    return a * b


def jet_inv(a: HermJet) -> HermJet:
    return a.inv()


def jet_func(a: HermJet, f) -> HermJet:
    """Apply exp, log, or a real power (f = ('pow', p)) to a scalar jet."""
    if f == "exp":
        return a.exp()
    if f == "log":
        return a.log()
    if isinstance(f, tuple) and f[0] == "pow":
        return a.power(f[1])
    raise ValueError(f"unsupported function {f!r}")


def jet_extract(a: HermJet, alpha, beta) -> np.ndarray:
    return a.extract(alpha, beta)
