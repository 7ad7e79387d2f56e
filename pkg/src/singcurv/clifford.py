"""Exact Euclidean gamma matrices and identity verification.

Gamma matrices for the Euclidean Clifford algebra ``{gamma^i, gamma^j} =
2 delta^{ij}`` are built from iterated Pauli tensor products, so every entry is
one of ``0, +-1, +-i``.  All identity checks in this module run in *exact*
arithmetic: matrices are stored as integer arrays over the Gaussian rationals
(a common positive denominator per matrix), so a reported residual of ``0.0``
means the identity holds exactly, not to rounding.

Conventions
-----------
* ``gamma[i]`` is Hermitian and squares to the identity.
* ``antisym_product(G, (i1 .. ip))`` is the fully antisymmetrized product with
  the ``1/p!`` normalization, i.e. ``Alt(g^{i1} ... g^{ip})``.
* ``comm(G, i, j) = gamma^i gamma^j - gamma^j gamma^i``.
"""

from __future__ import annotations

import itertools
import math
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Optional, Sequence, Tuple

import numpy as np

__all__ = [
    "ExactMatrix",
    "GammaSet",
    "IdentityReport",
    "build_gamma",
    "antisym_product",
    "antisym_product_bruteforce",
    "comm",
    "verify_pair_product_expansion",
    "verify_triple_product_expansion",
    "verify_connection_contraction",
    "verify_vector_commutator_expansion",
    "run_identity_suite",
]

# Guard against silent int64 overflow; the largest integer appearing in any
# identity check here is < 1e7, so this bound is generous.
_INT_GUARD = np.int64(1) << np.int64(52)


class ExactMatrix:
    """Dense matrix over the Gaussian rationals.

    Entries are ``(re + i*im)/den`` with ``re``, ``im`` int64 arrays and
    ``den`` a positive Python int shared by the whole matrix.  Supports the
    handful of exact operations the identity checks need.
    """

    __slots__ = ("re", "im", "den")

    def __init__(self, re: np.ndarray, im: np.ndarray, den: int = 1):
        if den == 0:
            raise ZeroDivisionError("denominator must be nonzero")
        if den < 0:
            re, im, den = -re, -im, -den
        self.re = np.asarray(re, dtype=np.int64)
        self.im = np.asarray(im, dtype=np.int64)
        self.den = int(den)
        self._check_range()

    # -- construction helpers -------------------------------------------------

    @classmethod
    def zeros(cls, dim: int) -> "ExactMatrix":
        z = np.zeros((dim, dim), dtype=np.int64)
        return cls(z, z.copy(), 1)

    @classmethod
    def eye(cls, dim: int) -> "ExactMatrix":
        return cls(np.eye(dim, dtype=np.int64), np.zeros((dim, dim), dtype=np.int64), 1)

    def copy(self) -> "ExactMatrix":
        return ExactMatrix(self.re.copy(), self.im.copy(), self.den)

    # -- internal utilities ----------------------------------------------------

    def _check_range(self) -> None:
        if (
            np.abs(self.re).max(initial=0) > _INT_GUARD
            or np.abs(self.im).max(initial=0) > _INT_GUARD
            or self.den > int(_INT_GUARD)
        ):
            raise OverflowError("exact-matrix integers exceeded the safe range")

    def _reduce(self) -> "ExactMatrix":
        """Divide out the gcd of all entries and the denominator (in place)."""
        g = int(np.gcd.reduce(np.concatenate([np.abs(self.re).ravel(), np.abs(self.im).ravel()])))
        g = math.gcd(g, self.den)
        if g > 1:
            self.re //= g
            self.im //= g
            self.den //= g
        return self

    # -- arithmetic ------------------------------------------------------------

    def __add__(self, other: "ExactMatrix") -> "ExactMatrix":
        lcm = self.den * other.den // math.gcd(self.den, other.den)
        a, b = lcm // self.den, lcm // other.den
        return ExactMatrix(self.re * a + other.re * b, self.im * a + other.im * b, lcm)._reduce()

    def __sub__(self, other: "ExactMatrix") -> "ExactMatrix":
        return self + (other * -1)

    def __matmul__(self, other: "ExactMatrix") -> "ExactMatrix":
        re = self.re @ other.re - self.im @ other.im
        im = self.re @ other.im + self.im @ other.re
        return ExactMatrix(re, im, self.den * other.den)._reduce()

    def __mul__(self, scalar) -> "ExactMatrix":
        """Scalar multiply by an int or Fraction (exact)."""
        frac = Fraction(scalar)
        return ExactMatrix(
            self.re * frac.numerator, self.im * frac.numerator, self.den * frac.denominator
        )._reduce()

    __rmul__ = __mul__

    def mul_i(self, k: int = 1) -> "ExactMatrix":
        """Multiply by i**k."""
        re, im = self.re, self.im
        for _ in range(k % 4):
            re, im = -im, re
        return ExactMatrix(re, im, self.den)

    def conj_t(self) -> "ExactMatrix":
        return ExactMatrix(self.re.T.copy(), -self.im.T, self.den)

    # -- queries ----------------------------------------------------------------

    def is_zero(self) -> bool:
        return not self.re.any() and not self.im.any()

    def __eq__(self, other) -> bool:
        if not isinstance(other, ExactMatrix):
            return NotImplemented
        return (self - other).is_zero()

    def __hash__(self):
        raise TypeError("ExactMatrix is unhashable")

    def max_abs(self) -> float:
        """Largest |entry| as a float (0.0 iff the matrix is exactly zero)."""
        if self.is_zero():
            return 0.0
        mag = np.hypot(self.re.astype(float), self.im.astype(float))
        return float(mag.max()) / self.den

    def to_complex(self) -> np.ndarray:
        return (self.re + 1j * self.im) / self.den

    def __repr__(self):
        return f"ExactMatrix(dim={self.re.shape[0]}, den={self.den})"


def _kron(a: ExactMatrix, b: ExactMatrix) -> ExactMatrix:
    re = np.kron(a.re, b.re) - np.kron(a.im, b.im)
    im = np.kron(a.re, b.im) + np.kron(a.im, b.re)
    return ExactMatrix(re, im, a.den * b.den)


def _pauli() -> Tuple[ExactMatrix, ExactMatrix, ExactMatrix, ExactMatrix]:
    s1 = ExactMatrix(np.array([[0, 1], [1, 0]]), np.zeros((2, 2)))
    s2 = ExactMatrix(np.zeros((2, 2)), np.array([[0, -1], [1, 0]]))
    s3 = ExactMatrix(np.array([[1, 0], [0, -1]]), np.zeros((2, 2)))
    ident = ExactMatrix.eye(2)
    return s1, s2, s3, ident


@dataclass
class GammaSet:
    """A concrete exact representation of the Euclidean gamma matrices."""

    n: int
    dim: int
    gammas: list  # list[ExactMatrix], length n
    _comm_cache: dict = field(default_factory=dict, repr=False)
    _ordered_cache: dict = field(default_factory=dict, repr=False)

    def gamma_complex(self) -> np.ndarray:
        """All matrices as one complex array of shape (n, dim, dim)."""
        return np.stack([g.to_complex() for g in self.gammas])


def build_gamma(n: int) -> GammaSet:
    """Build exact Euclidean gamma matrices in dimension ``2**(n//2)``.

    Even ``n = 2m`` uses the standard Pauli tensor construction
    ``gamma^{2k-1} = s3^(k-1) x s1 x 1^(m-k)``,
    ``gamma^{2k}   = s3^(k-1) x s2 x 1^(m-k)``;
    odd ``n`` appends the chirality element ``(-i)^m g^1 ... g^{2m}`` of the
    even construction one dimension down.  All entries are 0, +-1 or +-i.
    """
    if not (2 <= n <= 8):
        raise ValueError(f"n must be between 2 and 8, got {n}")
    s1, s2, s3, ident = _pauli()
    m = n // 2
    gammas = []
    for k in range(1, m + 1):
        for s in (s1, s2):
            g = None
            factors = [s3] * (k - 1) + [s] + [ident] * (m - k)
            for f in factors:
                g = f if g is None else _kron(g, f)
            gammas.append(g)
    if n % 2 == 1:
        chir = gammas[0]
        for g in gammas[1:]:
            chir = chir @ g
        chir = chir.mul_i(-m % 4)  # (-i)^m
        gammas.append(chir)

    dim = 2 ** m
    G = GammaSet(n=n, dim=dim, gammas=gammas)
    _validate_gamma(G)
    return G


def _validate_gamma(G: GammaSet) -> None:
    """Exact construction checks: entries, Hermiticity, anticommutation."""
    ident = ExactMatrix.eye(G.dim)
    for i, g in enumerate(G.gammas):
        if g.den != 1:
            raise AssertionError("gamma entries must be Gaussian integers")
        allowed = (np.abs(g.re) <= 1) & (np.abs(g.im) <= 1) & ((g.re == 0) | (g.im == 0))
        if not allowed.all():
            raise AssertionError(f"gamma^{i} has an entry outside {{0,+-1,+-i}}")
        if g != g.conj_t():
            raise AssertionError(f"gamma^{i} is not Hermitian")
    for i in range(G.n):
        for j in range(i, G.n):
            anti = G.gammas[i] @ G.gammas[j] + G.gammas[j] @ G.gammas[i]
            expect = ident * (2 if i == j else 0)
            if anti != expect:
                raise AssertionError(f"anticommutator {{gamma^{i}, gamma^{j}}} is wrong")


def comm(G: GammaSet, i: int, j: int) -> ExactMatrix:
    """Exact commutator [gamma^i, gamma^j], cached."""
    key = (i, j)
    cached = G._comm_cache.get(key)
    if cached is None:
        cached = G.gammas[i] @ G.gammas[j] - G.gammas[j] @ G.gammas[i]
        G._comm_cache[key] = cached
    return cached


def _ordered_product(G: GammaSet, idx: Tuple[int, ...]) -> ExactMatrix:
    """Product gamma^{i1} ... gamma^{ik} for strictly increasing idx, cached."""
    cached = G._ordered_cache.get(idx)
    if cached is None:
        out = ExactMatrix.eye(G.dim)
        for i in idx:
            out = out @ G.gammas[i]
        G._ordered_cache[idx] = out
        cached = out
    return cached


def _sort_sign(idx: Sequence[int]) -> Tuple[Tuple[int, ...], int]:
    """Sorted tuple and the sign of the sorting permutation (None if repeats)."""
    idx = list(idx)
    sign = 1
    # insertion sort, counting transpositions
    for i in range(1, len(idx)):
        j = i
        while j > 0 and idx[j - 1] > idx[j]:
            idx[j - 1], idx[j] = idx[j], idx[j - 1]
            sign = -sign
            j -= 1
    return tuple(idx), sign


def antisym_product(G: GammaSet, idx: Sequence[int]) -> ExactMatrix:
    """Antisymmetrized product ``Alt(gamma^{i1} ... gamma^{ip})``, 1/p! normalized.

    For pairwise-distinct indices this equals (sign of sorting permutation)
    times the ordered product, because distinct gammas anticommute; with any
    repeated index it vanishes.  ``antisym_product_bruteforce`` computes the
    same thing from the definition and is used to cross-check this fast path.
    """
    idx = tuple(int(i) for i in idx)
    if len(set(idx)) < len(idx):
        return ExactMatrix.zeros(G.dim)
    srt, sign = _sort_sign(idx)
    out = _ordered_product(G, srt)
    return out if sign == 1 else out * -1


def antisym_product_bruteforce(G: GammaSet, idx: Sequence[int]) -> ExactMatrix:
    """Permutation-sum definition of the antisymmetrized product (slow, exact)."""
    idx = tuple(int(i) for i in idx)
    p = len(idx)
    acc = ExactMatrix.zeros(G.dim)
    for perm in itertools.permutations(range(p)):
        term = ExactMatrix.eye(G.dim)
        for k in perm:
            term = term @ G.gammas[idx[k]]
        acc = acc + term * _perm_sign(perm)
    return acc * Fraction(1, math.factorial(p))


def _perm_sign(perm: Sequence[int]) -> int:
    sign = 1
    seen = [False] * len(perm)
    for start in range(len(perm)):
        if seen[start]:
            continue
        length = 0
        j = start
        while not seen[j]:
            seen[j] = True
            j = perm[j]
            length += 1
        if length % 2 == 0:
            sign = -sign
    return sign


# ---------------------------------------------------------------------------
# Identity reports
# ---------------------------------------------------------------------------


@dataclass
class IdentityReport:
    """Outcome of one exhaustive/sampled identity verification."""

    name: str
    n: int
    tuples_checked: int
    max_residual: float
    elapsed_s: float
    first_failure: Optional[tuple] = None
    sampled: bool = False

    @property
    def passed(self) -> bool:
        return self.max_residual == 0.0

    def as_dict(self) -> dict:
        return {
            "name": self.name,
            "n": self.n,
            "tuples_checked": self.tuples_checked,
            "max_residual": self.max_residual,
            "elapsed_s": round(self.elapsed_s, 4),
            "first_failure": list(self.first_failure) if self.first_failure else None,
            "sampled": self.sampled,
            "passed": self.passed,
        }


def _tuple_iter(n: int, arity: int, sample: Optional[int], rng: Optional[np.random.Generator]):
    """All index tuples, or a seeded random sample of them."""
    if sample is None:
        return itertools.product(range(n), repeat=arity), n ** arity, False
    if rng is None:
        rng = np.random.default_rng(0)
    draws = rng.integers(0, n, size=(sample, arity))
    return (tuple(int(v) for v in row) for row in draws), sample, True


def verify_pair_product_expansion(
    G: GammaSet,
    sample: Optional[int] = None,
    rng: Optional[np.random.Generator] = None,
) -> IdentityReport:
    """Check the expansion of ``[g^c,g^d][g^e,g^f]`` into graded parts.

    The claim, verified exactly for every index tuple:

        [g^c,g^d][g^e,g^f] = 4 g^{[cdef]}
            + 4 (d^{de} g^{[cf]} - d^{df} g^{[ce]} - d^{ce} g^{[df]} + d^{cf} g^{[de]})
            - 4 (d^{ce} d^{fd} - d^{cf} d^{ed}) 1
    """
    t0 = time.perf_counter()
    ident = ExactMatrix.eye(G.dim)
    tuples, count, sampled = _tuple_iter(G.n, 4, sample, rng)
    worst = 0.0
    first_failure = None
    for (c, d, e, f) in tuples:
        lhs = comm(G, c, d) @ comm(G, e, f)
        rhs = antisym_product(G, (c, d, e, f)) * 4
        grade2 = ExactMatrix.zeros(G.dim)
        if d == e:
            grade2 = grade2 + antisym_product(G, (c, f))
        if d == f:
            grade2 = grade2 - antisym_product(G, (c, e))
        if c == e:
            grade2 = grade2 - antisym_product(G, (d, f))
        if c == f:
            grade2 = grade2 + antisym_product(G, (d, e))
        rhs = rhs + grade2 * 4
        scal = (1 if (c == e and f == d) else 0) - (1 if (c == f and e == d) else 0)
        if scal:
            rhs = rhs - ident * (4 * scal)
        res = (lhs - rhs).max_abs()
        if res > worst:
            worst = res
            if first_failure is None:
                first_failure = (c, d, e, f)
    return IdentityReport(
        "pair_product_expansion", G.n, count, worst, time.perf_counter() - t0,
        first_failure if worst > 0 else None, sampled,
    )


def _grade4_term(G: GammaSet, a, b, c, d, e, f) -> ExactMatrix:
    """Grade-4 part of the triple commutator product (twelve delta terms)."""
    acc = ExactMatrix.zeros(G.dim)
    terms = [
        (b == c, (a, d, e, f), +1), (b == d, (a, c, e, f), -1),
        (a == c, (b, d, e, f), -1), (a == d, (b, c, e, f), +1),
        (d == e, (c, f, a, b), +1), (d == f, (c, e, a, b), -1),
        (c == e, (d, f, a, b), -1), (c == f, (d, e, a, b), +1),
        (a == f, (b, e, c, d), +1), (b == f, (a, e, c, d), -1),
        (a == e, (b, f, c, d), -1), (b == e, (a, f, c, d), +1),
    ]
    for hit, idx, sgn in terms:
        if hit:
            acc = acc + antisym_product(G, idx) * sgn
    return acc


def _grade2_term(G: GammaSet, a, b, c, d, e, f) -> ExactMatrix:
    """Grade-2 part: fifteen (delta delta - delta delta) gamma^{[..]} terms."""
    D = lambda i, j: 1 if i == j else 0  # noqa: E731
    pairs = [
        (D(e, d) * D(f, a) - D(e, a) * D(f, d), (b, c)),
        (D(e, a) * D(f, c) - D(e, c) * D(f, a), (b, d)),
        (D(e, b) * D(f, d) - D(e, d) * D(f, b), (a, c)),
        (D(e, c) * D(f, b) - D(e, b) * D(f, c), (a, d)),
        (D(e, d) * D(f, c) - D(e, c) * D(f, d), (a, b)),
        (D(e, b) * D(f, a) - D(e, a) * D(f, b), (c, d)),
        (D(b, c) * D(d, e) - D(b, d) * D(c, e), (a, f)),
        (-D(b, c) * D(d, f) + D(b, d) * D(c, f), (a, e)),
        (D(a, c) * D(d, f) - D(a, d) * D(c, f), (b, e)),
        (-D(a, c) * D(d, e) + D(a, d) * D(c, e), (b, f)),
        (D(b, c) * D(a, f) - D(a, c) * D(b, f), (d, e)),
        (-D(b, c) * D(a, e) + D(a, c) * D(b, e), (d, f)),
        (-D(b, d) * D(a, f) + D(a, d) * D(b, f), (c, e)),
        (D(b, d) * D(a, e) - D(a, d) * D(b, e), (c, f)),
        (-D(a, c) * D(b, d) + D(a, d) * D(b, c), (e, f)),
    ]
    acc = ExactMatrix.zeros(G.dim)
    for coeff, idx in pairs:
        if coeff:
            acc = acc + antisym_product(G, idx) * coeff
    return acc


_GRADE0_TERMS = [
    # (sign, ((i, j), (k, l), (m, n))) meaning sign * d^{ij} d^{kl} d^{mn}
    (-1, (("b", "c"), ("a", "e"), ("d", "f"))),
    (+1, (("b", "c"), ("a", "f"), ("d", "e"))),
    (+1, (("b", "d"), ("a", "e"), ("c", "f"))),
    (-1, (("b", "d"), ("a", "f"), ("c", "e"))),
    (+1, (("a", "c"), ("b", "e"), ("d", "f"))),
    (-1, (("a", "c"), ("b", "f"), ("d", "e"))),
    (-1, (("a", "d"), ("b", "e"), ("c", "f"))),
    (+1, (("a", "d"), ("b", "f"), ("c", "e"))),
]


def _grade0_coeff(a, b, c, d, e, f, corrupt: bool = False) -> int:
    """Scalar (grade-0) coefficient; optionally flips the first term's sign.

    The corruption switch exists for the self-test negative control: a single
    wrong sign must be caught by the exhaustive check.
    """
    vals = {"a": a, "b": b, "c": c, "d": d, "e": e, "f": f}
    coeff = 0
    for k, (sgn, deltas) in enumerate(_GRADE0_TERMS):
        if corrupt and k == 0:
            sgn = -sgn
        prod = 1
        for (i, j) in deltas:
            if vals[i] != vals[j]:
                prod = 0
                break
        coeff += sgn * prod
    return coeff


def verify_triple_product_expansion(
    G: GammaSet,
    sample: Optional[int] = None,
    rng: Optional[np.random.Generator] = None,
    corrupt_grade0_sign: bool = False,
) -> IdentityReport:
    """Check ``[g^a,g^b][g^c,g^d][g^e,g^f] = 8 (G6 + G4 + G2 + G0)`` exactly.

    ``G6 = g^{[abcdef]}``; the grade-4, grade-2 and grade-0 parts carry the
    delta-term lists implemented above.  ``corrupt_grade0_sign`` deliberately
    flips one scalar term so the harness can prove it detects a wrong sign
    (used by the CLI self-test; leave False for real verification).
    """
    t0 = time.perf_counter()
    ident = ExactMatrix.eye(G.dim)
    tuples, count, sampled = _tuple_iter(G.n, 6, sample, rng)
    worst = 0.0
    first_failure = None
    # [g^a,g^b] ([g^c,g^d][g^e,g^f]) with the pair product cached
    pair_cache: dict = {}

    def pair(c, d, e, f):
        key = (c, d, e, f)
        out = pair_cache.get(key)
        if out is None:
            out = comm(G, c, d) @ comm(G, e, f)
            pair_cache[key] = out
        return out

    for (a, b, c, d, e, f) in tuples:
        lhs = comm(G, a, b) @ pair(c, d, e, f)
        rhs = antisym_product(G, (a, b, c, d, e, f))
        rhs = rhs + _grade4_term(G, a, b, c, d, e, f)
        rhs = rhs + _grade2_term(G, a, b, c, d, e, f)
        scal = _grade0_coeff(a, b, c, d, e, f, corrupt=corrupt_grade0_sign)
        if scal:
            rhs = rhs + ident * scal
        res = (lhs - rhs * 8).max_abs()
        if res > worst:
            worst = res
            if first_failure is None:
                first_failure = (a, b, c, d, e, f)
    return IdentityReport(
        "triple_product_expansion", G.n, count, worst, time.perf_counter() - t0,
        first_failure if worst > 0 else None, sampled,
    )


def verify_vector_commutator_expansion(
    G: GammaSet,
    sample: Optional[int] = None,
    rng: Optional[np.random.Generator] = None,
) -> IdentityReport:
    """Check ``g^i [g^j, g^k] = 2 (g^{[ijk]} + d^{ij} g^k - d^{ik} g^j)`` exactly."""
    t0 = time.perf_counter()
    tuples, count, sampled = _tuple_iter(G.n, 3, sample, rng)
    worst = 0.0
    first_failure = None
    for (i, j, k) in tuples:
        lhs = G.gammas[i] @ comm(G, j, k)
        rhs = antisym_product(G, (i, j, k))
        if i == j:
            rhs = rhs + G.gammas[k]
        if i == k:
            rhs = rhs - G.gammas[j]
        res = (lhs - rhs * 2).max_abs()
        if res > worst:
            worst = res
            if first_failure is None:
                first_failure = (i, j, k)
    return IdentityReport(
        "vector_commutator_expansion", G.n, count, worst, time.perf_counter() - t0,
        first_failure if worst > 0 else None, sampled,
    )


# ---------------------------------------------------------------------------
# Contraction identity (floating point; coefficients are exact integers)
# ---------------------------------------------------------------------------


def random_connection_coefficients(n: int, rng: np.random.Generator) -> np.ndarray:
    """Random omega_{abc}, antisymmetric in (a, b), entries O(1)."""
    w = rng.standard_normal((n, n, n))
    return w - np.swapaxes(w, 0, 1)


def _alt4(x: np.ndarray) -> np.ndarray:
    """Antisymmetrize a rank-4 tensor over all four axes with 1/4! weight."""
    acc = np.zeros_like(x)
    for perm in itertools.permutations(range(4)):
        acc += _perm_sign(perm) * np.transpose(x, perm)
    return acc / 24.0


def verify_connection_contraction(
    G: GammaSet,
    omega: np.ndarray,
    rtol: float = 1e-12,
) -> Tuple[float, dict]:
    """Check the contracted triple-product identity against a given omega.

    LHS: ``omega_{abc} omega_{efd} [g^a,g^b][g^c,g^d][g^e,g^f]`` summed over all
    six indices.  RHS:

        32 * Alt_{mnpq}(omega_{mrr} omega_{pqn} - omega_{pqc} omega_{cnm}
                         + omega_{mbp} omega_{bnq}) g^{[mnpq]}
        + 32 * (omega_{abc} omega_{acb} - omega_{arr} omega_{ass}) 1

    where Alt carries the 1/4! normalization used throughout this module and
    ``omega_{mrr}`` means the trace over the last two slots.  (With an
    *unnormalized* signed permutation sum the grade-4 coefficient would read
    32/4! — some write the same identity with coefficient 768 under yet
    another Alt weighting; the exact arithmetic here pins the combination
    32 * Alt_{1/4!}.)  Returns the relative Frobenius residual and a detail
    dict.  The identity holds for every omega antisymmetric in its first two
    indices.
    """
    n = G.n
    if omega.shape != (n, n, n):
        raise ValueError(f"omega must have shape {(n, n, n)}")
    if not np.allclose(omega, -np.swapaxes(omega, 0, 1), atol=1e-13):
        raise ValueError("omega must be antisymmetric in its first two indices")

    gam = G.gamma_complex()
    dim = G.dim
    C = np.einsum("iab,jbc->ijac", gam, gam)
    C = C - np.transpose(C, (1, 0, 2, 3))  # C[i,j] = [g^i, g^j]

    # LHS = sum_{cd} A_c [g^c,g^d] A_d  with  A_c = sum_{ab} omega_{abc}[g^a,g^b]
    A = np.einsum("abc,abxy->cxy", omega, C)
    lhs = np.einsum("cxy,cdyz,dzw->xw", A, C, A)

    # RHS, grade-4 part
    trace23 = np.einsum("mrr->m", omega)
    t = (
        np.einsum("m,pqn->mnpq", trace23, omega)
        - np.einsum("pqc,cnm->mnpq", omega, omega)
        + np.einsum("mbp,bnq->mnpq", omega, omega)
    )
    talt = _alt4(t)
    gam4 = np.zeros((n, n, n, n, dim, dim), dtype=complex)
    for idx in itertools.permutations(range(n), 4):
        gam4[idx] = antisym_product(G, idx).to_complex()
    rhs = 32.0 * np.einsum("mnpq,mnpqxy->xy", talt, gam4)

    scal = np.einsum("abc,acb->", omega, omega) - float(trace23 @ trace23)
    rhs = rhs + 32.0 * scal * np.eye(dim)

    num = np.linalg.norm(lhs - rhs)
    # Both sides vanish identically for n = 2, so floor the denominator at the
    # natural magnitude of the inputs to keep the ratio meaningful.
    scale = float(np.linalg.norm(omega) ** 2) * dim
    den = max(np.linalg.norm(lhs), scale, 1e-300)
    rel = float(num / den)
    detail = {
        "relative_residual": rel,
        "lhs_norm": float(np.linalg.norm(lhs)),
        "scalar_part": scal,
        "tolerance": rtol,
        "passed": rel <= rtol,
    }
    return rel, detail


def run_identity_suite(
    dims: Iterable[int] = (2, 3, 4),
    sample_large: int = 4000,
    n_omega: int = 20,
    seed: int = 0,
    corrupt_grade0_sign: bool = False,
) -> dict:
    """Run every identity check; exhaustive for n <= 4, sampled above.

    Returns a JSON-friendly dict with one entry per (identity, n) plus the
    contraction residuals over ``n_omega`` random antisymmetric omegas.
    """
    rng = np.random.default_rng(seed)
    reports = []
    contraction = []
    for n in dims:
        G = build_gamma(n)
        sample = None if n <= 4 else sample_large
        reports.append(verify_pair_product_expansion(G, sample=sample, rng=rng))
        reports.append(
            verify_triple_product_expansion(
                G, sample=sample, rng=rng, corrupt_grade0_sign=corrupt_grade0_sign
            )
        )
        reports.append(verify_vector_commutator_expansion(G, sample=sample, rng=rng))
        worst = 0.0
        for _ in range(n_omega):
            omega = random_connection_coefficients(n, rng)
            rel, _detail = verify_connection_contraction(G, omega)
            worst = max(worst, rel)
        contraction.append(
            {"n": n, "n_omega": n_omega, "max_relative_residual": worst,
             "passed": worst <= 1e-12}
        )
    passed = all(r.passed for r in reports) and all(c["passed"] for c in contraction)
    return {
        "identities": [r.as_dict() for r in reports],
        "contraction": contraction,
        "passed": passed,
    }
