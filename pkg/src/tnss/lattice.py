"""N-related CVP lattices, exact LLL reduction and Babai's nearest plane.

Vectors are stored column-wise: ``basis[j]`` is the lattice vector b_j as a
tuple of Python ints. All Gram-Schmidt data is exact (integers or
``fractions.Fraction``); the last coordinate of these lattices grows like
10^c * ln N, and a wrong rounding anywhere changes the lattice point.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from decimal import Decimal, localcontext
from fractions import Fraction
from typing import Sequence

from .errors import DegenerateBasisError, InvalidArgumentError
from .numtheory import PrimeBasis, RsaKey
from .rng import SplitMix64

Vector = tuple[int, ...]

_LN_DIGITS = 60


def round_half_up(x: Fraction | Decimal | int) -> int:
    """Nearest integer, ties rounded upwards (also for negatives)."""
    return math.floor(x + (Fraction(1, 2) if isinstance(x, (Fraction, int)) else Decimal("0.5")))


def scaled_log(x: int, c: float | str | Decimal) -> int:
    """round_half_up(10^c * ln x), evaluated with 60 significant digits."""
    with localcontext() as ctx:
        ctx.prec = _LN_DIGITS
        scale = Decimal(10) ** Decimal(str(c))
        return round_half_up(scale * Decimal(x).ln())


def _dot(x: Sequence, y: Sequence):
    return sum(a * b for a, b in zip(x, y))


@dataclass(frozen=True)
class CvpInstance:
    """Lattice basis B (columns b_j, dimension n+1) and target t for one CVP."""

    basis: tuple[Vector, ...]
    target: Vector
    precision: str
    diagonal: tuple[int, ...]
    primes: PrimeBasis
    N: int
    seed: int | None = None

    @property
    def rank(self) -> int:
        return len(self.basis)

    @property
    def dim(self) -> int:
        return len(self.target)

    def rows(self) -> list[list[int]]:
        """B as a (n+1) x n row-major matrix."""
        return [[b[k] for b in self.basis] for k in range(self.dim)]

    def point(self, coeffs: Sequence[int]) -> Vector:
        """B . e for integer coefficients e."""
        return tuple(
            sum(e * b[k] for e, b in zip(coeffs, self.basis) if e) for k in range(self.dim)
        )

    def to_dict(self) -> dict:
        return {
            "N": str(self.N),
            "precision": self.precision,
            "seed": self.seed,
            "primes": list(self.primes.primes),
            "diagonal": list(self.diagonal),
            "basis": [[str(x) for x in row] for row in self.rows()],
            "target": [str(x) for x in self.target],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "CvpInstance":
        rows = [[int(x) for x in row] for row in d["basis"]]
        basis = tuple(tuple(row[j] for row in rows) for j in range(len(rows[0])))
        return cls(
            basis=basis,
            target=tuple(int(x) for x in d["target"]),
            precision=str(d["precision"]),
            diagonal=tuple(d["diagonal"]),
            primes=PrimeBasis(tuple(d["primes"])),
            N=int(d["N"]),
            seed=d.get("seed"),
        )

    @classmethod
    def from_json(cls, text: str) -> "CvpInstance":
        return cls.from_dict(json.loads(text))


def diagonal_multiset(rank: int) -> list[int]:
    """[ceil(j/2) for j = 1..rank]."""
    return [(j + 1) // 2 for j in range(1, rank + 1)]


def build_cvp_instance(
    key: RsaKey | int, primes: PrimeBasis, c: float | str = 1, seed: int = 0
) -> CvpInstance:
    """Schnorr's lattice for N: diagonal f(j), last row round(10^c ln p_j).

    The diagonal is a SplitMix64 Fisher-Yates shuffle of {ceil(j/2)} seeded
    by ``seed``; the target is (0, ..., 0, round(10^c ln N)).
    """
    N = key.N if isinstance(key, RsaKey) else int(key)
    n = primes.size
    if n < 1:
        raise InvalidArgumentError("need at least one prime")
    if float(c) < 0:
        raise InvalidArgumentError("precision c must be >= 0")
    if N < 2:
        raise InvalidArgumentError("N must be >= 2")
    c = str(c)
    diag = SplitMix64(seed).shuffle(diagonal_multiset(n))
    logs = [scaled_log(p, c) for p in primes.primes]
    basis = []
    for j in range(n):
        col = [0] * (n + 1)
        col[j] = diag[j]
        col[n] = logs[j]
        basis.append(tuple(col))
    target = tuple([0] * n + [scaled_log(N, c)])
    return CvpInstance(tuple(basis), target, c, tuple(diag), primes, N, seed)


def gram_schmidt(
    vectors: Sequence[Sequence[int]],
) -> tuple[list[tuple[Fraction, ...]], list[list[Fraction]]]:
    """Exact Gram-Schmidt of the given vectors (no normalization).

    Returns ``(g, mu)`` with g_j = v_j - sum_{i<j} mu[j][i] g_i and
    mu[j][i] = <v_j, g_i> / <g_i, g_i>; mu[j][j] = 1.
    """
    g: list[tuple[Fraction, ...]] = []
    norms: list[Fraction] = []
    n = len(vectors)
    mu = [[Fraction(0)] * n for _ in range(n)]
    for j, v in enumerate(vectors):
        cur = [Fraction(x) for x in v]
        for i in range(j):
            if norms[i] == 0:
                continue
            m = _dot(v, g[i]) / norms[i]
            mu[j][i] = m
            if m:
                gi = g[i]
                cur = [a - m * b for a, b in zip(cur, gi)]
        mu[j][j] = Fraction(1)
        nrm = _dot(cur, cur)
        if nrm == 0:
            raise DegenerateBasisError(f"vector {j} is dependent on the previous ones")
        g.append(tuple(cur))
        norms.append(nrm)
    return g, mu


@dataclass(frozen=True)
class ReducedBasis:
    """LLL output: D = B . U with U unimodular, plus exact Gram-Schmidt of D.

    ``U[i][j]`` is the coefficient of b_i in d_j.
    """

    D: tuple[Vector, ...]
    U: tuple[tuple[int, ...], ...]
    gs_vectors: tuple[tuple[Fraction, ...], ...]
    mu: tuple[tuple[Fraction, ...], ...]
    delta: Fraction

    @property
    def rank(self) -> int:
        return len(self.D)

    def coefficients(self, k: Sequence[int]) -> tuple[int, ...]:
        """U . k: coefficients over B of the point sum_j k_j d_j."""
        n = self.rank
        return tuple(sum(self.U[i][j] * k[j] for j in range(n) if k[j]) for i in range(n))


def lll_reduce(basis: Sequence[Sequence[int]], delta: Fraction | float = Fraction(99, 100)) -> ReducedBasis:
    """Integral LLL (Cohen, Alg. 2.6.7) with transformation tracking.

    Works entirely with integer Gram determinants d_i and scaled
    coefficients lambda_{k,j} = d_j mu_{k,j}, so there is no rounding error.
    """
    delta = Fraction(delta).limit_denominator(10**9)
    if not Fraction(1, 4) < delta <= 1:
        raise InvalidArgumentError("delta must lie in (1/4, 1]")
    n = len(basis)
    if n == 0:
        raise InvalidArgumentError("empty basis")
    dim = len(basis[0])
    if any(len(v) != dim for v in basis):
        raise InvalidArgumentError("basis vectors have different lengths")
    if n > dim:
        raise DegenerateBasisError("more vectors than dimensions")
    p, q = delta.numerator, delta.denominator

    # 1-based to follow the textbook recurrences.
    b = [None] + [list(v) for v in basis]
    H = [None] + [[int(i == j) for i in range(n)] for j in range(n)]
    d = [1] + [0] * n
    lam = [[0] * (n + 1) for _ in range(n + 1)]

    def redi(k: int, l: int) -> None:
        if 2 * abs(lam[k][l]) > d[l]:
            r = (2 * lam[k][l] + d[l]) // (2 * d[l])
            bk, bl = b[k], b[l]
            for i in range(dim):
                bk[i] -= r * bl[i]
            hk, hl = H[k], H[l]
            for i in range(n):
                hk[i] -= r * hl[i]
            lam[k][l] -= r * d[l]
            lk, ll = lam[k], lam[l]
            for i in range(1, l):
                lk[i] -= r * ll[i]

    def swapi(k: int, kmax: int) -> None:
        b[k], b[k - 1] = b[k - 1], b[k]
        H[k], H[k - 1] = H[k - 1], H[k]
        for j in range(1, k - 1):
            lam[k][j], lam[k - 1][j] = lam[k - 1][j], lam[k][j]
        L = lam[k][k - 1]
        Bn = (d[k - 2] * d[k] + L * L) // d[k - 1]
        for i in range(k + 1, kmax + 1):
            t = lam[i][k]
            lam[i][k] = (d[k] * lam[i][k - 1] - L * t) // d[k - 1]
            lam[i][k - 1] = (Bn * t + L * lam[i][k]) // d[k]
        d[k - 1] = Bn

    d[1] = _dot(b[1], b[1])
    if d[1] == 0:
        raise DegenerateBasisError("zero vector in basis")
    k, kmax = 2, 1
    while k <= n:
        if k > kmax:
            kmax = k
            for j in range(1, k + 1):
                u = _dot(b[k], b[j])
                for i in range(1, j):
                    u = (d[i] * u - lam[k][i] * lam[j][i]) // d[i - 1]
                if j < k:
                    lam[k][j] = u
                else:
                    if u == 0:
                        raise DegenerateBasisError(f"vector {k - 1} is linearly dependent")
                    d[k] = u
        while True:
            redi(k, k - 1)
            if q * (d[k] * d[k - 2] + lam[k][k - 1] ** 2) < p * d[k - 1] ** 2:
                swapi(k, kmax)
                k = max(2, k - 1)
            else:
                for l in range(k - 2, 0, -1):
                    redi(k, l)
                k += 1
                break

    D = tuple(tuple(v) for v in b[1:])
    U = tuple(tuple(H[j][i] for j in range(1, n + 1)) for i in range(n))
    g, mu = gram_schmidt(D)
    return ReducedBasis(D, U, tuple(g), tuple(tuple(r) for r in mu), delta)


@dataclass(frozen=True)
class BabaiResult:
    b_cl: Vector
    coeff_c: tuple[int, ...]
    mu_frac: tuple[Fraction, ...]
    sign_vector: tuple[int, ...]

    @property
    def residuals(self) -> tuple[Fraction, ...]:
        return tuple(m - c for m, c in zip(self.mu_frac, self.coeff_c))


def babai_nearest_plane(reduced: ReducedBasis, target: Sequence[int]) -> BabaiResult:
    """Babai's nearest plane on the reduced basis, last vector first.

    Records mu_j (coefficient of the running residual on g_j), its rounding
    c_j and sign(mu_j - c_j); an exact zero residual counts as +1.
    """
    n = reduced.rank
    dim = len(reduced.D[0])
    if len(target) != dim:
        raise InvalidArgumentError(f"target has length {len(target)}, expected {dim}")
    scaled = []
    for g in reduced.gs_vectors:
        den = math.lcm(*(x.denominator for x in g))
        G = [int(x * den) for x in g]
        # <r, g>/<g, g> = den <r, G> / <G, G>
        scaled.append((G, _dot(G, G), den))
    r = list(target)
    mus = [Fraction(0)] * n
    cs = [0] * n
    for j in range(n - 1, -1, -1):
        G, GG, den = scaled[j]
        mu = Fraction(den * _dot(r, G), GG)
        c = round_half_up(mu)
        mus[j], cs[j] = mu, c
        if c:
            dj = reduced.D[j]
            for k in range(dim):
                r[k] -= c * dj[k]
    b_cl = tuple(t - x for t, x in zip(target, r))
    signs = tuple(-1 if m - c < 0 else 1 for m, c in zip(mus, cs))
    return BabaiResult(b_cl, tuple(cs), tuple(mus), signs)

