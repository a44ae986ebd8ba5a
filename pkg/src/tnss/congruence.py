"""From sr-pairs to a congruence of squares X^2 = Y^2 (mod N).

Each pair contributes the parity vector of e_tilde = e_w - e_u (sign in
row 0). A GF(2) kernel vector tau selects pairs whose product of u_r * w_r
is a perfect square; since w_r = u_r (mod N), X = sqrt(prod u_r w_r) and
Y = prod u_r satisfy X^2 = Y^2 (mod N).
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from typing import Sequence

from .errors import ConsistencyError, InvalidArgumentError
from .numtheory import gcd
from .sieve import SrPair

DEFAULT_COMBINATION_BUDGET = 10_000


@dataclass(frozen=True)
class ParityMatrix:
    """Column-packed GF(2) matrix: ``cols[r]`` bit j is row j of column r.

    Row 0 is the sign, row j >= 1 the exponent of the j-th prime.
    """

    n_rows: int
    cols: tuple[int, ...]
    column_refs: tuple[tuple[int, int], ...]

    @property
    def n_cols(self) -> int:
        return len(self.cols)

    def bit(self, row: int, col: int) -> int:
        return (self.cols[col] >> row) & 1

    def times(self, tau: Sequence[int]) -> int:
        """M . tau as a packed row-bit mask."""
        acc = 0
        for c, t in zip(self.cols, tau):
            if t:
                acc ^= c
        return acc

    def dump(self) -> str:
        """Text bitmap, one line per row, '1'/'.' per column."""
        return "\n".join(
            "".join("1" if (c >> j) & 1 else "." for c in self.cols) for j in range(self.n_rows)
        )


def build_parity_matrix(pairs: Sequence[SrPair], pi2: int) -> ParityMatrix:
    cols = []
    for p in pairs:
        et = p.e_tilde
        if len(et.e) != pi2:
            raise InvalidArgumentError(f"pair exponents over {len(et.e)} primes, expected {pi2}")
        col = et.e0 & 1
        for j, k in enumerate(et.e):
            if k & 1:
                col |= 1 << (j + 1)
        cols.append(col)
    return ParityMatrix(pi2 + 1, tuple(cols), tuple(p.key for p in pairs))


def kernel_basis(M: ParityMatrix) -> list[tuple[int, ...]]:
    """Null-space basis over GF(2) by elimination with history masks.

    Columns are reduced one by one against the pivots found so far; a
    column that reduces to zero yields the kernel vector recorded in its
    history mask.
    """
    D = M.n_cols
    pivots: dict[int, tuple[int, int]] = {}
    kernel = []
    for r, col in enumerate(M.cols):
        vec, hist = col, 1 << r
        while vec:
            top = vec.bit_length() - 1
            if top not in pivots:
                pivots[top] = (vec, hist)
                break
            pv, ph = pivots[top]
            vec ^= pv
            hist ^= ph
        if not vec:
            kernel.append(tuple((hist >> i) & 1 for i in range(D)))
    return kernel


def assemble_squares(tau: Sequence[int], pairs: Sequence[SrPair], N: int) -> tuple[int, int]:
    if len(tau) != len(pairs):
        raise InvalidArgumentError("tau length differs from pair count")
    chosen = [p for p, t in zip(pairs, tau) if t]
    if not chosen:
        return 1, 1
    basis = chosen[0].basis
    E = [0] * basis.size
    sign = 0
    Y = 1
    for p in chosen:
        sign += p.e_w.e0 + p.e_u.e0
        for j, (a, b) in enumerate(zip(p.e_u.e, p.e_w.e)):
            E[j] += a + b
        Y = Y * p.u % N
    if sign & 1 or any(k & 1 for k in E):
        raise ConsistencyError("odd combined exponent: tau is not a kernel vector")
    X = 1
    for prime, k in zip(basis.primes, E):
        if k:
            X = X * pow(prime, k // 2, N) % N
    return X, Y


def extract_factors(X: int, Y: int, N: int) -> tuple[int, int] | None:
    if (X * X - Y * Y) % N:
        raise InvalidArgumentError("X^2 and Y^2 are not congruent mod N")
    g = gcd((X + Y) % N, N)
    if g in (1, N):
        return None
    return g, N // g


@dataclass(frozen=True)
class FactorResult:
    p: int
    q: int
    kernel_vector_used: int
    trials: int

    def __post_init__(self):
        if not 1 < self.p <= self.q:
            raise InvalidArgumentError("factors must satisfy 1 < p <= q")

    def to_dict(self) -> dict:
        return {
            "p": str(self.p),
            "q": str(self.q),
            "kernel_vector_used": self.kernel_vector_used,
            "trials": self.trials,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "FactorResult":
        return cls(int(d["p"]), int(d["q"]), int(d["kernel_vector_used"]), int(d["trials"]))


def _combinations(basis: list[tuple[int, ...]]):
    yield from basis
    for a, b in itertools.combinations(basis, 2):
        yield tuple(x ^ y for x, y in zip(a, b))


def process(
    pairs: Sequence[SrPair], N: int, pi2: int, budget: int = DEFAULT_COMBINATION_BUDGET
) -> FactorResult | None:
    """Try kernel basis vectors, then pairwise sums, until a factor appears."""
    if not pairs:
        return None
    M = build_parity_matrix(pairs, pi2)
    basis = kernel_basis(M)
    for trial, tau in enumerate(itertools.islice(_combinations(basis), budget)):
        X, Y = assemble_squares(tau, pairs, N)
        f = extract_factors(X, Y, N)
        if f is not None:
            p, q = sorted(f)
            if p * q != N:
                raise ConsistencyError("factor product differs from N")
            return FactorResult(p, q, trial, trial + 1)
    return None
