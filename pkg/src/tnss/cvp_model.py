"""Diagonal spin-glass (QUBO) form of the rounding problem around Babai's point.

Bit x_j = 1 applies the rounding correction kappa_j = sign(mu_j - c_j) to
the j-th reduced vector, so configuration x maps to the lattice point

    b(x) = b_cl + sum_j x_j * s_j * d_j

and its energy is the squared distance ||t - b(x)||^2. Expanding the square
with x_j^2 = x_j gives E0 + sum_j a_j x_j + sum_{i<j} w_ij x_i x_j with

    E0 = ||g||^2, a_j = -2 g.D_j + ||D_j||^2, w_ij = 2 D_i.D_j,

where g = t - b_cl and D_j = s_j d_j.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import CapacityError, ConsistencyError, InvalidArgumentError
from .lattice import BabaiResult, CvpInstance, ReducedBasis

MAX_ENUM_QUBITS = 26
_INT64_SAFE = 1 << 62
_ENUM_CHUNK = 1 << 16


def _dot(x, y) -> int:
    return sum(a * b for a, b in zip(x, y))


@dataclass(frozen=True)
class DiagonalCvpHamiltonian:
    n: int
    qubo_const: int
    qubo_linear: tuple[int, ...]
    qubo_quad: tuple[tuple[int, ...], ...]  # symmetric, zero diagonal
    g: tuple[int, ...] | None = None
    d_signed: tuple[tuple[int, ...], ...] | None = None
    # back-map to lattice coordinates
    target: tuple[int, ...] | None = None
    b_cl: tuple[int, ...] | None = None
    U: tuple[tuple[int, ...], ...] | None = None
    coeff_c: tuple[int, ...] | None = None
    sign_vector: tuple[int, ...] | None = None

    @classmethod
    def from_qubo(cls, const: int, linear: Sequence[int], quad) -> "DiagonalCvpHamiltonian":
        """A bare QUBO without lattice back-map (tests, toy models)."""
        n = len(linear)
        W = [[0] * n for _ in range(n)]
        for i in range(n):
            for j in range(i + 1, n):
                W[i][j] = W[j][i] = quad[i][j]
        return cls(n, const, tuple(linear), tuple(tuple(r) for r in W))

    @property
    def has_lattice(self) -> bool:
        return self.d_signed is not None

    def magnitude_bound(self) -> int:
        """Upper bound on |energy| over all bitstrings."""
        quad = sum(abs(self.qubo_quad[i][j]) for i in range(self.n) for j in range(i + 1, self.n))
        return abs(self.qubo_const) + sum(abs(a) for a in self.qubo_linear) + quad

    def int64_safe(self) -> bool:
        return self.magnitude_bound() < _INT64_SAFE


def build_hamiltonian(
    instance: CvpInstance, reduced: ReducedBasis, babai: BabaiResult
) -> DiagonalCvpHamiltonian:
    n = instance.rank
    dim = instance.dim
    if reduced.rank != n or len(babai.coeff_c) != n or len(babai.b_cl) != dim:
        raise InvalidArgumentError("instance, reduced basis and Babai result disagree in size")
    g = tuple(t - b for t, b in zip(instance.target, babai.b_cl))
    Ds = tuple(tuple(s * x for x in d) for s, d in zip(babai.sign_vector, reduced.D))
    const = _dot(g, g)
    linear = tuple(-2 * _dot(g, Dj) + _dot(Dj, Dj) for Dj in Ds)
    W = [[0] * n for _ in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            W[i][j] = W[j][i] = 2 * _dot(Ds[i], Ds[j])
    return DiagonalCvpHamiltonian(
        n=n,
        qubo_const=const,
        qubo_linear=linear,
        qubo_quad=tuple(tuple(r) for r in W),
        g=g,
        d_signed=Ds,
        target=tuple(instance.target),
        b_cl=tuple(babai.b_cl),
        U=reduced.U,
        coeff_c=tuple(babai.coeff_c),
        sign_vector=tuple(babai.sign_vector),
    )


def _check_bits(H: DiagonalCvpHamiltonian, bits: Sequence[int]) -> None:
    if len(bits) != H.n:
        raise InvalidArgumentError(f"expected {H.n} bits, got {len(bits)}")


def energy(H: DiagonalCvpHamiltonian, bits: Sequence[int]) -> int:
    _check_bits(H, bits)
    on = [j for j, x in enumerate(bits) if x]
    e = H.qubo_const + sum(H.qubo_linear[j] for j in on)
    for a, i in enumerate(on):
        row = H.qubo_quad[i]
        e += sum(row[j] for j in on[a + 1 :])
    return e


def config_to_lattice_point(
    H: DiagonalCvpHamiltonian, bits: Sequence[int]
) -> tuple[tuple[int, ...], tuple[int, ...]]:
    """Lattice point b(x) and its integer coefficients e = U (c + kappa) over B."""
    _check_bits(H, bits)
    if not H.has_lattice:
        raise InvalidArgumentError("Hamiltonian carries no lattice back-map")
    b = list(H.b_cl)
    for x, Dj in zip(bits, H.d_signed):
        if x:
            for k, v in enumerate(Dj):
                b[k] += v
    k = [c + s * x for c, s, x in zip(H.coeff_c, H.sign_vector, bits)]
    e = tuple(sum(H.U[i][j] * k[j] for j in range(H.n) if k[j]) for i in range(H.n))
    return tuple(b), e


def bits_from_index(idx: int, n: int) -> tuple[int, ...]:
    """Bit j is the (n-1-j)-th binary digit: index order == lexicographic order."""
    return tuple((idx >> (n - 1 - j)) & 1 for j in range(n))


def index_from_bits(bits: Sequence[int]) -> int:
    idx = 0
    for x in bits:
        idx = (idx << 1) | int(x)
    return idx


def bit_matrix(indices: np.ndarray, n: int) -> np.ndarray:
    shifts = np.arange(n - 1, -1, -1, dtype=np.int64)
    return ((np.asarray(indices, dtype=np.int64)[:, None] >> shifts) & 1).astype(np.int64)


def energies(H: DiagonalCvpHamiltonian, X: np.ndarray) -> np.ndarray:
    """Energies for a (k, n) 0/1 matrix; int64 when certified safe, else object."""
    X = np.asarray(X)
    if H.int64_safe():
        Xi = X.astype(np.int64)
        a = np.asarray(H.qubo_linear, dtype=np.int64)
        W = np.triu(np.asarray(H.qubo_quad, dtype=np.int64), 1)
        return H.qubo_const + Xi @ a + np.einsum("ki,ij,kj->k", Xi, W, Xi)
    return np.array([energy(H, row) for row in X.tolist()], dtype=object)


def coefficient_matrix(H: DiagonalCvpHamiltonian, X: np.ndarray) -> np.ndarray:
    """Rows e = U (c + kappa) for each bitstring row of X."""
    X = np.asarray(X)
    k_obj = np.asarray(H.coeff_c, dtype=object)[None, :] + X.astype(object) * np.asarray(
        H.sign_vector, dtype=object
    )[None, :]
    U = np.asarray(H.U, dtype=object)
    bound = (max(abs(c) for c in H.coeff_c) + 1) * max(abs(u) for row in H.U for u in row) * H.n
    if bound < _INT64_SAFE:
        return k_obj.astype(np.int64) @ U.astype(np.int64).T
    return k_obj @ U.T


@dataclass(frozen=True)
class Configuration:
    bits: tuple[int, ...]
    energy: int


def lowest_energy_indices(H: DiagonalCvpHamiltonian, k: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Indices and energies of the k lowest configurations.

    Sorted by (energy, index); index order is lexicographic bit order.
    """
    n = H.n
    if n > MAX_ENUM_QUBITS:
        raise CapacityError(f"exact enumeration limited to {MAX_ENUM_QUBITS} qubits, got {n}")
    total = 1 << n
    k = total if k is None else k
    if not 1 <= k <= total:
        raise InvalidArgumentError(f"k must be in [1, 2^{n}]")
    best_idx = np.empty(0, dtype=np.int64)
    best_e = np.empty(0, dtype=np.int64 if H.int64_safe() else object)
    for start in range(0, total, _ENUM_CHUNK):
        idx = np.arange(start, min(total, start + _ENUM_CHUNK), dtype=np.int64)
        e = energies(H, bit_matrix(idx, n))
        idx = np.concatenate([best_idx, idx])
        e = np.concatenate([best_e, e])
        if e.dtype == object:
            order = np.array(sorted(range(len(idx)), key=lambda i: (e[i], idx[i]))[:k], dtype=np.int64)
        else:
            order = np.lexsort((idx, e))[:k]
        best_idx, best_e = idx[order], e[order]
    if H.has_lattice and best_e.size and min(best_e) < 0:
        raise ConsistencyError("negative energy: squared distance cannot be negative")
    return best_idx, best_e


def exact_low_energy_enum(H: DiagonalCvpHamiltonian, k: int) -> list[Configuration]:
    idx, e = lowest_energy_indices(H, k)
    return [Configuration(bits_from_index(int(i), H.n), int(x)) for i, x in zip(idx, e)]
