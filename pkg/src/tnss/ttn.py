"""Binary tree tensor network (TTN) states for the CVP spin glass.

Topology is a perfect binary tree in heap numbering: the root is node 1,
node k has children 2k and 2k+1, and physical site i sits at leaf
``n_pad + spread * i``. Nodes 1 .. n_pad-1 carry tensors
``T[left, right, parent]``; the root's parent leg has dimension 1. Unused
leaves are dummies with physical dimension 1 (frozen to |0>). With m = 1
the spread is 2, so every qubit hangs alone below its own node and the
leaf bonds respect the bond cap as well; otherwise the spread is 1.

Bond c is the edge between node c and its parent c // 2. Its dimension is
min(m, 2^(qubits below c), 2^(qubits above c)).

The Hamiltonian is kept as local terms (constant, n_j = (1 - Z_j)/2 fields,
n_i n_j couplings, transverse X_j fields) and renormalized block by block:
every bond carries a block Hamiltonian plus one renormalized n_i per site
on its side. That is the tree-operator form with operator bond dimension
linear in n.
"""

from __future__ import annotations

import io
import struct
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.linalg
import scipy.sparse.linalg

from .cvp_model import DiagonalCvpHamiltonian, energy as qubo_energy
from .errors import CapacityError, EigensolverError, InvalidArgumentError

DENSE_LOCAL_LIMIT = 512
EIGSH_TOL = 1e-8

_NUMBER = np.array([[0.0, 0.0], [0.0, 1.0]])
_SIGMA_X = np.array([[0.0, 1.0], [1.0, 0.0]])


# -- perturbation -------------------------------------------------------------


@dataclass(frozen=True)
class PerturbationSpec:
    """Random transverse fields h_x(j) with |h_x(j)| <= scale * median|a_j|."""

    amplitudes: tuple[float, ...]
    scale: float
    seed: int | None = None
    distribution: str = "uniform"
    reference: float = 1.0

    @property
    def n(self) -> int:
        return len(self.amplitudes)


def field_reference(H: DiagonalCvpHamiltonian) -> float:
    """Median of the nonzero |a_j|; 1.0 for an all-zero linear part."""
    nz = [abs(a) for a in H.qubo_linear if a]
    return float(np.median(nz)) if nz else 1.0


def make_perturbation(
    H: DiagonalCvpHamiltonian, alpha: float = 0.1, seed: int = 0, distribution: str = "uniform"
) -> PerturbationSpec:
    if alpha < 0:
        raise InvalidArgumentError("alpha must be >= 0")
    ref = field_reference(H)
    rng = np.random.default_rng(seed)
    if distribution == "uniform":
        h = rng.uniform(-1.0, 1.0, H.n)
    elif distribution == "normal":
        h = np.clip(rng.normal(0.0, 0.5, H.n), -1.0, 1.0)
    else:
        raise InvalidArgumentError(f"unknown distribution {distribution!r}")
    return PerturbationSpec(tuple(float(x) for x in alpha * ref * h), alpha, seed, distribution, ref)


@dataclass
class TransverseFieldQubo:
    """H' = E0 + sum a_j n_j + sum_{i<j} w_ij n_i n_j + sum_j h_j X_j."""

    const: float
    linear: np.ndarray
    quad: np.ndarray  # symmetric, zero diagonal
    hx: np.ndarray

    @property
    def n(self) -> int:
        return len(self.linear)

    def diagonal_energy(self, bits: Sequence[int]) -> float:
        x = np.asarray(bits, dtype=float)
        return float(self.const + self.linear @ x + 0.5 * x @ self.quad @ x)

    def dense(self) -> np.ndarray:
        """Full 2^n x 2^n matrix, site 0 = most significant bit (n <= 14)."""
        n = self.n
        if n > 14:
            raise CapacityError("dense operator limited to 14 qubits")
        idx = np.arange(1 << n)
        X = (idx[:, None] >> np.arange(n - 1, -1, -1)) & 1
        diag = self.const + X @ self.linear + 0.5 * np.einsum("ki,ij,kj->k", X, self.quad, X)
        M = np.diag(diag.astype(float))
        for j in range(n):
            flip = idx ^ (1 << (n - 1 - j))
            M[idx, flip] += self.hx[j]
        return M


def perturb(H: DiagonalCvpHamiltonian, spec: PerturbationSpec) -> TransverseFieldQubo:
    if spec.n != H.n:
        raise InvalidArgumentError(f"perturbation has {spec.n} fields for {H.n} qubits")
    return TransverseFieldQubo(
        const=float(H.qubo_const),
        linear=np.asarray(H.qubo_linear, dtype=float),
        quad=np.asarray(H.qubo_quad, dtype=float),
        hx=np.asarray(spec.amplitudes, dtype=float),
    )


# -- state ----------------------------------------------------------------------


def _next_pow2(n: int) -> int:
    p = 2
    while p < n:
        p *= 2
    return p


@dataclass
class TtnState:
    n: int
    m: int
    n_pad: int
    tensors: dict[int, np.ndarray]
    seed: int | None = None
    center: int = 1
    energy_history: list[float] = field(default_factory=list)

    def copy(self) -> "TtnState":
        return TtnState(
            self.n, self.m, self.n_pad, {k: t.copy() for k, t in self.tensors.items()},
            self.seed, self.center, list(self.energy_history),
        )

    # topology helpers
    def is_leaf(self, node: int) -> bool:
        return node >= self.n_pad

    @property
    def spread(self) -> int:
        return 2 if self.m == 1 else 1

    def site(self, leaf: int) -> int:
        """Physical site at a leaf, or ``n`` for a dummy leaf."""
        slot, s = leaf - self.n_pad, self.spread
        if slot % s or slot // s >= self.n:
            return self.n
        return slot // s

    def slots_below(self, node: int) -> range:
        lo, hi = node, node
        while lo < self.n_pad:
            lo, hi = 2 * lo, 2 * hi + 1
        return range(lo - self.n_pad, hi - self.n_pad + 1)

    def effective_below(self, node: int) -> list[int]:
        sites = (self.site(self.n_pad + i) for i in self.slots_below(node))
        return [s for s in sites if s < self.n]

    def bond_dim(self, node: int) -> int:
        """Dimension of the bond between ``node`` and its parent."""
        if node == 1:
            return 1
        below = len(self.effective_below(node))
        if self.is_leaf(node):
            return 2 if below else 1
        above = self.n - below
        return min(self.m, 2 ** min(below, 62), 2 ** min(above, 62))

    def max_bond(self) -> int:
        return max(max(t.shape) for t in self.tensors.values())

    def norm(self) -> float:
        """Global norm; O(nodes m^3) by bottom-up Gram contraction."""
        grams: dict[int, np.ndarray] = {}
        for node in range(self.n_pad - 1, 0, -1):
            T = self.tensors[node]
            gl = grams.get(2 * node, np.eye(T.shape[0]))
            gr = grams.get(2 * node + 1, np.eye(T.shape[1]))
            grams[node] = np.einsum("lrp,lk,rj,kjq->pq", T, gl, gr, T, optimize=True)
        return float(np.sqrt(grams[1][0, 0]))


def init_ttn(n: int, m: int, seed: int = 0) -> TtnState:
    """Random normalized TTN in root-canonical form (all tensors isometric up)."""
    if n < 2:
        raise InvalidArgumentError("need at least 2 qubits")
    if m < 1:
        raise InvalidArgumentError("bond dimension must be >= 1")
    state = TtnState(n=n, m=m, n_pad=_next_pow2(n * (2 if m == 1 else 1)), tensors={}, seed=seed)
    rng = np.random.default_rng(seed)
    for node in range(state.n_pad - 1, 0, -1):
        dl, dr = state.bond_dim(2 * node), state.bond_dim(2 * node + 1)
        dp = state.bond_dim(node)
        M = rng.normal(size=(dl * dr, dp))
        if node == 1:
            M /= np.linalg.norm(M)
        else:
            M, _ = np.linalg.qr(M)
        state.tensors[node] = M.reshape(dl, dr, dp)
    return state


def to_dense(state: TtnState) -> np.ndarray:
    """All 2^n amplitudes, site 0 = most significant bit (n <= 24)."""
    if state.n > 24:
        raise CapacityError("dense contraction limited to 24 qubits")

    def rec(node: int) -> np.ndarray:
        if state.is_leaf(node):
            return np.eye(2) if state.site(node) < state.n else np.ones((1, 1))
        L, R = rec(2 * node), rec(2 * node + 1)
        out = np.einsum("xl,yr,lrp->xyp", L, R, state.tensors[node], optimize=True)
        return out.reshape(L.shape[0] * R.shape[0], -1)

    return rec(1)[:, 0]


def amplitude(state: TtnState, bits: Sequence[int]) -> float:
    """<x|psi> by bottom-up contraction."""
    if len(bits) != state.n:
        raise InvalidArgumentError(f"expected {state.n} bits, got {len(bits)}")
    vecs: dict[int, np.ndarray] = {}
    for leaf in range(state.n_pad, 2 * state.n_pad):
        site = state.site(leaf)
        vecs[leaf] = np.ones(1) if site >= state.n else np.eye(2)[int(bits[site])]
    for node in range(state.n_pad - 1, 0, -1):
        vecs[node] = np.einsum("l,r,lrp->p", vecs[2 * node], vecs[2 * node + 1], state.tensors[node])
    return float(vecs[1][0])


# -- renormalized blocks ------------------------------------------------------------


@dataclass
class _Block:
    """Operators on one side of a bond, expressed in that bond's basis."""

    H: np.ndarray
    N: np.ndarray  # (len(sites), d, d)
    sites: np.ndarray

    @property
    def dim(self) -> int:
        return self.H.shape[0]


def _trivial_block() -> _Block:
    return _Block(np.zeros((1, 1)), np.zeros((0, 1, 1)), np.zeros(0, dtype=int))


def _leaf_block(op: TransverseFieldQubo, site: int, n: int) -> _Block:
    if site >= n:
        return _trivial_block()
    H = op.linear[site] * _NUMBER + op.hx[site] * _SIGMA_X
    return _Block(H, _NUMBER[None].copy(), np.array([site]))


def _cross(op: TransverseFieldQubo, A: _Block, B: _Block) -> tuple[np.ndarray, np.ndarray]:
    """Stacks (L, R) with sum_k L_k (x) R_k = sum_{i in A, j in B} w_ij n_i n_j.

    The weights are folded into the side with more sites so the sum has
    min(|A|, |B|) terms.
    """
    W = op.quad[np.ix_(A.sites, B.sites)]
    if len(A.sites) <= len(B.sites):
        return A.N, np.tensordot(W, B.N, axes=([1], [0]))
    return np.tensordot(W.T, A.N, axes=([1], [0])), B.N


def _apply_leg(op: np.ndarray, X: np.ndarray, leg: int) -> np.ndarray:
    """Apply a matrix to one leg of a three-leg tensor."""
    return np.moveaxis(np.tensordot(op, X, axes=([1], [leg])), 0, leg)


def _apply_pair(L: np.ndarray, R: np.ndarray, X: np.ndarray) -> np.ndarray:
    """sum_k (L_k (x) R_k) on the first two legs of X[a, b, c]."""
    s = L.shape[0]
    da, db, dc = X.shape
    Y = np.matmul(L, X.reshape(da, db * dc)).reshape(s, da, db, dc)
    return np.matmul(R[:, None], Y).sum(axis=0)


def _combine(op: TransverseFieldQubo, V: np.ndarray, A: _Block, B: _Block) -> _Block:
    """Renormalize blocks A and B through isometry V[a, b, out]."""
    a, b, o = V.shape
    HV = _apply_leg(A.H, V, 0) + _apply_leg(B.H, V, 1)
    if len(A.sites) and len(B.sites):
        HV += _apply_pair(*_cross(op, A, B), V)
    Vm = V.reshape(a * b, o)
    H = Vm.T @ HV.reshape(a * b, o)
    NA = np.matmul(Vm.T, np.matmul(A.N, V.reshape(a, b * o)).reshape(-1, a * b, o))
    Vt = V.transpose(1, 0, 2)
    Vtm = Vt.reshape(b * a, o)
    NB = np.matmul(Vtm.T, np.matmul(B.N, Vt.reshape(b, a * o)).reshape(-1, b * a, o))
    return _Block(0.5 * (H + H.T), np.concatenate([NA, NB]), np.concatenate([A.sites, B.sites]))


class _Environment:
    """Block cache for one TTN and one operator during a sweep."""

    def __init__(self, state: TtnState, op: TransverseFieldQubo):
        self.state, self.op = state, op
        self.down: dict[int, _Block] = {}
        self.up: dict[int, _Block] = {1: _trivial_block()}
        for leaf in range(state.n_pad, 2 * state.n_pad):
            self.down[leaf] = _leaf_block(op, state.site(leaf), state.n)
        for node in range(state.n_pad - 1, 1, -1):
            self.refresh_down(node)

    def refresh_down(self, node: int) -> None:
        T = self.state.tensors[node]
        self.down[node] = _combine(self.op, T, self.down[2 * node], self.down[2 * node + 1])

    def refresh_up(self, child: int) -> None:
        """Block above ``child``; the parent tensor must be isometric toward it."""
        parent = child // 2
        T = self.state.tensors[parent]
        if child == 2 * parent:
            V = T.transpose(1, 2, 0)
            self.up[child] = _combine(self.op, V, self.down[2 * parent + 1], self.up[parent])
        else:
            V = T.transpose(0, 2, 1)
            self.up[child] = _combine(self.op, V, self.down[2 * parent], self.up[parent])

    def local_blocks(self, node: int) -> tuple[_Block, _Block, _Block]:
        return self.down[2 * node], self.down[2 * node + 1], self.up[node]


def _local_dense(op: TransverseFieldQubo, blocks: tuple[_Block, _Block, _Block]) -> np.ndarray:
    """Effective Hamiltonian on a node tensor (legs left, right, parent)."""
    dims = [b.dim for b in blocks]
    eyes = [np.eye(d) for d in dims]
    Hs = [b.H for b in blocks]
    M = np.kron(np.kron(Hs[0], eyes[1]), eyes[2])
    M += np.kron(np.kron(eyes[0], Hs[1]), eyes[2])
    M += np.kron(np.kron(eyes[0], eyes[1]), Hs[2])
    for a, b in ((0, 1), (0, 2), (1, 2)):
        A, B = blocks[a], blocks[b]
        if not (len(A.sites) and len(B.sites)):
            continue
        NA, MB = _cross(op, A, B)
        pair = np.einsum("iac,ibd->abcd", NA, MB).reshape(dims[a] * dims[b], dims[a] * dims[b])
        # embed the (a, b) operator into the three-leg space
        P = pair.reshape(dims[a], dims[b], dims[a], dims[b])
        other = 3 - a - b
        full = np.einsum("abcd,ef->abecdf", P, eyes[other])
        order = [a, b, other]
        inv = np.argsort(order)
        full = full.transpose(*inv, *(3 + inv))
        D = dims[0] * dims[1] * dims[2]
        M += full.reshape(D, D)
    return 0.5 * (M + M.T)


_PAIRS = ((0, 1), (0, 2), (1, 2))


def _local_matvec(op: TransverseFieldQubo, blocks: tuple[_Block, _Block, _Block]):
    dims = tuple(b.dim for b in blocks)
    crosses = {}
    for a, b in _PAIRS:
        if len(blocks[a].sites) and len(blocks[b].sites):
            crosses[(a, b)] = _cross(op, blocks[a], blocks[b])

    def mv(x: np.ndarray) -> np.ndarray:
        T = x.reshape(dims)
        out = sum(_apply_leg(blk.H, T, leg) for leg, blk in enumerate(blocks))
        for (a, b), (L, R) in crosses.items():
            perm = (a, b, 3 - a - b)
            out += _apply_pair(L, R, T.transpose(perm)).transpose(np.argsort(perm))
        return out.reshape(-1)

    D = int(np.prod(dims))
    return scipy.sparse.linalg.LinearOperator((D, D), matvec=mv, dtype=float)


def _lowest_eigvec(op, blocks, node: int, guess: np.ndarray) -> tuple[float, np.ndarray]:
    D = int(np.prod([b.dim for b in blocks]))
    if D <= DENSE_LOCAL_LIMIT:
        M = _local_dense(op, blocks)
        w, v = scipy.linalg.eigh(M, subset_by_index=[0, 0])
        return float(w[0]), v[:, 0]
    A = _local_matvec(op, blocks)
    try:
        w, v = scipy.sparse.linalg.eigsh(A, k=1, which="SA", v0=guess.reshape(-1), tol=EIGSH_TOL)
    except scipy.sparse.linalg.ArpackNoConvergence as exc:
        raise EigensolverError("local eigensolver did not converge", node) from exc
    vec = v[:, 0]
    resid = np.linalg.norm(A.matvec(vec) - w[0] * vec)
    if not np.isfinite(resid) or resid > 1e-6 * max(1.0, abs(w[0])):
        raise EigensolverError(f"local eigensolver residual {resid:.3e}", node)
    return float(w[0]), vec


# -- gauge moves ------------------------------------------------------------------------


def _move_up(state: TtnState, node: int) -> None:
    """Shift the orthogonality center from ``node`` to its parent."""
    parent = node // 2
    T = state.tensors[node]
    dl, dr, dp = T.shape
    Q, R = np.linalg.qr(T.reshape(dl * dr, dp))
    state.tensors[node] = Q.reshape(dl, dr, dp)
    P = state.tensors[parent]
    if node == 2 * parent:
        state.tensors[parent] = np.einsum("al,lrq->arq", R, P)
    else:
        state.tensors[parent] = np.einsum("br,lrq->lbq", R, P)
    state.center = parent


def _move_down(state: TtnState, child: int) -> None:
    """Shift the orthogonality center from ``child // 2`` to ``child``."""
    node = child // 2
    T = state.tensors[node]
    dl, dr, dp = T.shape
    if child == 2 * node:
        Q, R = np.linalg.qr(T.transpose(1, 2, 0).reshape(dr * dp, dl))
        state.tensors[node] = Q.reshape(dr, dp, dl).transpose(2, 0, 1)
    else:
        Q, R = np.linalg.qr(T.transpose(0, 2, 1).reshape(dl * dp, dr))
        state.tensors[node] = Q.reshape(dl, dp, dr).transpose(0, 2, 1)
    state.tensors[child] = np.einsum("al,xyl->xya", R, state.tensors[child])
    state.center = child


def _path(a: int, b: int) -> list[int]:
    """Nodes visited walking from a to b (excluding a)."""
    up, down = [], []
    while a != b:
        if a > b:
            a //= 2
            up.append(a)
        else:
            down.append(b)
            b //= 2
    return up + down[::-1]


def _walk(state: TtnState, env: _Environment | None, target: int) -> None:
    for nxt in _path(state.center, target):
        cur = state.center
        if nxt == cur // 2:
            _move_up(state, cur)
            if env is not None:
                env.refresh_down(cur)
        else:
            _move_down(state, nxt)
            if env is not None:
                env.refresh_up(nxt)


def canonicalize(state: TtnState) -> TtnState:
    """Copy with the orthogonality center moved to the root."""
    out = state.copy()
    _walk(out, None, 1)
    return out


def variational_energy(state: TtnState, op: TransverseFieldQubo) -> float:
    """<psi|H'|psi> / <psi|psi> via the root environment."""
    st = canonicalize(state)
    env = _Environment(st, op)
    blocks = env.local_blocks(1)
    T = st.tensors[1].reshape(-1)
    M = _local_dense(op, blocks) if T.size <= DENSE_LOCAL_LIMIT else None
    HT = M @ T if M is not None else _local_matvec(op, blocks).matvec(T)
    return float(T @ HT / (T @ T)) + op.const


def ground_state_search(
    op: TransverseFieldQubo, state: TtnState, sweeps: int = 2, tol: float = 1e-10
) -> TtnState:
    """Single-tensor variational sweeps; returns a new root-canonical state.

    Each sweep visits the internal nodes in depth-first preorder and replaces
    the tensor by the lowest eigenvector of its effective Hamiltonian. The
    energy after every local update is appended to ``energy_history``.
    Stops after ``sweeps`` sweeps or when a sweep lowers the energy by less
    than ``tol`` (relative).
    """
    if op.n != state.n:
        raise InvalidArgumentError(f"operator has {op.n} qubits, state has {state.n}")
    st = state.copy()
    _walk(st, None, 1)
    env = _Environment(st, op)
    order = _preorder(st.n_pad)
    last = None
    for _ in range(max(0, sweeps)):
        for node in order:
            _walk(st, env, node)
            lam, vec = _lowest_eigvec(op, env.local_blocks(node), node, st.tensors[node])
            st.tensors[node] = vec.reshape(st.tensors[node].shape)
            st.energy_history.append(lam + op.const)
        e = st.energy_history[-1]
        if last is not None and abs(last - e) <= tol * max(1.0, abs(e)):
            break
        last = e
    _walk(st, env, 1)
    return st


def _preorder(n_pad: int) -> list[int]:
    out, stack = [], [1]
    while stack:
        k = stack.pop()
        if k >= n_pad:
            continue
        out.append(k)
        stack.extend((2 * k + 1, 2 * k))
    return out


# -- sampling without replacement ----------------------------------------------------------


class _Trie:
    """Compressed binary trie over emitted n-bit keys with mass and count.

    Node layout: [depth, key_prefix, mass, count, child0, child1].
    """

    __slots__ = ("n", "root")

    def __init__(self, n: int):
        self.n = n
        self.root = [0, 0, 0.0, 0, None, None]

    def insert(self, key: int, prob: float) -> None:
        n = self.n
        cur = self.root
        cur[2] += prob
        cur[3] += 1
        while True:
            bit = (key >> (n - 1 - cur[0])) & 1
            child = cur[4 + bit]
            if child is None:
                cur[4 + bit] = [n, key, prob, 1, None, None]
                return
            cd = child[0]
            prefix = key >> (n - cd)
            if prefix == child[1]:
                if cd == n:
                    raise InvalidArgumentError("state emitted twice")
                child[2] += prob
                child[3] += 1
                cur = child
                continue
            common = cd - (prefix ^ child[1]).bit_length()
            mid = [common, key >> (n - common), child[2] + prob, child[3] + 1, None, None]
            cbit = (child[1] >> (cd - 1 - common)) & 1
            mid[4 + cbit] = child
            mid[5 - cbit] = [n, key, prob, 1, None, None]
            cur[4 + bit] = mid
            return

    def step(self, node, depth: int, bit: int):
        """Trie node for the prefix extended by ``bit`` (None if unseen)."""
        if node is None:
            return None
        if node[0] > depth:
            b = (node[1] >> (node[0] - 1 - depth)) & 1
            return node if b == bit else None
        return node[4 + bit]


@dataclass(frozen=True)
class SampledConfig:
    bits: tuple[int, ...]
    probability: float
    energy: int | None = None


def sample_distinct(
    state: TtnState,
    K: int,
    p_stop: float = 0.999,
    hamiltonian: DiagonalCvpHamiltonian | None = None,
    strategy: str = "greedy",
    seed: int = 0,
) -> list[SampledConfig]:
    """Up to K pairwise-distinct bitstrings with exact Born probabilities.

    Each draw descends the tree site by site. At every site the joint
    probability of each extended prefix is the diagonal of the projected
    reduced density matrix on that leaf, and the mass of already-emitted strings with that prefix
    (kept in a compressed trie) is subtracted; fully emitted subtrees are
    excluded outright. ``greedy`` follows the larger remaining mass,
    ``random`` draws proportionally to it. Stops after K strings or when the
    emitted probability reaches ``p_stop``.
    """
    if K < 1:
        raise InvalidArgumentError("K must be >= 1")
    if state.n < 63 and K > (1 << state.n):
        raise CapacityError(f"K = {K} exceeds the 2^{state.n} available states")
    if strategy not in ("greedy", "random"):
        raise InvalidArgumentError(f"unknown strategy {strategy!r}")
    st = state if state.center == 1 else canonicalize(state)
    rng = np.random.default_rng(seed)
    n, n_pad = st.n, st.n_pad
    trie = _Trie(n)
    tensors = st.tensors
    out: list[SampledConfig] = []
    bits = [0] * n
    cursor = [trie.root]
    unit = (np.array([1.0, 0.0]), np.array([0.0, 1.0]))
    one = np.ones(1)

    def choose(site: int, joint: np.ndarray) -> int:
        node = cursor[0]
        cap = 1 << (n - site - 1)
        rem = [0.0, 0.0]
        open_ = [True, True]
        nxt = [None, None]
        for b in (0, 1):
            child = trie.step(node, site, b)
            nxt[b] = child
            if child is not None:
                cnt = child[3] if child[0] >= site + 1 else 0
                open_[b] = cnt < cap
                rem[b] = max(0.0, joint[b] - child[2])
            else:
                rem[b] = max(0.0, joint[b])
        if not open_[0] and not open_[1]:
            raise InvalidArgumentError("sampler entered an exhausted subtree")
        if not open_[0]:
            b = 1
        elif not open_[1]:
            b = 0
        elif rem[0] + rem[1] <= 0.0:
            b = 0 if joint[0] >= joint[1] else 1
        elif strategy == "greedy":
            b = 0 if rem[0] >= rem[1] else 1
        else:
            b = int(rng.random() * (rem[0] + rem[1]) >= rem[0])
        cursor[0] = nxt[b]
        return b

    def descend(node: int, rho: np.ndarray) -> np.ndarray:
        # rho: reduced density matrix on the bond above ``node`` with all
        # earlier sites projected on the chosen bits (trace = prefix prob.)
        if node >= n_pad:
            site = st.site(node)
            if site >= n:
                return one
            b = choose(site, np.diagonal(rho))
            bits[site] = b
            return unit[b]
        T = tensors[node]
        dl, dr, dp = T.shape
        Tm = T.reshape(dl, dr * dp)
        X = (T.reshape(dl * dr, dp) @ rho).reshape(dl, dr * dp)
        phl = descend(2 * node, X @ Tm.T)
        B = (phl @ Tm).reshape(dr, dp)
        phr = descend(2 * node + 1, B @ rho @ B.T)
        return phr @ B

    total = 0.0
    root_rho = np.ones((1, 1))
    cap_all = 1 << n if n < 63 else None
    while len(out) < K and total < p_stop:
        if cap_all is not None and trie.root[3] >= cap_all:
            break
        cursor[0] = trie.root
        amp = float(descend(1, root_rho)[0])
        prob = amp * amp
        key = 0
        for b in bits:
            key = (key << 1) | b
        trie.insert(key, prob)
        total += prob
        cfg = tuple(bits)
        e = qubo_energy(hamiltonian, cfg) if hamiltonian is not None else None
        out.append(SampledConfig(cfg, prob, e))
    return out


# -- checkpoint ---------------------------------------------------------------------------

_MAGIC = b"TTN1"
_HEADER = struct.Struct("<IIIQII")
_NODE = struct.Struct("<IIII")


def save_checkpoint(state: TtnState, fh: io.BufferedIOBase) -> None:
    """Binary layout (little endian).

    header: b"TTN1", u32 n, u32 n_pad, u32 m, u64 seed, u32 center, u32 count
    then per node in increasing heap index: u32 node, u32 dl, u32 dr, u32 dp,
    followed by dl*dr*dp float64 values in row-major (C) order.
    """
    seed = 0 if state.seed is None else state.seed & ((1 << 64) - 1)
    fh.write(_MAGIC)
    fh.write(_HEADER.pack(state.n, state.n_pad, state.m, seed, state.center, len(state.tensors)))
    for node in sorted(state.tensors):
        T = np.ascontiguousarray(state.tensors[node], dtype="<f8")
        fh.write(_NODE.pack(node, *T.shape))
        fh.write(T.tobytes(order="C"))


def load_checkpoint(fh: io.BufferedIOBase) -> TtnState:
    if fh.read(4) != _MAGIC:
        raise InvalidArgumentError("not a TTN checkpoint")
    n, n_pad, m, seed, center, count = _HEADER.unpack(fh.read(_HEADER.size))
    tensors = {}
    for _ in range(count):
        node, dl, dr, dp = _NODE.unpack(fh.read(_NODE.size))
        data = np.frombuffer(fh.read(8 * dl * dr * dp), dtype="<f8")
        tensors[node] = data.reshape(dl, dr, dp).astype(float)
    return TtnState(n=n, m=m, n_pad=n_pad, tensors=tensors, seed=seed, center=center)
