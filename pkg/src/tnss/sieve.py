"""Per-CVP sieving: configurations -> lattice points -> (u, v) -> sr-pairs.

A lattice point with coefficients e over the basis B gives
u = prod_{e_j >= 0} p_j^e_j and v = prod_{e_j < 0} p_j^-e_j. The pair is an
sr-pair when w = u - vN is also smooth over P2 (u is P1-smooth by
construction); then w / u is a product of P2 primes congruent to 1 mod N.
"""

from __future__ import annotations

import csv
import io
import math
import time
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from . import ttn
from .cvp_model import (
    DiagonalCvpHamiltonian,
    bits_from_index,
    build_hamiltonian,
    coefficient_matrix,
    lowest_energy_indices,
)
from .errors import InvalidArgumentError
from .lattice import babai_nearest_plane, build_cvp_instance, lll_reduce
from .numtheory import (
    MultiplicityVector,
    PrimeBasis,
    RsaKey,
    generate_prime_basis,
    smooth_decompose,
    smooth_decompose_many,
)
from .rng import derive_seed

MODES = ("babai-only", "exact-enum", "ttn")
SCATTER_HEADER = ("instance_id", "bitstring", "energy", "distance", "bits_w", "is_sr", "probability")


@dataclass(frozen=True)
class PairSource:
    instance_id: str
    bitstring: str
    energy: int
    distance: float


@dataclass(frozen=True)
class SrPair:
    """u, v >= 1 and w = u - vN != 0, with u and w smooth over ``basis``."""

    u: int
    v: int
    w: int
    e_u: MultiplicityVector
    e_w: MultiplicityVector
    basis: PrimeBasis = field(repr=False, compare=False)
    source: PairSource | None = field(default=None, compare=False)

    @property
    def key(self) -> tuple[int, int]:
        return (self.u, self.v)

    @property
    def e_tilde(self) -> MultiplicityVector:
        """Exponents of the ratio w / u (entries may be negative)."""
        return self.e_w - self.e_u


def pair_from_coeffs(e: Sequence[int], P1: PrimeBasis) -> tuple[int, int]:
    if len(e) != P1.size:
        raise InvalidArgumentError(f"{len(e)} coefficients for {P1.size} primes")
    u = v = 1
    for p, k in zip(P1.primes, e):
        k = int(k)
        if k > 0:
            u *= p**k
        elif k < 0:
            v *= p ** (-k)
    return u, v


def check_smooth_relation(u: int, v: int, N: int, P2: PrimeBasis) -> SrPair | None:
    if u < 1 or v < 1:
        raise InvalidArgumentError("u and v must be >= 1")
    w = u - v * N
    if w == 0:
        raise InvalidArgumentError("degenerate pair: u = vN")
    P2 = P2.with_sign(True)
    e_u = smooth_decompose(u, P2)
    if e_u is None:
        return None
    e_w = smooth_decompose(w, P2)
    if e_w is None:
        return None
    return SrPair(u, v, w, e_u, e_w, P2)


@dataclass(frozen=True)
class ScatterRecord:
    instance_id: str
    bitstring: str
    energy: int
    distance: float
    bits_w: int
    is_sr: bool
    probability: float | None = None


@dataclass
class SieveOutcome:
    sr_pairs: list[SrPair]
    sampled: int
    candidates: int
    scatter: list[ScatterRecord] = field(default_factory=list)
    timings: dict[str, float] = field(default_factory=dict)
    instance_id: str = ""

    @property
    def sr_hits(self) -> int:
        return len(self.sr_pairs)

    @property
    def rho_contribution(self) -> int:
        return len(self.sr_pairs)


def write_scatter_csv(records: Iterable[ScatterRecord], fh: io.TextIOBase) -> None:
    wr = csv.writer(fh, lineterminator="\n")
    wr.writerow(SCATTER_HEADER)
    for r in records:
        prob = "" if r.probability is None else repr(r.probability)
        wr.writerow([r.instance_id, r.bitstring, r.energy, f"{r.distance:.6f}", r.bits_w, int(r.is_sr), prob])


@dataclass(frozen=True)
class TtnParams:
    m: int = 8
    sweeps: int = 2
    alpha: float = 0.1
    p_stop: float = 0.999
    distribution: str = "uniform"
    strategy: str = "greedy"


def _configurations(H: DiagonalCvpHamiltonian, mode: str, K: int, seed: int, tp: TtnParams):
    """(bit matrix, energies, probabilities or None) for the chosen mode."""
    n = H.n
    if mode == "babai-only":
        return np.zeros((1, n), dtype=np.int64), [H.qubo_const], None
    if mode == "exact-enum":
        idx, e = lowest_energy_indices(H, min(K, 1 << n))
        X = np.array([bits_from_index(int(i), n) for i in idx], dtype=np.int64).reshape(-1, n)
        return X, [int(x) for x in e], None
    spec = ttn.make_perturbation(H, tp.alpha, seed=seed, distribution=tp.distribution)
    state = ttn.init_ttn(n, tp.m, seed)
    state = ttn.ground_state_search(ttn.perturb(H, spec), state, sweeps=tp.sweeps)
    K = min(K, 1 << n) if n < 63 else K
    samples = ttn.sample_distinct(state, K, tp.p_stop, hamiltonian=H, strategy=tp.strategy, seed=seed)
    X = np.array([s.bits for s in samples], dtype=np.int64).reshape(-1, n)
    return X, [s.energy for s in samples], [s.probability for s in samples]


def sieve_cvp(
    key: RsaKey | int,
    P1: PrimeBasis,
    P2: PrimeBasis,
    c: float | str = 1,
    seed: int = 0,
    mode: str = "babai-only",
    K: int = 1,
    ttn_params: TtnParams | None = None,
    instance_id: str | None = None,
    collect_scatter: bool = True,
) -> SieveOutcome:
    """Build one CVP, collect candidate lattice points and keep the sr-pairs."""
    if mode not in MODES:
        raise InvalidArgumentError(f"mode must be one of {MODES}")
    if not P1.is_prefix_of(P2):
        raise InvalidArgumentError("P1 must be a prefix of P2")
    if K < 1:
        raise InvalidArgumentError("K must be >= 1")
    N = key.N if isinstance(key, RsaKey) else int(key)
    tp = ttn_params or TtnParams()
    iid = instance_id if instance_id is not None else f"c{c}-s{seed}"
    timings: dict[str, float] = {}

    t0 = time.perf_counter()
    inst = build_cvp_instance(N, P1, c=c, seed=seed)
    red = lll_reduce(inst.basis)
    bab = babai_nearest_plane(red, inst.target)
    H = build_hamiltonian(inst, red, bab)
    t1 = time.perf_counter()
    timings["lattice"] = t1 - t0

    X, energies, probs = _configurations(H, mode, K, seed, tp)
    t2 = time.perf_counter()
    timings["configurations"] = t2 - t1

    E = coefficient_matrix(H, X).tolist()
    P2s = P2.with_sign(True)
    n, pi2 = P1.size, P2.size
    cand: dict[tuple[int, int], int] = {}
    pending_w: list[int] = []
    rows: list[tuple[int, int, int, int]] = []  # (row, u, v, w) for tested candidates
    for r, e in enumerate(E):
        u, v = pair_from_coeffs(e, P1)
        w = u - v * N
        if u == 1 or w == 0 or (u, v) in cand:
            continue
        cand[(u, v)] = r
        rows.append((r, u, v, w))
        pending_w.append(w)
    decomp = smooth_decompose_many(pending_w, P2s)
    t3 = time.perf_counter()
    timings["smoothness"] = t3 - t2

    pairs: list[SrPair] = []
    sr_rows: set[int] = set()
    for (r, u, v, w), e_w in zip(rows, decomp):
        if e_w is None:
            continue
        bits = "".join(map(str, X[r].tolist()))
        e_u = MultiplicityVector(0, tuple(max(int(k), 0) for k in E[r]) + (0,) * (pi2 - n))
        src = PairSource(iid, bits, int(energies[r]), math.sqrt(energies[r]))
        pairs.append(SrPair(u, v, w, e_u, e_w, P2s, src))
        sr_rows.add(r)

    scatter: list[ScatterRecord] = []
    if collect_scatter:
        for r, u, v, w in rows:
            scatter.append(
                ScatterRecord(
                    iid,
                    "".join(map(str, X[r].tolist())),
                    int(energies[r]),
                    math.sqrt(energies[r]),
                    abs(w).bit_length(),
                    r in sr_rows,
                    None if probs is None else probs[r],
                )
            )
    return SieveOutcome(pairs, len(X), len(rows), scatter, timings, iid)


@dataclass(frozen=True)
class AsrplStats:
    mean: float
    std: float
    stderr: float
    per_key: tuple[float, ...]
    rescaled: float
    ell: int
    n: int
    gamma: float


def sample_budget(ell: int, gamma: float) -> int:
    return max(1, math.ceil(ell**gamma))


def estimate_asrpl(
    keys: Sequence[RsaKey],
    n: int,
    gamma: float,
    n_cvp: int,
    mode: str = "exact-enum",
    P2: PrimeBasis | None = None,
    c_schedule: Sequence[float | str] = (1, 1.5, 2),
    ttn_params: TtnParams | None = None,
    master_seed: int = 0,
    pool=None,
) -> AsrplStats:
    """Average sr-pairs per lattice over ``n_cvp`` instances per key.

    The sample budget per CVP is ceil(ell^gamma). ``P2`` defaults to the
    first 2 n^2 primes. ``pool`` may be any executor with ``map``.
    """
    if not keys:
        raise InvalidArgumentError("need at least one key")
    ell = keys[0].bits
    if any(k.bits != ell for k in keys):
        raise InvalidArgumentError("all keys must have the same bit length")
    if P2 is None:
        P2 = generate_prime_basis(2 * n * n, include_sign=True)
    P1 = PrimeBasis(P2.primes[:n])
    K = sample_budget(ell, gamma)
    jobs = [
        (key, P1, P2, c_schedule[j % len(c_schedule)], derive_seed(master_seed, ki, j), mode, K, ttn_params)
        for ki, key in enumerate(keys)
        for j in range(n_cvp)
    ]
    mapper = pool.map if pool is not None else map
    counts = list(mapper(_asrpl_job, jobs))
    per_key = tuple(
        float(np.mean(counts[ki * n_cvp : (ki + 1) * n_cvp])) for ki in range(len(keys))
    )
    allc = np.asarray(counts, dtype=float)
    mean = float(allc.mean())
    std = float(allc.std(ddof=1)) if allc.size > 1 else 0.0
    return AsrplStats(
        mean, std, std / math.sqrt(allc.size), per_key, mean / ell**gamma, ell, n, gamma
    )


def _asrpl_job(args) -> int:
    key, P1, P2, c, seed, mode, K, tp = args
    out = sieve_cvp(key, P1, P2, c=c, seed=seed, mode=mode, K=K, ttn_params=tp, collect_scatter=False)
    return out.rho_contribution
