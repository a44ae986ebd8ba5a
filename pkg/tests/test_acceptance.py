"""Acceptance checks, one PASS/FAIL line per criterion.

Run the per-commit set with ``pytest tests/test_acceptance.py -s`` and the
hours-long statistical reproductions with ``--nightly`` added.
"""

from __future__ import annotations

import itertools
import math
import random
import time

import numpy as np
import pytest

from oracles import gf2_kernel_bruteforce, squared_distance_of_bits
from tnss import ttn
from tnss.congruence import extract_factors, kernel_basis, ParityMatrix
from tnss.cvp_model import bit_matrix, build_hamiltonian, energies
from tnss.driver import REFERENCE_RANKS, Hyperparameters, run_factor
from tnss.lattice import babai_nearest_plane, build_cvp_instance, lll_reduce
from tnss.numtheory import PrimeBasis, generate_prime_basis, generate_rsa_key
from tnss.rng import derive_seed
from tnss.scaling import cost_curve
from tnss.sieve import TtnParams, estimate_asrpl, sieve_cvp

N_100 = 791339171587617359026543582309
P_100, Q_100 = 428949705601033, 1844829734709373


def _hamiltonian(N, n, c, seed):
    inst = build_cvp_instance(N, generate_prime_basis(n), c=c, seed=seed)
    red = lll_reduce(inst.basis)
    return build_hamiltonian(inst, red, babai_nearest_plane(red, inst.target))


# -- 1: end-to-end factoring at the reference ranks ------------------------------------------


@pytest.mark.slow
def test_criterion_1_end_to_end_factoring(acceptance):
    parts, ok = [], True
    for ell in (10, 20, 30, 40):
        t0 = time.perf_counter()
        wins = 0
        for k in range(20):
            key = generate_rsa_key(ell, derive_seed(1, ell, k))
            hp = Hyperparameters(n=REFERENCE_RANKS[ell], mode="exact-enum", n_cvp=500, seed=k)
            rep = run_factor(key, hp)
            if rep.success:
                assert rep.factors.p * rep.factors.q == key.N
                wins += 1
        dt = time.perf_counter() - t0
        ok &= wins >= 16 and dt < 1800
        parts.append(f"l={ell}: {wins}/20 in {dt:.1f}s")
    acceptance(1, ok, "; ".join(parts) + " (need >= 16/20 and < 1800 s per bucket)")


# -- 2: the 100-bit verification vector ---------------------------------------------------------


def test_criterion_2_hundred_bit_vector(acceptance):
    product_ok = P_100 * Q_100 == N_100
    # X = Y (mod p), X = -Y (mod q) by CRT, so X^2 = Y^2 (mod N) with X != +-Y
    rng = random.Random(100)
    recovered = []
    for _ in range(5):
        Y = rng.randrange(2, N_100)
        X = (Y * Q_100 * pow(Q_100, -1, P_100) - Y * P_100 * pow(P_100, -1, Q_100)) % N_100
        assert (X * X - Y * Y) % N_100 == 0
        f = extract_factors(X, Y, N_100)
        recovered.append(f is not None and sorted(f) == [P_100, Q_100])
    ok = product_ok and all(recovered)
    acceptance(2, ok, f"p*q == N: {product_ok}; factors recovered from {sum(recovered)}/5 constructed congruences")


# -- 3: the sublinear policy fails ----------------------------------------------------------------


@pytest.mark.slow
def test_criterion_3_sublinear_babai_fails(acceptance):
    parts, total = [], 0
    for ell in (10, 20, 30, 40, 50, 60):
        wins = 0
        for k in range(10):
            key = generate_rsa_key(ell, derive_seed(3, ell, k))
            hp = Hyperparameters(pi2_policy="sublinear", mode="babai-only", n_cvp=2000, seed=k)
            wins += run_factor(key, hp).success
        total += wins
        parts.append(f"l={ell}: {wins}/10")
    acceptance(3, total == 0, "factored " + ", ".join(parts) + " (need 0 everywhere)")


# -- 4: oracle equivalence suite --------------------------------------------------------------------


def _random_state_check(rng) -> tuple[bool, bool, bool]:
    n = int(rng.integers(2, 17))
    state = ttn.init_ttn(n, int(rng.choice([1, 2, 4, 8])), int(rng.integers(1 << 30)))
    psi = ttn.to_dense(state)
    idx = rng.integers(0, 1 << n, min(64, 1 << n))
    amp_ok = all(
        abs(ttn.amplitude(state, [(int(k) >> (n - 1 - j)) & 1 for j in range(n)]) - psi[k]) <= 1e-8 for k in idx
    )
    K = int(min(1 << n, rng.integers(1, 400)))
    got = ttn.sample_distinct(state, K, p_stop=1.0, strategy=str(rng.choice(["greedy", "random"])))
    dup_ok = len({c.bits for c in got}) == len(got)
    full_ok = True
    if n <= 12:
        full = ttn.sample_distinct(state, 1 << n, p_stop=2.0)
        full_ok = len({c.bits for c in full}) == 1 << n and abs(sum(c.probability for c in full) - 1) <= 1e-6
    return amp_ok, dup_ok, full_ok


def test_criterion_4_oracle_suite(acceptance):
    rng = np.random.default_rng(4)
    # (a) QUBO energy against the direct squared distance, every bitstring
    a_ok = True
    for i in range(50):
        n = int(rng.integers(2, 13))
        H = _hamiltonian(generate_rsa_key(int(rng.integers(16, 61)), i).N, n, str(rng.choice(["1", "1.5", "2"])), i)
        E = energies(H, bit_matrix(np.arange(1 << n), n))
        a_ok &= all(int(e) == squared_distance_of_bits(H, bits) for e, bits in
                    zip(E.tolist(), itertools.product((0, 1), repeat=n)))
    # (b), (c) TTN amplitudes, distinctness and coverage
    checks = [_random_state_check(rng) for _ in range(40)]
    b_ok = all(c[0] for c in checks)
    c_ok = all(c[1] and c[2] for c in checks)
    # (d) GF(2) kernel against exhaustive search
    d_ok = True
    py = random.Random(4)
    for _ in range(60):
        D, rows = py.randint(1, 14), py.randint(1, 12)
        cols = [py.getrandbits(rows) for _ in range(D)]
        basis = kernel_basis(ParityMatrix(rows, tuple(cols), tuple((i, 1) for i in range(D))))
        brute = gf2_kernel_bruteforce(cols, rows)
        d_ok &= len(brute) == 2 ** len(basis) - 1 and all(t in brute for t in basis)
    ok = a_ok and b_ok and c_ok and d_ok
    acceptance(4, ok, f"(a) qubo=distance {a_ok}; (b) amplitudes {b_ok}; (c) sampling {c_ok}; (d) kernel {d_ok}")


# -- 5, 6: the large ttn sieve (nightly) -------------------------------------------------------------

ELL_70_KEY = generate_rsa_key(70, 1)
SIEVE_K = 70**3


def _ell70_sieve(seed: int, c, m: int):
    P2 = generate_prime_basis(4480, include_sign=True)
    P1 = PrimeBasis(P2.primes[:32])
    # p_stop = 1 so that the run is limited by K alone
    tp = TtnParams(m=m, sweeps=2, alpha=0.1, p_stop=1.0)
    return sieve_cvp(ELL_70_KEY, P1, P2, c=c, seed=seed, mode="ttn", K=SIEVE_K, ttn_params=tp)


@pytest.mark.nightly
def test_criterion_5_ttn_sieve_yield(acceptance):
    schedule = (1, 1.5, 2)
    rhos, low = [], []
    for j in range(10):
        out = _ell70_sieve(derive_seed(5, j), schedule[j % 3], 8)
        rhos.append(out.sr_hits)
        probs = [r.probability for r in out.scatter if r.is_sr]
        low.append(min(probs) if probs else 1.0)
        print(f"  instance {j}: c={schedule[j % 3]} sampled={out.sampled} rho={out.sr_hits} min_p={low[-1]:.3g}")
    inside = sum(200 <= r <= 700 for r in rhos)
    reach = min(low)
    ok = inside >= 7 and reach <= 1e-5
    acceptance(5, ok, f"rho per instance {rhos}; {inside}/10 in [200, 700]; min sr probability {reach:.3g}")


@pytest.mark.nightly
def test_criterion_6_bond_dimension_insensitivity(acceptance):
    seed = derive_seed(6, 0)
    r8 = _ell70_sieve(seed, 1.5, 8).sr_hits
    r16 = _ell70_sieve(seed, 1.5, 16).sr_hits
    rel = abs(r16 - r8) / max(r8, 1)
    acceptance(6, rel < 0.2, f"rho(m=8) = {r8}, rho(m=16) = {r16}, relative difference {rel:.3f} (need < 0.2)")


# -- 7: cost-model crossover --------------------------------------------------------------------------


def test_criterion_7_cost_crossover(acceptance):
    c7, c9 = cost_curve(1000, 7), cost_curve(1000, 9)
    ok = c7.T1 > c7.T2 and c9.T2 > c9.T1
    acceptance(
        7, ok,
        f"gamma=7: T1={c7.T1:.3e} T2={c7.T2:.3e} (n={c7.n:.0f}); gamma=9: T1={c9.T1:.3e} T2={c9.T2:.3e} (n={c9.n:.0f})",
    )


# -- 8: AsrPL trend in n at fixed ell -------------------------------------------------------------------


@pytest.mark.slow
def test_criterion_8_asrpl_trend(acceptance):
    keys = [generate_rsa_key(30, derive_seed(8, k)) for k in range(10)]
    stats = {}
    for n in (8, 10, 12):
        stats[n] = estimate_asrpl(keys, n, 2.0, 50, mode="exact-enum", master_seed=8)
    reversals = []
    for a, b in ((8, 10), (10, 12)):
        pooled = math.hypot(stats[a].stderr, stats[b].stderr)
        if stats[b].mean < stats[a].mean - pooled:
            reversals.append(f"{a}->{b}")
    desc = ", ".join(f"n={n}: {s.mean:.2f} +- {s.stderr:.2f}" for n, s in stats.items())
    acceptance(8, not reversals, f"{desc}; reversals beyond one pooled SE: {reversals or 'none'}")
