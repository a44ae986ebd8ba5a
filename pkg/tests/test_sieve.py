from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import factor_naive
from tnss.cvp_model import build_hamiltonian, config_to_lattice_point
from tnss.errors import InvalidArgumentError
from tnss.lattice import babai_nearest_plane, build_cvp_instance, lll_reduce
from tnss.numtheory import MultiplicityVector, PrimeBasis, generate_prime_basis, generate_rsa_key
from tnss.rng import derive_seed
from tnss.sieve import (
    SCATTER_HEADER,
    TtnParams,
    check_smooth_relation,
    estimate_asrpl,
    pair_from_coeffs,
    sample_budget,
    sieve_cvp,
    write_scatter_csv,
)

P3 = PrimeBasis((2, 3, 5))
P5 = PrimeBasis((2, 3, 5, 7, 11))


def _bases(n: int, pi2: int) -> tuple[PrimeBasis, PrimeBasis]:
    P2 = generate_prime_basis(pi2, include_sign=True)
    return PrimeBasis(P2.primes[:n]), P2


def test_pair_from_coeffs_examples():
    assert pair_from_coeffs((0, 1, 2), P3) == (75, 1)
    assert pair_from_coeffs((-1, 1, 0), P3) == (3, 2)
    assert pair_from_coeffs((0, 0, 0), P3) == (1, 1)
    with pytest.raises(InvalidArgumentError):
        pair_from_coeffs((1, 2), P3)


@settings(max_examples=200)
@given(st.lists(st.integers(-6, 6), min_size=5, max_size=5))
def test_pair_from_coeffs_ratio(e):
    u, v = pair_from_coeffs(e, P5)
    assert u >= 1 and v >= 1 and math.gcd(u, v) == 1
    # u / v equals prod p^e exactly
    num = math.prod(p**k for p, k in zip(P5.primes, e) if k > 0)
    den = math.prod(p ** (-k) for p, k in zip(P5.primes, e) if k < 0)
    assert (u, v) == (num, den)


def test_smooth_relation_seventy_five():
    pair = check_smooth_relation(75, 1, 77, P3)
    assert pair.w == -2
    assert pair.e_w == MultiplicityVector(1, (1, 0, 0))
    assert pair.e_u == MultiplicityVector(0, (0, 1, 2))
    assert pair.e_tilde == MultiplicityVector(1, (1, -1, -2))


def test_smooth_relation_eighty_one():
    pair = check_smooth_relation(81, 1, 77, P3)
    assert pair.w == 4
    assert pair.e_tilde == MultiplicityVector(0, (2, -4, 0))
    assert all(k % 2 == 0 for k in pair.e_tilde.e)


def test_smooth_relation_absent_when_w_not_smooth():
    assert check_smooth_relation(12, 1, 77, P5) is None
    # u itself not smooth
    assert check_smooth_relation(13, 1, 77, P5) is None


def test_smooth_relation_guards():
    with pytest.raises(InvalidArgumentError):
        check_smooth_relation(77, 1, 77, P5)
    with pytest.raises(InvalidArgumentError):
        check_smooth_relation(0, 1, 77, P5)
    with pytest.raises(InvalidArgumentError):
        check_smooth_relation(3, 0, 77, P5)


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 5000), st.integers(1, 50), st.integers(15, 3000))
def test_smooth_relation_matches_factorization(u, v, N):
    P2 = generate_prime_basis(10)
    if u == v * N:
        return
    pair = check_smooth_relation(u, v, N, P2)
    smooth = lambda x: all(p <= 29 for p in factor_naive(x))
    assert (pair is not None) == (smooth(u) and smooth(u - v * N))
    if pair is not None:
        basis = P2.with_sign()
        assert pair.e_u.value(basis) == u
        assert pair.e_w.value(basis) == u - v * N
        assert (pair.u - pair.w) % N == 0


def test_babai_only_single_candidate():
    key = generate_rsa_key(40, 3)
    P1, P2 = _bases(8, 128)
    out = sieve_cvp(key, P1, P2, c=1, seed=0, mode="babai-only")
    assert out.sampled == 1
    assert out.candidates == 1 and out.sr_hits == 0
    assert len(out.scatter) == 1 and not out.scatter[0].is_sr


def test_babai_only_can_hit():
    # N = 77 is tiny enough that Babai's point is usually already an sr-pair
    P1, P2 = _bases(3, 5)
    hits = [sieve_cvp(77, P1, P2, c=1, seed=s).sr_hits for s in range(10)]
    assert max(hits) == 1


def _reconstruct(pair, N, P1, c, seed):
    inst = build_cvp_instance(N, P1, c=c, seed=seed)
    red = lll_reduce(inst.basis)
    H = build_hamiltonian(inst, red, babai_nearest_plane(red, inst.target))
    bits = tuple(int(x) for x in pair.source.bitstring)
    b, e = config_to_lattice_point(H, bits)
    return inst, H, bits, b, e


@pytest.mark.parametrize("seed", range(4))
def test_exact_enum_pairs_reconstruct(seed):
    key = generate_rsa_key(24, seed)
    n = 8
    P1, P2 = _bases(n, 2 * n * n)
    out = sieve_cvp(key, P1, P2, c="1.5", seed=seed, mode="exact-enum", K=1 << n)
    assert out.sampled == 1 << n
    assert out.sr_hits <= out.candidates <= out.sampled
    assert len({p.key for p in out.sr_pairs}) == out.sr_hits
    basis = P2.with_sign()
    for pair in out.sr_pairs:
        inst, H, bits, b, e = _reconstruct(pair, key.N, P1, "1.5", seed)
        assert inst.point(e) == b
        assert pair_from_coeffs(e, P1) == (pair.u, pair.v)
        assert pair.e_u.value(basis) == pair.u
        assert pair.e_w.value(basis) == pair.w == pair.u - pair.v * key.N
        assert pair.u > 1 and pair.w != 0
        assert pair.source.distance ** 2 == pytest.approx(pair.source.energy)
    for rec in out.scatter:
        assert rec.distance ** 2 == pytest.approx(rec.energy, rel=1e-12)
        assert len(rec.bitstring) == n


def test_mode_monotonicity():
    for seed in range(12):
        key = generate_rsa_key(20, seed)
        P1, P2 = _bases(6, 72)
        babai = sieve_cvp(key, P1, P2, c=1, seed=seed, mode="babai-only")
        full = sieve_cvp(key, P1, P2, c=1, seed=seed, mode="exact-enum", K=64)
        assert {p.key for p in babai.sr_pairs} <= {p.key for p in full.sr_pairs}


def test_exact_enum_first_candidate_is_ground_state():
    key = generate_rsa_key(30, 2)
    P1, P2 = _bases(8, 128)
    out = sieve_cvp(key, P1, P2, mode="exact-enum", K=16)
    energies = [r.energy for r in out.scatter]
    assert energies == sorted(energies)


def test_ttn_mode_probabilities_and_energies():
    key = generate_rsa_key(30, 5)
    P1, P2 = _bases(8, 128)
    tp = TtnParams(m=4, sweeps=2, alpha=0.1, p_stop=2.0)
    out = sieve_cvp(key, P1, P2, c=1, seed=3, mode="ttn", K=256, ttn_params=tp)
    assert out.sampled == 256
    probs = [r.probability for r in out.scatter]
    assert all(p is not None and 0 <= p <= 1 for p in probs)
    assert sum(probs) <= 1 + 1e-6
    enum = sieve_cvp(key, P1, P2, c=1, seed=3, mode="exact-enum", K=256)
    # full support: both modes see the same candidate set
    assert {p.key for p in out.sr_pairs} == {p.key for p in enum.sr_pairs}


def test_sieve_argument_checks():
    P1, P2 = _bases(4, 10)
    with pytest.raises(InvalidArgumentError):
        sieve_cvp(77, P1, P2, mode="quantum")
    with pytest.raises(InvalidArgumentError):
        sieve_cvp(77, PrimeBasis((3, 5)), P2)
    with pytest.raises(InvalidArgumentError):
        sieve_cvp(77, P1, P2, K=0)


def test_scatter_csv_header_and_rows():
    key = generate_rsa_key(20, 1)
    P1, P2 = _bases(5, 50)
    out = sieve_cvp(key, P1, P2, mode="exact-enum", K=32, instance_id="inst-7")
    buf = io.StringIO()
    write_scatter_csv(out.scatter, buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "instance_id,bitstring,energy,distance,bits_w,is_sr,probability"
    assert tuple(lines[0].split(",")) == SCATTER_HEADER
    rows = list(csv.DictReader(io.StringIO(buf.getvalue())))
    assert len(rows) == out.candidates
    assert all(r["instance_id"] == "inst-7" and r["probability"] == "" for r in rows)
    assert sum(int(r["is_sr"]) for r in rows) == out.sr_hits


def test_sample_budget():
    assert sample_budget(30, 2) == 900
    assert sample_budget(70, 3) == 343000
    assert sample_budget(10, 0.5) == 4


def test_asrpl_single_lattice_equals_count():
    key = generate_rsa_key(24, 4)
    P1, P2 = _bases(6, 72)
    st_ = estimate_asrpl([key], 6, 2, 1, mode="exact-enum", P2=P2, master_seed=9)
    direct = sieve_cvp(key, P1, P2, c=1, seed=derive_seed(9, 0, 0), mode="exact-enum", K=576)
    assert st_.mean == direct.sr_hits
    assert st_.per_key == (float(direct.sr_hits),)
    assert st_.rescaled == pytest.approx(direct.sr_hits / 24**2)


def test_asrpl_positive_at_reference_rank():
    keys = [generate_rsa_key(30, s) for s in range(10)]
    st_ = estimate_asrpl(keys, 8, 2, 5, mode="exact-enum")
    assert st_.mean > 0
    assert len(st_.per_key) == 10
    assert st_.stderr == pytest.approx(st_.std / math.sqrt(50))


def test_asrpl_rejects_mixed_lengths():
    with pytest.raises(InvalidArgumentError):
        estimate_asrpl([generate_rsa_key(20, 0), generate_rsa_key(24, 0)], 4, 2, 1)
    with pytest.raises(InvalidArgumentError):
        estimate_asrpl([], 4, 2, 1)


def test_asrpl_pool_matches_serial():
    keys = [generate_rsa_key(20, s) for s in range(3)]
    serial = estimate_asrpl(keys, 5, 2, 3)
    with ThreadPoolExecutor(2) as pool:
        pooled = estimate_asrpl(keys, 5, 2, 3, pool=pool)
    assert serial == pooled
    assert np.isfinite(serial.mean)
