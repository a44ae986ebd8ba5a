"""End-to-end factoring loop, hyperparameter policies and experiment harness."""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence, TextIO

import numpy as np

from .congruence import FactorResult, process
from .errors import ConsistencyError, InvalidArgumentError
from .numtheory import PrimeBasis, RsaKey, generate_prime_basis, generate_rsa_key
from .rng import derive_seed
from .sieve import MODES, SieveOutcome, SrPair, TtnParams, sieve_cvp

LOG_VERSION = 1
PI2_POLICIES = ("two_n_ell", "two_pi1_squared", "sublinear")

# Lattice ranks at which exact enumeration factored keys of each bit length.
REFERENCE_RANKS = {10: 4, 20: 7, 30: 8, 40: 10, 50: 12, 60: 15}


def sublinear_rank(ell: int) -> int:
    """ell / log2(ell) rounded to the nearest integer (at least 2)."""
    return max(2, round(ell / math.log2(ell)))


@dataclass
class Hyperparameters:
    n: int = 8
    pi2_policy: str = "two_pi1_squared"  # or two_n_ell, sublinear, explicit:<k>
    gamma: float | None = None
    c_schedule: tuple[float, ...] = (1.0, 1.5, 2.0)
    m: int = 8
    sweeps: int = 2
    alpha: float = 0.1
    p_stop: float = 0.999
    n_cvp: int = 500
    mode: str = "exact-enum"
    seed: int = 0
    budget: int | None = None  # per-CVP sample count, overrides gamma
    stride: int | None = None  # new sr-pairs between processing attempts
    workers: int = 1

    def ranks(self, ell: int) -> tuple[int, int]:
        """(pi1, pi2) for a key of ``ell`` bits under the policy."""
        pol = self.pi2_policy
        if pol == "sublinear":
            k = sublinear_rank(ell)
            return k, k
        if pol == "two_n_ell":
            return self.n, 2 * self.n * ell
        if pol == "two_pi1_squared":
            return self.n, 2 * self.n * self.n
        if pol.startswith("explicit:"):
            k = int(pol.split(":", 1)[1])
            if k < self.n:
                raise InvalidArgumentError("explicit pi2 must be >= n")
            return self.n, k
        raise InvalidArgumentError(f"unknown pi2 policy {pol!r}")

    def sample_count(self, ell: int, n: int) -> int:
        """Per-CVP sample budget K.

        ``budget`` wins; otherwise ceil(ell^gamma); exact enumeration with
        no gamma uses the full 2^n spectrum.
        """
        if self.mode == "babai-only":
            return 1
        if self.budget is not None:
            return self.budget
        if self.gamma is None:
            if self.mode == "exact-enum":
                return 1 << n
            raise InvalidArgumentError("ttn mode needs gamma or budget")
        return max(1, math.ceil(ell**self.gamma))

    def validate(self, ell: int) -> None:
        if self.mode not in MODES:
            raise InvalidArgumentError(f"mode must be one of {MODES}")
        n, pi2 = self.ranks(ell)
        if n < 2 or pi2 < n:
            raise InvalidArgumentError(f"need 2 <= n <= pi2, got n={n}, pi2={pi2}")
        if self.gamma is not None and self.gamma > n * math.log(2) / math.log(ell):
            raise InvalidArgumentError(
                f"gamma={self.gamma} asks for more samples than the 2^{n} states"
            )
        if self.n_cvp < 1 or self.m < 1 or self.sweeps < 0 or self.alpha < 0 or self.workers < 1:
            raise InvalidArgumentError("n_cvp, m, workers >= 1; sweeps, alpha >= 0")
        if not self.c_schedule:
            raise InvalidArgumentError("c_schedule must not be empty")

    def ttn_params(self) -> TtnParams:
        return TtnParams(m=self.m, sweeps=self.sweeps, alpha=self.alpha, p_stop=self.p_stop)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["c_schedule"] = list(self.c_schedule)
        return d


def _parse_value(name: str, text: str):
    text = text.strip()
    if name == "c_schedule":
        return tuple(float(x) for x in text.replace(",", " ").split())
    if name in ("pi2_policy", "mode"):
        return text
    if name in ("gamma", "budget", "stride"):
        if text.lower() in ("", "none"):
            return None
        return float(text) if name == "gamma" else int(text)
    if name in ("alpha", "p_stop"):
        return float(text)
    return int(text)


def parse_config(text: str) -> dict:
    """``name = value`` lines; '#' starts a comment; names are field names."""
    names = {f.name for f in dataclasses.fields(Hyperparameters)}
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InvalidArgumentError(f"config line {lineno}: expected name = value")
        name, value = (s.strip() for s in line.split("=", 1))
        if name not in names:
            raise InvalidArgumentError(f"config line {lineno}: unknown field {name!r}")
        out[name] = _parse_value(name, value)
    return out


def load_hyperparameters(path: str | None = None, **overrides) -> Hyperparameters:
    values = {}
    if path is not None:
        with open(path) as fh:
            values.update(parse_config(fh.read()))
    values.update({k: v for k, v in overrides.items() if v is not None})
    return Hyperparameters(**values)


# -- the factoring loop -------------------------------------------------------------


@dataclass
class RunReport:
    N: int
    factors: FactorResult | None
    cvps_used: int
    sr_pairs: int
    wall_time: float
    counters: dict[str, int] = field(default_factory=dict)
    stage_times: dict[str, float] = field(default_factory=dict)
    n: int = 0
    pi2: int = 0

    @property
    def success(self) -> bool:
        return self.factors is not None

    def to_dict(self) -> dict:
        return {
            "N": str(self.N),
            "factors": None if self.factors is None else self.factors.to_dict(),
            "cvps_used": self.cvps_used,
            "sr_pairs": self.sr_pairs,
            "n": self.n,
            "pi2": self.pi2,
            "counters": dict(self.counters),
            "wall_time": self.wall_time,
            "stage_times": dict(self.stage_times),
        }


class _Gf2Tracker:
    """Incremental GF(2) rank of parity columns; counts new dependencies."""

    def __init__(self):
        self.pivots: dict[int, int] = {}
        self.dependencies = 0

    def add(self, pair: SrPair) -> None:
        et = pair.e_tilde
        vec = et.e0 & 1
        for j, k in enumerate(et.e):
            if k & 1:
                vec |= 1 << (j + 1)
        while vec:
            top = vec.bit_length() - 1
            if top not in self.pivots:
                self.pivots[top] = vec
                return
            vec ^= self.pivots[top]
        self.dependencies += 1


def _cvp_job(args) -> SieveOutcome:
    N, P1, P2, c, seed, mode, K, tp, iid = args
    return sieve_cvp(N, P1, P2, c=c, seed=seed, mode=mode, K=K, ttn_params=tp, instance_id=iid, collect_scatter=False)


def _log(fh: TextIO | None, record: dict) -> None:
    if fh is not None:
        fh.write(json.dumps(record, sort_keys=True) + "\n")


def run_factor(key: RsaKey, hp: Hyperparameters, log: TextIO | None = None) -> RunReport:
    """Sieve CVPs until the congruence step factors N or the budget runs out.

    Instance j uses seed derive_seed(hp.seed, j) and precision
    c_schedule[j mod len]. Processing is attempted after a CVP when the pool
    grew by ``stride`` pairs since the last attempt, or when a new GF(2)
    dependency appeared. Results depend only on ``hp`` and ``key``.
    """
    ell = key.bits
    hp.validate(ell)
    n, pi2 = hp.ranks(ell)
    P2 = generate_prime_basis(pi2, include_sign=True)
    P1 = PrimeBasis(P2.primes[:n])
    K = hp.sample_count(ell, n)
    stride = hp.stride if hp.stride is not None else max(32, pi2 // 100)
    tp = hp.ttn_params()
    t_start = time.perf_counter()
    _log(log, {"v": LOG_VERSION, "event": "start", "N": str(key.N), "bits": ell, "n": n, "pi2": pi2,
               "K": K, "hp": hp.to_dict()})

    pool: dict[tuple[int, int], SrPair] = {}
    tracker = _Gf2Tracker()
    counters = {"sampled": 0, "candidates": 0, "sr_hits": 0, "attempts": 0}
    stage = {"lattice": 0.0, "configurations": 0.0, "smoothness": 0.0, "processing": 0.0}
    since_attempt, deps_seen = 0, 0
    result: FactorResult | None = None
    used = 0

    def jobs(start: int, stop: int):
        for j in range(start, stop):
            c = hp.c_schedule[j % len(hp.c_schedule)]
            yield (key.N, P1, P2, c, derive_seed(hp.seed, j), hp.mode, K, tp, f"cvp{j}")

    executor = ProcessPoolExecutor(hp.workers) if hp.workers > 1 else None
    try:
        j = 0
        while j < hp.n_cvp and result is None:
            batch = list(jobs(j, min(hp.n_cvp, j + hp.workers)))
            outs = executor.map(_cvp_job, batch) if executor else map(_cvp_job, batch)
            for args, out in zip(batch, outs):
                used += 1
                new = 0
                for p in out.sr_pairs:
                    if p.key not in pool:
                        pool[p.key] = p
                        tracker.add(p)
                        new += 1
                counters["sampled"] += out.sampled
                counters["candidates"] += out.candidates
                counters["sr_hits"] += out.sr_hits
                for k, v in out.timings.items():
                    stage[k] = stage.get(k, 0.0) + v
                since_attempt += new
                attempted = False
                if since_attempt >= stride or (new and tracker.dependencies > deps_seen):
                    t0 = time.perf_counter()
                    counters["attempts"] += 1
                    result = process(list(pool.values()), key.N, pi2)
                    stage["processing"] += time.perf_counter() - t0
                    since_attempt, deps_seen, attempted = 0, tracker.dependencies, True
                _log(log, {"v": LOG_VERSION, "event": "cvp", "index": used - 1, "seed": args[4],
                           "c": args[3], "sampled": out.sampled, "candidates": out.candidates,
                           "sr_new": new, "pool": len(pool), "rank": len(tracker.pivots),
                           "attempted": attempted, "timings": out.timings})
                if result is not None:
                    break
            j += len(batch)
    finally:
        if executor is not None:
            executor.shutdown()

    if result is not None and result.p * result.q != key.N:
        raise ConsistencyError("reported factors do not multiply to N")
    report = RunReport(key.N, result, used, len(pool), time.perf_counter() - t_start,
                       counters, stage, n, pi2)
    _log(log, {"v": LOG_VERSION, "event": "result", **{k: v for k, v in report.to_dict().items()
                                                       if k not in ("wall_time", "stage_times")},
               "wall_time": report.wall_time})
    return report


# -- experiments -------------------------------------------------------------------------

COMPARE_SERIES = ("babai-beyond", "enum-sublinear", "enum-beyond")
COMPARE_HEADER = ("ell", "series", "key", "n", "pi2", "n_cvp", "rho_sr", "factored")


@dataclass(frozen=True)
class CompareRow:
    ell: int
    series: str
    key: int
    n: int
    pi2: int
    n_cvp: int
    rho_sr: float
    factored: bool


def _series_hp(series: str, template: Hyperparameters, n: int) -> Hyperparameters:
    if series == "babai-beyond":
        return dataclasses.replace(template, n=n, mode="babai-only", pi2_policy="two_pi1_squared")
    if series == "enum-sublinear":
        return dataclasses.replace(template, n=n, mode="exact-enum", pi2_policy="sublinear", gamma=None)
    if series == "enum-beyond":
        return dataclasses.replace(template, n=n, mode="exact-enum", pi2_policy="two_pi1_squared", gamma=None)
    raise InvalidArgumentError(f"unknown series {series!r}")


def experiment_compare(
    ells: Sequence[int],
    series: Sequence[str] = COMPARE_SERIES,
    template: Hyperparameters | None = None,
    keys_per_ell: int = 1,
    key_seed: int = 0,
    n_max: int = 20,
) -> list[CompareRow]:
    """Sublinear vs beyond-sublinear comparison.

    For the beyond-sublinear series the rank starts at the sublinear value
    and grows by one until the key factors (or ``n_max`` is reached).
    """
    template = template or Hyperparameters()
    rows = []
    for ell in ells:
        for ki in range(keys_per_ell):
            key = generate_rsa_key(ell, derive_seed(key_seed, ell, ki))
            for s in series:
                n = sublinear_rank(ell)
                while True:
                    hp = _series_hp(s, template, n)
                    rep = run_factor(key, hp)
                    rho = rep.counters["sr_hits"] / rep.cvps_used
                    done = rep.success or s == "enum-sublinear" or n >= n_max
                    if done:
                        rows.append(CompareRow(ell, s, ki, rep.n, rep.pi2, rep.cvps_used, rho, rep.success))
                        break
                    n += 1
    return rows


def write_compare_csv(rows: Sequence[CompareRow], fh: io.TextIOBase) -> None:
    wr = csv.writer(fh, lineterminator="\n")
    wr.writerow(COMPARE_HEADER)
    for r in rows:
        wr.writerow([r.ell, r.series, r.key, r.n, r.pi2, r.n_cvp, f"{r.rho_sr:.6g}", int(r.factored)])


def summarize_compare(rows: Sequence[CompareRow]) -> dict[tuple[int, str], dict]:
    """Per (ell, series): median rank, mean CVP count, mean rho_sr, success rate."""
    out = {}
    for key in sorted({(r.ell, r.series) for r in rows}):
        grp = [r for r in rows if (r.ell, r.series) == key]
        out[key] = {
            "n": float(np.median([r.n for r in grp])),
            "n_cvp": float(np.mean([r.n_cvp for r in grp])),
            "rho_sr": float(np.mean([r.rho_sr for r in grp])),
            "success": sum(r.factored for r in grp) / len(grp),
        }
    return out
