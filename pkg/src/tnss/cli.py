"""Command line entry point: ``tnss <command> ...``."""

from __future__ import annotations

import argparse
import contextlib
import csv
import json
import sys

from .driver import (
    COMPARE_SERIES,
    Hyperparameters,
    experiment_compare,
    load_hyperparameters,
    run_factor,
    write_compare_csv,
)
from .errors import DomainError, TnssError
from .numtheory import PrimeBasis, RsaKey, generate_prime_basis, generate_rsa_key
from .rng import derive_seed
from .scaling import ScalingParams, bond_dim_law, cost_model, qubits_needed
from .sieve import MODES, TtnParams, estimate_asrpl, sieve_cvp, write_scatter_csv


def _open_out(path: str | None):
    if path and path != "-":
        return open(path, "w", newline="")
    return contextlib.nullcontext(sys.stdout)


def _read_key(path: str) -> RsaKey:
    with open(path) as fh:
        return RsaKey.from_json(fh.read())


def _add_hp_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key = value file with Hyperparameters fields")
    p.add_argument("--rank", dest="n", type=int)
    p.add_argument("--pi2-policy", dest="pi2_policy")
    p.add_argument("--gamma", type=float)
    p.add_argument("--mode", choices=MODES)
    p.add_argument("--bond-dim", dest="m", type=int)
    p.add_argument("--sweeps", type=int)
    p.add_argument("--alpha", type=float)
    p.add_argument("--p-stop", dest="p_stop", type=float)
    p.add_argument("--cvp-budget", dest="n_cvp", type=int)
    p.add_argument("--samples", dest="budget", type=int, help="per-CVP sample count")
    p.add_argument("--stride", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--seed", type=int)


def _hp(args) -> Hyperparameters:
    names = ("n", "pi2_policy", "gamma", "mode", "m", "sweeps", "alpha", "p_stop", "n_cvp", "budget",
             "stride", "workers", "seed")
    return load_hyperparameters(args.config, **{k: getattr(args, k) for k in names})


def cmd_gen_key(args) -> int:
    key = generate_rsa_key(args.bits, args.seed)
    with _open_out(args.out) as fh:
        fh.write(key.to_json() + "\n")
    return 0


def cmd_factor(args) -> int:
    key = _read_key(args.n_file)
    hp = _hp(args)
    if args.log:
        with open(args.log, "w") as log:
            rep = run_factor(key, hp, log)
    else:
        rep = run_factor(key, hp)
    print(json.dumps(rep.to_dict(), indent=2))
    return 0 if rep.success else 2


def cmd_sieve_cvp(args) -> int:
    key = _read_key(args.n_file)
    hp = _hp(args)
    hp.validate(key.bits)
    n, pi2 = hp.ranks(key.bits)
    P2 = generate_prime_basis(pi2, include_sign=True)
    P1 = PrimeBasis(P2.primes[:n])
    K = hp.sample_count(key.bits, n)
    out = sieve_cvp(key, P1, P2, c=args.c, seed=hp.seed, mode=hp.mode, K=K, ttn_params=hp.ttn_params())
    with _open_out(args.out) as fh:
        write_scatter_csv(out.scatter, fh)
    print(
        json.dumps({"sampled": out.sampled, "candidates": out.candidates, "sr_pairs": out.sr_hits,
                    "timings": out.timings}),
        file=sys.stderr,
    )
    return 0


def cmd_experiment(args) -> int:
    if args.kind == "asrpl":
        keys = [generate_rsa_key(args.bits, derive_seed(args.key_seed, args.bits, k)) for k in range(args.keys)]
        tp = TtnParams(m=args.bond_dim, sweeps=args.sweeps, alpha=args.alpha, p_stop=args.p_stop)
        with _open_out(args.out) as fh:
            wr = csv.writer(fh, lineterminator="\n")
            wr.writerow(["ell", "n", "gamma", "mode", "mean_rho", "std", "stderr", "rescaled"])
            for n in args.ranks:
                P2 = generate_prime_basis(args.pi2 or 2 * n * n, include_sign=True)
                st = estimate_asrpl(keys, n, args.gamma, args.n_cvp, args.mode, P2=P2, ttn_params=tp,
                                    master_seed=args.seed)
                wr.writerow([st.ell, n, st.gamma, args.mode, st.mean, st.std, st.stderr, st.rescaled])
        return 0
    template = Hyperparameters(n_cvp=args.n_cvp, seed=args.seed)
    rows = experiment_compare(args.ells, args.series, template, args.keys, args.key_seed, args.n_max)
    with _open_out(args.out) as fh:
        write_compare_csv(rows, fh)
    return 0


def cmd_cost_model(args) -> int:
    lo, hi = (int(x) for x in args.ell_range.split(":"))
    sp = ScalingParams()
    with _open_out(args.out) as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["ell", "gamma", "rho", "n", "m", "T1", "T2", "T3", "T"])
        for ell in range(lo, hi + 1, args.step):
            try:
                n = max(1.0, qubits_needed(ell, args.rho, args.gamma, sp))
            except DomainError:
                continue
            m = max(1.0, bond_dim_law(n))
            c = cost_model(n, ell, args.gamma, m)
            wr.writerow([ell, args.gamma, args.rho, f"{n:.6g}", f"{m:.6g}",
                         f"{c.T1:.6e}", f"{c.T2:.6e}", f"{c.T3:.6e}", f"{c.T:.6e}"])
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="tnss", description="Lattice sieving with tensor network sampling.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-key", help="generate a seeded RSA test key (JSON)")
    p.add_argument("--bits", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_gen_key)

    p = sub.add_parser("factor", help="run the full sieve + congruence loop")
    p.add_argument("--n-file", required=True)
    p.add_argument("--log", help="JSON-lines run log")
    _add_hp_flags(p)
    p.set_defaults(func=cmd_factor)

    p = sub.add_parser("sieve-cvp", help="sieve one CVP instance, write scatter CSV")
    p.add_argument("--n-file", required=True)
    p.add_argument("--c", type=float, default=1.0)
    p.add_argument("--out")
    _add_hp_flags(p)
    p.set_defaults(func=cmd_sieve_cvp)

    p = sub.add_parser("experiment", help="asrpl or compare experiments (CSV)")
    p.add_argument("kind", choices=("asrpl", "compare"))
    p.add_argument("--bits", type=int, default=30)
    p.add_argument("--ells", type=lambda s: [int(x) for x in s.split(",")], default=[10, 20, 30])
    p.add_argument("--ranks", type=lambda s: [int(x) for x in s.split(",")], default=[8, 10, 12])
    p.add_argument("--series", type=lambda s: s.split(","), default=list(COMPARE_SERIES))
    p.add_argument("--keys", type=int, default=10)
    p.add_argument("--key-seed", type=int, default=0)
    p.add_argument("--n-cvp", type=int, default=50)
    p.add_argument("--n-max", type=int, default=20)
    p.add_argument("--gamma", type=float, default=2.0)
    p.add_argument("--pi2", type=int)
    p.add_argument("--mode", choices=MODES, default="exact-enum")
    p.add_argument("--bond-dim", type=int, default=8)
    p.add_argument("--sweeps", type=int, default=2)
    p.add_argument("--alpha", type=float, default=0.1)
    p.add_argument("--p-stop", type=float, default=0.999)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("cost-model", help="operation counts vs ell (CSV)")
    p.add_argument("--ell-range", required=True, help="A:B")
    p.add_argument("--step", type=int, default=10)
    p.add_argument("--gamma", type=float, required=True)
    p.add_argument("--rho", type=float, default=1.0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_cost_model)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (TnssError, OSError, ValueError) as exc:
        print(f"tnss: error: {exc}", file=sys.stderr)
        return 1
