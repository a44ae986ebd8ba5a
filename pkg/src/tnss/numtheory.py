"""Integer primitives: prime bases, smoothness by trial division, RSA test keys."""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import InvalidArgumentError, NotRepresentableError

# Miller-Rabin with these bases is exact for n < 3.3e24, which covers 2^64.
_MR_BASES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37)
_MR_DETERMINISTIC_LIMIT = 1 << 64
_MR_RANDOM_ROUNDS = 40


def primes_up_to(limit: int) -> list[int]:
    """All primes <= ``limit`` (sieve of Eratosthenes)."""
    if limit < 2:
        return []
    sieve = np.ones(limit + 1, dtype=bool)
    sieve[:2] = False
    sieve[4::2] = False
    for p in range(3, math.isqrt(limit) + 1, 2):
        if sieve[p]:
            sieve[p * p :: 2 * p] = False
    return np.flatnonzero(sieve).tolist()


def first_primes(count: int) -> list[int]:
    if count < 1:
        return []
    if count < 6:
        return [2, 3, 5, 7, 11][:count]
    # Rosser's bound p_k < k (ln k + ln ln k) for k >= 6.
    bound = int(count * (math.log(count) + math.log(math.log(count)))) + 1
    return primes_up_to(bound)[:count]


@dataclass(frozen=True)
class PrimeBasis:
    """The first ``size`` primes, optionally with the sign element p0 = -1.

    The sign element is a flag, not a list entry, so ``primes[j]`` lines up
    with lattice coordinate ``j``.
    """

    primes: tuple[int, ...]
    include_sign: bool = False
    _index: dict = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        ps = self.primes
        if not ps:
            raise InvalidArgumentError("prime basis must be non-empty")
        if any(b <= a for a, b in zip(ps, ps[1:])) or ps[0] < 2:
            raise InvalidArgumentError("primes must be strictly increasing and > 1")
        object.__setattr__(self, "_index", {p: j for j, p in enumerate(ps)})

    @property
    def size(self) -> int:
        return len(self.primes)

    @property
    def bound(self) -> int:
        """Smoothness bound B = largest prime."""
        return self.primes[-1]

    def __len__(self) -> int:
        return len(self.primes)

    def index(self, p: int) -> int:
        return self._index[p]

    def with_sign(self, include_sign: bool = True) -> "PrimeBasis":
        return PrimeBasis(self.primes, include_sign)

    def is_prefix_of(self, other: "PrimeBasis") -> bool:
        return other.primes[: self.size] == self.primes


def generate_prime_basis(count: int, include_sign: bool = False) -> PrimeBasis:
    if count < 1:
        raise InvalidArgumentError(f"basis size must be >= 1, got {count}")
    return PrimeBasis(tuple(first_primes(count)), include_sign)


@dataclass(frozen=True)
class MultiplicityVector:
    """Exponents of x = (-1)^e0 * prod p_j^e_j over a prime basis.

    Entries of ``e`` may be negative when the vector represents a ratio.
    """

    e0: int
    e: tuple[int, ...]

    def value(self, basis: PrimeBasis) -> int:
        """Reconstruct the integer; only defined for nonnegative exponents."""
        if len(self.e) != basis.size:
            raise InvalidArgumentError("exponent vector length does not match basis")
        if any(k < 0 for k in self.e):
            raise InvalidArgumentError("value() requires nonnegative exponents")
        x = math.prod(p**k for p, k in zip(basis.primes, self.e) if k)
        return -x if self.e0 & 1 else x

    def __sub__(self, other: "MultiplicityVector") -> "MultiplicityVector":
        return MultiplicityVector(
            (self.e0 - other.e0) % 2, tuple(a - b for a, b in zip(self.e, other.e))
        )

    def __add__(self, other: "MultiplicityVector") -> "MultiplicityVector":
        return MultiplicityVector(
            (self.e0 + other.e0) % 2, tuple(a + b for a, b in zip(self.e, other.e))
        )


def _check_sign(x: int, basis: PrimeBasis) -> None:
    if x == 0:
        raise InvalidArgumentError("cannot decompose zero")
    if x < 0 and not basis.include_sign:
        raise NotRepresentableError(f"{x} is negative but the basis has no sign element")


def smooth_decompose(x: int, basis: PrimeBasis) -> MultiplicityVector | None:
    """Multiplicity vector of ``x`` over ``basis``, or None if not smooth.

    Plain trial division by every basis prime.
    """
    _check_sign(x, basis)
    rest = abs(x)
    exps = [0] * basis.size
    for j, p in enumerate(basis.primes):
        if rest == 1:
            break
        while rest % p == 0:
            rest //= p
            exps[j] += 1
    if rest != 1:
        return None
    return MultiplicityVector(1 if x < 0 else 0, tuple(exps))


_LIMB_BITS = 24
_LIMB_MASK = (1 << _LIMB_BITS) - 1


def _residue_matrix(values: Sequence[int], primes: np.ndarray) -> np.ndarray:
    """|values| mod each prime, shape (len(values), len(primes)).

    Values are split into 24-bit limbs and reduced with Horner's rule, so
    every intermediate stays below 2^41 for primes < 2^17 (int64 safe).
    """
    mags = [abs(v) for v in values]
    nlimbs = max(1, max((m.bit_length() for m in mags), default=0) // _LIMB_BITS + 1)
    limbs = np.zeros((len(mags), nlimbs), dtype=np.int64)
    for i, m in enumerate(mags):
        k = nlimbs - 1
        while m:
            limbs[i, k] = m & _LIMB_MASK
            m >>= _LIMB_BITS
            k -= 1
    shift = (1 << _LIMB_BITS) % primes
    res = np.zeros((len(mags), len(primes)), dtype=np.int64)
    for k in range(nlimbs):
        res = (res * shift[None, :] + limbs[:, k, None]) % primes[None, :]
    return res


def smooth_decompose_many(
    values: Sequence[int], basis: PrimeBasis, chunk: int = 2048
) -> list[MultiplicityVector | None]:
    """Batched :func:`smooth_decompose`.

    Divisibility by every basis prime is tested at once with vectorized
    residues; only the primes that divide are then divided out exactly.
    Falls back to scalar trial division when a prime exceeds 2^17.
    """
    for x in values:
        _check_sign(x, basis)
    if basis.bound >= 1 << 17:
        return [smooth_decompose(x, basis) for x in values]
    primes = np.asarray(basis.primes, dtype=np.int64)
    out: list[MultiplicityVector | None] = []
    for start in range(0, len(values), chunk):
        block = values[start : start + chunk]
        res = _residue_matrix(block, primes)
        for x, row in zip(block, res):
            rest = abs(x)
            exps = [0] * basis.size
            for j in np.flatnonzero(row == 0).tolist():
                p = basis.primes[j]
                while rest % p == 0:
                    rest //= p
                    exps[j] += 1
            out.append(MultiplicityVector(1 if x < 0 else 0, tuple(exps)) if rest == 1 else None)
    return out


def gcd(a: int, b: int) -> int:
    if a < 0 or b < 0:
        raise InvalidArgumentError("gcd expects nonnegative integers")
    if a == 0 and b == 0:
        raise InvalidArgumentError("gcd(0, 0) is undefined")
    while b:
        a, b = b, a % b
    return a


def mod_pow(base: int, exponent: int, modulus: int) -> int:
    if modulus < 2:
        raise InvalidArgumentError("modulus must be >= 2")
    if exponent < 0:
        raise InvalidArgumentError("exponent must be >= 0")
    return pow(base, exponent, modulus)


def _mr_round(n: int, d: int, s: int, a: int) -> bool:
    x = pow(a, d, n)
    if x == 1 or x == n - 1:
        return True
    for _ in range(s - 1):
        x = x * x % n
        if x == n - 1:
            return True
    return False


def is_prime(n: int, rng: random.Random | None = None) -> bool:
    """Miller-Rabin: deterministic below 2^64, 40 random rounds above."""
    if n < 2:
        return False
    for p in _MR_BASES:
        if n % p == 0:
            return n == p
    d, s = n - 1, 0
    while d % 2 == 0:
        d //= 2
        s += 1
    if n < _MR_DETERMINISTIC_LIMIT:
        bases: Iterable[int] = _MR_BASES
    else:
        rng = rng or random.Random(n)
        bases = (rng.randrange(2, n - 1) for _ in range(_MR_RANDOM_ROUNDS))
    return all(_mr_round(n, d, s, a) for a in bases)


@dataclass(frozen=True)
class RsaKey:
    N: int
    p: int | None = None
    q: int | None = None

    def __post_init__(self):
        if self.N < 1:
            raise InvalidArgumentError("N must be positive")
        if (self.p is None) != (self.q is None):
            raise InvalidArgumentError("give both factors or neither")
        if self.p is not None and self.p * self.q != self.N:
            raise InvalidArgumentError("p * q != N")

    @property
    def bits(self) -> int:
        """floor(log2 N + 1)."""
        return self.N.bit_length()

    def to_dict(self) -> dict:
        return {
            "N": str(self.N),
            "bits": self.bits,
            "p": None if self.p is None else str(self.p),
            "q": None if self.q is None else str(self.q),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "RsaKey":
        key = cls(
            int(d["N"]),
            None if d.get("p") is None else int(d["p"]),
            None if d.get("q") is None else int(d["q"]),
        )
        if "bits" in d and int(d["bits"]) != key.bits:
            raise InvalidArgumentError("recorded bit length disagrees with N")
        return key

    @classmethod
    def from_json(cls, text: str) -> "RsaKey":
        return cls.from_dict(json.loads(text))


def _random_prime(bits: int, rng: random.Random) -> int:
    if bits == 2:
        return rng.choice((2, 3))
    while True:
        cand = rng.getrandbits(bits) | (1 << (bits - 1)) | 1
        if is_prime(cand, rng):
            return cand


def generate_rsa_key(bits: int, seed: int) -> RsaKey:
    """Semiprime N = p * q with exactly ``bits`` bits, deterministic per seed.

    p has ceil(bits/2) bits and q floor(bits/2) bits; p != q.
    """
    if bits < 8:
        raise InvalidArgumentError("need at least 8 bits for a meaningful lattice")
    rng = random.Random(seed)
    hi, lo = (bits + 1) // 2, bits // 2
    while True:
        p = _random_prime(hi, rng)
        q = _random_prime(lo, rng)
        if p != q and (p * q).bit_length() == bits:
            return RsaKey(p * q, p, q)
