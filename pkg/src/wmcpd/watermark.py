"""Watermark keys and the two distribution-preserving decoders.

ITS (inverse transform sampling): key = (u, pi) with pi a uniform permutation
of the vocabulary and u ~ Unif[0, 1]. Tokens are laid out on [0, 1] in pi
order, each with an interval as wide as its probability, and the token whose
interval holds u is emitted.

EMS (exponential minimum sampling): key = xi, a vector of V uniforms. The
emitted token minimises -log(xi_k) / p(k), i.e. the Gumbel-max trick with the
key playing the role of the noise.

Permutations are stored 0-based: ``pi[k]`` is the rank of token ``k``.
"""
from dataclasses import dataclass

import numpy as np

from ._rng import stream
from .errors import InvalidParameter
from .toy_lm import TokenSequence, as_tokens, next_token_dist

SCHEMES = ("its", "ems")


@dataclass(frozen=True)
class ItsKey:
    u: float
    pi: np.ndarray


@dataclass(frozen=True)
class EmsKey:
    xi: np.ndarray


@dataclass(frozen=True, eq=False)
class KeySequence:
    """Per-position keys stored as arrays.

    ITS keys fill ``u`` (n,) and ``pi`` (n, V); EMS keys fill ``xi`` (n, V).
    """

    scheme: str
    vocab_size: int
    seed: int = None
    u: np.ndarray = None
    pi: np.ndarray = None
    xi: np.ndarray = None

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise InvalidParameter(f"unknown scheme {self.scheme!r}")
        V = self.vocab_size
        if self.scheme == "its":
            if self.u is None or self.pi is None or self.pi.ndim != 2 or self.pi.shape[1] != V:
                raise InvalidParameter("ITS keys need u (n,) and pi (n, V)")
            if len(self.u) != len(self.pi):
                raise InvalidParameter("u and pi lengths differ")
        else:
            if self.xi is None or self.xi.ndim != 2 or self.xi.shape[1] != V:
                raise InvalidParameter("EMS keys need xi (n, V)")

    def __len__(self):
        return len(self.u) if self.scheme == "its" else len(self.xi)

    def __getitem__(self, sl):
        if not isinstance(sl, slice):
            return self.key(sl)
        if self.scheme == "its":
            return KeySequence("its", self.vocab_size, self.seed, u=self.u[sl], pi=self.pi[sl])
        return KeySequence("ems", self.vocab_size, self.seed, xi=self.xi[sl])

    def key(self, i):
        if self.scheme == "its":
            return ItsKey(float(self.u[i]), self.pi[i])
        return EmsKey(self.xi[i])

    def same_as(self, other):
        if (self.scheme, self.vocab_size, len(self)) != (other.scheme, other.vocab_size, len(other)):
            return False
        if self.scheme == "its":
            return np.array_equal(self.u, other.u) and np.array_equal(self.pi, other.pi)
        return np.array_equal(self.xi, other.xi)

    def to_dict(self):
        if self.scheme == "its":
            keys = [{"u": float(u), "pi": [int(x) for x in p]} for u, p in zip(self.u, self.pi)]
        else:
            keys = [{"xi": [float(x) for x in row]} for row in self.xi]
        return {"scheme": self.scheme, "vocab_size": int(self.vocab_size),
                "seed": None if self.seed is None else int(self.seed),
                "n": len(self), "keys": keys}

    @classmethod
    def from_dict(cls, d):
        scheme, V = d["scheme"], int(d["vocab_size"])
        keys = d["keys"]
        if len(keys) != int(d["n"]):
            raise InvalidParameter("key count does not match header n")
        if scheme == "its":
            u = np.array([k["u"] for k in keys], dtype=np.float64)
            pi = np.array([k["pi"] for k in keys], dtype=np.int64).reshape(len(keys), V)
            return cls(scheme, V, d.get("seed"), u=u, pi=pi)
        xi = np.array([k["xi"] for k in keys], dtype=np.float64).reshape(len(keys), V)
        return cls(scheme, V, d.get("seed"), xi=xi)


def open_uniform(rng, shape):
    """Uniforms strictly inside (0, 1); exact zeros are redrawn."""
    x = rng.random(shape)
    bad = x == 0.0
    while bad.any():
        x[bad] = rng.random(int(bad.sum()))
        bad = x == 0.0
    return x


def draw_keys(scheme, n, vocab_size, rng, seed=None):
    if scheme == "its":
        pi = rng.permuted(np.tile(np.arange(vocab_size, dtype=np.int64), (n, 1)), axis=1)
        u = rng.random(n)
        return KeySequence("its", vocab_size, seed, u=u, pi=pi)
    if scheme == "ems":
        return KeySequence("ems", vocab_size, seed, xi=open_uniform(rng, (n, vocab_size)))
    raise InvalidParameter(f"unknown scheme {scheme!r}")


def gen_keys(scheme, n, vocab_size, seed):
    """Key sequence of length ``n``; a pure function of its arguments."""
    if n < 1 or vocab_size < 2:
        raise InvalidParameter(f"need n >= 1 and vocab_size >= 2, got n={n}, V={vocab_size}")
    return draw_keys(scheme, int(n), int(vocab_size), stream(seed, "keys", scheme), seed=int(seed))


def decode_its(key, dist):
    """Token whose pi-ordered probability interval (lower, upper] contains u.

    u = 0 goes to the first token with positive mass in pi order.
    """
    order = np.argsort(key.pi, kind="stable")
    mass = np.asarray(dist, dtype=np.float64)[order]
    cum = np.cumsum(mass)
    hit = (cum >= key.u) & (mass > 0)
    if hit.any():
        return int(order[np.argmax(hit)])
    return int(order[np.flatnonzero(mass)[-1]])


def decode_its_batch(u, pi, dist):
    """Vectorised :func:`decode_its` over keys ``u`` (N,), ``pi`` (N, V)."""
    order = np.argsort(pi, axis=1, kind="stable")
    mass = np.asarray(dist, dtype=np.float64)[order]
    cum = np.cumsum(mass, axis=1)
    hit = (cum >= np.asarray(u)[:, None]) & (mass > 0)
    idx = np.argmax(hit, axis=1)
    miss = ~hit.any(axis=1)
    if miss.any():
        last_pos = mass.shape[1] - 1 - np.argmax((mass > 0)[:, ::-1], axis=1)
        idx[miss] = last_pos[miss]
    return order[np.arange(len(order)), idx]


def ems_costs(xi, dist):
    dist = np.asarray(dist, dtype=np.float64)
    with np.errstate(divide="ignore"):
        return np.where(dist > 0, -np.log(xi) / dist, np.inf)


def decode_ems(key, dist):
    """argmin_k -log(xi_k) / p(k); zero-probability tokens never win, ties go low."""
    return int(np.argmin(ems_costs(key.xi, dist)))


def decode_ems_batch(xi, dist):
    return np.argmin(ems_costs(xi, dist), axis=-1)


def decode(key, dist):
    return decode_its(key, dist) if isinstance(key, ItsKey) else decode_ems(key, dist)


def generate_watermarked(model, prompt, keys):
    """Autoregressively emit one token per key, continuing from ``prompt``."""
    if keys.vocab_size != model.vocab_size:
        raise InvalidParameter(
            f"key vocabulary {keys.vocab_size} != model vocabulary {model.vocab_size}")
    prompt = as_tokens(prompt)
    out = np.empty(len(keys), dtype=np.int64)
    ctx = prompt.tokens[-1:]
    for i in range(len(keys)):
        dist = next_token_dist(model, ctx)
        out[i] = decode(keys.key(i), dist)
        ctx = out[i:i + 1]
    return TokenSequence(out, np.ones(len(out), bool))


@dataclass(frozen=True, eq=False)
class KeyBatch:
    """Replicate key sequences stacked on a leading axis; arrays are (R, n[, V])."""

    scheme: str
    vocab_size: int
    u: np.ndarray = None
    pi: np.ndarray = None
    xi: np.ndarray = None

    def __len__(self):
        return (self.u if self.scheme == "its" else self.xi).shape[1]

    @property
    def size(self):
        return (self.u if self.scheme == "its" else self.xi).shape[0]

    def replicate(self, r):
        if self.scheme == "its":
            return KeySequence("its", self.vocab_size, u=self.u[r], pi=self.pi[r])
        return KeySequence("ems", self.vocab_size, xi=self.xi[r])


def stack_keys(seqs, scheme, vocab_size):
    if scheme == "its":
        return KeyBatch(scheme, vocab_size, u=np.stack([k.u for k in seqs]),
                        pi=np.stack([k.pi for k in seqs]))
    return KeyBatch(scheme, vocab_size, xi=np.stack([k.xi for k in seqs]))
