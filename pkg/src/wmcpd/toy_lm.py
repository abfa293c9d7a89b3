"""Seeded order-1 Markov token model used in place of a language model.

Token ids are 0-based integers in ``[0, vocab_size)``. A model holds one
next-token row per previous token plus an initial-state row used when the
context is empty. The entropy dial ``beta`` is the symmetric Dirichlet
concentration each row is drawn from: small ``beta`` gives peaked rows (weak
watermark signal), large ``beta`` gives near-uniform rows.
"""
from dataclasses import dataclass, field

import numpy as np

from ._rng import stream
from .errors import InvalidParameter, InvalidToken

ROW_ATOL = 1e-12


def _frozen(a, dtype):
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class TokenSequence:
    """Tokens plus a per-token flag recording whether a watermark key produced it."""

    tokens: np.ndarray
    watermarked: np.ndarray = None

    def __post_init__(self):
        tokens = _frozen(self.tokens, np.int64).reshape(-1)
        object.__setattr__(self, "tokens", tokens)
        flags = np.zeros(len(tokens), bool) if self.watermarked is None else self.watermarked
        flags = _frozen(flags, bool).reshape(-1)
        if len(flags) != len(tokens):
            raise InvalidParameter("watermarked flags must match token count")
        object.__setattr__(self, "watermarked", flags)

    def __len__(self):
        return len(self.tokens)

    @property
    def provenance(self):
        if len(self) and self.watermarked.all():
            return "watermarked"
        if not self.watermarked.any():
            return "plain"
        return "mixed"

    def __add__(self, other):
        return TokenSequence(np.concatenate([self.tokens, other.tokens]),
                             np.concatenate([self.watermarked, other.watermarked]))

    def __getitem__(self, sl):
        if not isinstance(sl, slice):
            raise TypeError("TokenSequence supports slicing only")
        return TokenSequence(self.tokens[sl], self.watermarked[sl])


def as_tokens(x):
    return x if isinstance(x, TokenSequence) else TokenSequence(np.asarray(x, dtype=np.int64))


@dataclass(frozen=True, eq=False)
class TokenModel:
    vocab_size: int
    beta: float
    seed: int
    rows: np.ndarray        # (V, V): rows[k] = p(. | previous token k)
    initial: np.ndarray     # (V,): p(. | empty context)
    order: int = field(default=1, init=False)

    def __post_init__(self):
        V = self.vocab_size
        rows = _frozen(self.rows, np.float64)
        initial = _frozen(self.initial, np.float64)
        if rows.shape != (V, V) or initial.shape != (V,):
            raise InvalidParameter(f"expected {V}x{V} rows and a length-{V} initial row")
        for r in (*rows, initial):
            check_distribution(r)
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "initial", initial)

    @classmethod
    def from_rows(cls, rows, initial=None, beta=float("nan"), seed=-1):
        """Build a model with explicit transition rows (test hook for degenerate rows)."""
        rows = np.asarray(rows, dtype=np.float64)
        if initial is None:
            initial = rows[0]
        return cls(rows.shape[0], beta, seed, rows, initial)

    def to_dict(self):
        return {
            "vocab_size": int(self.vocab_size),
            "beta": float(self.beta),
            "seed": int(self.seed),
            "rows": [[float(x) for x in r] for r in (*self.rows, self.initial)],
        }

    @classmethod
    def from_dict(cls, d):
        rows = np.asarray(d["rows"], dtype=np.float64)
        V = int(d["vocab_size"])
        if rows.shape != (V + 1, V):
            raise InvalidParameter(f"model rows must be {V + 1}x{V}, got {rows.shape}")
        return cls(V, float(d["beta"]), int(d["seed"]), rows[:V], rows[V])

    def same_as(self, other):
        return (self.vocab_size == other.vocab_size
                and np.array_equal(self.rows, other.rows)
                and np.array_equal(self.initial, other.initial))


def check_distribution(p, vocab_size=None):
    p = np.asarray(p, dtype=np.float64)
    if p.ndim != 1 or (vocab_size is not None and len(p) != vocab_size):
        raise InvalidParameter("distribution has the wrong shape")
    if (p < 0).any() or not np.isfinite(p).all() or abs(p.sum() - 1.0) > ROW_ATOL:
        raise InvalidParameter("not a probability vector")
    return p


def new_markov_model(vocab_size, beta, seed):
    """Draw every row of an order-1 Markov model from a symmetric Dirichlet(beta)."""
    if int(vocab_size) != vocab_size or vocab_size < 2:
        raise InvalidParameter(f"vocab_size must be an integer >= 2, got {vocab_size}")
    if not beta > 0 or not np.isfinite(beta):
        raise InvalidParameter(f"beta must be positive, got {beta}")
    V = int(vocab_size)
    rng = stream(seed, "toy_lm")
    draws = rng.dirichlet(np.full(V, float(beta)), size=V + 1)
    # dirichlet rows can be off by a few ulp; renormalise so sums are exact enough
    draws /= draws.sum(axis=1, keepdims=True)
    return TokenModel(V, float(beta), int(seed), draws[:V], draws[V])


def next_token_dist(model, context):
    tokens = as_tokens(context).tokens
    if len(tokens) == 0:
        return model.initial
    last = int(tokens[-1])
    if not 0 <= last < model.vocab_size:
        raise InvalidToken(f"token {last} outside vocabulary of size {model.vocab_size}")
    return model.rows[last]


def _check_tokens(model, tokens):
    if len(tokens) and (tokens.min() < 0 or tokens.max() >= model.vocab_size):
        raise InvalidToken(f"context has tokens outside [0, {model.vocab_size})")


def inverse_cdf(p, u):
    """Smallest k with cumsum(p)[k] > u; zero-mass tokens are never returned."""
    cdf = np.cumsum(p)
    k = int(np.searchsorted(cdf, u, side="right"))
    if k >= len(p):  # rounding left cdf[-1] slightly below u
        k = int(np.flatnonzero(p)[-1])
    return k


def sample_plain(model, prompt, count, seed):
    """Ordinary ancestral sampling, continuing from the last token of ``prompt``.

    Returns only the ``count`` new tokens, all flagged as not watermarked.
    """
    if count < 0:
        raise InvalidParameter("count must be >= 0")
    prompt = as_tokens(prompt)
    _check_tokens(model, prompt.tokens)
    u = stream(seed, "plain").random(count)
    out = np.empty(count, dtype=np.int64)
    ctx = prompt.tokens[-1:]
    for i in range(count):
        out[i] = inverse_cdf(next_token_dist(model, ctx), u[i])
        ctx = out[i:i + 1]
    return TokenSequence(out)


def sample_prompt(model, length, seed):
    return sample_plain(model, [], length, seed)


def row_entropy(model):
    """Shannon entropy (nats) of every transition row, initial row last."""
    P = np.vstack([model.rows, model.initial])
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(P > 0, -P * np.log(P), 0.0)
    return terms.sum(axis=1)
