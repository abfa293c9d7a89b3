"""Dependence measures between a key slice and a token slice.

Larger values mean stronger evidence that the tokens were produced with the
keys. ``ITS`` and ``EMS`` average a per-position score along aligned
positions; ``ITSL`` and ``EMSL`` negate an edit-distance style alignment cost
in which skipping a key or a token costs ``gamma``.

All measures are built from a per-position matrix ``H[k, j]`` (key position
``k`` against token position ``j``), which :mod:`wmcpd.rtest` reuses to scan
many windows at once.
"""
from dataclasses import dataclass

import numpy as np

from .errors import InvalidParameter
from .toy_lm import as_tokens

KINDS = ("its", "itsl", "ems", "emsl")
XI_CLIP = 1e-15
DEFAULT_GAMMA = 0.4


@dataclass(frozen=True)
class MeasureKind:
    kind: str
    gamma: float = DEFAULT_GAMMA

    def __post_init__(self):
        kind = self.kind.lower()
        if kind not in KINDS:
            raise InvalidParameter(f"unknown measure {self.kind!r}; expected one of {KINDS}")
        if not self.gamma >= 0:
            raise InvalidParameter("gamma must be >= 0")
        object.__setattr__(self, "kind", kind)

    @property
    def scheme(self):
        return self.kind[:3]

    @property
    def levenshtein(self):
        return self.kind.endswith("l")

    def __str__(self):
        return self.kind


def as_measure(m):
    return m if isinstance(m, MeasureKind) else MeasureKind(str(m))


def _token_array(tokens):
    return as_tokens(tokens).tokens


def _clip(xi):
    return np.clip(xi, XI_CLIP, 1.0 - XI_CLIP)


def score_table(kind, keys):
    """Per-position score of every vocabulary entry, shape (..., len(keys), V).

    ``table[k, v]`` is what key position ``k`` contributes when matched with
    token ``v``: the summand of the averaged measure for ``its``/``ems``, the
    base alignment cost d0 for ``itsl``/``emsl``. Leading batch axes (stacked
    replicate keys) broadcast through.
    """
    kind = as_measure(kind).kind
    if keys.scheme != kind[:3]:
        raise InvalidParameter(f"{kind} needs {kind[:3].upper()} keys, got {keys.scheme.upper()}")
    V = keys.vocab_size
    if kind == "its":
        return (keys.u[..., None] - 0.5) * (keys.pi / (V - 1) - 0.5)
    if kind == "itsl":
        return np.abs(keys.u[..., None] - keys.pi / (V - 1))
    xi = _clip(keys.xi)
    if kind == "ems":
        return np.log(xi) + 1.0
    return np.log1p(-xi)


def pair_scores(kind, keys, tokens):
    """Matrix of shape (len(keys), len(tokens)) gathered from :func:`score_table`."""
    y = _token_array(tokens)
    if len(y) and (y.min() < 0 or y.max() >= keys.vocab_size):
        raise InvalidParameter("tokens outside the key vocabulary")
    return score_table(kind, keys)[..., y]


def _aligned(keys, tokens):
    y = _token_array(tokens)
    if len(keys) != len(y) or len(y) == 0:
        raise InvalidParameter(
            f"key and token slices must have equal nonzero length, got {len(keys)} and {len(y)}")
    return y


def m_its(keys, tokens):
    """Mean of (u_i - 1/2)(rank_i(y_i)/(V-1) - 1/2) over aligned positions."""
    y = _aligned(keys, tokens)
    V = keys.vocab_size
    rank = keys.pi[np.arange(len(y)), y] / (V - 1)
    return float(np.mean((keys.u - 0.5) * (rank - 0.5)))


def m_ems(keys, tokens):
    """Mean of log(xi_{i, y_i}) + 1 over aligned positions."""
    y = _aligned(keys, tokens)
    xi = _clip(keys.xi[np.arange(len(y)), y])
    return float(np.mean(np.log(xi) + 1.0))


def levenshtein_table(d0, gamma):
    """Prefix DP table; ``d0[k, j]`` is the cost of matching key k with token j.

    Entry [j, k] is the cost of aligning the first j tokens with the first k keys.
    """
    nk, nt = d0.shape
    D = np.empty((nt + 1, nk + 1))
    D[0, :] = gamma * np.arange(nk + 1)
    D[:, 0] = gamma * np.arange(nt + 1)
    for j in range(1, nt + 1):
        for k in range(1, nk + 1):
            D[j, k] = min(D[j - 1, k - 1] + d0[k - 1, j - 1],
                          D[j, k - 1] + gamma,
                          D[j - 1, k] + gamma)
    return D


def levenshtein_cost(tokens, keys, gamma=DEFAULT_GAMMA, base="itsl"):
    base = as_measure(base)
    if not base.levenshtein:
        raise InvalidParameter("base must be itsl or emsl")
    if not gamma >= 0:
        raise InvalidParameter("gamma must be >= 0")
    y = _token_array(tokens)
    if len(y) == 0 or len(keys) == 0:
        return float(gamma * (len(y) + len(keys)))
    d0 = pair_scores(base.kind, keys, y)
    return float(levenshtein_table(d0, gamma)[-1, -1])


def measure(kind, keys, tokens):
    kind = as_measure(kind)
    if kind.kind == "its":
        return m_its(keys, tokens)
    if kind.kind == "ems":
        return m_ems(keys, tokens)
    return -levenshtein_cost(tokens, keys, kind.gamma, kind)
