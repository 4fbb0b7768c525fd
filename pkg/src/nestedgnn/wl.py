"""1-WL color refinement, canonical hashing, and pairwise discrimination."""

from __future__ import annotations

import hashlib
from collections import Counter
from dataclasses import dataclass

from .graphs import Graph

__all__ = ["ColorMap", "RefinementHistory", "wl_refine", "wl_hash", "wl_distinguish"]


@dataclass(frozen=True)
class ColorMap:
    """Node colors, canonicalized to ids 0..k-1."""

    colors: tuple[int, ...]

    @property
    def num_colors(self) -> int:
        return len(set(self.colors))

    def histogram(self) -> tuple[tuple[int, int], ...]:
        """Sorted (color, count) pairs; isomorphism-invariant."""
        return tuple(sorted(Counter(self.colors).items()))


@dataclass(frozen=True)
class RefinementHistory:
    """All computed rounds; ``stabilized_at`` is the first round index t with
    as many colors at round t+1 as at round t, or None if max_iters hit first."""

    rounds: tuple[ColorMap, ...]
    stabilized_at: int | None


def _canonical_ids(signatures) -> tuple[int, ...]:
    rank = {s: i for i, s in enumerate(sorted(set(signatures)))}
    return tuple(rank[s] for s in signatures)


def _initial_colors(g: Graph) -> ColorMap:
    n = g.num_nodes
    if g.node_features is None:
        return ColorMap(tuple([0] * n))
    # bit-exact row identity, so distinct float encodings stay distinct
    keys = [g.node_features[i].tobytes() for i in range(n)]
    return ColorMap(_canonical_ids(keys))


def _refine_once(g: Graph, colors: tuple[int, ...]) -> ColorMap:
    sigs = []
    for v in range(g.num_nodes):
        nbr = sorted(colors[u] for u in g.neighbors(v))
        sigs.append((colors[v], tuple(nbr)))
    return ColorMap(_canonical_ids(sigs))


def wl_refine(g: Graph, max_iters: int) -> RefinementHistory:
    """Refine colors until the color count stops increasing, or max_iters.

    Round 0 colors come from hashing node feature rows (a single color when
    features are absent); round t+1 gives two nodes equal colors iff their
    (color, neighbor color multiset) pairs agree.
    """
    if max_iters < 0:
        raise ValueError("max_iters must be >= 0")
    rounds = [_initial_colors(g)]
    stabilized = None
    for t in range(max_iters):
        nxt = _refine_once(g, rounds[-1].colors)
        rounds.append(nxt)
        if nxt.num_colors == rounds[-2].num_colors:
            stabilized = t
            break
    return RefinementHistory(tuple(rounds), stabilized)


def wl_hash(g: Graph, iters: int) -> int:
    """64-bit digest of per-round color histograms up to min(iters, stabilization).

    Equal for isomorphic graphs at every iteration count. Collisions between
    genuinely different refinement traces are possible in principle (64-bit
    digest) and accepted at desk scale.
    """
    if iters < 1:
        raise ValueError("iters must be >= 1")
    hist = wl_refine(g, max(1, g.num_nodes))
    last = hist.stabilized_at if hist.stabilized_at is not None else len(hist.rounds) - 1
    h = hashlib.blake2b(digest_size=8)
    for cm in hist.rounds[: min(iters, last) + 1]:
        h.update(repr(cm.histogram()).encode("ascii"))
        h.update(b";")
    return int.from_bytes(h.digest(), "big")


def wl_distinguish(g1: Graph, g2: Graph) -> bool:
    """True iff the stabilized WL hashes differ; True implies non-isomorphic."""
    i1 = max(1, g1.num_nodes)
    i2 = max(1, g2.num_nodes)
    return wl_hash(g1, max(i1, i2)) != wl_hash(g2, max(i1, i2))
