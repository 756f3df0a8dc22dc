"""Log-domain Viterbi decoding over region lattices.

The 1-best recurrence over layers t and regions r is

    V[0][r] = log e_0[r] + log prior
    V[t][r] = log e_t[r] + max_x (log a_t[x][r] + V[t-1][x])

with back-pointers recovering the arg-max chain.  Ties take the lowest
region index at every maximization, then the lowest predecessor index, so
among equal-score paths the decoder returns the one whose region sequence
is smallest when compared from the final layer backwards.

list_viterbi generalizes the recurrence by keeping the n best partial
scores per state in parallel (a parallel list decoder): each state stores
(score, predecessor region, predecessor rank) entries ordered by the same
tie-break, duplicates are dropped, and infeasible (-inf) paths are never
returned.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

NEG_INF = float("-inf")


@dataclass
class ViterbiPath:
    """One decoded path.

    step_log_scores holds per-layer contributions: the layer emission plus
    the incoming transition where one exists (layer 0 instead adds the log
    prior).  num_factors counts the multiplied probabilities (emissions and
    relation hops) feeding the geometric-mean score.
    """

    regions: tuple[int, ...]
    step_log_scores: tuple[float, ...]
    total_log_score: float
    rank: int = 1
    num_factors: int = 0
    feasible: bool = True

    def to_dict(self):
        return {
            "rank": self.rank,
            "regions": list(self.regions),
            "step_log_scores": [float(s) for s in self.step_log_scores],
            "total_log_score": float(self.total_log_score),
            "geometric_mean": geometric_mean_score(self),
        }


def _log_layers(lattice):
    """(log emission, log transition) per layer; -inf marks forbidden moves."""
    out = []
    with np.errstate(divide="ignore"):
        for layer in lattice.layers:
            log_e = np.log(layer.emission)
            log_a = None if layer.transition is None else layer.transition.log_values()
            out.append((log_e, log_a))
    return out


def _step_scores(layers, log_prior, regions):
    steps = [float(layers[0][0][regions[0]] + log_prior)]
    for t in range(1, len(regions)):
        log_e, log_a = layers[t]
        steps.append(float(log_a[regions[t - 1], regions[t]] + log_e[regions[t]]))
    return tuple(steps)


def viterbi(lattice):
    """Best path through the lattice; flagged infeasible when none is legal."""
    layers = _log_layers(lattice)
    log_prior = math.log(lattice.prior)

    scores = layers[0][0] + log_prior
    backptrs = []
    for log_e, log_a in layers[1:]:
        # candidates[x][r]: extend the best path at x with the hop x -> r
        candidates = log_a + scores[:, None]
        backptrs.append(np.argmax(candidates, axis=0))  # first max = lowest x
        scores = log_e + candidates.max(axis=0)

    final = int(np.argmax(scores))
    total = float(scores[final])
    regions = [final]
    for bp in reversed(backptrs):
        regions.append(int(bp[regions[-1]]))
    regions.reverse()

    return ViterbiPath(
        regions=tuple(regions),
        step_log_scores=_step_scores(layers, log_prior, regions),
        total_log_score=total,
        rank=1,
        num_factors=lattice.num_factors,
        feasible=total != NEG_INF,
    )


def list_viterbi(lattice, n):
    """The n best distinct paths, best first.

    Ranks are strictly ordered by non-increasing total score; equal scores
    follow the 1-best tie-break (lowest region from the final layer
    backwards).  Rank 1 always equals viterbi(lattice); fewer than n paths
    come back when the lattice admits fewer feasible ones.
    """
    if n < 1:
        raise ValueError("n must be positive")
    layers = _log_layers(lattice)
    num_regions = layers[0][0].shape[0]
    log_prior = math.log(lattice.prior)
    k = n

    # scores[r][j]: j-th best partial score ending at region r; unused ranks
    # stay at -inf and can never surface as feasible output.
    scores = np.full((num_regions, k), NEG_INF)
    scores[:, 0] = layers[0][0] + log_prior
    bp_region = []
    bp_rank = []

    flat = np.arange(num_regions * k)
    xs, js = flat // k, flat % k
    for log_e, log_a in layers[1:]:
        # candidates[(x, j), r] = log a[x][r] + scores[x][j]
        candidates = (log_a[:, None, :] + scores[:, :, None]).reshape(num_regions * k,
                                                                      num_regions)
        # Per target region, order entries by score desc, then predecessor
        # region, then predecessor rank; one lexsort covers every region.
        rkeys = np.repeat(np.arange(num_regions), num_regions * k)
        order = np.lexsort((np.tile(js, num_regions),
                            np.tile(xs, num_regions),
                            -candidates.T.ravel(),
                            rkeys))
        picked = (order % (num_regions * k)).reshape(num_regions, num_regions * k)[:, :k]
        new_scores = np.empty((num_regions, k))
        for r in range(num_regions):
            new_scores[r] = log_e[r] + candidates[picked[r], r]
        bp_region.append(xs[picked])
        bp_rank.append(js[picked])
        scores = new_scores

    # Rank full paths by (score desc, final region, entry rank); the entry
    # ordering inside states makes this the backwards-lexicographic
    # tie-break over whole region sequences.
    finals = scores.ravel()
    order = np.lexsort((np.tile(np.arange(k), num_regions),
                        np.repeat(np.arange(num_regions), k),
                        -finals))

    paths = []
    seen = set()
    for flat_idx in order:
        total = float(finals[flat_idx])
        if total == NEG_INF:
            break
        r, j = int(flat_idx // k), int(flat_idx % k)
        regions = [r]
        ranks = [j]
        for t in range(len(bp_region) - 1, -1, -1):
            x = int(bp_region[t][regions[-1], ranks[-1]])
            jj = int(bp_rank[t][regions[-1], ranks[-1]])
            regions.append(x)
            ranks.append(jj)
        regions.reverse()
        key = tuple(regions)
        if key in seen:
            continue
        seen.add(key)
        paths.append(ViterbiPath(
            regions=key,
            step_log_scores=_step_scores(layers, log_prior, regions),
            total_log_score=total,
            rank=len(paths) + 1,
            num_factors=lattice.num_factors,
            feasible=True,
        ))
        if len(paths) == n:
            break
    return paths


def geometric_mean_score(path):
    """K-th root of the multiplied path probabilities, 0 for infeasible paths."""
    if not path.feasible or path.total_log_score == NEG_INF:
        return 0.0
    return float(math.exp(path.total_log_score / max(path.num_factors, 1)))
