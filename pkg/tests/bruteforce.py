"""Exhaustive-enumeration reference for the lattice decoder tests.

Scores fold per path as emission + (transition + prefix), the same
association order the dynamic program uses, so tied totals compare bitwise
against decoder values and tie-break checks are exact rather than
tolerance-based.
"""

import numpy as np

from vlr.lattice import EPSILON, Lattice, LatticeLayer
from vlr.opseq import OperationTuple, OpType

_EXIST = OperationTuple(OpType.EXIST, "_")
_SELECT = OperationTuple(OpType.SELECT, "x")


def enumerate_paths(lattice):
    """Every complete path with its exactly-folded log score.

    Returns (paths, scores): paths is an (N**T, T) int array in row-major
    (forward-lexicographic) order, scores the matching log totals.
    """
    with np.errstate(divide="ignore"):
        log_e = [np.log(layer.emission) for layer in lattice.layers]
        log_a = [None if layer.transition is None
                 else np.log(layer.transition.values)
                 for layer in lattice.layers]
    n = lattice.num_regions
    log_prior = float(np.log(lattice.prior))

    paths = np.arange(n).reshape(n, 1)
    scores = log_e[0] + log_prior
    for t in range(1, len(lattice.layers)):
        last = paths[:, -1]
        # expanded[i, r] extends path i with region r
        expanded = log_e[t][None, :] + (log_a[t][last, :] + scores[:, None])
        count = paths.shape[0]
        paths = np.hstack([np.repeat(paths, n, axis=0),
                           np.tile(np.arange(n), count).reshape(-1, 1)])
        scores = expanded.reshape(-1)
    return paths, scores


def ranked_paths(lattice):
    """Paths sorted by (-score, reversed-sequence lex), decoder tie order."""
    paths, scores = enumerate_paths(lattice)
    keys = [paths[:, t] for t in range(paths.shape[1])] + [-scores]
    order = np.lexsort(tuple(keys))
    return paths[order], scores[order]


def best_path(lattice):
    """(regions tuple, score) of the decoder-tie-break optimum."""
    paths, scores = ranked_paths(lattice)
    return tuple(int(r) for r in paths[0]), float(scores[0])


def top_paths(lattice, n):
    """The feasible top-n as (regions tuple, score) pairs."""
    paths, scores = ranked_paths(lattice)
    out = []
    for regions, score in zip(paths, scores):
        if score == -np.inf:
            break
        out.append((tuple(int(r) for r in regions), float(score)))
        if len(out) == n:
            break
    return out


def random_lattice(rng, max_regions=6, max_layers=5):
    """A lattice with build-time flooring applied, plus degenerate cases.

    Emissions are floored at EPSILON (occasionally from all-zero vectors);
    transitions mix identity and hollow relation matrices with sparse
    zeros, so -inf candidates and full ties both occur.
    """
    n = int(rng.integers(1, max_regions + 1))
    t = int(rng.integers(1, max_layers + 1))
    layers = []
    for i in range(t):
        roll = rng.random()
        if roll < 0.15:
            emission = np.zeros(n)
        elif roll < 0.3:
            emission = (rng.random(n) < 0.5) * rng.random(n)
        else:
            emission = rng.random(n)
        emission = np.maximum(emission, EPSILON)
        if i == 0:
            transition = None
        elif rng.random() < 0.4:
            transition = np.eye(n)
        else:
            values = rng.random((n, n))
            values[rng.random((n, n)) < 0.3] = 0.0
            values = np.maximum(values, EPSILON)
            np.fill_diagonal(values, 0.0)
            transition = values
        layers.append(_layer(emission, transition, kind="relation"))
    return Lattice(layers, _EXIST)


def _layer(emission, transition, kind="relation"):
    from vlr.sgraph import TransitionMatrix

    wrapped = None
    if transition is not None:
        is_identity = np.array_equal(transition, np.eye(len(emission)))
        wrapped = TransitionMatrix(transition,
                                   "identity" if is_identity else kind)
    return LatticeLayer(np.asarray(emission, dtype=np.float64), wrapped,
                        _SELECT if transition is None else _EXIST)


def make_lattice(emissions, transitions):
    """Hand-built lattice from plain lists; no flooring applied."""
    layers = [_layer(np.asarray(emissions[0], dtype=np.float64), None)]
    for emission, transition in zip(emissions[1:], transitions):
        layers.append(_layer(np.asarray(emission, dtype=np.float64),
                             np.asarray(transition, dtype=np.float64)))
    lat = Lattice(layers, _EXIST)
    return lat
