"""Bundled three-state example systems with a spread of cond(OT).

Each family interpolates between a well-separated system and a nearly
degenerate one (columns of ``O`` and ``T`` close to each other); moving
along the path raises the condition number of ``O @ T``.  All systems
start in their stationary distribution.

==========  ===  =======  ==========
id          Y    class    cond(OT)
==========  ===  =======  ==========
low-a       3    low      2.86
low-b       3    low      5.5
med-a       3    medium   14.7
med-b       10   medium   15.9
med-c       3    medium   23.6
med-d       10   medium   46.6
high-a      3    high     130.5
high-b      10   high     203.6
==========  ===  =======  ==========
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .evaluation import cond_OT
from .hmm import HmmModel, load_model, stationary_distribution

_SYSTEMS = {
    "low-a": (
        "low",
        [[0.8, 0.1, 0.1], [0.1, 0.8, 0.1], [0.1, 0.1, 0.8]],
        [[0.7, 0.2, 0.1], [0.2, 0.7, 0.1], [0.1, 0.1, 0.8]],
    ),
    "low-b": (
        "low",
        [[0.68, 0.175, 0.16], [0.16, 0.665, 0.175], [0.16, 0.16, 0.665]],
        [[0.64, 0.275, 0.1], [0.23, 0.595, 0.16], [0.13, 0.13, 0.74]],
    ),
    "med-a": (
        "medium",
        [[0.56, 0.25, 0.22], [0.22, 0.53, 0.25], [0.22, 0.22, 0.53]],
        [[0.58, 0.35, 0.1], [0.26, 0.49, 0.22], [0.16, 0.16, 0.68]],
    ),
    "med-b": (
        "medium",
        [[0.49, 0.24, 0.22], [0.26, 0.49, 0.22], [0.25, 0.27, 0.56]],
        [
            [0.172, 0.068, 0.068],
            [0.172, 0.078, 0.068],
            [0.146, 0.092, 0.072],
            [0.1, 0.172, 0.08],
            [0.08, 0.186, 0.08],
            [0.08, 0.14, 0.08],
            [0.07, 0.074, 0.14],
            [0.066, 0.074, 0.18],
            [0.062, 0.06, 0.132],
            [0.052, 0.056, 0.1],
        ],
    ),
    "med-c": (
        "medium",
        [[0.52, 0.275, 0.24], [0.24, 0.485, 0.275], [0.24, 0.24, 0.485]],
        [[0.56, 0.375, 0.1], [0.27, 0.455, 0.24], [0.17, 0.17, 0.66]],
    ),
    "med-d": (
        "medium",
        [[0.42, 0.27, 0.26], [0.28, 0.42, 0.26], [0.3, 0.31, 0.48]],
        [
            [0.146, 0.084, 0.084],
            [0.146, 0.094, 0.084],
            [0.128, 0.106, 0.086],
            [0.1, 0.146, 0.09],
            [0.09, 0.148, 0.09],
            [0.09, 0.12, 0.09],
            [0.08, 0.082, 0.12],
            [0.078, 0.082, 0.14],
            [0.076, 0.07, 0.116],
            [0.066, 0.068, 0.1],
        ],
    ),
    "high-a": (
        "high",
        [[0.432, 0.33, 0.284], [0.284, 0.386, 0.33], [0.284, 0.284, 0.386]],
        [[0.516, 0.43, 0.1], [0.292, 0.378, 0.284], [0.192, 0.192, 0.616]],
    ),
    "high-b": (
        "high",
        [[0.3675, 0.2925, 0.29], [0.295, 0.3675, 0.29], [0.3375, 0.34, 0.42]],
        [
            [0.1265, 0.096, 0.096],
            [0.1265, 0.106, 0.096],
            [0.1145, 0.1165, 0.0965],
            [0.1, 0.1265, 0.0975],
            [0.0975, 0.1195, 0.0975],
            [0.0975, 0.105, 0.0975],
            [0.0875, 0.088, 0.105],
            [0.087, 0.088, 0.11],
            [0.0865, 0.0775, 0.104],
            [0.0765, 0.077, 0.1],
        ],
    ),
}


@dataclass(frozen=True, eq=False)
class ExampleSystem:
    id: str
    model: HmmModel
    intended_cond_class: str
    cond_OT: float


@lru_cache(maxsize=None)
def _build(example_id):
    cls, T, O = _SYSTEMS[example_id]
    T = np.array(T)
    model = HmmModel(T, np.array(O), stationary_distribution(T)).validated()
    return ExampleSystem(example_id, model, cls, cond_OT(model))


def example_ids():
    return list(_SYSTEMS)


def bundled_examples():
    return [_build(k) for k in _SYSTEMS]


def get_example(example_id):
    try:
        return _build(example_id)
    except KeyError:
        raise KeyError(f"unknown example {example_id!r}; bundled ids: {', '.join(_SYSTEMS)}") from None


def resolve_example(ref):
    """Look up a bundled id, or load a model file and wrap it."""
    if ref in _SYSTEMS:
        return _build(ref)
    model = load_model(ref)
    c = cond_OT(model)
    cls = "low" if c < 10 else "medium" if c <= 50 else "high"
    return ExampleSystem(str(ref), model, cls, c)
