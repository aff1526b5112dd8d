"""Rooted-tree enumeration and counting of coupling order conditions.

A rooted tree is stored in canonical form: the sorted tuple of the
canonical forms of its child subtrees, so ``()`` is the single node and
``((),)`` the two-node chain.  Additive (two-tableau) Runge-Kutta order
conditions correspond to rooted trees whose nodes carry one of two colours
(explicit or implicit).  Simplifying assumptions on the pair of tableaux
remove the colour from some node classes:

* ``w_equal``  -- equal weights: the root colour is irrelevant;
* ``c_equal``  -- equal abscissae: leaf colours are irrelevant;
* ``both``     -- both of the above.
"""

from collections import Counter
from functools import lru_cache
from math import comb

from .errors import UnsupportedError

MAX_COUPLING_ORDER = 6

# (root colour merged, leaf colour merged)
REDUCTIONS = {
    "general": (False, False),
    "w_equal": (True, False),
    "c_equal": (False, True),
    "both": (True, True),
}

_REDUCTION_ALIASES = {"w": "w_equal", "c": "c_equal"}


def tree_order(tree):
    """Number of nodes of a canonical tree."""
    return 1 + sum(tree_order(child) for child in tree)


@lru_cache(maxsize=None)
def rooted_trees(order):
    """All unlabelled rooted trees with ``order`` nodes, in canonical form."""
    if order < 1:
        raise UnsupportedError(f"tree order must be >= 1, got {order}")
    if order == 1:
        return ((),)

    found = set()

    def collect(remaining, bound, children):
        # children are generated in non-increasing (size, tree) order so each
        # multiset of subtrees is produced once
        if remaining == 0:
            found.add(tuple(sorted(children)))
            return
        for size in range(min(remaining, bound[0]), 0, -1):
            for sub in rooted_trees(size):
                if (size, sub) > bound:
                    continue
                collect(remaining - size, (size, sub), children + [sub])

    collect(order - 1, (order, ()), [])
    return tuple(sorted(found))


def _is_merged(tree, is_root, merge_root, merge_leaf):
    is_leaf = not is_root and len(tree) == 0
    return (is_root and merge_root) or (is_leaf and merge_leaf)


def _colourings(tree, is_root, merge_root, merge_leaf):
    # Distinct colourings up to isomorphism: own colour choices times, for
    # every class of identical child subtrees, a multiset of coloured copies.
    total = 1 if _is_merged(tree, is_root, merge_root, merge_leaf) else 2
    for child, mult in Counter(tree).items():
        per_child = _colourings(child, False, merge_root, merge_leaf)
        total *= comb(per_child + mult - 1, mult)
    return total


def _coloured_nodes(tree, is_root, merge_root, merge_leaf):
    own = 0 if _is_merged(tree, is_root, merge_root, merge_leaf) else 1
    return own + sum(_coloured_nodes(c, False, merge_root, merge_leaf) for c in tree)


def resolve_reduction(reduction):
    name = _REDUCTION_ALIASES.get(reduction, reduction)
    if name not in REDUCTIONS:
        valid = ", ".join(sorted(REDUCTIONS) + sorted(_REDUCTION_ALIASES))
        raise UnsupportedError(f"unknown reduction {reduction!r}; valid: {valid}")
    return name


def coupling_conditions_at_order(q, reduction="general"):
    """Coupling conditions contributed by trees with exactly ``q`` nodes."""
    merge_root, merge_leaf = REDUCTIONS[resolve_reduction(reduction)]
    coloured = 0
    pure = 0
    for tree in rooted_trees(q):
        coloured += _colourings(tree, True, merge_root, merge_leaf)
        # monochromatic trees are the separate conditions of each tableau
        pure += 2 if _coloured_nodes(tree, True, merge_root, merge_leaf) else 1
    return coloured - pure


def count_coupling_conditions(p, reduction="general"):
    """Cumulative number of coupling conditions for an IMEX pair of order ``p``.

    >>> count_coupling_conditions(3)
    12
    >>> count_coupling_conditions(6, "both")
    78
    """
    if not isinstance(p, int) or not 1 <= p <= MAX_COUPLING_ORDER:
        raise UnsupportedError(
            f"coupling counts are available for 1 <= p <= {MAX_COUPLING_ORDER}, got {p!r}"
        )
    return sum(coupling_conditions_at_order(q, reduction) for q in range(1, p + 1))
