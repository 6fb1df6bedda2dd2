"""Shared utility functions used across the model, learners and exporters."""

import math

import numpy as np


def prefix_grid(cards) -> np.ndarray:
    """All outcome prefixes over `cards` as columns, lexicographic order.

    Returns an int64 array of shape (len(cards), prod(cards)); an empty
    `cards` yields the single empty prefix, shape (0, 1).
    """
    cards = tuple(int(d) for d in cards)
    if not cards:
        return np.zeros((0, 1), dtype=np.int64)
    return np.indices(cards, dtype=np.int64).reshape(len(cards), -1)


def canonical_labels(labels) -> np.ndarray:
    """Relabel stage ids by first occurrence so equal partitions compare equal."""
    labels = np.asarray(labels, dtype=np.int64)
    _, first, inverse = np.unique(labels, return_index=True, return_inverse=True)
    rank = np.empty(len(first), dtype=np.int64)
    rank[np.argsort(first, kind="stable")] = np.arange(len(first))
    return rank[inverse.reshape(-1)]


def same_pair_count(labels) -> int:
    """Number of unordered index pairs sharing a label."""
    _, counts = np.unique(np.asarray(labels), return_counts=True)
    return int(sum(math.comb(int(c), 2) for c in counts))


def node_key(node) -> tuple:
    """Sort key for graph nodes: variable indices first, then named nodes."""
    if isinstance(node, (int, np.integer)):
        return (0, int(node), "")
    return (1, 0, str(node))


def format_node(node, variables=None) -> str:
    """Variable nodes by name (1-based X names when no specs are given)."""
    if isinstance(node, (int, np.integer)):
        return variables[node].name if variables is not None else f"X{int(node) + 1}"
    return str(node)
