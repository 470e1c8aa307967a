"""Composite Gauss-Legendre rules on 1-D panels, optionally graded toward points."""

from functools import lru_cache

import numpy as np


@lru_cache(maxsize=64)
def gauss_legendre(order: int):
    x, w = np.polynomial.legendre.leggauss(order)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def composite_rule(breaks, order):
    """Nodes and weights of a Gauss-Legendre rule of ``order`` on every panel."""
    breaks = np.asarray(breaks, dtype=float)
    x, w = gauss_legendre(order)
    a = breaks[:-1, None]
    b = breaks[1:, None]
    half = 0.5 * (b - a)
    nodes = (a + b) * 0.5 + half * x[None, :]
    weights = half * w[None, :]
    return nodes.ravel(), weights.ravel()


def graded_breaks(a, b, width, toward="a", ratio=2.0):
    """Panel breakpoints on [a, b], geometrically refined toward one end.

    The smallest panel has size at most ``width``; sizes grow by ``ratio``.
    ``toward`` is "a", "b" or "both".
    """
    length = b - a
    if length <= 0:
        raise ValueError("empty interval")
    if toward == "both":
        mid = 0.5 * (a + b)
        left = graded_breaks(a, mid, width, "a", ratio)
        right = graded_breaks(mid, b, width, "b", ratio)
        return np.concatenate([left, right[1:]])
    width = min(width, length)
    levels = max(0, int(np.ceil(np.log(length / width) / np.log(ratio))))
    offsets = length * ratio ** (-np.arange(levels, -1, -1, dtype=float))
    offsets = np.concatenate([[0.0], offsets])
    if toward == "a":
        return a + offsets
    return (b - offsets)[::-1]


def refine(breaks, subdivisions):
    if subdivisions <= 1:
        return np.asarray(breaks, dtype=float)
    breaks = np.asarray(breaks, dtype=float)
    t = np.linspace(0.0, 1.0, subdivisions + 1)[:-1]
    inner = breaks[:-1, None] + (breaks[1:] - breaks[:-1])[:, None] * t[None, :]
    return np.concatenate([inner.ravel(), breaks[-1:]])
