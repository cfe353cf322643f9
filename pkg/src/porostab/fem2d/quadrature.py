"""Symmetric quadrature rules on triangles in barycentric coordinates."""

from __future__ import annotations

from dataclasses import dataclass
from itertools import permutations
from math import factorial

import numpy as np

from ..errors import QuadratureDegreeTooLow


@dataclass(frozen=True)
class TriangleRule:
    degree: int
    barycentric: np.ndarray  # (nq, 3)
    weights: np.ndarray  # (nq,), sum to 1 (multiply by |T|)


def _orbit(*coords):
    return sorted(set(permutations(coords)))


def _build(degree, orbits):
    pts, wts = [], []
    for coords, w in orbits:
        for p in _orbit(*coords):
            pts.append(p)
            wts.append(w)
    return TriangleRule(degree, np.array(pts), np.array(wts))


# Dunavant rules
DEGREE4 = _build(4, [
    ((0.445948490915965, 0.445948490915965, 0.108103018168070), 0.223381589678011),
    ((0.091576213509771, 0.091576213509771, 0.816847572980459), 0.109951743655322),
])
DEGREE6 = _build(6, [
    ((0.249286745170910, 0.249286745170910, 0.501426509658179), 0.116786275726379),
    ((0.063089014491502, 0.063089014491502, 0.873821971016996), 0.050844906370207),
    ((0.053145049844817, 0.310352451033784, 0.636502499121399), 0.082851075618374),
])


def monomial_integral(a: int, b: int, c: int) -> float:
    """Exact mean of ``l0**a l1**b l2**c`` over a triangle."""
    return 2.0 * factorial(a) * factorial(b) * factorial(c) / factorial(a + b + c + 2)


def require_degree(rule: TriangleRule, degree: int) -> None:
    if rule.degree < degree:
        raise QuadratureDegreeTooLow(f"rule of degree {rule.degree} used for a degree-{degree} integrand")


GAUSS2_EDGE = (np.array([0.5 - 0.5 / np.sqrt(3.0), 0.5 + 0.5 / np.sqrt(3.0)]), np.array([0.5, 0.5]))
