"""
Exact linear-separability oracle.

A point can be cut off from the rest of a batch by a single hyperplane iff
it is not a convex combination of the other points. That is decided here
with a dense phase-one simplex using Bland's rule, so vertex counts are exact
up to the 1e-9 feasibility tolerance.
"""

import logging
import math
from dataclasses import dataclass
from typing import List

import numpy as np

from .exceptions import ValidationError
from .utils import ValidationUtils

logger = logging.getLogger(__name__)

FEASIBILITY_TOL = 1e-9


@dataclass
class PointCloud:
    """n points of common dimension d, one per row."""

    points: np.ndarray

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=np.float64)
        ValidationUtils.validate_finite_array(self.points, "points", ndim=2)

    @property
    def size(self) -> int:
        return self.points.shape[0]

    @property
    def dimension(self) -> int:
        return self.points.shape[1]


def _pivot(tableau: np.ndarray, row: int, col: int):
    tableau[row] /= tableau[row, col]
    for other in range(tableau.shape[0]):
        if other != row and tableau[other, col] != 0.0:
            tableau[other] -= tableau[other, col] * tableau[row]


def phase_one_feasible(A: np.ndarray, b: np.ndarray, tol: float = FEASIBILITY_TOL) -> bool:
    """
    Decide whether {lam >= 0 : A lam = b} is non-empty.

    Minimizes the sum of artificial variables with Bland's rule: the entering
    column is the lowest-index one with a negative reduced cost, and ratio
    ties go to the lowest-index basic variable.

    Args:
        A: Constraint matrix (m, k)
        b: Right-hand side (m,)
        tol: Pivot and feasibility tolerance

    Returns:
        True if the remaining artificial mass is within tol of zero
    """
    A = np.array(A, dtype=np.float64)
    b = np.array(b, dtype=np.float64)
    m, k = A.shape
    flip = b < 0
    A[flip] *= -1.0
    b[flip] *= -1.0

    tableau = np.zeros((m + 1, k + m + 1))
    tableau[:m, :k] = A
    tableau[:m, k:k + m] = np.eye(m)
    tableau[:m, -1] = b
    tableau[m, :k] = -A.sum(axis=0)
    tableau[m, -1] = -b.sum()
    basis = list(range(k, k + m))

    max_iterations = 50 * (m + k + 1)
    for _ in range(max_iterations):
        entering = np.flatnonzero(tableau[m, :-1] < -tol)
        if entering.size == 0:
            break
        col = int(entering[0])
        column = tableau[:m, col]
        rows = np.flatnonzero(column > tol)
        if rows.size == 0:
            break
        ratios = tableau[rows, -1] / column[rows]
        best = ratios.min()
        tied = rows[ratios <= best + tol]
        row = int(min(tied, key=lambda r: basis[r]))
        _pivot(tableau, row, col)
        basis[row] = col
    else:
        logger.warning(f"Phase-one simplex hit the iteration cap ({max_iterations})")

    remaining = -tableau[m, -1]
    return remaining <= tol * (1.0 + float(b.sum()))


def is_separable(cloud: PointCloud, i: int) -> bool:
    """
    True iff point i lies outside the convex hull of the other points.

    Solves sum_k lam_k x_k = x_i, sum_k lam_k = 1, lam >= 0 over k != i.
    Identical points are never separable from each other.
    """
    ValidationUtils.validate_index(i, cloud.size, "point index")
    if cloud.size == 1:
        return True
    others = np.delete(cloud.points, i, axis=0)
    A = np.vstack([others.T, np.ones((1, others.shape[0]))])
    b = np.concatenate([cloud.points[i], [1.0]])
    return not phase_one_feasible(A, b)


def hull_vertices(cloud: PointCloud) -> List[int]:
    """Indices of all separable points, ascending."""
    return [i for i in range(cloud.size) if is_separable(cloud, i)]


def hull_vertex_count(cloud: PointCloud) -> int:
    """Number of points separable from the rest."""
    return len(hull_vertices(cloud))


def _cross(o: np.ndarray, a: np.ndarray, b: np.ndarray) -> float:
    return float((a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]))


def planar_hull_vertices(points: np.ndarray) -> List[int]:
    """
    Strict convex-hull vertices of a planar cloud by a monotone-chain sweep.

    Collinear boundary points are not vertices, and duplicated points are
    excluded, matching ``is_separable``.
    """
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2 or points.shape[1] != 2:
        raise ValidationError(f"planar_hull_vertices expects shape (n, 2), got {points.shape}")
    n = points.shape[0]
    if n == 1:
        return [0]

    order = sorted(range(n), key=lambda j: (points[j, 0], points[j, 1]))

    def chain(indices):
        hull = []
        for j in indices:
            while len(hull) >= 2 and _cross(points[hull[-2]], points[hull[-1]], points[j]) <= 0:
                hull.pop()
            hull.append(j)
        return hull

    lower = chain(order)
    upper = chain(list(reversed(order)))
    vertices = set(lower[:-1] + upper[:-1]) if n > 2 else set(order)

    _, inverse, counts = np.unique(points, axis=0, return_inverse=True, return_counts=True)
    duplicated = {j for j in range(n) if counts[np.ravel(inverse)[j]] > 1}
    return sorted(j for j in vertices if j not in duplicated)


def theoretical_order(dist: str, n: int, d: int) -> float:
    """
    Growth term of the expected number of hull vertices, constants omitted.

    ball: n^((d-1)/(d+1)); cube: (ln n)^(d-1); gauss: (ln n)^((d-1)/2).
    """
    ValidationUtils.validate_choice(dist, ("ball", "cube", "gauss"), "distribution")
    if n < 2:
        raise ValidationError(f"theoretical_order needs n >= 2, got {n}")
    ValidationUtils.validate_positive_int(d, "d")
    if dist == "ball":
        return float(n) ** ((d - 1) / (d + 1))
    if dist == "cube":
        return math.log(n) ** (d - 1)
    return math.log(n) ** ((d - 1) / 2)
