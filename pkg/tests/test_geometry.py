"""
Test module for the separability oracle.
"""

import unittest
import os
import math

import numpy as np

# Import the modules to test
import sys
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from fedsgd_leakage.geometry import (
    PointCloud, hull_vertex_count, hull_vertices, is_separable, phase_one_feasible,
    planar_hull_vertices, theoretical_order
)
from fedsgd_leakage.exceptions import ValidationError


SQUARE = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])


class TestPhaseOne(unittest.TestCase):
    """Test the feasibility solver."""

    def test_feasible(self):
        self.assertTrue(phase_one_feasible(np.array([[1.0, 1.0]]), np.array([1.0])))

    def test_infeasible_sign(self):
        self.assertFalse(phase_one_feasible(np.array([[1.0, 1.0]]), np.array([-1.0])))

    def test_convex_combination(self):
        A = np.vstack([SQUARE.T, np.ones((1, 4))])
        self.assertTrue(phase_one_feasible(A, np.array([0.25, 0.75, 1.0])))
        self.assertFalse(phase_one_feasible(A, np.array([1.5, 0.5, 1.0])))


class TestSeparability(unittest.TestCase):
    """Test hull vertex counting."""

    def test_square_with_centre(self):
        cloud = PointCloud(np.vstack([SQUARE, [[0.5, 0.5]]]))
        self.assertEqual(hull_vertex_count(cloud), 4)
        self.assertFalse(is_separable(cloud, 4))

    def test_points_on_circle(self):
        angles = np.linspace(0.0, 2.0 * math.pi, 12, endpoint=False)
        cloud = PointCloud(np.column_stack([np.cos(angles), np.sin(angles)]))
        self.assertEqual(hull_vertex_count(cloud), 12)

    def test_duplicates_not_separable(self):
        cloud = PointCloud(np.vstack([SQUARE, SQUARE[:1]]))
        self.assertEqual(hull_vertices(cloud), [1, 2, 3])

    def test_edge_midpoint(self):
        cloud = PointCloud(np.vstack([SQUARE, [[0.5, 0.0]]]))
        self.assertEqual(hull_vertices(cloud), [0, 1, 2, 3])

    def test_single_point(self):
        self.assertTrue(is_separable(PointCloud(np.array([[3.0, 1.0, 2.0]])), 0))

    def test_higher_dimension(self):
        corners = np.array([[x, y, z] for x in (0.0, 1.0) for y in (0.0, 1.0) for z in (0.0, 1.0)])
        rng = np.random.default_rng(3)
        inner = rng.uniform(0.1, 0.9, (10, 3))
        self.assertEqual(hull_vertices(PointCloud(np.vstack([corners, inner]))), list(range(8)))

    def test_index_checked(self):
        with self.assertRaises(ValidationError):
            is_separable(PointCloud(SQUARE), 4)

    def test_rejects_bad_cloud(self):
        with self.assertRaises(ValidationError):
            PointCloud(np.array([1.0, 2.0]))


class TestPlanarSweep(unittest.TestCase):
    """Test the planar cross-check against the linear program."""

    def test_agrees_with_oracle(self):
        rng = np.random.default_rng(11)
        for _ in range(5):
            points = rng.normal(size=(30, 2))
            self.assertEqual(planar_hull_vertices(points), hull_vertices(PointCloud(points)))

    def test_collinear_and_duplicates(self):
        points = np.vstack([SQUARE, [[0.5, 0.0], [0.5, 0.5]], SQUARE[2:3]])
        self.assertEqual(planar_hull_vertices(points), [0, 1, 3])
        self.assertEqual(planar_hull_vertices(points), hull_vertices(PointCloud(points)))

    def test_small_inputs(self):
        self.assertEqual(planar_hull_vertices(np.array([[1.0, 2.0]])), [0])
        self.assertEqual(planar_hull_vertices(np.array([[0.0, 0.0], [1.0, 1.0]])), [0, 1])

    def test_rejects_non_planar(self):
        with self.assertRaises(ValidationError):
            planar_hull_vertices(np.zeros((4, 3)))


class TestTheoreticalOrder(unittest.TestCase):
    """Test the growth terms."""

    def test_values(self):
        self.assertAlmostEqual(theoretical_order("ball", 100, 3), 10.0)
        self.assertAlmostEqual(theoretical_order("cube", 100, 3), math.log(100) ** 2)
        self.assertAlmostEqual(theoretical_order("gauss", 100, 5), math.log(100) ** 2)
        self.assertEqual(theoretical_order("gauss", 50, 1), 1.0)

    def test_rejects(self):
        with self.assertRaises(ValidationError):
            theoretical_order("ball", 1, 3)
        with self.assertRaises(ValidationError):
            theoretical_order("sphere", 10, 3)


if __name__ == '__main__':
    unittest.main(verbosity=2)
