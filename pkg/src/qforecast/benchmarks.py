"""Analytic benchmark objectives for exercising the tuners.

All are minimization problems with known optima: sphere and rastrigin reach
0 at the origin, one_max counts down from 0 at the all-ones bitstring.
"""

import numpy as np

SPHERE_BOUNDS = (-5.12, 5.12)
RASTRIGIN_BOUNDS = (-5.12, 5.12)


def sphere(x) -> float:
    x = np.asarray(x, dtype=float)
    return float(x @ x)


def rastrigin(x) -> float:
    x = np.asarray(x, dtype=float)
    return float(10.0 * x.size + np.sum(x * x - 10.0 * np.cos(2.0 * np.pi * x)))


def one_max(bits) -> float:
    """Negated count of ones, so the all-ones string is the minimum."""
    return -float(np.sum(np.asarray(bits, dtype=int)))


def quadratic_1d(center: float):
    """A convex 1-D parabola with its minimum at ``center``."""

    def objective(x) -> float:
        x = np.asarray(x, dtype=float).reshape(-1)
        return float((x[0] - center) ** 2)

    return objective
