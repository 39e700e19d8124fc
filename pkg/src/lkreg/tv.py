"""Discrete gradient machinery for isotropic total variation on 2-D grids.

Forward differences with periodic wrap-around in both directions; the
divergence below is the exact (negative-free) matrix transpose of the
gradient, so adjoint identities hold to rounding error.
"""

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class GradientField:
    """Pair of component arrays (u, v), one per grid direction."""

    u: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        if self.u.shape != self.v.shape:
            raise ValueError("gradient components must share a shape")

    @classmethod
    def zeros(cls, shape):
        return cls(np.zeros(shape), np.zeros(shape))

    @property
    def shape(self):
        return self.u.shape


def discrete_gradient(z):
    """Periodic forward differences along both axes.

    Component u holds differences along the first index (with the last row
    wrapping to the first), component v along the second index.
    """
    u = np.roll(z, -1, axis=0) - z
    v = np.roll(z, -1, axis=1) - z
    return GradientField(u, v)


def divergence_adjoint(field):
    """Apply the exact transpose of `discrete_gradient` to a field."""
    u, v = field.u, field.v
    return np.roll(u, 1, axis=0) - u + np.roll(v, 1, axis=1) - v


def l21_norm(field):
    """Sum over pixels of the pointwise Euclidean length sqrt(u^2 + v^2)."""
    return float(np.sum(np.hypot(field.u, field.v)))


def tv_value(z):
    """Isotropic total variation of a grid: l21 norm of its gradient."""
    return l21_norm(discrete_gradient(z))


# Shrinking by an extra half ulp or so leaves reprojected points strictly
# inside the unit ball, which makes a second projection an exact no-op.
_INWARD = 1.0 + 2.0 ** -48


def project_dual_ball(field):
    """Project a field onto pointwise Euclidean unit balls.

    Entries with sqrt(u^2 + v^2) <= 1 pass through unchanged; longer ones are
    divided by their length (biased slightly inward so the projection is
    idempotent in floating point).
    """
    norm = np.hypot(field.u, field.v)
    scale = np.where(norm > 1.0, norm * _INWARD, 1.0)
    return GradientField(field.u / scale, field.v / scale)


def field_dot(a, b):
    """Euclidean inner product of two fields."""
    return float(np.vdot(a.u, b.u) + np.vdot(a.v, b.v))
