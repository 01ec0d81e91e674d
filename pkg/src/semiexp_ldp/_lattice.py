from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._validation import ParameterError, check_finite, check_positive

MASS_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class LatticeDist:
    """Finite distribution on the grid ``offset + h * k``, ``k = 0..K-1``."""

    h: float
    offset: float
    masses: np.ndarray
    error_bound: float | None = None
    mean: float = field(init=False)

    def __post_init__(self):
        check_positive("h", self.h)
        check_finite("offset", self.offset)
        masses = np.array(self.masses, dtype=np.float64).ravel()
        if masses.size == 0:
            raise ParameterError("lattice needs at least one support point")
        if np.any(masses < 0) or not np.all(np.isfinite(masses)):
            raise ParameterError("lattice masses must be finite and nonnegative")
        if abs(masses.sum() - 1.0) > MASS_TOL:
            raise ParameterError(f"lattice masses sum to {masses.sum()!r}, not 1")
        masses.setflags(write=False)
        object.__setattr__(self, "h", float(self.h))
        object.__setattr__(self, "offset", float(self.offset))
        object.__setattr__(self, "masses", masses)
        object.__setattr__(self, "mean", float(np.dot(masses, self.support)))

    @property
    def support(self):
        return self.offset + self.h * np.arange(self.masses.size)

    @property
    def size(self):
        return int(self.masses.size)

    @property
    def max_point(self):
        return self.offset + self.h * (self.masses.size - 1)

    @property
    def min_point(self):
        return self.offset

    @property
    def variance(self):
        x = self.support - self.mean
        return float(np.dot(self.masses, x * x))

    def index_at_or_above(self, t):
        """Smallest grid index k with ``offset + h*k >= t`` (ties included)."""
        k = (t - self.offset) / self.h
        return int(np.ceil(k - 1e-9))

    @classmethod
    def from_points(cls, points, masses):
        """Build from explicit points lying on a common grid."""
        points = np.asarray(points, dtype=np.float64)
        masses = np.asarray(masses, dtype=np.float64)
        order = np.argsort(points)
        points, masses = points[order], masses[order]
        if points.size == 1:
            return cls(1.0, float(points[0]), masses)
        h = float(np.min(np.diff(points)))
        if h <= 0:
            raise ParameterError("lattice points must be distinct")
        idx = np.rint((points - points[0]) / h).astype(np.int64)
        if np.max(np.abs(points[0] + idx * h - points)) > 1e-9 * max(1.0, h):
            raise ParameterError("points do not lie on a common grid")
        full = np.zeros(idx[-1] + 1)
        full[idx] = masses
        return cls(h, float(points[0]), full)

    @classmethod
    def two_point(cls):
        """The symmetric two-point law on {-1, +1}."""
        return cls(2.0, -1.0, np.array([0.5, 0.5]))

    def to_dict(self):
        return {"h": self.h, "offset": self.offset, "masses": self.masses.tolist()}
