"""Normalized B-spline bases and the constant/varying split transform.

The raw basis is the normalized B-spline family on ``[a, b]`` (partition of
unity).  The transformed basis replaces the first component by the constant
function 1 and keeps components 2..L unchanged, so a coefficient vector
splits into a constant part (first entry) and a varying part (the rest).
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.interpolate import BSpline

from .exceptions import DomainError, ParameterError

VALID_ORDERS = (2, 3, 4)

#: Values this far outside [a, b] are clamped; anything further is an error.
DOMAIN_TOL = 1e-12


@dataclass(frozen=True)
class BasisSpec:
    """Knot layout for one shared spline basis.

    ``order`` is the B-spline order (2=linear, 3=quadratic, 4=cubic),
    ``knots`` the full nondecreasing sequence with the boundary knots
    repeated ``order`` times around ``interior_knot_count`` equally spaced
    interior knots.  The basis dimension is ``L = interior_knot_count + order``.
    """

    order: int
    interior_knot_count: int
    boundary: tuple[float, float]
    knots: tuple[float, ...]

    @property
    def num_basis(self) -> int:
        return self.interior_knot_count + self.order

    @property
    def degree(self) -> int:
        return self.order - 1


@dataclass(frozen=True)
class BasisValue:
    """Raw and transformed basis values at a single point."""

    raw: np.ndarray
    transformed: np.ndarray


def make_basis(u_min: float, u_max: float, K: int, h: int) -> BasisSpec:
    """Build a basis of order ``h`` with ``K`` equally spaced interior knots.

    Raises
    ------
    ParameterError
        If ``u_min >= u_max``, ``K < 1``, or ``h`` is not 2, 3, or 4.
    """
    if not np.isfinite(u_min) or not np.isfinite(u_max) or u_min >= u_max:
        raise ParameterError(f"invalid boundary ({u_min!r}, {u_max!r})")
    if h not in VALID_ORDERS:
        raise ParameterError(f"spline order must be one of {VALID_ORDERS}, got {h}")
    K = int(K)
    if K < 1:
        raise ParameterError(f"interior knot count must be >= 1, got {K}")
    interior = np.linspace(u_min, u_max, K + 2)[1:-1]
    knots = np.concatenate([np.full(h, u_min), interior, np.full(h, u_max)])
    return BasisSpec(
        order=h,
        interior_knot_count=K,
        boundary=(float(u_min), float(u_max)),
        knots=tuple(float(t) for t in knots),
    )


def _clamp(spec: BasisSpec, u: np.ndarray, clamp_all: bool = False) -> np.ndarray:
    a, b = spec.boundary
    u = np.asarray(u, dtype=float)
    if not clamp_all:
        bad = (u < a - DOMAIN_TOL) | (u > b + DOMAIN_TOL)
        if np.any(bad):
            worst = u[bad][0]
            raise DomainError(f"index value {worst!r} outside basis domain [{a}, {b}]")
    return np.clip(u, a, b)


@lru_cache(maxsize=128)
def _deriv_spline(spec: BasisSpec) -> BSpline:
    full = BSpline(np.asarray(spec.knots), np.eye(spec.num_basis), spec.degree,
                   extrapolate=True)
    return full.derivative()


def raw_basis_matrix(spec: BasisSpec, u, clamp_all: bool = False) -> np.ndarray:
    """Evaluate the normalized B-spline basis; rows sum to 1.

    With ``clamp_all=True`` out-of-domain values are clamped to the boundary
    instead of raising (used for prediction on new data).
    """
    uu = _clamp(spec, np.atleast_1d(u), clamp_all=clamp_all)
    return BSpline.design_matrix(uu, np.asarray(spec.knots), spec.degree).toarray()


def transformed_basis_matrix(spec: BasisSpec, u, clamp_all: bool = False) -> np.ndarray:
    """Evaluate the transformed basis (1, B2, ..., BL) row-wise."""
    out = raw_basis_matrix(spec, u, clamp_all=clamp_all)
    out[:, 0] = 1.0
    return out


def transformed_basis_deriv_matrix(spec: BasisSpec, u, clamp_all: bool = False) -> np.ndarray:
    """Derivative of each transformed basis component; column 0 is zero."""
    uu = _clamp(spec, np.atleast_1d(u), clamp_all=clamp_all)
    out = _deriv_spline(spec)(uu)
    out[:, 0] = 0.0
    return out


def eval_basis(spec: BasisSpec, u: float) -> BasisValue:
    """Raw and transformed basis values at one point."""
    raw = raw_basis_matrix(spec, u)[0]
    transformed = raw.copy()
    transformed[0] = 1.0
    return BasisValue(raw=raw, transformed=transformed)


def eval_basis_derivative(spec: BasisSpec, u: float) -> np.ndarray:
    """Derivative of the transformed basis at one point."""
    return transformed_basis_deriv_matrix(spec, u)[0]


def knot_order_grid(n: int, r: int = 2) -> tuple[tuple[int, int], tuple[int, ...]]:
    """Candidate interior-knot range and order set for a sample of size ``n``.

    The knot range is ``[max(floor(0.5 n^(1/(2r+1))), 1), floor(1.5 n^(1/(2r+1)))]``
    with ``r`` the assumed smoothness of the coefficient functions.
    """
    if n < 10:
        raise ParameterError(f"need n >= 10 to size the knot grid, got {n}")
    if r < 2:
        raise ParameterError(f"smoothness order r must be >= 2, got {r}")
    root = float(n) ** (1.0 / (2 * r + 1))
    lo = max(int(np.floor(0.5 * root)), 1)
    hi = int(np.floor(1.5 * root))
    return (lo, max(hi, lo)), VALID_ORDERS
