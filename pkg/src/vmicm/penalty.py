"""Minimax concave penalty and its scalar/group firm-thresholding operators."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import ParameterError

#: Concavity parameter used when none is tuned.
DEFAULT_TAU = 3.0


@dataclass(frozen=True)
class McpParams:
    """Regularization level ``lam >= 0`` and concavity ``tau > 1``."""

    lam: float
    tau: float = DEFAULT_TAU

    def __post_init__(self):
        if self.lam < 0:
            raise ParameterError(f"lambda must be >= 0, got {self.lam}")
        if self.tau <= 1:
            raise ParameterError(f"tau must be > 1, got {self.tau}")


def mcp_value(x: float, params: McpParams) -> float:
    """Penalty value: lam*x - x^2/(2 tau) below the flat region, tau*lam^2/2 above."""
    if x < 0:
        raise ParameterError(f"mcp_value needs x >= 0, got {x}")
    lam, tau = params.lam, params.tau
    if lam == 0.0:
        return 0.0
    if x >= tau * lam:
        return 0.5 * tau * lam * lam
    return lam * x - x * x / (2.0 * tau)


def mcp_derivative(x: float, params: McpParams) -> float:
    """Penalty derivative lam*(1 - x/(tau*lam))_+ ; equals lam at 0."""
    if x < 0:
        raise ParameterError(f"mcp_derivative needs x >= 0, got {x}")
    lam, tau = params.lam, params.tau
    if lam == 0.0:
        return 0.0
    return lam * max(0.0, 1.0 - x / (tau * lam))


def scalar_firm_threshold(z: float, params: McpParams) -> float:
    """Minimizer of 0.5*(z-b)^2 + mcp_value(|b|); identity for |z| > tau*lam."""
    lam, tau = params.lam, params.tau
    if lam == 0.0:
        return z
    az = abs(z)
    if az > tau * lam:
        return z
    shrunk = max(az - lam, 0.0)
    return float(np.sign(z)) * shrunk / (1.0 - 1.0 / tau)


def group_firm_threshold(z: np.ndarray, params: McpParams) -> np.ndarray:
    """Group analogue of :func:`scalar_firm_threshold` acting on ``||z||``.

    Returns ``z`` unchanged when ``||z|| > tau*lam``, the exact zero vector
    when ``||z|| <= lam``, and a rescaled ``z`` in between.
    """
    z = np.asarray(z, dtype=float)
    lam, tau = params.lam, params.tau
    if lam == 0.0:
        return z.copy()
    norm = float(np.linalg.norm(z))
    if norm > tau * lam:
        return z.copy()
    if norm <= lam:
        return np.zeros_like(z)
    factor = (1.0 - lam / norm) / (1.0 - 1.0 / tau)
    return z * factor
