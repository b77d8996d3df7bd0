"""Core data model: datasets, coefficients, reparametrization, and prediction.

The regression is ``Y_i = sum_k f_k(X_i' beta) G_ik + eps_i`` with gene
column 0 identically one, so ``f_0`` is the intercept function.  Each
coefficient function is represented on the transformed spline basis by a
constant part ``gamma_k1`` and a varying part ``gamma_k*``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .basis import BasisSpec, transformed_basis_matrix
from .exceptions import ConstraintError, ParameterError

#: |beta_1| below this marks a degenerate fit (identifiability assumes beta_1 > 0).
DEGENERATE_BETA1 = 1e-8


@dataclass(frozen=True)
class Dataset:
    """Response ``y`` (n), loadings ``x`` (n x q), genes ``g`` (n x (p+1)).

    Column 0 of ``g`` is the constant 1 for the intercept function.
    """

    y: np.ndarray
    x: np.ndarray
    g: np.ndarray

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float)
        x = np.asarray(self.x, dtype=float)
        g = np.asarray(self.g, dtype=float)
        if y.ndim != 1 or x.ndim != 2 or g.ndim != 2:
            raise ParameterError("y must be 1-d; x and g must be 2-d")
        n = y.shape[0]
        if x.shape[0] != n or g.shape[0] != n:
            raise ParameterError("y, x, g must have the same number of rows")
        if n < 1 or x.shape[1] < 1 or g.shape[1] < 1:
            raise ParameterError("empty dataset")
        if not (np.isfinite(y).all() and np.isfinite(x).all() and np.isfinite(g).all()):
            raise ParameterError("dataset contains non-finite values")
        if not np.all(g[:, 0] == 1.0):
            raise ParameterError("gene column 0 must be identically 1")
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "g", g)

    @property
    def n(self) -> int:
        return self.y.shape[0]

    @property
    def q(self) -> int:
        return self.x.shape[1]

    @property
    def p(self) -> int:
        return self.g.shape[1] - 1


@dataclass(frozen=True)
class LoadingVector:
    """Unit-norm index loadings with nonnegative first component."""

    beta: np.ndarray

    def __post_init__(self):
        beta = np.asarray(self.beta, dtype=float)
        if beta.ndim != 1 or beta.size < 1:
            raise ParameterError("beta must be a nonempty vector")
        nrm = np.linalg.norm(beta)
        if abs(nrm - 1.0) > 1e-10:
            raise ConstraintError(f"||beta|| must be 1, got {nrm!r}")
        if beta[0] < 0:
            raise ConstraintError("beta[0] must be nonnegative")
        object.__setattr__(self, "beta", beta)

    @property
    def q(self) -> int:
        return self.beta.shape[0]

    @property
    def degenerate(self) -> bool:
        return abs(self.beta[0]) < DEGENERATE_BETA1

    def support(self) -> tuple[int, ...]:
        return tuple(int(d) for d in np.nonzero(self.beta)[0])


@dataclass(frozen=True)
class Coefficients:
    """Per-function spline coefficients.

    ``constant`` holds gamma_k1 for k = 0..p; row k of ``varying`` holds
    gamma_k* (length L-1) on the shared basis.
    """

    constant: np.ndarray
    varying: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.constant, dtype=float)
        v = np.asarray(self.varying, dtype=float)
        if c.ndim != 1 or v.ndim != 2 or v.shape[0] != c.shape[0]:
            raise ParameterError("constant must be (p+1,), varying (p+1, L-1)")
        object.__setattr__(self, "constant", c)
        object.__setattr__(self, "varying", v)

    @property
    def num_functions(self) -> int:
        return self.constant.shape[0]

    def flat(self) -> np.ndarray:
        """Stacked vector (gamma_0', ..., gamma_p')' matching design columns."""
        return np.concatenate(
            [np.concatenate(([self.constant[k]], self.varying[k]))
             for k in range(self.num_functions)]
        )

    @staticmethod
    def from_flat(vec: np.ndarray, num_functions: int) -> "Coefficients":
        vec = np.asarray(vec, dtype=float)
        L = vec.size // num_functions
        if L * num_functions != vec.size:
            raise ParameterError("coefficient vector length not divisible by p+1")
        mat = vec.reshape(num_functions, L)
        return Coefficients(constant=mat[:, 0].copy(), varying=mat[:, 1:].copy())

    def classify(self) -> "FunctionClassification":
        """Zero-pattern classification of functions 1..p (0 is always varying)."""
        varying, constant, zero = [], [], []
        for k in range(1, self.num_functions):
            if np.any(self.varying[k] != 0.0):
                varying.append(k)
            elif self.constant[k] != 0.0:
                constant.append(k)
            else:
                zero.append(k)
        return FunctionClassification(
            varying=tuple(varying), constant=tuple(constant), zero=tuple(zero)
        )


@dataclass(frozen=True)
class FunctionClassification:
    """Disjoint partition of gene indices 1..p into V / C / Z."""

    varying: tuple[int, ...]
    constant: tuple[int, ...]
    zero: tuple[int, ...]
    beta_support: tuple[int, ...] = ()

    def __post_init__(self):
        sets = [set(self.varying), set(self.constant), set(self.zero)]
        total = sum(len(s) for s in sets)
        union = set().union(*sets)
        if total != len(union):
            raise ParameterError("V, C, Z must be disjoint")
        if union and union != set(range(1, max(union) + 1)):
            raise ParameterError("V, C, Z must partition {1..p}")

    def category(self, k: int) -> str:
        if k == 0 or k in self.varying:
            return "varying"
        if k in self.constant:
            return "constant"
        if k in self.zero:
            return "zero"
        raise ParameterError(f"function index {k} not classified")


@dataclass(frozen=True)
class FittedModel:
    """Everything produced by a fit: basis, loadings, coefficients, tuning."""

    spec: BasisSpec
    beta: LoadingVector
    coef: Coefficients
    classification: FunctionClassification
    tuning: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)


def beta_to_phi(beta: LoadingVector) -> np.ndarray:
    """Drop the first component; valid because ||beta|| = 1 pins it down."""
    return beta.beta[1:].copy()


def phi_to_beta(phi: np.ndarray) -> LoadingVector:
    """Rebuild the unit-norm loading vector from its free components."""
    phi = np.asarray(phi, dtype=float)
    s = float(phi @ phi)
    if s >= 1.0:
        raise ConstraintError(f"||phi|| must be < 1, got norm {np.sqrt(s)!r}")
    return LoadingVector(np.concatenate(([np.sqrt(1.0 - s)], phi)))


def jacobian_phi(phi: np.ndarray) -> np.ndarray:
    """d(beta)/d(phi): top row -(1-||phi||^2)^(-1/2) phi', identity below."""
    phi = np.asarray(phi, dtype=float)
    s = float(phi @ phi)
    if s >= 1.0:
        raise ConstraintError(f"||phi|| must be < 1, got norm {np.sqrt(s)!r}")
    qm1 = phi.shape[0]
    out = np.empty((qm1 + 1, qm1))
    out[0] = -phi / np.sqrt(1.0 - s)
    out[1:] = np.eye(qm1)
    return out


def index_values(dataset: Dataset, beta: LoadingVector) -> np.ndarray:
    """Scalar index u_i = X_i' beta."""
    if beta.q != dataset.q:
        raise ParameterError(f"beta has {beta.q} components, x has {dataset.q} columns")
    return dataset.x @ beta.beta


def design_matrix(dataset: Dataset, spec: BasisSpec, beta: LoadingVector,
                  clamp_all: bool = False) -> np.ndarray:
    """Spline design W(beta): row i is G_i kron B(X_i' beta).

    Columns come in blocks of L per function k = 0..p, each block ordered
    as (constant column G_k, varying columns G_k * B2..BL), so group
    indexing is identical across the selection steps.
    """
    u = index_values(dataset, beta)
    T = transformed_basis_matrix(spec, u, clamp_all=clamp_all)
    n = dataset.n
    return (dataset.g[:, :, None] * T[:, None, :]).reshape(n, -1)


def evaluate_fk(fit: FittedModel, k: int, u) -> np.ndarray:
    """Evaluate the k-th estimated coefficient function on a grid."""
    if not 0 <= k < fit.coef.num_functions:
        raise ParameterError(f"function index {k} out of range")
    T = transformed_basis_matrix(fit.spec, np.atleast_1d(u))
    return fit.coef.constant[k] + T[:, 1:] @ fit.coef.varying[k]


def predict(fit: FittedModel, x: np.ndarray, g: np.ndarray) -> np.ndarray:
    """Predict responses for new rows; out-of-domain indices are clamped.

    A clamped prediction sets ``fit.diagnostics['extrapolated']`` so callers
    can surface the warning.
    """
    x = np.asarray(x, dtype=float)
    g = np.asarray(g, dtype=float)
    if x.ndim != 2 or g.ndim != 2 or x.shape[0] != g.shape[0]:
        raise ParameterError("x and g must be 2-d with matching row counts")
    if x.shape[1] != fit.beta.q:
        raise ParameterError("x column count does not match training q")
    if g.shape[1] != fit.coef.num_functions:
        raise ParameterError("g column count does not match training p+1")
    u = x @ fit.beta.beta
    a, b = fit.spec.boundary
    if np.any(u < a) or np.any(u > b):
        fit.diagnostics["extrapolated"] = True
    T = transformed_basis_matrix(fit.spec, u, clamp_all=True)
    fmat = fit.coef.constant[None, :] + T[:, 1:] @ fit.coef.varying.T
    return np.sum(fmat * g, axis=1)
