"""Compiled inner loop for group coordinate descent.

All penalized groups in one solve share a common width, so they pack into a
3-d array and the whole sweep runs inside one jitted kernel.  The kernel
updates the residual and coefficients in place and reports
(sweeps, status, objective, worst increase); status is 1 when converged,
0 when the iteration cap was hit, -1 when the objective rose beyond the
rounding allowance.
"""
from __future__ import annotations

import numpy as np
from numba import njit

#: Allowed objective increase per sweep (floating point rounding only).
MONOTONE_TOL = 1e-10


@njit(cache=True, fastmath=False)
def _penalty(norm, lam, tau):
    if lam <= 0.0:
        return 0.0
    if norm >= tau * lam:
        return 0.5 * tau * lam * lam
    return lam * norm - norm * norm / (2.0 * tau)


@njit(cache=True, fastmath=False)
def _objective(r, thetap, lam_eff, tau):
    val = 0.0
    for i in range(r.shape[0]):
        val += r[i] * r[i]
    val *= 0.5
    for m in range(thetap.shape[0]):
        s = 0.0
        for j in range(thetap.shape[1]):
            s += thetap[m, j] * thetap[m, j]
        val += _penalty(np.sqrt(s), lam_eff[m], tau)
    return val


@njit(cache=True, fastmath=False)
def run_sweeps(Q0, theta0, Qp, thetap, lam_eff, tau, r, max_iter, tol,
               check_monotone):
    """Gauss-Seidel sweeps over (group 0, penalized groups) to convergence."""
    n = r.shape[0]
    w0 = Q0.shape[1]
    M = Qp.shape[0]
    w = thetap.shape[1]
    zbuf = np.empty(w)

    prev_obj = _objective(r, thetap, lam_eff, tau)
    sweeps = 0
    for sweeps in range(1, max_iter + 1):
        delta = 0.0

        # group 0: orthonormal columns, so one pass of per-column OLS updates
        # solves the unpenalized block exactly given the others
        for j in range(w0):
            tj = theta0[j]
            if tj != 0.0:
                for i in range(n):
                    r[i] += Q0[i, j] * tj
            z = 0.0
            for i in range(n):
                z += Q0[i, j] * r[i]
            step = abs(z - tj)
            if step > delta:
                delta = step
            theta0[j] = z
            if z != 0.0:
                for i in range(n):
                    r[i] -= Q0[i, j] * z

        for m in range(M):
            nonzero = False
            for j in range(w):
                if thetap[m, j] != 0.0:
                    nonzero = True
                    break
            if nonzero:
                for i in range(n):
                    acc = 0.0
                    for j in range(w):
                        acc += Qp[m, i, j] * thetap[m, j]
                    r[i] += acc

            zsq = 0.0
            for j in range(w):
                z = 0.0
                for i in range(n):
                    z += Qp[m, i, j] * r[i]
                zbuf[j] = z
                zsq += z * z

            lam = lam_eff[m]
            factor = 1.0
            if lam > 0.0:
                znorm = np.sqrt(zsq)
                if znorm <= lam:
                    factor = 0.0
                elif znorm <= lam * tau:
                    factor = (1.0 - lam / znorm) / (1.0 - 1.0 / tau)

            newzero = True
            for j in range(w):
                val = factor * zbuf[j]
                step = abs(val - thetap[m, j])
                if step > delta:
                    delta = step
                thetap[m, j] = val
                if val != 0.0:
                    newzero = False

            if not newzero:
                for i in range(n):
                    acc = 0.0
                    for j in range(w):
                        acc += Qp[m, i, j] * thetap[m, j]
                    r[i] -= acc

        obj = _objective(r, thetap, lam_eff, tau)
        if check_monotone and obj > prev_obj + MONOTONE_TOL:
            return sweeps, -1, obj, obj - prev_obj
        prev_obj = obj
        if delta < tol:
            return sweeps, 1, prev_obj, 0.0
    return max_iter, 0, prev_obj, 0.0
