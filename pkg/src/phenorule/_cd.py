"""Numba kernel for L1-penalized logistic regression by coordinate descent.

Operates on CSC column arrays so the text block stays sparse. The outer loop
is the usual IRLS quadratic majorization; the inner solve alternates
converged sweeps over the active set with a single full sweep that checks
for violations. A step-halving safeguard keeps the recorded penalized
objective non-increasing across outer iterations, and a linear-predictor
guard stops the path early once the data are effectively separated.
"""

import numpy as np
from numba import njit

_PMIN = 1e-5
_ETA_LIMIT = 30.0


@njit(cache=True)
def _objective(eta, y, beta, lam, n):
    loss = 0.0
    for i in range(n):
        e = eta[i]
        if e > 0.0:
            loss += (1.0 - y[i]) * e + np.log1p(np.exp(-e))
        else:
            loss += -y[i] * e + np.log1p(np.exp(e))
    penalty = 0.0
    for j in range(beta.shape[0]):
        penalty += abs(beta[j])
    return loss / n + lam * penalty


@njit(cache=True)
def _recompute_eta(data, indices, indptr, beta, b0, n, p, eta):
    for i in range(n):
        eta[i] = b0
    for j in range(p):
        bj = beta[j]
        if bj != 0.0:
            for idx in range(indptr[j], indptr[j + 1]):
                eta[indices[idx]] += data[idx] * bj


@njit(cache=True)
def _cd_sweeps(data, indices, indptr, w, res, beta, b0, lam, active_only,
               active, tol, max_sweeps, n):
    """Cyclic soft-threshold sweeps; returns (b0, max_delta of last sweep)."""
    p = beta.shape[0]
    max_delta = 0.0
    for _ in range(max_sweeps):
        max_delta = 0.0
        for j in range(p):
            if active_only and not active[j]:
                continue
            num = 0.0
            denom = 0.0
            for idx in range(indptr[j], indptr[j + 1]):
                i = indices[idx]
                x = data[idx]
                num += w[i] * x * res[i]
                denom += w[i] * x * x
            if denom <= 0.0:
                continue
            num = num / n + (denom / n) * beta[j]
            if num > lam:
                new_b = (num - lam) / (denom / n)
            elif num < -lam:
                new_b = (num + lam) / (denom / n)
            else:
                new_b = 0.0
            delta = new_b - beta[j]
            if delta != 0.0:
                for idx in range(indptr[j], indptr[j + 1]):
                    res[indices[idx]] -= delta * data[idx]
                beta[j] = new_b
                if new_b != 0.0:
                    active[j] = True
                if abs(delta) > max_delta:
                    max_delta = abs(delta)
        # unpenalized intercept
        sw = 0.0
        sr = 0.0
        for i in range(n):
            sw += w[i]
            sr += w[i] * res[i]
        d0 = sr / sw
        b0 += d0
        for i in range(n):
            res[i] -= d0
        if abs(d0) > max_delta:
            max_delta = abs(d0)
        if max_delta < tol:
            break
    return b0, max_delta


@njit(cache=True)
def fit_logistic_lasso_path(data, indices, indptr, n, p, y, lambdas, tol,
                            max_outer, max_sweeps, max_cycles, dfmax):
    """Fit the whole descending-lambda path with warm starts.

    Returns (intercepts, betas, n_iters, converged, objectives, traces) with
    one row per lambda; ``traces`` records the penalized objective after
    each outer iteration (NaN-padded). Once the linear predictor diverges
    past the separation guard or the active set grows beyond ``dfmax``, the
    remaining (smaller) lambdas inherit the current iterate unconverged.
    """
    n_lam = lambdas.shape[0]
    intercepts = np.zeros(n_lam)
    betas = np.zeros((n_lam, p))
    n_iters = np.zeros(n_lam, dtype=np.int64)
    converged = np.zeros(n_lam, dtype=np.bool_)
    objectives = np.zeros(n_lam)
    traces = np.full((n_lam, max_outer + 1), np.nan)

    ybar = 0.0
    for i in range(n):
        ybar += y[i]
    ybar /= n
    b0 = np.log(ybar / (1.0 - ybar))
    beta = np.zeros(p)
    eta = np.empty(n)
    prob = np.empty(n)
    w = np.empty(n)
    res = np.empty(n)
    active = np.zeros(p, dtype=np.bool_)
    beta_old = np.empty(p)
    stopped = False

    for li in range(n_lam):
        lam = lambdas[li]
        _recompute_eta(data, indices, indptr, beta, b0, n, p, eta)
        obj = _objective(eta, y, beta, lam, n)
        traces[li, 0] = obj
        outer = 0
        ok = False
        if not stopped:
            for outer in range(1, max_outer + 1):
                for j in range(p):
                    beta_old[j] = beta[j]
                b0_old = b0
                obj_old = obj
                for i in range(n):
                    pi = 1.0 / (1.0 + np.exp(-eta[i]))
                    if pi < _PMIN:
                        pi = _PMIN
                    elif pi > 1.0 - _PMIN:
                        pi = 1.0 - _PMIN
                    prob[i] = pi
                    w[i] = pi * (1.0 - pi)
                    res[i] = (y[i] - pi) / w[i]
                # converge on the active set, then one full sweep for violations
                for cycle in range(max_cycles):
                    b0, _ = _cd_sweeps(data, indices, indptr, w, res, beta, b0,
                                       lam, True, active, tol, max_sweeps, n)
                    b0, viol = _cd_sweeps(data, indices, indptr, w, res, beta, b0,
                                          lam, False, active, tol, 1, n)
                    if viol < tol:
                        break
                _recompute_eta(data, indices, indptr, beta, b0, n, p, eta)
                obj = _objective(eta, y, beta, lam, n)
                # safeguard: halve the step until the objective stops increasing
                halvings = 0
                while obj > obj_old + 1e-12 and halvings < 30:
                    for j in range(p):
                        beta[j] = 0.5 * (beta[j] + beta_old[j])
                    b0 = 0.5 * (b0 + b0_old)
                    _recompute_eta(data, indices, indptr, beta, b0, n, p, eta)
                    obj = _objective(eta, y, beta, lam, n)
                    halvings += 1
                traces[li, outer] = obj
                eta_max = 0.0
                for i in range(n):
                    if abs(eta[i]) > eta_max:
                        eta_max = abs(eta[i])
                if eta_max > _ETA_LIMIT:
                    stopped = True
                    break
                max_change = abs(b0 - b0_old)
                for j in range(p):
                    d = abs(beta[j] - beta_old[j])
                    if d > max_change:
                        max_change = d
                if max_change < tol:
                    ok = True
                    break
        n_active = 0
        for j in range(p):
            betas[li, j] = beta[j]
            active[j] = beta[j] != 0.0
            if active[j]:
                n_active += 1
        if n_active > dfmax:
            stopped = True
        intercepts[li] = b0
        n_iters[li] = outer
        converged[li] = ok
        objectives[li] = obj
    return intercepts, betas, n_iters, converged, objectives, traces
