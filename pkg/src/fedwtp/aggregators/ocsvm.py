"""Exact nu-one-class SVM for one-dimensional samples.

The dual is solved with pairwise (SMO) updates, choosing the pair by
second-order working-set selection; every few dozen steps the active set is tried for an exact finish by
solving the KKT equations of the free multipliers directly. Multipliers are normalized to sum to one with box ``[0, 1/(nu*n)]``,
so the decision value is ``sum_i g_i K(x_i, x) - rho``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class OneClassSvmModel:
    support_values: np.ndarray
    multipliers: np.ndarray
    rho: float
    bandwidth: float

    def kernel(self, a, b) -> np.ndarray:
        a = np.asarray(a, dtype=np.float64)
        b = np.asarray(b, dtype=np.float64)
        return np.exp(-((a[:, None] - b[None, :]) ** 2) / (2.0 * self.bandwidth**2))

    def decision(self, x) -> np.ndarray:
        x = np.atleast_1d(np.asarray(x, dtype=np.float64))
        return self.multipliers @ self.kernel(self.support_values, x) - self.rho


def median_bandwidth(values) -> float:
    """Median pairwise absolute difference, ignoring zero gaps if they dominate.

    Returns 0.0 only when every value is identical.
    """
    v = np.asarray(values, dtype=np.float64)
    iu = np.triu_indices(v.size, k=1)
    gaps = np.abs(v[:, None] - v[None, :])[iu]
    if gaps.size == 0:
        return 0.0
    med = float(np.median(gaps))
    if med > 0:
        return med
    nonzero = gaps[gaps > 0]
    return float(np.median(nonzero)) if nonzero.size else 0.0


_POLISH_EVERY = 50
# kernel matrices are badly conditioned; a polished solution is accepted when
# every KKT condition holds to this accuracy (flags use a 1e-8 margin)
_POLISH_TOL = 1e-9


def _polish(q: np.ndarray, alpha: np.ndarray, cap: float, tol: float):
    """Exact optimum for the active set implied by ``alpha``, if it is one.

    Keeps the multipliers at zero and at the cap fixed and solves the KKT
    equations for the free ones: ``Q_FF a_F - rho = -cap * Q_FU 1`` with
    ``sum(a_F) = 1 - cap*|U|``. Returns ``(alpha, grad)`` when the solution is
    feasible and no multiplier violates optimality by more than ``tol``,
    otherwise None (the caller keeps iterating).
    """
    at_cap = alpha >= cap - 1e-12
    free = (alpha > 1e-12) & ~at_cap
    f = np.flatnonzero(free)
    if f.size == 0:
        return None
    kkt = np.zeros((f.size + 1, f.size + 1))
    kkt[:-1, :-1] = q[np.ix_(f, f)]
    kkt[:-1, -1] = -1.0
    kkt[-1, :-1] = 1.0
    rhs = np.empty(f.size + 1)
    rhs[:-1] = -cap * q[np.ix_(f, np.flatnonzero(at_cap))].sum(axis=1)
    rhs[-1] = 1.0 - cap * at_cap.sum()
    sol = np.linalg.lstsq(kkt, rhs, rcond=None)[0]
    a_f, rho = sol[:-1], sol[-1]
    if np.any(a_f < -1e-12) or np.any(a_f > cap + 1e-12):
        return None
    new = np.where(at_cap, cap, 0.0)
    new[f] = np.clip(a_f, 0.0, cap)
    grad = q @ new
    zero = ~at_cap & ~free
    if np.any(grad[zero] < rho - tol) or np.any(grad[at_cap] > rho + tol):
        return None
    if abs(new.sum() - 1.0) > 1e-9 or np.max(np.abs(grad[f] - rho)) > tol:
        return None
    return new, grad


def fit_one_class_svm(
    values,
    nu: float,
    bandwidth: float | None = None,
    tol: float = 1e-10,
    max_iter: int = 100_000,
) -> tuple[OneClassSvmModel, np.ndarray]:
    """Fit on ``values`` and return the model plus training decision values."""
    if not 0.0 < nu <= 1.0:
        raise ValueError("nu must lie in (0, 1]")
    x = np.asarray(values, dtype=np.float64).reshape(-1)
    n = x.size
    if bandwidth is None:
        bandwidth = median_bandwidth(x)
    if bandwidth <= 0:
        raise ValueError("bandwidth must be positive (are all values identical?)")
    q = np.exp(-((x[:, None] - x[None, :]) ** 2) / (2.0 * bandwidth**2))
    cap = 1.0 / (nu * n)

    alpha = np.zeros(n)
    full = int(np.floor(nu * n))
    alpha[:full] = cap
    if full < n:
        alpha[full] = 1.0 - full * cap
    grad = q @ alpha
    diag = np.diag(q)

    for it in range(max_iter):
        if it and it % _POLISH_EVERY == 0:
            exact = _polish(q, alpha, cap, max(tol, _POLISH_TOL))
            if exact is not None:
                alpha, grad = exact
                break
        up = alpha < cap - 1e-15
        low = alpha > 1e-15
        if not up.any() or not low.any():
            break
        g_up = np.where(up, grad, np.inf)
        g_low = np.where(low, grad, -np.inf)
        i = int(np.argmin(g_up))
        if g_low.max() - g_up[i] < tol:
            break
        # second-order choice of the partner: largest guaranteed decrease
        gain = g_low - g_up[i]
        curv_all = np.maximum(diag[i] + diag - 2.0 * q[i], 1e-12)
        j = int(np.argmax(np.where(gain > 0, gain * gain / curv_all, -np.inf)))
        if i == j:
            break
        curv = curv_all[j]
        step = min(gain[j] / curv, cap - alpha[i], alpha[j])
        alpha[i] += step
        alpha[j] -= step
        grad += step * (q[:, i] - q[:, j])

    free = (alpha > 1e-12) & (alpha < cap - 1e-12)
    if free.any():
        rho = float(np.mean(grad[free]))
    else:
        at_cap = alpha >= cap - 1e-12
        at_zero = alpha <= 1e-12
        lo = grad[at_cap].max() if at_cap.any() else -np.inf
        hi = grad[at_zero].min() if at_zero.any() else np.inf
        rho = float((lo + hi) / 2) if np.isfinite(lo) and np.isfinite(hi) else float(
            lo if np.isfinite(lo) else hi
        )
    sv = alpha > 1e-12
    model = OneClassSvmModel(x[sv].copy(), alpha[sv].copy(), rho, float(bandwidth))
    return model, grad - rho


def svm_flags(values, nu: float = 0.2, bandwidth: float | None = None, tol: float = 1e-8) -> np.ndarray:
    """True where the fitted decision value is negative.

    Identical samples have no outliers; values on the boundary (decision
    value within ``tol`` of zero) count as inliers.
    """
    x = np.asarray(values, dtype=np.float64).reshape(-1)
    bw = median_bandwidth(x) if bandwidth is None else bandwidth
    if x.size < 2 or bw <= 0:
        return np.zeros(x.size, dtype=bool)
    _, decision = fit_one_class_svm(x, nu, bw)
    return decision < -tol
