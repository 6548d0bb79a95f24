"""L1-penalized Poisson regression per species, with the complementary
log-log calibration that turns the fitted intensity into a presence
probability whose training total matches the observed presence count.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import DataError

INTERCEPT_FLOOR = -20.0


@dataclass
class PoissonGLM:
    intercept: float
    beta: np.ndarray
    l1_lambda: float
    cloglog_c: float | None = None
    converged: bool = True
    n_iter: int = 0
    all_absent: bool = False
    objective_trace: list[float] = field(default_factory=list)

    def intensity(self, X: np.ndarray) -> np.ndarray:
        if X.shape[1] != self.beta.shape[0]:
            raise DataError(
                f"feature dimension mismatch: {X.shape[1]} != {self.beta.shape[0]}"
            )
        return np.exp(self.intercept + X @ self.beta)

    def probability(self, X: np.ndarray) -> np.ndarray:
        if self.cloglog_c is None:
            raise DataError("model has no calibrated cloglog coefficient")
        return 1.0 - np.exp(-self.cloglog_c * self.intensity(X))

    def to_dict(self) -> dict:
        return {
            "intercept": self.intercept,
            "beta": self.beta.tolist(),
            "l1_lambda": self.l1_lambda,
            "cloglog_c": self.cloglog_c,
            "converged": self.converged,
            "n_iter": self.n_iter,
            "all_absent": self.all_absent,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PoissonGLM":
        return cls(
            intercept=d["intercept"],
            beta=np.asarray(d["beta"], dtype=float),
            l1_lambda=d["l1_lambda"],
            cloglog_c=d["cloglog_c"],
            converged=d["converged"],
            n_iter=d["n_iter"],
            all_absent=d.get("all_absent", False),
        )


def poisson_nll(X: np.ndarray, y: np.ndarray, intercept: float, beta: np.ndarray) -> float:
    """Unpenalized negative log-likelihood sum(exp(eta) - y*eta)."""
    eta = intercept + X @ beta
    with np.errstate(over="ignore"):  # inf is a valid line-search probe result
        return float(np.sum(np.exp(eta) - y * eta))


def poisson_nll_grad(
    X: np.ndarray, y: np.ndarray, intercept: float, beta: np.ndarray
) -> tuple[float, float, np.ndarray]:
    """(value, d/d intercept, d/d beta) of the unpenalized loss."""
    eta = intercept + X @ beta
    mu = np.exp(eta)
    resid = mu - y
    return float(np.sum(mu - y * eta)), float(resid.sum()), X.T @ resid


def _soft_threshold(v: np.ndarray, t: float) -> np.ndarray:
    return np.sign(v) * np.maximum(np.abs(v) - t, 0.0)


def fit_poisson_l1(
    X: np.ndarray,
    y: np.ndarray,
    lam: float,
    max_iter: int = 500,
    tol: float = 1e-6,
    intercept_floor: float = INTERCEPT_FLOOR,
) -> PoissonGLM:
    """Minimize sum(exp(eta) - y*eta) + lam*||beta||_1 (intercept unpenalized).

    Each outer sweep forms the quadratic model at the current point (working
    response and weights), solves it by cyclic coordinate descent with
    soft-thresholding over the active set, then line-searches toward that
    solution until the true penalized objective does not increase, so the
    per-sweep ``objective_trace`` is monotone. Converged means the largest
    coefficient change in a sweep dropped below ``tol`` within ``max_iter``
    sweeps; a fit that stalls on a flat objective valley or runs out of
    sweeps is flagged, not rejected.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if not np.isfinite(X).all():
        raise DataError("non-finite feature values")
    if not np.isfinite(y).all():
        raise DataError("non-finite response values")
    if X.shape[0] != y.shape[0]:
        raise DataError("X and y row counts differ")
    if lam < 0:
        raise DataError("lambda must be >= 0")

    n, d = X.shape
    if y.sum() == 0:
        model = PoissonGLM(
            intercept=intercept_floor,
            beta=np.zeros(d),
            l1_lambda=lam,
            all_absent=True,
        )
        model.objective_trace.append(poisson_nll(X, y, model.intercept, model.beta))
        return model

    intercept = float(np.log(y.mean()))  # exact optimum at beta = 0
    beta = np.zeros(d)
    sq_cols = X * X
    XT = np.ascontiguousarray(X.T)  # contiguous rows = fast column access

    def objective(b0: float, b: np.ndarray) -> float:
        eta = b0 + X @ b
        with np.errstate(over="ignore"):
            return float(np.sum(np.exp(eta) - y * eta) + lam * np.abs(b).sum())

    value = objective(intercept, beta)
    trace = [value]
    converged = False
    sweeps = 0
    stalled = 0
    for sweeps in range(1, max_iter + 1):
        eta = intercept + X @ beta
        mu = np.exp(eta)
        # quadratic model at the current point (IRLS working response),
        # solved by cyclic coordinate descent with soft-thresholding
        w = np.maximum(mu, 1e-10)
        z = eta + (y - mu) / w
        new_intercept, new_beta = intercept, beta.copy()
        resid = z - new_intercept - X @ new_beta
        w_colsq = w @ sq_cols
        w_colsT = np.ascontiguousarray((XT * w))
        total_w = float(w.sum())
        active = list(range(d))
        for inner in range(100):
            inner_change = 0.0
            delta0 = float(w @ resid) / total_w
            new_intercept += delta0
            resid -= delta0
            inner_change = abs(delta0)
            for j in active:
                hj = w_colsq[j]
                if hj <= 0.0:
                    continue
                rho = float(w_colsT[j] @ resid) + hj * new_beta[j]
                bj = (rho - lam if rho > lam else rho + lam if rho < -lam else 0.0) / hj
                dj = bj - new_beta[j]
                if dj != 0.0:
                    new_beta[j] = bj
                    resid -= XT[j] * dj
                    if abs(dj) > inner_change:
                        inner_change = abs(dj)
            if inner_change < 0.1 * tol:
                if len(active) == d:
                    break
                active = list(range(d))  # full pass to recheck dropped coords
            else:
                active = list(np.flatnonzero(new_beta))  # iterate the active set

        # line search toward the subproblem solution keeps the true
        # penalized objective monotone
        d_int = new_intercept - intercept
        d_beta = new_beta - beta
        t = 1.0
        accepted = False
        for _ in range(60):
            cand_int = max(intercept + t * d_int, intercept_floor)
            cand_beta = beta + t * d_beta
            cand_value = objective(cand_int, cand_beta)
            if np.isfinite(cand_value) and cand_value <= value + 1e-12 * max(1.0, abs(value)):
                accepted = True
                break
            t *= 0.5
        if not accepted:
            trace.append(value)
            break  # no direction of decrease left at working precision
        max_change = max(abs(cand_int - intercept), float(np.max(np.abs(cand_beta - beta))) if d else 0.0)
        decrease = value - cand_value
        intercept, beta = cand_int, cand_beta
        value = cand_value
        trace.append(value)
        if max_change < tol:
            converged = True
            break
        stalled = stalled + 1 if decrease < 1e-14 * max(1.0, abs(value)) else 0
        if stalled >= 5:
            break  # flat valley: coefficients wander at constant objective

    return PoissonGLM(
        intercept=intercept,
        beta=beta,
        l1_lambda=lam,
        converged=converged,
        n_iter=sweeps,
        objective_trace=trace,
    )


def calibrate_cloglog(
    model: PoissonGLM,
    X: np.ndarray,
    y: np.ndarray,
    c_lo: float = 1e-9,
    c_hi: float = 1e9,
    rel_tol: float = 1e-8,
) -> float:
    """Coefficient c with sum_i (1 - exp(-c * intensity_i)) = sum_i y_i.

    The left side is increasing in c, so plain bisection applies. Raises
    when the species has no presences (c would be 0 and the probability
    degenerate); callers drop such species with a report.
    """
    y = np.asarray(y, dtype=float)
    n_present = y.sum()
    if n_present == 0:
        raise DataError("no presences: cloglog coefficient undefined")
    lam = model.intensity(X)

    def total(c: float) -> float:
        return float(np.sum(1.0 - np.exp(-c * lam)))

    lo, hi = c_lo, c_hi
    if total(hi) < n_present:  # unreachable target (e.g. all-present species)
        return hi
    while hi - lo > rel_tol * lo:
        mid = np.sqrt(lo * hi)  # geometric bisection over 18 decades
        if total(mid) < n_present:
            lo = mid
        else:
            hi = mid
    # final polish: a few plain bisections for absolute residual
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if total(mid) < n_present:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)
