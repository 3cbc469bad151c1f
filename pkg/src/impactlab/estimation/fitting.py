"""Impact-function families and weighted nonlinear least squares.

Fits minimise ``sum(((y - g(x)) / se)**2)`` with a damped Gauss-Newton
(Levenberg-Marquardt) iteration on a forward-difference Jacobian.  Goodness
of fit is the weighted root mean square error ``E_RMS``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional, Sequence

import numpy as np

from ..book import BookParams, invert_impact
from ..special import DomainError
from .binning import BinnedCurve

__all__ = [
    "Family",
    "FAMILIES",
    "FitResult",
    "FitError",
    "ConvergenceError",
    "SingularJacobianError",
    "get_family",
    "weighted_nls",
    "e_rms",
    "MAX_ITER",
    "STEP_TOL",
]

MAX_ITER = 200
STEP_TOL = 1e-10


class FitError(RuntimeError):
    pass


class ConvergenceError(FitError):
    """No convergence within the iteration budget; ``trace`` holds (params, cost) per iteration."""

    def __init__(self, message, trace):
        super().__init__(message)
        self.trace = trace


class SingularJacobianError(FitError):
    pass


@dataclass(frozen=True)
class Family:
    """A parametric impact function ``g(x | params)``.

    ``x`` is a 1-D array for curve families and an ``(N, 2)`` array of
    ``(eta, F)`` for surface families.
    """

    name: str
    params: tuple[str, ...]
    func: Callable[[np.ndarray, np.ndarray], np.ndarray]
    in_domain: Callable[[np.ndarray, np.ndarray], bool]
    initial: Callable[[np.ndarray, np.ndarray], np.ndarray]
    ndim: int = 1
    description: str = ""

    def __call__(self, x, params) -> np.ndarray:
        return self.func(np.asarray(x, dtype=float), self._vector(params))

    def _vector(self, params) -> np.ndarray:
        if isinstance(params, Mapping):
            return np.array([params[k] for k in self.params], dtype=float)
        vec = np.asarray(params, dtype=float).ravel()
        if vec.size != len(self.params):
            raise ValueError(f"{self.name} takes {len(self.params)} parameters")
        return vec


def _positive_rows(x, y):
    ok = y > 0
    if x.ndim == 1:
        ok &= x > 0
    else:
        ok &= np.all(x > 0, axis=1)
    return ok


def _loglog_init(x, y):
    # ordinary least squares of log y on log x (columns), on positive rows
    ok = _positive_rows(x, y)
    cols = x[ok].reshape(ok.sum(), -1)
    if ok.sum() <= cols.shape[1]:
        return np.concatenate([[max(float(np.mean(np.abs(y))), 1e-12)], np.full(cols.shape[1], 0.5)])
    design = np.column_stack([np.ones(len(cols)), np.log(cols)])
    coef, *_ = np.linalg.lstsq(design, np.log(y[ok]), rcond=None)
    return np.concatenate([[math.exp(coef[0])], coef[1:]])


def _finite(x, p):
    return bool(np.all(np.isfinite(p)))


# curve families --------------------------------------------------------------

def _constant(x, p):
    return np.full(x.shape[0], p[0])


def _power(x, p):
    return p[0] * x ** p[1]


def _log(x, p):
    return p[0] * np.log10(1.0 + p[1] * x)


def _log_domain(x, p):
    return _finite(x, p) and p[1] > 0


def _log_init(x, y):
    return np.array([float(np.max(y)), 1.0 / float(np.median(x))])


def _double_power(x, p):
    return p[0] * x[:, 0] ** p[1] * x[:, 1] ** p[2]


def _double_log(x, p):
    return p[0] * np.log10(1.0 + p[1] * x[:, 0]) * np.log10(1.0 + p[2] * x[:, 1])


def _double_log_domain(x, p):
    return _finite(x, p) and p[1] > 0 and p[2] > 0


def _double_log_init(x, y):
    b, c = 1.0 / np.median(x[:, 0]), 1.0 / np.median(x[:, 1])
    shape = np.log10(1.0 + b * x[:, 0]) * np.log10(1.0 + c * x[:, 1])
    a = float(np.sum(shape * y) / np.sum(shape * shape))
    return np.array([a, b, c])


MAX_BOOK_SLOPE = 700.0


def _book(n: Optional[float]):
    def func(x, p):
        nn = p[2] if n is None else n
        return invert_impact(BookParams(p[0], p[1], nn), x)

    def domain(x, p):
        if not _finite(x, p) or not (p[0] > 0 and 0 < p[1] < MAX_BOOK_SLOPE):
            return False
        if n is None and not 0 <= p[2] <= 50:
            return False
        # the largest order must fit in the book
        return float(np.max(x)) * p[0] <= 1.0

    def init(x, y):
        # coarse grid search on the chi-square-free shape mismatch
        ys = np.asarray(y, dtype=float)
        cap = 1.0 / float(np.max(x))
        best, best_cost = None, np.inf
        n_grid = (0.0, 0.5, 1.0, 2.0) if n is None else (n,)
        for nn in n_grid:
            for b in np.geomspace(0.05, 50.0, 25):
                for frac in np.geomspace(1e-3, 1.0, 13):
                    p = BookParams(cap * frac, float(b), nn)
                    g = invert_impact(p, x)
                    cost = float(np.sum((ys - g) ** 2))
                    if cost < best_cost:
                        best, best_cost = p, cost
        vec = [best.y_norm, best.b] + ([best.n] if n is None else [])
        return np.array(vec, dtype=float)

    return func, domain, init


def _power_domain(x, p):
    return _finite(x, p) and p[0] > 0


FAMILIES: dict[str, Family] = {}


def _register(fam: Family) -> None:
    FAMILIES[fam.name] = fam


_register(Family("constant", ("c",), _constant, _finite, lambda x, y: np.array([float(np.mean(y))]),
                 description="c"))
_register(Family("power", ("Y", "delta"), _power, _power_domain, _loglog_init,
                 description="Y * pi**delta"))
_register(Family("log", ("a", "b"), _log, _log_domain, _log_init,
                 description="a * log10(1 + b*pi)"))
_register(Family("double_power", ("Y", "delta", "gamma1"), _double_power, _power_domain, _loglog_init, ndim=2,
                 description="Y * eta**delta * F**gamma1"))
_register(Family("double_log", ("a", "b", "c"), _double_log, _double_log_domain, _double_log_init, ndim=2,
                 description="a * log10(1 + b*eta) * log10(1 + c*F)"))
for _name, _n in (("book_n0", 0.0), ("book_n1", 1.0), ("book_n", None)):
    _f, _d, _i = _book(_n)
    _register(Family(_name, ("Y", "b") + (("n",) if _n is None else ()), _f, _d, _i,
                     description="latent-book inversion" + ("" if _n is None else f", n = {_n:g}")))


def get_family(name) -> Family:
    if isinstance(name, Family):
        return name
    try:
        return FAMILIES[name]
    except KeyError:
        raise ValueError(f"unknown family {name!r}; choose from {sorted(FAMILIES)}") from None


@dataclass(frozen=True)
class FitResult:
    family: str
    params: dict
    std_errors: dict
    e_rms: float
    n_points: int
    iterations: int = 0
    cost: float = field(default=0.0, repr=False)

    def __post_init__(self):
        if not self.e_rms >= 0:
            raise ValueError("e_rms must be non-negative")

    def vector(self) -> np.ndarray:
        return np.array(list(self.params.values()), dtype=float)

    def predict(self, x) -> np.ndarray:
        return get_family(self.family)(x, self.params)

    def to_dict(self) -> dict:
        return {
            "family": self.family,
            "params": dict(self.params),
            "std_errors": dict(self.std_errors),
            "e_rms": self.e_rms,
            "n_points": self.n_points,
            "iterations": self.iterations,
        }


def _check_se(se: np.ndarray) -> None:
    bad = np.flatnonzero(~(se > 0))
    if bad.size:
        raise ValueError(
            f"standard error must be positive; drop row(s) {bad.tolist()} (zero-variance bins) before fitting"
        )


def e_rms(family, params, curve: BinnedCurve) -> float:
    """``sqrt(mean(((y - g(x)) / se)**2))``; zero standard errors are an error."""
    fam = get_family(family)
    se = np.asarray(curve.se, dtype=float)
    _check_se(se)
    r = (np.asarray(curve.y, dtype=float) - fam(curve.x, params)) / se
    return float(math.sqrt(math.fsum(r * r) / r.size))


def _jacobian(resid, p, r0, in_domain):
    jac = np.empty((r0.size, p.size))
    for j in range(p.size):
        h = 1e-7 * max(abs(p[j]), 1e-6)
        q = p.copy()
        q[j] += h
        if not in_domain(q):
            q[j] = p[j] - h
            h = -h
        jac[:, j] = (resid(q) - r0) / h
    return jac


def weighted_nls(family, curve: BinnedCurve, init=None, max_iter: int = MAX_ITER, step_tol: float = STEP_TOL) -> FitResult:
    """Levenberg-Marquardt fit of ``family`` to ``curve``, weighted by 1/se.

    ``init`` defaults to the family's deterministic starting point (log-log
    least squares for power laws, ``(max y, 1/median x)`` for the log law).
    Steps leaving the family's domain are rejected like uphill steps.
    Standard errors are ``sqrt(diag((J^T J)^-1))`` of the weighted Jacobian.
    """
    fam = get_family(family)
    x = np.asarray(curve.x, dtype=float)
    y = np.asarray(curve.y, dtype=float)
    se = np.asarray(curve.se, dtype=float)
    _check_se(se)
    if fam.ndim == 2 and (x.ndim != 2 or x.shape[1] != 2):
        raise ValueError(f"{fam.name} needs (eta, F) pairs")
    p = fam.initial(x, y) if init is None else fam._vector(init)
    if not fam.in_domain(x, p):
        raise DomainError(f"initial parameters {p.tolist()} outside the {fam.name} domain")

    def in_domain(q):
        return fam.in_domain(x, q)

    def resid(q):
        return (y - fam.func(x, q)) / se

    r = resid(p)
    cost = float(r @ r)
    mu = 1e-3
    trace = [(p.tolist(), cost)]
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        jac = _jacobian(resid, p, r, in_domain)
        jtj = jac.T @ jac
        grad = jac.T @ r
        if cost == 0.0 or np.max(np.abs(grad)) == 0.0:
            converged = True
            break
        damp = np.diag(np.where(np.diag(jtj) > 0, np.diag(jtj), 1.0))
        accepted = False
        while mu < 1e16:
            try:
                step = np.linalg.solve(jtj + mu * damp, -grad)
            except np.linalg.LinAlgError:
                mu *= 10.0
                continue
            q = p + step
            if in_domain(q):
                rq = resid(q)
                cq = float(rq @ rq)
                if np.isfinite(cq) and cq <= cost:
                    accepted = True
                    break
            mu *= 4.0
            if np.all(np.abs(step) <= step_tol * (np.abs(p) + step_tol)):
                break
        small = np.all(np.abs(step) <= step_tol * (np.abs(p) + step_tol))
        if accepted:
            p, r, cost = q, rq, cq
            mu = max(mu / 3.0, 1e-12)
        trace.append((p.tolist(), cost))
        if small or not accepted:
            converged = True
            break
    if not converged:
        raise ConvergenceError(f"{fam.name} fit did not converge in {max_iter} iterations", trace)
    jac = _jacobian(resid, p, r, in_domain)
    jtj = jac.T @ jac
    if np.linalg.matrix_rank(jtj) < p.size:
        raise SingularJacobianError(f"singular Jacobian for {fam.name} at {p.tolist()}")
    cov = np.linalg.inv(jtj)
    errs = np.sqrt(np.clip(np.diag(cov), 0, None))
    n_pts = len(y)
    return FitResult(
        family=fam.name,
        params={k: float(v) for k, v in zip(fam.params, p)},
        std_errors={k: float(v) for k, v in zip(fam.params, errs)},
        e_rms=math.sqrt(cost / n_pts),
        n_points=n_pts,
        iterations=it,
        cost=cost,
    )
