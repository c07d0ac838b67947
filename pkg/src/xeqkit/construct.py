"""Exploratory and confirmatory factor analysis.

EFA is an eigen-decomposition of the item correlation matrix.  CFA fits the
covariance structure ``Sigma = L Phi L' + Psi`` by minimising the
maximum-likelihood discrepancy

    F(S, Sigma) = ln|Sigma| + tr(S Sigma^-1) - ln|S| - M

where ``L`` has one free loading per item (on its assigned factor), ``Phi``
has unit diagonal (factor variances fixed to one) and free off-diagonals when
factors may correlate, and ``Psi`` is a positive diagonal.  Loadings are on
the covariance scale; a standardized view divides by the model-implied item
standard deviations.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np
from scipy.linalg import cho_factor, cho_solve, LinAlgError

from .errors import (
    ConstantColumn,
    NonConvergence,
    NonFiniteEntry,
    NonSymmetric,
    NotPositiveDefinite,
    UnidentifiedModel,
    ValidationError,
)

log = logging.getLogger(__name__)

KAISER = "Kaiser"
SCREE_ELBOW = "ScreeElbow"
FREE = "Free"
IDENTITY = "Identity"
LOADING_MIN = 0.5


def _values(matrix) -> np.ndarray:
    return np.asarray(getattr(matrix, "values", matrix), dtype=np.float64)


def covariance_matrix(matrix) -> np.ndarray:
    """Sample covariance of the item columns (``N - 1`` denominator)."""
    x = _values(matrix)
    if x.shape[0] < 2:
        raise ValidationError("covariance needs at least 2 respondents")
    d = x - x.mean(axis=0)
    c = d.T @ d / (x.shape[0] - 1)
    return (c + c.T) / 2.0


def correlation_matrix(matrix) -> np.ndarray:
    """Pearson correlation of the item columns; constant columns are rejected."""
    c = covariance_matrix(matrix)
    sd = np.sqrt(np.diag(c))
    if np.any(sd == 0):
        cols = (np.flatnonzero(sd == 0) + 1).tolist()
        raise ConstantColumn(f"constant item column(s) at position(s) {cols}")
    r = c / np.outer(sd, sd)
    r = (r + r.T) / 2.0
    np.fill_diagonal(r, 1.0)
    return np.clip(r, -1.0, 1.0)


# -- EFA ---------------------------------------------------------------------


def _check_symmetric(a: np.ndarray, tol: float = 1e-10) -> None:
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise NonSymmetric(f"expected a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise NonFiniteEntry("matrix has non-finite entries")
    scale = max(1.0, float(np.abs(a).max()))
    if np.abs(a - a.T).max() > tol * scale:
        raise NonSymmetric("matrix is not symmetric")


def suggest_factor_count(eigenvalues: Sequence[float], rule: str = KAISER) -> int:
    """Number of factors suggested by a descending eigenvalue sequence.

    ``Kaiser`` counts eigenvalues strictly above one.  ``ScreeElbow`` places
    the elbow at the largest ratio between consecutive eigenvalues and keeps
    the components before it.
    """
    ev = np.asarray(eigenvalues, dtype=np.float64)
    if ev.size == 0:
        raise ValidationError("no eigenvalues")
    if rule == KAISER:
        return int(np.sum(ev > 1.0))
    if rule == SCREE_ELBOW:
        if ev.size == 1:
            return 1
        floor = max(float(np.abs(ev).max()), 1.0) * 1e-12
        safe = np.maximum(ev, floor)
        ratios = safe[:-1] / safe[1:]
        return int(np.argmax(ratios)) + 1
    raise ValidationError(f"unknown factor-count rule {rule!r}")


@dataclass(frozen=True)
class EfaResult:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    variance_proportion: np.ndarray
    suggested_factors: int
    rule: str
    elbow_factors: int

    def scree_points(self) -> list[tuple[int, float]]:
        return [(k + 1, float(v)) for k, v in enumerate(self.eigenvalues)]

    def to_dict(self) -> dict:
        return {
            "eigenvalues": [float(v) for v in self.eigenvalues],
            "variance_proportion": [float(v) for v in self.variance_proportion],
            "suggested_factors": self.suggested_factors,
            "rule": self.rule,
            "scree_elbow_factors": self.elbow_factors,
        }


def efa_eigenvalues(corr, rule: str = KAISER) -> EfaResult:
    """Eigenvalues of a correlation matrix, largest first.

    Variance proportions are eigenvalue / M.  Eigenvectors are returned as
    columns in the same order.
    """
    a = np.asarray(corr, dtype=np.float64)
    _check_symmetric(a)
    vals, vecs = np.linalg.eigh((a + a.T) / 2.0)
    order = np.argsort(vals)[::-1]
    vals, vecs = vals[order], vecs[:, order]
    return EfaResult(
        eigenvalues=vals,
        eigenvectors=vecs,
        variance_proportion=vals / a.shape[0],
        suggested_factors=suggest_factor_count(vals, rule),
        rule=rule,
        elbow_factors=suggest_factor_count(vals, SCREE_ELBOW),
    )


# -- CFA model ---------------------------------------------------------------


@dataclass(frozen=True)
class CfaModel:
    """Simple-structure factor model: every item loads on exactly one factor.

    ``factor_assignment`` maps item ids to factor labels; its iteration order
    is the row order of the covariance matrix passed to :func:`cfa_fit`.
    """

    factor_assignment: Mapping[int, str]
    factor_covariance: str = FREE

    def __post_init__(self):
        object.__setattr__(self, "factor_assignment", dict(self.factor_assignment))
        if not self.factor_assignment:
            raise ValidationError("CFA model has no items")
        if self.factor_covariance not in (FREE, IDENTITY):
            raise ValidationError(f"factor_covariance must be {FREE!r} or {IDENTITY!r}")

    @classmethod
    def from_scale(cls, scale, factor_covariance: str = FREE) -> "CfaModel":
        return cls({it.item_id: it.dimension for it in scale.items}, factor_covariance)

    @classmethod
    def one_factor(cls, item_ids: Sequence[int], label: str = "General") -> "CfaModel":
        return cls({i: label for i in item_ids}, IDENTITY)

    @property
    def item_ids(self) -> tuple[int, ...]:
        return tuple(self.factor_assignment)

    @property
    def factors(self) -> tuple[str, ...]:
        seen = []
        for f in self.factor_assignment.values():
            if f not in seen:
                seen.append(f)
        return tuple(seen)

    @property
    def n_items(self) -> int:
        return len(self.factor_assignment)

    def factor_index(self) -> np.ndarray:
        pos = {f: k for k, f in enumerate(self.factors)}
        return np.array([pos[f] for f in self.factor_assignment.values()])

    @property
    def n_free_correlations(self) -> int:
        k = len(self.factors)
        return k * (k - 1) // 2 if self.factor_covariance == FREE else 0

    @property
    def n_parameters(self) -> int:
        return 2 * self.n_items + self.n_free_correlations

    @property
    def degrees_of_freedom(self) -> int:
        m = self.n_items
        return m * (m + 1) // 2 - self.n_parameters

    def check_identified(self) -> None:
        counts = {f: 0 for f in self.factors}
        for f in self.factor_assignment.values():
            counts[f] += 1
        single = [f for f, c in counts.items() if c < 2]
        if single:
            raise UnidentifiedModel(
                f"factor(s) {single} have a single indicator; loading and uniqueness are not separable"
            )
        if self.degrees_of_freedom < 0:
            raise UnidentifiedModel(
                f"model has {self.n_parameters} parameters but only "
                f"{self.n_items * (self.n_items + 1) // 2} distinct covariances"
            )


class _Structure:
    """Parameter packing and the discrepancy/gradient for one model."""

    def __init__(self, model: CfaModel):
        self.model = model
        self.m = model.n_items
        self.k = len(model.factors)
        self.fidx = model.factor_index()
        self.tri = np.triu_indices(self.k, 1) if model.factor_covariance == FREE else (
            np.array([], dtype=int), np.array([], dtype=int))

    def unpack(self, theta):
        m = self.m
        lam = np.zeros((m, self.k))
        lam[np.arange(m), self.fidx] = theta[:m]
        psi = np.exp(theta[m:2 * m])
        phi = np.eye(self.k)
        phi[self.tri] = theta[2 * m:]
        phi[self.tri[::-1]] = theta[2 * m:]
        return lam, psi, phi

    def pack(self, loadings, psi, phi) -> np.ndarray:
        return np.concatenate([loadings, np.log(psi), phi[self.tri]])

    def implied(self, theta) -> np.ndarray:
        lam, psi, phi = self.unpack(theta)
        return lam @ phi @ lam.T + np.diag(psi)


def ml_discrepancy(sample_cov, implied_cov) -> float:
    """``ln|Sigma| + tr(S Sigma^-1) - ln|S| - M``; ``inf`` if Sigma is not PD."""
    s = np.asarray(sample_cov, dtype=np.float64)
    sigma = np.asarray(implied_cov, dtype=np.float64)
    try:
        cs = cho_factor(sigma, lower=True)
        cS = cho_factor(s, lower=True)
    except LinAlgError:
        return np.inf
    logdet_sigma = 2.0 * np.log(np.diag(cs[0])).sum()
    logdet_s = 2.0 * np.log(np.diag(cS[0])).sum()
    return float(logdet_sigma + np.trace(cho_solve(cs, s)) - logdet_s - s.shape[0])


def _objective(struct: _Structure, s: np.ndarray, logdet_s: float, theta):
    """Discrepancy and its gradient in the packed parameterisation.

    With ``G = Sigma^-1 - Sigma^-1 S Sigma^-1``:
    dF/dL = 2 G L Phi, dF/dPhi_kl = 2 (L' G L)_kl for k < l,
    dF/dpsi_i = G_ii (chain rule through ``psi = exp(omega)``).
    """
    if not np.all(np.isfinite(theta)) or np.any(theta[struct.m:2 * struct.m] > 700):
        return np.inf, None  # exp(omega) would overflow; the line search backs off
    lam, psi, phi = struct.unpack(theta)
    sigma = lam @ phi @ lam.T + np.diag(psi)
    try:
        cs = cho_factor(sigma, lower=True)
    except LinAlgError:
        return np.inf, None
    if struct.k > 1 and struct.model.factor_covariance == FREE:
        try:
            cho_factor(phi, lower=True)
        except LinAlgError:
            return np.inf, None
    m = struct.m
    inv = cho_solve(cs, np.eye(m))
    inv_s = cho_solve(cs, s)
    f = 2.0 * np.log(np.diag(cs[0])).sum() + np.trace(inv_s) - logdet_s - m
    g_mat = inv - inv_s @ inv
    g_mat = (g_mat + g_mat.T) / 2.0
    d_lam = 2.0 * g_mat @ lam @ phi
    grad_lam = d_lam[np.arange(m), struct.fidx]
    grad_omega = np.diag(g_mat) * psi
    grad_phi = 2.0 * (lam.T @ g_mat @ lam)[struct.tri]
    return float(f), np.concatenate([grad_lam, grad_omega, grad_phi])


def discrepancy_and_gradient(sample_cov, model: CfaModel, theta):
    """Public hook onto the objective, for gradient checks.

    ``theta`` = (loadings in item order, log uniquenesses, factor
    correlations above the diagonal in row-major order).
    """
    s = np.asarray(sample_cov, dtype=np.float64)
    struct = _Structure(model)
    logdet_s = np.linalg.slogdet(s)[1]
    return _objective(struct, s, logdet_s, np.asarray(theta, dtype=np.float64))


def _bfgs(fun, x0, max_iter, tolerance):
    """BFGS with Armijo backtracking; every accepted step lowers ``fun``."""
    f, g = fun(x0)
    if not np.isfinite(f):
        raise NotPositiveDefinite("model-implied covariance is not positive definite at the start point")
    x = x0.copy()
    n = x.size
    h = np.eye(n)
    it = 0
    stalled = 0
    while it < max_iter and stalled < 5:
        if np.abs(g).max() < tolerance:
            return x, f, g, it, True
        p = -h @ g
        slope = g @ p
        if slope >= 0:
            h = np.eye(n)
            p = -g
            slope = g @ p
        step = 1.0
        accepted = False
        for _ in range(60):
            x_new = x + step * p
            f_new, g_new = fun(x_new)
            if np.isfinite(f_new) and f_new <= f + 1e-4 * step * slope:
                accepted = True
                break
            step *= 0.5
        it += 1
        if not accepted:
            break
        s_vec = x_new - x
        y_vec = g_new - g
        sy = s_vec @ y_vec
        if sy > 1e-16 * np.sqrt((s_vec @ s_vec) * (y_vec @ y_vec)):
            if it == 1:
                h = np.eye(n) * (sy / (y_vec @ y_vec))
            rho = 1.0 / sy
            hy = h @ y_vec
            h = (h - rho * (np.outer(s_vec, hy) + np.outer(hy, s_vec))
                 + (rho * rho * (y_vec @ hy) + rho) * np.outer(s_vec, s_vec))
        # f is only known to a few ulps near the optimum
        stalled = stalled + 1 if f - f_new <= 1e-14 * (1.0 + abs(f)) else 0
        x, f, g = x_new, f_new, g_new
    return x, f, g, it, bool(np.abs(g).max() < tolerance)


@dataclass(frozen=True)
class CfaResult:
    item_ids: tuple[int, ...]
    factors: tuple[str, ...]
    assignment: tuple[str, ...]
    loadings: dict
    standardized_loadings: dict
    uniquenesses: dict
    factor_correlations: np.ndarray
    discrepancy: float
    start_discrepancy: float
    converged: bool
    iterations: int
    gradient_norm: float
    ridge: float = 0.0
    n_obs: Optional[int] = None

    @property
    def weak_items(self) -> list[int]:
        return [i for i in self.item_ids if self.loadings[i] < LOADING_MIN]

    def loading_vector(self) -> np.ndarray:
        return np.array([self.loadings[i] for i in self.item_ids])

    def to_dict(self) -> dict:
        return {
            "factors": list(self.factors),
            "items": [
                {
                    "item_id": i,
                    "factor": f,
                    "loading": self.loadings[i],
                    "standardized_loading": self.standardized_loadings[i],
                    "uniqueness": self.uniquenesses[i],
                    "weak": self.loadings[i] < LOADING_MIN,
                }
                for i, f in zip(self.item_ids, self.assignment)
            ],
            "factor_correlations": [[float(v) for v in row] for row in self.factor_correlations],
            "discrepancy": self.discrepancy,
            "start_discrepancy": self.start_discrepancy,
            "converged": self.converged,
            "iterations": self.iterations,
            "gradient_norm": self.gradient_norm,
            "ridge": self.ridge,
            "n_obs": self.n_obs,
            "estimator": "ML discrepancy on covariance, factor variances fixed to 1",
        }


def prepare_covariance(sample_cov) -> tuple[np.ndarray, float]:
    """Validate ``sample_cov`` and ridge-repair it when near-singular.

    Returns the (possibly repaired) matrix and the ridge added.
    """
    s = np.asarray(sample_cov, dtype=np.float64)
    _check_symmetric(s)
    s = (s + s.T) / 2.0
    ev = np.linalg.eigvalsh(s)
    m = s.shape[0]
    ridge = 0.0
    avg = np.trace(s) / m
    if avg <= 0:
        raise NotPositiveDefinite("sample covariance has non-positive trace")
    if ev[0] <= 1e-10 * max(ev[-1], 0.0):
        ridge = 1e-8 * avg
        if ev[0] + ridge <= 0:
            raise NotPositiveDefinite(
                f"sample covariance has eigenvalue {ev[0]:.3g}; ridge {ridge:.3g} cannot repair it"
            )
        log.warning("sample covariance is near-singular (min eigenvalue %.3g); added ridge %.3g", ev[0], ridge)
        s = s + ridge * np.eye(m)
    return s, ridge


def start_values(s: np.ndarray, model: CfaModel) -> np.ndarray:
    """Deterministic start: communality from squared multiple correlations.

    For item ``i`` with variance ``v_i`` and SMC ``h_i = 1 - 1/(v_i [S^-1]_ii)``
    the start loading is ``sqrt(h_i v_i)`` and the uniqueness ``(1 - h_i) v_i``;
    on a correlation matrix these reduce to ``sqrt(h_i)`` and ``1 - h_i``.
    Factor correlations start at zero.
    """
    struct = _Structure(model)
    v = np.diag(s)
    smc = 1.0 - 1.0 / (v * np.diag(np.linalg.inv(s)))
    smc = np.clip(smc, 0.0, 0.995)
    return struct.pack(np.sqrt(smc * v), (1.0 - smc) * v, np.eye(struct.k))


def cfa_fit(
    sample_cov,
    model: CfaModel,
    *,
    max_iter: int = 2000,
    tolerance: float = 1e-7,
    n_obs: Optional[int] = None,
    strict: bool = False,
) -> CfaResult:
    """Fit ``model`` to ``sample_cov`` by maximum likelihood.

    Rows/columns of ``sample_cov`` follow ``model.item_ids``.  Convergence
    means the largest absolute gradient component fell below ``tolerance``.
    A non-converged fit returns the best iterate with ``converged=False``
    (and logs a warning) unless ``strict`` is set, in which case
    :class:`NonConvergence` is raised carrying that result.

    Each factor's sign is fixed so its first listed item loads non-negatively.
    """
    model.check_identified()
    s0 = np.asarray(sample_cov, dtype=np.float64)
    if s0.ndim != 2 or s0.shape != (model.n_items, model.n_items):
        raise ValidationError(f"covariance shape {s0.shape} does not match {model.n_items} model items")
    s, ridge = prepare_covariance(s0)
    struct = _Structure(model)
    logdet_s = np.linalg.slogdet(s)[1]
    fun = lambda th: _objective(struct, s, logdet_s, th)  # noqa: E731

    theta0 = start_values(s, model)
    f0, _ = fun(theta0)
    theta, f, g, iters, converged = _bfgs(fun, theta0, max_iter, tolerance)

    lam, psi, phi = struct.unpack(theta)
    for k in range(struct.k):
        first = int(np.flatnonzero(struct.fidx == k)[0])
        if lam[first, k] < 0:
            lam[:, k] *= -1.0
            phi[k, :] *= -1.0
            phi[:, k] *= -1.0
    loadings = lam[np.arange(struct.m), struct.fidx]
    implied_sd = np.sqrt(np.diag(lam @ phi @ lam.T) + psi)
    ids = model.item_ids
    result = CfaResult(
        item_ids=ids,
        factors=model.factors,
        assignment=tuple(model.factor_assignment.values()),
        loadings={i: float(v) for i, v in zip(ids, loadings)},
        standardized_loadings={i: float(v) for i, v in zip(ids, loadings / implied_sd)},
        uniquenesses={i: float(v) for i, v in zip(ids, psi)},
        factor_correlations=phi,
        discrepancy=max(float(f), 0.0),
        start_discrepancy=float(f0),
        converged=converged,
        iterations=iters,
        gradient_norm=float(np.abs(g).max()),
        ridge=ridge,
        n_obs=n_obs,
    )
    if not converged:
        msg = f"CFA did not converge in {iters} iterations (max |gradient| {result.gradient_norm:.3g})"
        if strict:
            raise NonConvergence(msg, result)
        log.warning(msg)
    return result


def one_factor_loadings(sample_cov, item_ids: Optional[Sequence[int]] = None, **options) -> CfaResult:
    """CFA with every item on a single factor."""
    m = np.asarray(sample_cov).shape[0]
    ids = list(item_ids) if item_ids is not None else list(range(1, m + 1))
    return cfa_fit(sample_cov, CfaModel.one_factor(ids), **options)
