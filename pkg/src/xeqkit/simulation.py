"""Synthetic Likert data with planted factor structure.

Respondent ``r`` draws its latent vector from the stream
``derive_key(seed, LATENT_STREAM, r)``: the first K normals are factor
scores (coloured by the Cholesky factor of the factor correlations), the next
M are unique errors.  Latent item values are cut into codes 1..5 by the
thresholds.  Every generator is a pure function of its arguments.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.special import ndtr, ndtri

from . import rng
from .errors import BadSpec
from .scale import Item, ResponseMatrix, RespondentMeta, ScaleDefinition

DEFAULT_THRESHOLDS = (-1.5, -0.5, 0.5, 1.5)
LATENT_STREAM = 1
RETEST_STREAM = 2
SIM_DURATION = 600.0
POSITIVE, NEGATIVE = "Positive", "Negative"


@dataclass(frozen=True)
class GeneratorSpec:
    """Planted model for :func:`generate_factor_data`.

    ``loadings`` is M x K.  ``uniqueness`` defaults to one minus each item's
    communality, giving unit-variance latent items.  ``group_effect`` shifts
    every latent item of every respondent down by that amount.
    """

    loadings: np.ndarray
    factor_correlations: Optional[np.ndarray] = None
    uniqueness: Optional[np.ndarray] = None
    n: int = 500
    thresholds: tuple = DEFAULT_THRESHOLDS
    group_effect: float = 0.0
    retest_noise: Optional[float] = None
    seed: int = 0

    def __post_init__(self):
        lam = np.atleast_2d(np.asarray(self.loadings, dtype=np.float64))
        if lam.ndim != 2 or lam.size == 0 or not np.all(np.isfinite(lam)):
            raise BadSpec("loadings must be a finite M x K array")
        m, k = lam.shape
        phi = np.eye(k) if self.factor_correlations is None else np.asarray(self.factor_correlations, float)
        if phi.shape != (k, k) or not np.allclose(phi, phi.T) or not np.allclose(np.diag(phi), 1.0):
            raise BadSpec("factor_correlations must be a symmetric K x K matrix with unit diagonal")
        if np.any(np.abs(phi) > 1):
            raise BadSpec("factor correlations must lie in [-1, 1]")
        try:
            np.linalg.cholesky(phi + 1e-12 * np.eye(k))
        except np.linalg.LinAlgError:
            raise BadSpec("factor_correlations is not positive semi-definite") from None
        if self.uniqueness is None:
            psi = 1.0 - np.einsum("ik,kl,il->i", lam, phi, lam)
        else:
            psi = np.broadcast_to(np.asarray(self.uniqueness, dtype=np.float64), (m,)).copy()
        if np.any(~np.isfinite(psi)) or np.any(psi <= 0):
            raise BadSpec("uniquenesses must be positive (loadings too large for unit latent variance?)")
        t = tuple(float(v) for v in self.thresholds)
        if any(b <= a for a, b in zip(t, t[1:])):
            raise BadSpec("thresholds must be strictly increasing")
        if self.n < 1:
            raise BadSpec("n must be at least 1")
        if not np.isfinite(self.group_effect):
            raise BadSpec("group_effect must be finite")
        if self.retest_noise is not None and self.retest_noise < 0:
            raise BadSpec("retest_noise must be non-negative")
        object.__setattr__(self, "loadings", lam)
        object.__setattr__(self, "factor_correlations", phi)
        object.__setattr__(self, "uniqueness", psi)
        object.__setattr__(self, "thresholds", t)

    @property
    def n_items(self) -> int:
        return self.loadings.shape[0]

    @property
    def n_factors(self) -> int:
        return self.loadings.shape[1]

    @classmethod
    def one_factor(cls, n_items: int, loading: float, **kw) -> "GeneratorSpec":
        return cls(np.full((n_items, 1), float(loading)), **kw)

    @classmethod
    def for_scale(cls, scale: ScaleDefinition, loading: float | Sequence[float] = 0.8,
                  factor_correlation: float = 0.0, **kw) -> "GeneratorSpec":
        """One factor per scale dimension, items loading only on their own."""
        dims = list(scale.dimensions)
        lam = np.zeros((scale.n_items, len(dims)))
        lv = np.broadcast_to(np.asarray(loading, dtype=np.float64), (scale.n_items,))
        for i, it in enumerate(scale.items):
            lam[i, dims.index(it.dimension)] = lv[i]
        phi = np.full((len(dims), len(dims)), float(factor_correlation))
        np.fill_diagonal(phi, 1.0)
        return cls(lam, phi, **kw)


def generic_scale(n_items: int, n_factors: int = 1, scale_id: str = "SIM") -> ScaleDefinition:
    """A placeholder scale with items spread round-robin over ``n_factors`` dimensions."""
    dims = [f"F{k + 1}" for k in range(n_factors)]
    items = tuple(Item(i + 1, f"Item {i + 1}", dims[i % n_factors]) for i in range(n_items))
    return ScaleDefinition(scale_id, "sim", items, dimensions=tuple(dims))


def discretize(latent, thresholds=DEFAULT_THRESHOLDS) -> np.ndarray:
    """Codes ``1 + #{thresholds strictly below the latent value}``."""
    t = np.asarray(thresholds, dtype=np.float64)
    return 1 + (np.asarray(latent)[..., None] > t).sum(axis=-1)


def latent_scores(spec: GeneratorSpec, rows: np.ndarray, shifts: np.ndarray) -> np.ndarray:
    keys = rng.derive_key(spec.seed, LATENT_STREAM, np.asarray(rows, dtype=np.int64))
    k, m = spec.n_factors, spec.n_items
    z = rng.normals(keys, k + m)
    chol = np.linalg.cholesky(spec.factor_correlations + 1e-12 * np.eye(k))
    factors = z[:, :k] @ chol.T
    unique = z[:, k:] * np.sqrt(spec.uniqueness)
    return factors @ spec.loadings.T + unique - np.asarray(shifts)[:, None]


def _matrix(scale, codes, groups, wave="Test") -> ResponseMatrix:
    meta = tuple(
        RespondentMeta(f"s{r + 1:05d}", g, SIM_DURATION, SIM_DURATION)
        for r, g in enumerate(groups)
    )
    return ResponseMatrix(scale, meta, codes, wave)


def _scale_for(spec, scale):
    if scale is None:
        return generic_scale(spec.n_items, spec.n_factors)
    if scale.n_items != spec.n_items:
        raise BadSpec(f"spec has {spec.n_items} items, scale {scale.scale_id!r} has {scale.n_items}")
    if len(scale.likert_codes) != len(spec.thresholds) + 1:
        raise BadSpec("thresholds must split the latent line into one bin per Likert code")
    return scale


def generate_factor_data(spec: GeneratorSpec, scale: Optional[ScaleDefinition] = None) -> ResponseMatrix:
    scale = _scale_for(spec, scale)
    rows = np.arange(spec.n)
    y = latent_scores(spec, rows, np.full(spec.n, spec.group_effect))
    codes = np.asarray(scale.likert_codes)[discretize(y, spec.thresholds) - 1]
    return _matrix(scale, codes, [None] * spec.n)


def generate_two_group(spec: GeneratorSpec, delta: float, n_per_group: int,
                       scale: Optional[ScaleDefinition] = None) -> ResponseMatrix:
    """``n_per_group`` Positive respondents, then ``n_per_group`` Negative ones
    whose latent item values are shifted down by ``delta``."""
    if not np.isfinite(delta):
        raise BadSpec("delta must be finite")
    if n_per_group < 1:
        raise BadSpec("n_per_group must be at least 1")
    scale = _scale_for(spec, scale)
    n = 2 * n_per_group
    shifts = np.where(np.arange(n) < n_per_group, 0.0, float(delta)) + spec.group_effect
    y = latent_scores(spec, np.arange(n), shifts)
    codes = np.asarray(scale.likert_codes)[discretize(y, spec.thresholds) - 1]
    return _matrix(scale, codes, [POSITIVE] * n_per_group + [NEGATIVE] * n_per_group)


def generate_retest(matrix: ResponseMatrix, retest_noise: float, seed: int,
                    thresholds=DEFAULT_THRESHOLDS) -> ResponseMatrix:
    """A retest wave for ``matrix``.

    Each cell's latent value is redrawn from the standard normal truncated to
    the interval its code came from, perturbed by ``retest_noise`` times a
    fresh normal, and cut again.  With zero noise the codes are reproduced
    exactly.
    """
    if retest_noise < 0:
        raise BadSpec("retest_noise must be non-negative")
    codes = np.asarray(matrix.scale.likert_codes)
    t = np.asarray(thresholds, dtype=np.float64)
    if codes.size != t.size + 1:
        raise BadSpec("thresholds must split the latent line into one bin per Likert code")
    edges = np.concatenate([[-np.inf], t, [np.inf]])
    level = np.searchsorted(codes, matrix.values)
    lo, hi = edges[level], edges[level + 1]
    n, m = matrix.values.shape
    keys = rng.derive_key(seed, RETEST_STREAM, np.arange(n))
    u = rng.uniforms(keys, m)
    z = rng.normals(rng.derive_key(seed, RETEST_STREAM + 1, np.arange(n)), m)
    plo, phi_ = ndtr(lo), ndtr(hi)
    latent = ndtri(plo + u * (phi_ - plo))
    # keep the redraw inside its own bin despite rounding at the edges
    latent = np.clip(latent, np.nextafter(lo, np.inf), hi)
    latent = latent + retest_noise * z
    new = codes[discretize(latent, t) - 1]
    return ResponseMatrix(matrix.scale, matrix.respondents, new, "Retest")
