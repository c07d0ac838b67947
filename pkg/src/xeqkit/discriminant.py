"""Discriminant validity: repeated-split linear classification and group tests.

Trial randomness comes from :mod:`xeqkit.rng`: the split for trial ``t``
and class ``c`` (index into the sorted class labels) uses the stream
``derive_key(seed, t, c)``.  Trials therefore do not depend on execution
order, and a report is bit-identical for any degree of parallelism.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import stats

from . import rng
from .errors import (
    ClassTooSmall,
    DegenerateGroup,
    SingularCovariance,
    TrialError,
    ValidationError,
    XeqError,
)

CHANCE_BASELINE = 0.5


@dataclass(frozen=True)
class TrialConfig:
    n_trials: int = 100
    train_fraction: float = 0.7
    seed: int = 0
    shrinkage: float = 0.1

    def __post_init__(self):
        if self.n_trials < 1:
            raise ValidationError("n_trials must be at least 1")
        if not 0 < self.train_fraction < 1:
            raise ValidationError("train_fraction must be in (0, 1)")
        if not 0 <= self.shrinkage <= 1:
            raise ValidationError("shrinkage must be in [0, 1]")


def _classes(labels) -> tuple[np.ndarray, np.ndarray]:
    labels = np.asarray(labels).astype(str)
    return labels, np.unique(labels)


def stratified_split(labels, train_fraction: float = 0.7, seed: int = 0, trial: int = 0):
    """Split indices into (train, test) with per-class proportional allocation.

    Each class of size ``n_c`` sends ``round(n_c * (1 - train_fraction))``
    members to the test set (halves round up), clamped so that both sides get
    at least one member.  Both index arrays are returned sorted.
    """
    if not 0 < train_fraction < 1:
        raise ValidationError("train_fraction must be in (0, 1)")
    labels, classes = _classes(labels)
    train, test = [], []
    for ci, c in enumerate(classes):
        members = np.flatnonzero(labels == c)
        n_c = members.size
        if n_c < 2:
            raise ClassTooSmall(f"class {c!r} has {n_c} member(s); a split needs at least 2")
        n_test = math.floor(n_c * (1.0 - train_fraction) + 0.5)
        n_test = min(max(n_test, 1), n_c - 1)
        order = rng.permutation(rng.derive_key(seed, trial, ci), n_c)
        test.append(members[order[:n_test]])
        train.append(members[order[n_test:]])
    return np.sort(np.concatenate(train)), np.sort(np.concatenate(test))


@dataclass(frozen=True)
class LinearDiscriminant:
    """Fisher discriminant ``score = w.x + b``; positive scores predict ``classes[1]``."""

    weights: np.ndarray
    bias: float
    classes: tuple[str, str]
    shrinkage: float

    def decision_function(self, x) -> np.ndarray:
        return np.asarray(x, dtype=np.float64) @ self.weights + self.bias

    def predict(self, x) -> np.ndarray:
        scores = self.decision_function(x)
        return np.where(scores > 0, self.classes[1], self.classes[0])


def fit_linear_discriminant(features, labels, shrinkage: float = 0.1) -> LinearDiscriminant:
    """Two-class Fisher LDA with covariance shrinkage.

    The pooled within-class covariance ``S`` is blended toward a scaled
    identity, ``(1 - g) S + g (tr S / p) I``, and the weights solve
    ``S_g w = mu_1 - mu_0``.  The threshold sits midway between the class
    means (equal priors).
    """
    x = np.asarray(features, dtype=np.float64)
    labels, classes = _classes(labels)
    if x.ndim != 2 or x.shape[0] != labels.size:
        raise ValidationError("features must be an N x p array matching the labels")
    if classes.size != 2:
        raise ValidationError(f"LDA needs exactly two classes, got {classes.size}")
    if not 0 <= shrinkage <= 1:
        raise ValidationError("shrinkage must be in [0, 1]")
    x0, x1 = x[labels == classes[0]], x[labels == classes[1]]
    mu0, mu1 = x0.mean(axis=0), x1.mean(axis=0)
    n, p = x.shape
    if n <= 2:
        raise SingularCovariance("pooled covariance needs more than two observations")
    d0, d1 = x0 - mu0, x1 - mu1
    pooled = (d0.T @ d0 + d1.T @ d1) / (n - 2)
    target = np.trace(pooled) / p
    cov = (1.0 - shrinkage) * pooled + shrinkage * target * np.eye(p)
    if np.linalg.matrix_rank(cov) < p:
        raise SingularCovariance(
            f"pooled covariance is rank-deficient (rank {np.linalg.matrix_rank(cov)} < {p}); "
            "use shrinkage > 0"
        )
    w = np.linalg.solve(cov, mu1 - mu0)
    b = -0.5 * float(w @ (mu0 + mu1))
    return LinearDiscriminant(w, b, (str(classes[0]), str(classes[1])), shrinkage)


def macro_f1(y_true, y_pred, classes: Optional[Sequence[str]] = None) -> float:
    """Unweighted mean of per-class F1; a class never predicted scores 0."""
    y_true = np.asarray(y_true).astype(str)
    y_pred = np.asarray(y_pred).astype(str)
    classes = np.unique(y_true) if classes is None else np.asarray(classes, dtype=str)
    scores = []
    for c in classes:
        tp = np.sum((y_pred == c) & (y_true == c))
        fp = np.sum((y_pred == c) & (y_true != c))
        fn = np.sum((y_pred != c) & (y_true == c))
        denom = 2 * tp + fp + fn
        scores.append(0.0 if tp == 0 or denom == 0 else 2.0 * tp / denom)
    return float(np.mean(scores))


@dataclass(frozen=True)
class TrialResult:
    trial: int
    accuracy: float
    macro_f1: float
    n_train: int
    n_test: int


@dataclass(frozen=True)
class DiscriminantReport:
    accuracy_mean: float
    accuracy_sd: float
    macro_f1_mean: float
    macro_f1_sd: float
    per_trial: tuple[TrialResult, ...]
    config: TrialConfig
    classes: tuple[str, ...]
    baseline_accuracy: float = CHANCE_BASELINE

    def to_dict(self) -> dict:
        return {
            "classifier": "Fisher LDA, shrinkage toward scaled identity",
            "config": asdict(self.config),
            "classes": list(self.classes),
            "accuracy_mean": self.accuracy_mean,
            "accuracy_sd": self.accuracy_sd,
            "macro_f1_mean": self.macro_f1_mean,
            "macro_f1_sd": self.macro_f1_sd,
            "baseline_accuracy": self.baseline_accuracy,
            "sd_convention": "sample (n_trials - 1)",
            "per_trial": [asdict(t) for t in self.per_trial],
        }


def _run_trial(x, labels, classes, config: TrialConfig, t: int) -> TrialResult:
    try:
        train, test = stratified_split(labels, config.train_fraction, config.seed, t)
        model = fit_linear_discriminant(x[train], labels[train], config.shrinkage)
    except XeqError as exc:
        raise TrialError(t, exc) from exc
    pred = model.predict(x[test])
    return TrialResult(
        trial=t,
        accuracy=float(np.mean(pred == labels[test])),
        macro_f1=macro_f1(labels[test], pred, classes),
        n_train=int(train.size),
        n_test=int(test.size),
    )


def _sd(v: np.ndarray) -> float:
    return float(v.std(ddof=1)) if v.size > 1 else 0.0


def run_discriminant_trials(features, labels=None, config: TrialConfig = TrialConfig(),
                            n_jobs: int = 1) -> DiscriminantReport:
    """Repeat stratified holdout evaluation of :func:`fit_linear_discriminant`.

    ``features`` may be a :class:`~xeqkit.scale.ResponseMatrix`, in which case
    ``labels`` default to its respondents' groups.  Trials run on ``n_jobs``
    threads; results are assembled in trial order.
    """
    if labels is None:
        labels = getattr(features, "groups", None)
        if labels is None or any(g is None for g in labels):
            raise ValidationError("discriminant trials need a group label for every respondent")
    x = np.asarray(getattr(features, "values", features), dtype=np.float64)
    labels, classes = _classes(labels)
    if classes.size != 2:
        raise ValidationError(f"discriminant trials need exactly two groups, got {list(classes)}")
    run = lambda t: _run_trial(x, labels, classes, config, t)  # noqa: E731
    if n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            results = list(pool.map(run, range(config.n_trials)))
    else:
        results = [run(t) for t in range(config.n_trials)]
    results.sort(key=lambda r: r.trial)
    acc = np.array([r.accuracy for r in results])
    f1 = np.array([r.macro_f1 for r in results])
    return DiscriminantReport(
        accuracy_mean=float(acc.mean()),
        accuracy_sd=_sd(acc),
        macro_f1_mean=float(f1.mean()),
        macro_f1_sd=_sd(f1),
        per_trial=tuple(results),
        config=config,
        classes=tuple(str(c) for c in classes),
    )


# -- parametric group comparison ---------------------------------------------


@dataclass(frozen=True)
class GroupComparisonReport:
    groups: tuple[str, ...]
    n: tuple[int, ...]
    means: tuple[float, ...]
    standard_errors: tuple[float, ...]
    variances: tuple[float, ...]
    anova: dict
    student_t: Optional[dict]
    welch_t: Optional[dict]
    cohens_d: Optional[float]
    pooled_sd: Optional[float]
    blocked_anova: Optional[dict] = None

    @property
    def group_variance(self) -> float:
        """Within-group mean square of the model that was fitted last."""
        if self.blocked_anova is not None:
            return self.blocked_anova["ms_residual"]
        return self.anova["ms_within"]

    def to_dict(self) -> dict:
        return {
            "groups": [
                {"group": g, "n": n, "mean": m, "se": se, "variance": v}
                for g, n, m, se, v in zip(self.groups, self.n, self.means, self.standard_errors, self.variances)
            ],
            "one_way_anova": self.anova,
            "blocked_anova": self.blocked_anova,
            "student_t": self.student_t,
            "welch_t": self.welch_t,
            "cohens_d": self.cohens_d,
            "cohens_d_convention": "(mean first - mean second) / pooled sd, (n-1)-weighted variances",
            "pooled_sd": self.pooled_sd,
            "group_variance": self.group_variance,
        }


def one_way_anova(values, groups, order) -> dict:
    x = np.asarray(values, dtype=np.float64)
    grand = x.mean()
    parts = [x[groups == g] for g in order]
    ss_between = float(sum(p.size * (p.mean() - grand) ** 2 for p in parts))
    ss_within = float(sum(((p - p.mean()) ** 2).sum() for p in parts))
    df_b, df_w = len(parts) - 1, x.size - len(parts)
    ms_b, ms_w = ss_between / df_b, ss_within / df_w
    if ms_w == 0:
        f = 0.0 if ms_b == 0 else math.inf
    else:
        f = ms_b / ms_w
    p = 1.0 if f == 0 else (0.0 if math.isinf(f) else float(stats.f.sf(f, df_b, df_w)))
    return {
        "label": "one-way ANOVA, group factor",
        "ss_between": ss_between, "ss_within": ss_within,
        "df_between": df_b, "df_within": df_w,
        "ms_between": ms_b, "ms_within": ms_w,
        "f": None if math.isinf(f) else f, "p": p,
    }


def _rss(design: np.ndarray, y: np.ndarray) -> tuple[float, int]:
    coef, *_ = np.linalg.lstsq(design, y, rcond=None)
    resid = y - design @ coef
    return float(resid @ resid), int(np.linalg.matrix_rank(design))


def _dummies(labels: np.ndarray) -> np.ndarray:
    levels = np.unique(labels)
    return (labels[:, None] == levels[1:][None, :]).astype(np.float64)


def blocked_anova(values, groups, blocks) -> dict:
    """Additive two-factor ANOVA (group + block, no interaction).

    Each factor's sum of squares is the residual increase when it is dropped
    from the additive model (type II), tested against the full-model residual
    mean square.
    """
    y = np.asarray(values, dtype=np.float64)
    one = np.ones((y.size, 1))
    g, b = _dummies(groups), _dummies(blocks)
    rss_full, rank_full = _rss(np.hstack([one, g, b]), y)
    rss_no_group, rank_ng = _rss(np.hstack([one, b]), y)
    rss_no_block, rank_nb = _rss(np.hstack([one, g]), y)
    df_res = y.size - rank_full
    if df_res <= 0:
        raise DegenerateGroup("blocked ANOVA has no residual degrees of freedom")
    ms_res = rss_full / df_res

    def term(ss, df):
        if df == 0:
            return {"ss": 0.0, "df": 0, "ms": None, "f": None, "p": None}
        ms = ss / df
        f = ms / ms_res if ms_res > 0 else math.inf
        p = 0.0 if math.isinf(f) else float(stats.f.sf(f, df, df_res))
        return {"ss": ss, "df": df, "ms": ms, "f": None if math.isinf(f) else f, "p": p}

    return {
        "label": "two-factor additive ANOVA, group + domain block (type II)",
        "group": term(max(rss_no_group - rss_full, 0.0), rank_full - rank_ng),
        "block": term(max(rss_no_block - rss_full, 0.0), rank_full - rank_nb),
        "ss_residual": rss_full,
        "df_residual": df_res,
        "ms_residual": ms_res,
    }


def cohens_d(a, b) -> tuple[float, float]:
    """Standardised mean difference ``(mean(a) - mean(b)) / pooled sd``."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    na, nb = a.size, b.size
    pooled_var = ((na - 1) * a.var(ddof=1) + (nb - 1) * b.var(ddof=1)) / (na + nb - 2)
    if pooled_var == 0:
        raise DegenerateGroup("both groups have zero variance; Cohen's d is undefined")
    sd = math.sqrt(pooled_var)
    return float((a.mean() - b.mean()) / sd), sd


def group_comparison(totals, groups, blocking=None, order: Optional[Sequence[str]] = None) -> GroupComparisonReport:
    """Compare participant totals between groups.

    Always reports a one-way ANOVA.  With exactly two groups it adds the
    equal-variance and Welch t-tests and Cohen's d (first group minus second;
    ``order`` defaults to first appearance).  ``blocking`` labels, when given
    with at least two levels, add a group + block additive ANOVA.
    """
    x = np.asarray(totals, dtype=np.float64)
    g = np.asarray(groups).astype(str)
    if x.ndim != 1 or x.size != g.size:
        raise ValidationError("totals and groups must be equal-length vectors")
    if order is None:
        order = list(dict.fromkeys(g.tolist()))
    order = [str(o) for o in order]
    if set(order) != set(g.tolist()):
        raise ValidationError(f"order {order} does not match the group labels")
    if len(order) < 2:
        raise ValidationError("group comparison needs at least two groups")
    parts = [x[g == o] for o in order]
    small = [o for o, p in zip(order, parts) if p.size < 2]
    if small:
        raise ValidationError(f"group(s) {small} have fewer than 2 members")
    variances = [float(p.var(ddof=1)) for p in parts]
    if all(v == 0 for v in variances):
        raise DegenerateGroup("every group has zero variance")

    student = welch = d = pooled = None
    if len(order) == 2:
        a, b = parts
        d, pooled = cohens_d(a, b)
        na, nb = a.size, b.size
        diff = a.mean() - b.mean()
        se_pooled = pooled * math.sqrt(1 / na + 1 / nb)
        t = diff / se_pooled
        df = na + nb - 2
        student = {"label": "two-sample t-test, equal variances", "t": t, "df": df,
                   "p": float(2 * stats.t.sf(abs(t), df))}
        va, vb = variances[0] / na, variances[1] / nb
        se_w = math.sqrt(va + vb)
        tw = diff / se_w
        dfw = (va + vb) ** 2 / (va**2 / (na - 1) + vb**2 / (nb - 1))
        welch = {"label": "Welch t-test", "t": tw, "df": dfw, "p": float(2 * stats.t.sf(abs(tw), dfw))}

    blocked = None
    if blocking is not None:
        blocks = np.asarray(blocking).astype(str)
        if blocks.size != x.size:
            raise ValidationError("blocking labels must match the totals")
        if np.unique(blocks).size >= 2:
            blocked = blocked_anova(x, g, blocks)

    return GroupComparisonReport(
        groups=tuple(order),
        n=tuple(int(p.size) for p in parts),
        means=tuple(float(p.mean()) for p in parts),
        standard_errors=tuple(float(p.std(ddof=1) / math.sqrt(p.size)) for p in parts),
        variances=tuple(variances),
        anova=one_way_anova(x, g, order),
        student_t=student,
        welch_t=welch,
        cohens_d=d,
        pooled_sd=pooled,
        blocked_anova=blocked,
    )
