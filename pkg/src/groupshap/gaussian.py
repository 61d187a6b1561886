"""Multivariate Gaussian feature distributions.

Conditioning is done on arbitrary coalitions given as bitmasks. The
regression matrix and conditional covariance for a coalition depend only on
the covariance, so they are computed once per mask and cached on the
distribution; only the conditional mean depends on the explained instance.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np
from scipy import linalg

from .coalitions import FeaturePartition, mask_to_indices
from .errors import NotPositiveDefiniteError, SingularBlockError, ValidationError

SYMMETRY_TOL = 1e-12
PSD_REL_TOL = 1e-10
PIVOT_TOL = 1e-12
REPAIR_FLOOR = 1e-8


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


def _sampling_factor(cov: np.ndarray) -> np.ndarray:
    """Return ``L`` with ``L @ L.T == cov``; eigen fallback for singular PSD input."""
    if cov.size == 0:
        return np.zeros_like(cov)
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        vals, vecs = np.linalg.eigh(cov)
        return vecs * np.sqrt(np.clip(vals, 0.0, None))


def _eig_extremes(cov: np.ndarray) -> tuple[float, float]:
    vals = np.linalg.eigvalsh(cov)
    return float(vals[0]), float(vals[-1])


@dataclass(frozen=True)
class _Plan:
    """Mask-dependent part of Gaussian conditioning."""

    cond: np.ndarray  # conditioned indices
    free: np.ndarray  # free indices
    regression: np.ndarray  # Sigma_FS Sigma_SS^-1, shape (|F|, |S|)
    covariance: np.ndarray  # conditional covariance over free indices
    factor: np.ndarray  # sampling factor of ``covariance``


@dataclass(frozen=True, eq=False)
class GaussianModel:
    """``N(mean, covariance)`` over M features.

    ``repair_distance`` is the Frobenius distance moved by a nearest-PSD
    repair, or ``None`` when the covariance was used as given.
    """

    mean: np.ndarray
    covariance: np.ndarray
    repair_distance: float | None = None
    _plans: dict = field(default_factory=dict, init=False, repr=False, compare=False)
    _factor: list = field(default_factory=list, init=False, repr=False, compare=False)

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float)
        cov = np.asarray(self.covariance, dtype=float)
        if mean.ndim != 1:
            raise ValidationError("mean must be a vector")
        if cov.shape != (mean.size, mean.size):
            raise ValidationError(
                f"covariance shape {cov.shape} does not match mean length {mean.size}"
            )
        if not (np.all(np.isfinite(mean)) and np.all(np.isfinite(cov))):
            raise ValidationError("mean and covariance must be finite")
        scale = max(1.0, float(np.max(np.abs(cov))))
        if np.max(np.abs(cov - cov.T)) > SYMMETRY_TOL * scale:
            raise ValidationError("covariance is not symmetric")
        lo, hi = _eig_extremes(cov)
        if lo < -PSD_REL_TOL * max(hi, 0.0) or hi < 0:
            raise NotPositiveDefiniteError(
                f"covariance is not positive semi-definite (smallest eigenvalue {lo:.6g})",
                lo,
            )
        object.__setattr__(self, "mean", _frozen(mean))
        object.__setattr__(self, "covariance", _frozen(cov))

    @property
    def dim(self) -> int:
        return self.mean.size

    @property
    def full_mask(self) -> int:
        return (1 << self.dim) - 1

    def plan(self, mask: int) -> _Plan:
        plan = self._plans.get(mask)
        if plan is None:
            plan = self._make_plan(mask)
            self._plans[mask] = plan
        return plan

    def _make_plan(self, mask: int) -> _Plan:
        if mask < 0 or mask > self.full_mask:
            raise ValueError(f"coalition {mask:#x} outside {self.dim} features")
        cond = np.array(mask_to_indices(mask), dtype=np.intp)
        free = np.array(
            [i for i in range(self.dim) if not (mask >> i) & 1], dtype=np.intp
        )
        cov = self.covariance
        if cond.size == 0:
            c = cov
            reg = np.zeros((free.size, 0))
        else:
            s_block = cov[np.ix_(cond, cond)]
            try:
                chol = np.linalg.cholesky(s_block)
                ok = np.min(np.diag(chol)) ** 2 > PIVOT_TOL
            except np.linalg.LinAlgError:
                ok = False
            if not ok:
                cn = float(np.linalg.cond(s_block))
                raise SingularBlockError(
                    f"covariance block of features {cond.tolist()} is singular "
                    f"(condition number {cn:.3g})",
                    cn,
                )
            cross = cov[np.ix_(free, cond)]
            reg = linalg.cho_solve((chol, True), cross.T).T
            c = cov[np.ix_(free, free)] - reg @ cross.T
            c = 0.5 * (c + c.T)
        return _Plan(
            cond=cond,
            free=free,
            regression=_frozen(reg),
            covariance=_frozen(c),
            factor=_frozen(_sampling_factor(c)),
        )

    def sampling_factor(self) -> np.ndarray:
        if not self._factor:
            self._factor.append(_frozen(_sampling_factor(self.covariance)))
        return self._factor[0]

    def marginal(self, indices) -> "GaussianModel":
        idx = np.asarray(indices, dtype=np.intp)
        return GaussianModel(
            self.mean[idx], self.covariance[np.ix_(idx, idx)], self.repair_distance
        )

    def to_json(self) -> dict:
        return {"mean": self.mean.tolist(), "covariance": self.covariance.tolist()}


@dataclass(frozen=True, eq=False)
class ConditionalGaussian:
    """Law of the free features given ``x_S = given_values``.

    ``mean`` and ``covariance`` are over the free indices only.
    """

    conditioned_on: int
    given_values: np.ndarray
    mean: np.ndarray
    covariance: np.ndarray
    n_features: int
    _plan: _Plan = field(repr=False)

    @property
    def free_indices(self) -> np.ndarray:
        return self._plan.free

    @property
    def conditioned_indices(self) -> np.ndarray:
        return self._plan.cond

    def full_mean(self) -> np.ndarray:
        m = np.empty(self.n_features)
        m[self._plan.cond] = self.given_values
        m[self._plan.free] = self.mean
        return m

    def full_covariance(self) -> np.ndarray:
        c = np.zeros((self.n_features, self.n_features))
        f = self._plan.free
        c[np.ix_(f, f)] = self.covariance
        return c


@dataclass(frozen=True)
class CorrelationDesign:
    """Block correlation structure: one value within groups, another between."""

    within_rho: float
    between_rho: float
    partition: FeaturePartition
    variance: float = 1.0

    def matrix(self) -> np.ndarray:
        M = self.partition.n_features
        group = np.empty(M, dtype=np.intp)
        for i, g in enumerate(self.partition.groups):
            group[list(g)] = i
        same = group[:, None] == group[None, :]
        corr = np.where(same, self.within_rho, self.between_rho).astype(float)
        np.fill_diagonal(corr, 1.0)
        return self.variance * corr


def nearest_psd(cov: np.ndarray, floor: float = REPAIR_FLOOR) -> tuple[np.ndarray, float]:
    """Clip eigenvalues at ``floor``; return the repaired matrix and Frobenius distance."""
    sym = 0.5 * (cov + cov.T)
    vals, vecs = np.linalg.eigh(sym)
    fixed = (vecs * np.clip(vals, floor, None)) @ vecs.T
    fixed = 0.5 * (fixed + fixed.T)
    return fixed, float(np.linalg.norm(fixed - cov, "fro"))


def build_covariance(
    design: CorrelationDesign, mean=None, repair: bool = False
) -> GaussianModel:
    """Construct the block-correlated Gaussian and check positive definiteness."""
    for name in ("within_rho", "between_rho"):
        r = getattr(design, name)
        if not -1.0 <= r <= 1.0:
            raise ValidationError(f"{name}={r} outside [-1, 1]")
    if design.variance <= 0:
        raise ValidationError(f"variance must be positive, got {design.variance}")
    cov = design.matrix()
    M = cov.shape[0]
    mean = np.zeros(M) if mean is None else np.asarray(mean, dtype=float)
    lo, hi = _eig_extremes(cov)
    if lo > PSD_REL_TOL * hi:
        return GaussianModel(mean, cov)
    if not repair:
        raise NotPositiveDefiniteError(
            f"covariance with within_rho={design.within_rho}, "
            f"between_rho={design.between_rho} is not positive definite "
            f"(smallest eigenvalue {lo:.6g}); enable repair to project it",
            lo,
        )
    fixed, dist = nearest_psd(cov)
    return GaussianModel(mean, fixed, repair_distance=dist)


def condition(dist: GaussianModel, S: int, x_S) -> ConditionalGaussian:
    """Condition ``dist`` on ``x[S] = x_S`` (``x_S`` ordered by feature index)."""
    plan = dist.plan(int(S))
    x_S = np.asarray(x_S, dtype=float).reshape(-1)
    if x_S.size != plan.cond.size:
        raise ValueError(
            f"x_S has length {x_S.size}, coalition has {plan.cond.size} features"
        )
    mu = dist.mean
    mean = mu[plan.free] + plan.regression @ (x_S - mu[plan.cond])
    return ConditionalGaussian(
        conditioned_on=int(S),
        given_values=_frozen(x_S),
        mean=_frozen(mean),
        covariance=plan.covariance,
        n_features=dist.dim,
        _plan=plan,
    )


def sample(dist: GaussianModel | ConditionalGaussian, n: int, rng: np.random.Generator):
    """Draw ``n`` full-length feature vectors.

    For a conditional distribution the conditioned coordinates are filled
    with the given values, so the result is always ``n x M``.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if isinstance(dist, GaussianModel):
        L = dist.sampling_factor()
        z = rng.standard_normal((dist.dim, n))
        return (dist.mean[:, None] + L @ z).T
    plan = dist._plan
    # built feature-major and returned transposed (Fortran order) for fast column access
    out = np.empty((dist.n_features, n))
    out[plan.cond] = dist.given_values[:, None]
    if plan.free.size:
        z = rng.standard_normal((plan.free.size, n))
        out[plan.free] = dist.mean[:, None] + plan.factor @ z
    return out.T


class GaussianMoments:
    """Closed-form low-order moments of a (possibly degenerate) Gaussian.

    Indices refer to the full feature vector; conditioned coordinates have
    zero variance.
    """

    def __init__(self, mean, covariance):
        self.mean = np.asarray(mean, dtype=float)
        self.cov = np.asarray(covariance, dtype=float)

    def first(self, i):
        return self.mean[i]

    def second(self, i, j):
        """E[x_i x_j]"""
        return self.mean[i] * self.mean[j] + self.cov[i, j]

    def cubic(self, i, j):
        """E[x_i x_j^2]"""
        m, c = self.mean, self.cov
        return m[i] * m[j] ** 2 + m[i] * c[j, j] + 2.0 * m[j] * c[i, j]

    def cos(self, i):
        """E[cos(x_i)]"""
        return np.exp(-0.5 * self.cov[i, i]) * np.cos(self.mean[i])


def gaussian_moments(dist: GaussianModel | ConditionalGaussian) -> GaussianMoments:
    if isinstance(dist, GaussianModel):
        return GaussianMoments(dist.mean, dist.covariance)
    return GaussianMoments(dist.full_mean(), dist.full_covariance())


def distribution_from_json(
    doc: Mapping | str, partition: FeaturePartition | None = None, repair: bool = False
) -> GaussianModel:
    """Parse ``{"mean", "covariance"}`` or ``{"design": {...}}`` (needs a partition)."""
    if isinstance(doc, str):
        doc = json.loads(doc)
    if not isinstance(doc, Mapping):
        raise ValidationError("distribution spec must be a JSON object")
    if "design" in doc:
        if partition is None:
            raise ValidationError("a design-based distribution needs a partition")
        d = doc["design"]
        try:
            design = CorrelationDesign(
                within_rho=float(d["within_rho"]),
                between_rho=float(d["between_rho"]),
                partition=partition,
                variance=float(d.get("variance", 1.0)),
            )
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"bad design spec: {exc}") from None
        return build_covariance(design, mean=doc.get("mean"), repair=repair)
    if "covariance" not in doc:
        raise ValidationError('distribution spec needs "covariance" or "design"')
    cov = np.asarray(doc["covariance"], dtype=float)
    if cov.ndim != 2:
        raise ValidationError("covariance must be a 2-d array")
    mean = doc.get("mean")
    mean = np.zeros(cov.shape[0]) if mean is None else mean
    try:
        return GaussianModel(mean, cov)
    except NotPositiveDefiniteError:
        if not repair:
            raise
        fixed, dist = nearest_psd(cov)
        return GaussianModel(mean, fixed, repair_distance=dist)
