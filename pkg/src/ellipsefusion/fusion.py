"""Track-to-track fusion of two elliptic extent estimates.

Five strategies behind one interface:

* ``naive``      - Kalman combination of the raw parameter vectors.
* ``shape_mean`` - average of centers and of shape matrices.
* ``mmgw_lin``   - Kalman combination in square-root space with
                   linearized (Jacobian-propagated) covariances.
* ``mmgw_mc``    - same combination with moments estimated from seeded
                   Monte-Carlo particles pushed through the transform.
* ``heuristic``  - likelihood-based selection among the four equivalent
                   parametrizations of the second estimate, then the naive
                   combination on the aligned pair.

The naive fuser deliberately keeps the pathology that motivates the
others: two parametrizations of one ellipse can average to a very
different ellipse.  All other fusers are invariant under equivalent
re-parametrization of their inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import (
    TWO_PI,
    PSD_TOL,
    SYM_RTOL,
    EllipseState,
    TransformedState,
    ellipse_from_shape,
    equivalent_parametrizations,
    inverse_transform,
    jacobian,
    permute_covariance,
    _shape_entries,
    transform,
    transform_batch,
)
from .errors import FusionNumericsError, InvalidInputError, JacobianSingularError

METHODS = ("naive", "shape_mean", "mmgw_lin", "mmgw_mc", "heuristic")

_LOG_TWO_PI = math.log(2.0 * math.pi)


def check_covariance(cov, dim: int = 5) -> np.ndarray:
    """Validate and return a symmetrized copy of a covariance matrix.

    Requires symmetry within relative tolerance and eigenvalues no lower
    than the PSD slack.
    """
    arr = np.array(cov, dtype=float)
    if arr.shape != (dim, dim):
        raise InvalidInputError(f"expected a {dim}x{dim} covariance, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError("covariance must be finite")
    scale = max(1.0, float(np.abs(arr).max()))
    if float(np.abs(arr - arr.T).max()) > SYM_RTOL * scale:
        raise InvalidInputError("covariance must be symmetric")
    arr = 0.5 * (arr + arr.T)
    eigvals = np.linalg.eigvalsh(arr)
    if eigvals[0] < -PSD_TOL * max(1.0, eigvals[-1]):
        raise InvalidInputError(
            f"covariance has negative eigenvalue {eigvals[0]}"
        )
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class GaussianEstimate:
    """One sensor's track output: ellipse state mean plus 5x5 covariance."""

    mean: EllipseState
    cov: np.ndarray

    def __post_init__(self):
        if not isinstance(self.mean, EllipseState):
            object.__setattr__(self, "mean", EllipseState.from_array(self.mean))
        object.__setattr__(self, "cov", check_covariance(self.cov))


@dataclass(frozen=True, eq=False)
class FusionInput:
    """A pair of independent estimates to fuse."""

    est1: GaussianEstimate
    est2: GaussianEstimate


@dataclass(frozen=True, eq=False)
class TransformedGaussian:
    """Gaussian in square-root space: transformed mean plus covariance."""

    mean: TransformedState
    cov: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "cov", check_covariance(self.cov))


@dataclass(frozen=True, eq=False)
class FusionResult:
    """Fused ellipse in canonical form plus method-specific diagnostics.

    ``fused_transformed`` carries the fused mean and covariance in
    square-root space for the MMGW fusers and is None for the baselines.
    """

    fused: EllipseState
    method: str
    diagnostics: dict = field(default_factory=dict)
    fused_transformed: TransformedGaussian | None = None


def _psd_factor(cov: np.ndarray) -> np.ndarray:
    """Symmetric PSD factor L with L @ L.T == cov (eigenvalue square root)."""
    eigvals, eigvecs = np.linalg.eigh(cov)
    eigvals = np.clip(eigvals, 0.0, None)
    return (eigvecs * np.sqrt(eigvals)) @ eigvecs.T


def _combine(x1, c1, x2, c2, *, equal_split_null: bool, hint: str = ""):
    """Kalman combination of two mean/covariance pairs.

    Returns ``x1 + C1 (C1+C2)^+ (x2-x1)`` plus half the null-space part of
    the innovation, and the fused covariance ``C1 (C1+C2)^+ C2``.  In
    directions where both covariances vanish, neither estimate claims any
    uncertainty: with ``equal_split_null`` the innovation is split evenly
    there (so equal covariances reduce exactly to the plain average), and
    otherwise any disagreement beyond tolerance raises.
    """
    total = c1 + c2
    total = 0.5 * (total + total.T)
    eigvals, eigvecs = np.linalg.eigh(total)
    cutoff = max(eigvals[-1], 0.0) * 1e-12
    positive = eigvals > cutoff

    innovation = x2 - x1
    rotated = eigvecs.T @ innovation
    null_part = innovation - eigvecs[:, positive] @ rotated[positive]
    if not equal_split_null and not np.all(positive):
        scale = 1.0 + max(
            float(np.abs(x1).max()), float(np.abs(x2).max())
        )
        if float(np.abs(null_part).max()) > 1e-9 * scale:
            raise FusionNumericsError(
                "combined covariance is singular in a direction where the "
                "estimates disagree" + (f"; {hint}" if hint else "")
            )

    inv = np.zeros_like(eigvals)
    inv[positive] = 1.0 / eigvals[positive]
    pinv = (eigvecs * inv) @ eigvecs.T

    fused_mean = x1 + c1 @ pinv @ innovation + 0.5 * null_part
    fused_cov = c1 @ pinv @ c2
    fused_cov = 0.5 * (fused_cov + fused_cov.T)
    return fused_mean, fused_cov


def fuse_naive(inp: FusionInput) -> FusionResult:
    """Kalman combination of the raw parameter vectors.

    With equal covariances this is the plain average of the two parameter
    vectors.  Orientation is treated as an ordinary real with no angle
    wrapping, so equivalent parametrizations of one ellipse fuse to a
    different ellipse; that behavior is intentional.
    """
    x1, c1 = inp.est1.mean.as_array(), inp.est1.cov
    x2, c2 = inp.est2.mean.as_array(), inp.est2.cov
    fused_mean, _ = _combine(x1, c1, x2, c2, equal_split_null=True)
    return FusionResult(
        fused=EllipseState.from_array(fused_mean).canonical(),
        method="naive",
    )


def fuse_shape_mean(inp: FusionInput) -> FusionResult:
    """Average the two centers and the two shape matrices.

    Covariances are ignored by construction; the averaged shape matrix is
    converted back to canonical ellipse parameters through its
    eigendecomposition.
    """
    s1, s2 = inp.est1.mean, inp.est2.mean
    entries1 = _shape_entries(s1.alpha, s1.length, s1.width)
    entries2 = _shape_entries(s2.alpha, s2.length, s2.width)
    avg = [0.5 * (float(e1) + float(e2)) for e1, e2 in zip(entries1, entries2)]
    center = 0.5 * (s1.center + s2.center)
    fused = ellipse_from_shape(center, [[avg[0], avg[1]], [avg[1], avg[2]]])
    return FusionResult(fused=fused, method="shape_mean")


def _transformed_result(method, fused_y, fused_cov, diagnostics):
    fused_state = inverse_transform(fused_y)
    return FusionResult(
        fused=fused_state,
        method=method,
        diagnostics=diagnostics,
        fused_transformed=TransformedGaussian(
            TransformedState.from_array(fused_y), fused_cov
        ),
    )


def fuse_mmgw_lin(inp: FusionInput) -> FusionResult:
    """Kalman combination in square-root space with linearized covariances.

    Means propagate through the exact transform; covariances through the
    analytic Jacobian, P_i = H_i C_i H_i^T.  The fused square-root-space
    mean maps back to the canonical ellipse.

    Raises:
        JacobianSingularError: if either estimate's mean is a circle or
            has a vanishing semi-axis, naming the offending estimate.
    """
    jacobians = []
    for label, est in (("estimate 1", inp.est1), ("estimate 2", inp.est2)):
        try:
            jacobians.append(jacobian(est.mean))
        except JacobianSingularError as err:
            raise JacobianSingularError(f"{label}: {err}") from err
    y1 = transform(inp.est1.mean).as_array()
    y2 = transform(inp.est2.mean).as_array()
    p1 = jacobians[0] @ inp.est1.cov @ jacobians[0].T
    p2 = jacobians[1] @ inp.est2.cov @ jacobians[1].T
    p1 = 0.5 * (p1 + p1.T)
    p2 = 0.5 * (p2 + p2.T)
    fused_y, fused_cov = _combine(
        y1, p1, y2, p2, equal_split_null=False,
        hint="the linearized covariances span no common direction",
    )
    return _transformed_result("mmgw_lin", fused_y, fused_cov, {})


def _canonical_gaussian(est: GaussianEstimate):
    """Canonical mean with the covariance permuted and sign-flipped to match.

    Equivalent parametrizations of one estimate all map to the same
    canonical pair, which keeps particle draws identical across them.
    """
    mean = est.mean
    cov = np.array(est.cov)
    length, width = mean.length, mean.width
    if length < 0.0:
        cov[3, :] *= -1.0
        cov[:, 3] *= -1.0
    if width < 0.0:
        cov[4, :] *= -1.0
        cov[:, 4] *= -1.0
    alpha = mean.alpha
    long_ax, short_ax = abs(length), abs(width)
    if short_ax > long_ax:
        long_ax, short_ax = short_ax, long_ax
        alpha += 0.5 * math.pi
        idx = np.array([0, 1, 2, 4, 3])
        cov = cov[np.ix_(idx, idx)]
    canonical_mean = EllipseState(mean.m_x, mean.m_y, alpha % math.pi, long_ax, short_ax)
    return canonical_mean, cov


def _seed_pair(seed):
    """Two independent child seed sequences, one per estimate."""
    if isinstance(seed, (tuple, list)):
        if len(seed) != 2:
            raise InvalidInputError("a seed pair must have exactly two entries")
        return tuple(
            s if isinstance(s, np.random.SeedSequence) else np.random.SeedSequence(s)
            for s in seed
        )
    if not isinstance(seed, np.random.SeedSequence):
        seed = np.random.SeedSequence(seed)
    return tuple(seed.spawn(2))


def transformed_moments(est: GaussianEstimate, samples: int, seed):
    """Particle estimate of the square-root-space mean and covariance.

    Draws ``samples`` points from the estimate's Gaussian, maps them
    through the transform, and returns the sample mean together with the
    (1/m)-normalized scatter matrix.  Deterministic for a given seed.
    """
    if samples < 2:
        raise InvalidInputError(f"need at least 2 samples, got {samples}")
    if not isinstance(seed, np.random.SeedSequence):
        seed = np.random.SeedSequence(seed)
    mean, cov = _canonical_gaussian(est)
    factor = _psd_factor(cov)
    rng = np.random.Generator(np.random.Philox(seed))
    draws = mean.as_array() + rng.standard_normal((samples, 5)) @ factor
    points = transform_batch(draws)
    y = points.mean(axis=0)
    centered = points - y
    scatter = centered.T @ centered / samples
    return y, 0.5 * (scatter + scatter.T)


def fuse_mmgw_mc(inp: FusionInput, samples: int = 1000, seed=0) -> FusionResult:
    """Kalman combination in square-root space with Monte-Carlo moments.

    Each estimate contributes ``samples`` particles drawn from its own
    Gaussian on an independent sub-stream derived from ``seed`` (pass a
    pair of seeds to control the sub-streams directly).  The transformed
    particles' sample mean and scatter replace the linearized moments,
    which also captures the bias the nonlinear transform introduces.
    Identical inputs, sample count, and seed give an identical result.

    Raises:
        FusionNumericsError: if the combined particle covariance is
            singular where the estimates disagree; more samples usually fix
            this.
    """
    if samples < 2:
        raise InvalidInputError(f"need at least 2 samples, got {samples}")
    seed1, seed2 = _seed_pair(seed)
    y1, p1 = transformed_moments(inp.est1, samples, seed1)
    y2, p2 = transformed_moments(inp.est2, samples, seed2)
    fused_y, fused_cov = _combine(
        y1, p1, y2, p2, equal_split_null=False,
        hint="increase the sample count",
    )
    return _transformed_result(
        "mmgw_mc", fused_y, fused_cov, {"samples": int(samples)}
    )


def _gaussian_nll(innovation, cov, dim: int = 5):
    """Gaussian negative log likelihood, rank-aware.

    Uses the pseudo-inverse and pseudo-log-determinant when the covariance
    is singular; an innovation with a component outside the covariance's
    range has likelihood zero (infinite NLL).
    """
    eigvals, eigvecs = np.linalg.eigh(cov)
    cutoff = max(eigvals[-1], 0.0) * 1e-12
    positive = eigvals > cutoff
    rotated = eigvecs.T @ innovation
    if not np.all(positive):
        null_mag = float(np.abs(rotated[~positive]).max(initial=0.0))
        if null_mag > 1e-9 * (1.0 + float(np.abs(innovation).max(initial=0.0))):
            return math.inf
    quad = float(np.sum(rotated[positive] ** 2 / eigvals[positive]))
    logdet = float(np.sum(np.log(eigvals[positive])))
    return 0.5 * (quad + logdet + dim * _LOG_TWO_PI)


def _printed_selection_score(innovation, cov, dim: int = 5):
    """Alternative selection score with the sign-flipped quadratic form and
    inverted determinant; kept for side-by-side diagnostics only."""
    sign, logdet = np.linalg.slogdet(cov)
    if sign <= 0:
        return math.inf
    quad = float(innovation @ cov @ innovation)
    return 0.5 * (-quad - logdet - dim * _LOG_TWO_PI)


def fuse_heuristic(inp: FusionInput, include_printed_scores: bool = False) -> FusionResult:
    """Align the second estimate to the first, then combine naively.

    Builds the four equivalent parametrizations of the second estimate
    (covariance rows and columns permuted to match), scores each by the
    Gaussian negative log likelihood of the innovation against the summed
    covariance, and fuses the best-scoring variant with the naive Kalman
    combination.  Ties within 1e-12 resolve to the smaller variant index.

    Within each variant the orientation is shifted by whole turns to the
    representative nearest the first estimate's orientation; orientations a
    full period apart describe the same ellipse, and the nearest one keeps
    the innovation meaningful at the wrap-around.

    Diagnostics carry the chosen variant index and all four NLL values
    (None for variants with likelihood zero).  With
    ``include_printed_scores`` an alternative selection score is reported
    alongside for comparison; it never influences the choice.
    """
    x1, c1 = inp.est1.mean.as_array(), inp.est1.cov
    variants = equivalent_parametrizations(inp.est2.mean)

    candidates = []
    nlls = []
    printed_scores = []
    for k, variant in enumerate(variants):
        x2k = variant.as_array()
        x2k[2] -= TWO_PI * round((x2k[2] - x1[2]) / TWO_PI)
        c2k = permute_covariance(inp.est2.cov, k)
        innovation = x1 - x2k
        s_k = c1 + c2k
        s_k = 0.5 * (s_k + s_k.T)
        nlls.append(_gaussian_nll(innovation, s_k))
        if include_printed_scores:
            printed_scores.append(_printed_selection_score(innovation, s_k))
        candidates.append((x2k, c2k))

    k_opt = 0
    for k in range(1, 4):
        if nlls[k] < nlls[k_opt] - 1e-12:
            k_opt = k
    if math.isinf(nlls[k_opt]):
        raise FusionNumericsError(
            "no equivalent parametrization is consistent with the first "
            "estimate under the combined covariances"
        )

    x2_opt, c2_opt = candidates[k_opt]
    fused_mean, _ = _combine(x1, c1, x2_opt, c2_opt, equal_split_null=True)
    diagnostics = {
        "k_opt": k_opt,
        "nll": [None if math.isinf(v) else v for v in nlls],
    }
    if include_printed_scores:
        diagnostics["printed_scores"] = [
            None if math.isinf(v) else v for v in printed_scores
        ]
        finite = [v for v in printed_scores if not math.isinf(v)]
        diagnostics["printed_k_opt"] = (
            printed_scores.index(min(finite)) if finite else None
        )
    return FusionResult(
        fused=EllipseState.from_array(fused_mean).canonical(),
        method="heuristic",
        diagnostics=diagnostics,
    )


_FUSERS = {
    "naive": fuse_naive,
    "shape_mean": fuse_shape_mean,
    "mmgw_lin": fuse_mmgw_lin,
    "mmgw_mc": fuse_mmgw_mc,
    "heuristic": fuse_heuristic,
}


def fuse(inp: FusionInput, method: str, **kwargs) -> FusionResult:
    """Run one fusion method by name; see ``METHODS`` for the choices."""
    name = method.replace("-", "_")
    if name not in _FUSERS:
        raise InvalidInputError(
            f"unknown fusion method {method!r}, expected one of {', '.join(METHODS)}"
        )
    return _FUSERS[name](inp, **kwargs)
