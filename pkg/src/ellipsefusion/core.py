"""Elliptic extent states, shape-matrix algebra, and the square-root-space
transform.

An ellipse is parameterized by the vector ``[m_x, m_y, alpha, l, w]``
(center, orientation, semi-axes).  Its shape matrix is the 2x2 symmetric
positive-semidefinite matrix

    X = R(alpha) @ diag(l**2, w**2) @ R(alpha).T

The transform ``T`` maps the parameter vector to
``[m_x, m_y, s11, s12, s22]`` where the ``s`` entries form the principal
square root of ``X``.  Euclidean distance in the transformed space
approximates the Gaussian Wasserstein distance between ellipses, which is
what makes this space convenient for moment-based fusion.

All functions here are pure and all types immutable; concurrent use needs
no synchronization.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    IndefiniteMatrixError,
    InvalidInputError,
    JacobianSingularError,
)

TWO_PI = 2.0 * math.pi

# Absolute slack for positive-semidefiniteness checks (scaled by magnitude
# for large matrices) and the looser tolerance used for symmetry and
# round-trip checks.  Everything here is closed-form double arithmetic, so
# these are tight.
PSD_TOL = 1e-12
SYM_RTOL = 1e-9

# Below this, semi-axes are treated as degenerate and |l| == |w| counts as
# a circle when checking Jacobian preconditions.
AXIS_TOL = 1e-12


def _require_finite(values, what: str) -> None:
    arr = np.asarray(values, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"{what} must be finite, got {values!r}")


@dataclass(frozen=True)
class EllipseState:
    """Ellipse parameter vector: center, orientation, and semi-axes.

    Raw states may carry any real semi-axes and orientation; the canonical
    representative has ``alpha`` in ``[0, pi)`` and ``length >= width >= 0``.
    """

    m_x: float
    m_y: float
    alpha: float
    length: float
    width: float

    def __post_init__(self):
        for name in ("m_x", "m_y", "alpha", "length", "width"):
            value = float(getattr(self, name))
            if not math.isfinite(value):
                raise InvalidInputError(f"{name} must be finite, got {value!r}")
            object.__setattr__(self, name, value)

    @classmethod
    def from_array(cls, values) -> "EllipseState":
        arr = np.asarray(values, dtype=float).reshape(-1)
        if arr.shape != (5,):
            raise InvalidInputError(f"expected 5 parameters, got shape {arr.shape}")
        return cls(*arr)

    def as_array(self) -> np.ndarray:
        return np.array([self.m_x, self.m_y, self.alpha, self.length, self.width])

    @property
    def center(self) -> np.ndarray:
        return np.array([self.m_x, self.m_y])

    def canonical(self) -> "EllipseState":
        """Return the canonical equivalent state.

        Semi-axes become nonnegative with ``length >= width`` and the
        orientation is reduced modulo pi; the described ellipse (and hence
        the shape matrix) is unchanged.
        """
        alpha = self.alpha
        long_ax, short_ax = abs(self.length), abs(self.width)
        if short_ax > long_ax:
            long_ax, short_ax = short_ax, long_ax
            alpha += 0.5 * math.pi
        return EllipseState(self.m_x, self.m_y, alpha % math.pi, long_ax, short_ax)


@dataclass(frozen=True)
class ShapeMatrix:
    """Symmetric PSD 2x2 extent matrix, stored by its upper triangle."""

    x11: float
    x12: float
    x22: float

    def __post_init__(self):
        for name in ("x11", "x12", "x22"):
            value = float(getattr(self, name))
            if not math.isfinite(value):
                raise InvalidInputError(f"{name} must be finite, got {value!r}")
            object.__setattr__(self, name, value)
        scale = max(1.0, self.x11 * self.x22)
        if self.x11 < -PSD_TOL or self.x22 < -PSD_TOL:
            raise InvalidInputError(
                f"diagonal entries must be nonnegative, got {self.x11}, {self.x22}"
            )
        if self.x11 * self.x22 - self.x12 ** 2 < -PSD_TOL * scale:
            raise InvalidInputError(
                "entries do not form a positive-semidefinite matrix: "
                f"[[{self.x11}, {self.x12}], [{self.x12}, {self.x22}]]"
            )

    @classmethod
    def from_matrix(cls, mat) -> "ShapeMatrix":
        arr = np.asarray(mat, dtype=float)
        if arr.shape != (2, 2):
            raise InvalidInputError(f"expected a 2x2 matrix, got shape {arr.shape}")
        _require_finite(arr, "shape matrix")
        scale = max(1.0, float(np.abs(arr).max()))
        if abs(arr[0, 1] - arr[1, 0]) > SYM_RTOL * scale:
            raise InvalidInputError("shape matrix must be symmetric")
        off = 0.5 * (arr[0, 1] + arr[1, 0])
        return cls(float(arr[0, 0]), off, float(arr[1, 1]))

    def as_matrix(self) -> np.ndarray:
        return np.array([[self.x11, self.x12], [self.x12, self.x22]])

    def trace(self) -> float:
        return self.x11 + self.x22

    def det(self) -> float:
        return self.x11 * self.x22 - self.x12 ** 2


@dataclass(frozen=True)
class TransformedState:
    """Point in square-root space: center plus the upper triangle of the
    principal square root of a shape matrix."""

    m_x: float
    m_y: float
    s11: float
    s12: float
    s22: float

    def __post_init__(self):
        for name in ("m_x", "m_y", "s11", "s12", "s22"):
            value = float(getattr(self, name))
            if not math.isfinite(value):
                raise InvalidInputError(f"{name} must be finite, got {value!r}")
            object.__setattr__(self, name, value)
        sig_max, sig_min, _ = _eig2_sym(self.s11, self.s12, self.s22)
        if sig_min < -PSD_TOL * max(1.0, abs(sig_max)):
            raise InvalidInputError(
                "implied square-root matrix is not positive semidefinite: "
                f"eigenvalues ({sig_max}, {sig_min})"
            )

    @classmethod
    def from_array(cls, values) -> "TransformedState":
        arr = np.asarray(values, dtype=float).reshape(-1)
        if arr.shape != (5,):
            raise InvalidInputError(f"expected 5 components, got shape {arr.shape}")
        return cls(*arr)

    def as_array(self) -> np.ndarray:
        return np.array([self.m_x, self.m_y, self.s11, self.s12, self.s22])


def _eig2_sym(a: float, b: float, c: float) -> tuple[float, float, float]:
    """Eigendecomposition of the symmetric matrix [[a, b], [b, c]].

    Returns (largest eigenvalue, smallest eigenvalue, angle of the
    eigenvector belonging to the largest one).  The angle degenerates to 0
    for multiples of the identity, which keeps circle handling
    deterministic.
    """
    mid = 0.5 * (a + c)
    radius = math.hypot(0.5 * (a - c), b)
    theta = 0.5 * math.atan2(2.0 * b, a - c)
    return mid + radius, mid - radius, theta


def _shape_entries(alpha, length, width):
    """Entries (x11, x12, x22) of R(alpha) diag(l^2, w^2) R(alpha)^T.

    Accepts scalars or broadcastable arrays.
    """
    c = np.cos(alpha)
    s = np.sin(alpha)
    l2 = np.square(length)
    w2 = np.square(width)
    x11 = l2 * c * c + w2 * s * s
    x12 = (l2 - w2) * c * s
    x22 = l2 * s * s + w2 * c * c
    return x11, x12, x22


def _sqrt_entries_from_params(alpha, length, width):
    """Entries (s11, s12, s22) of the principal square root of the shape
    matrix, computed directly from the parameters.

    Uses the closed form S = (X + delta*I) / tau with delta = sqrt(det X)
    and tau = sqrt(trace X + 2*delta).  Because det X = (l*w)^2 exactly,
    delta is evaluated as |l*w|, which avoids the cancellation that the
    determinant of the assembled entries would suffer for thin ellipses.
    Vectorized; the zero matrix (l = w = 0) maps to zeros.
    """
    x11, x12, x22 = _shape_entries(alpha, length, width)
    delta = np.abs(np.asarray(length) * np.asarray(width))
    tau_sq = x11 + x22 + 2.0 * delta
    with np.errstate(divide="ignore", invalid="ignore"):
        tau = np.sqrt(tau_sq)
        s11 = np.where(tau > 0.0, (x11 + delta) / tau, 0.0)
        s12 = np.where(tau > 0.0, x12 / tau, 0.0)
        s22 = np.where(tau > 0.0, (x22 + delta) / tau, 0.0)
    return s11, s12, s22


def shape_matrix(state: EllipseState) -> ShapeMatrix:
    """Shape matrix R(alpha) diag(l^2, w^2) R(alpha)^T of a state.

    Invariant under the parametrization equivalences: quarter-turn with
    swapped axes, and sign flips of either semi-axis.
    """
    if not isinstance(state, EllipseState):
        state = EllipseState.from_array(state)
    x11, x12, x22 = _shape_entries(state.alpha, state.length, state.width)
    return ShapeMatrix(float(x11), float(x12), float(x22))


def sqrt_spd(x):
    """Principal square root of a symmetric PSD 2x2 matrix.

    Accepts a ShapeMatrix or a 2x2 array and returns the same kind.  The
    result S is the unique PSD matrix with S @ S equal to the input.

    Raises:
        IndefiniteMatrixError: if the input has a negative eigenvalue
            beyond tolerance.
    """
    if isinstance(x, ShapeMatrix):
        a, b, c = x.x11, x.x12, x.x22
        wrap = True
    else:
        arr = np.asarray(x, dtype=float)
        if arr.shape != (2, 2):
            raise InvalidInputError(f"expected a 2x2 matrix, got shape {arr.shape}")
        _require_finite(arr, "matrix")
        scale = max(1.0, float(np.abs(arr).max()))
        if abs(arr[0, 1] - arr[1, 0]) > SYM_RTOL * scale:
            raise InvalidInputError("matrix must be symmetric")
        a, b, c = float(arr[0, 0]), 0.5 * float(arr[0, 1] + arr[1, 0]), float(arr[1, 1])
        wrap = False

    lam_max, lam_min, _ = _eig2_sym(a, b, c)
    if lam_min < -PSD_TOL * max(1.0, abs(lam_max)):
        raise IndefiniteMatrixError(
            f"matrix has negative eigenvalue {lam_min}, cannot take square root"
        )
    det = max(a * c - b * b, 0.0)
    delta = math.sqrt(det)
    tau_sq = a + c + 2.0 * delta
    if tau_sq <= 0.0:
        s11 = s12 = s22 = 0.0
    else:
        tau = math.sqrt(tau_sq)
        s11 = (a + delta) / tau
        s12 = b / tau
        s22 = (c + delta) / tau
    if wrap:
        return ShapeMatrix(s11, s12, s22)
    return np.array([[s11, s12], [s12, s22]])


def transform(state: EllipseState) -> TransformedState:
    """Map an ellipse state to square-root space.

    Constant on parametrization equivalence classes: all states describing
    one ellipse map to the same point.
    """
    if not isinstance(state, EllipseState):
        state = EllipseState.from_array(state)
    s11, s12, s22 = _sqrt_entries_from_params(state.alpha, state.length, state.width)
    return TransformedState(state.m_x, state.m_y, float(s11), float(s12), float(s22))


def transform_batch(params) -> np.ndarray:
    """Vectorized transform of an (n, 5) array of parameter vectors."""
    arr = np.asarray(params, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 5:
        raise InvalidInputError(f"expected an (n, 5) array, got shape {arr.shape}")
    _require_finite(arr, "parameter batch")
    s11, s12, s22 = _sqrt_entries_from_params(arr[:, 2], arr[:, 3], arr[:, 4])
    return np.column_stack([arr[:, 0], arr[:, 1], s11, s12, s22])


def inverse_transform(y) -> EllipseState:
    """Recover the canonical ellipse state from a square-root-space point.

    The implied matrix [[s11, s12], [s12, s22]] is eigendecomposed; the
    larger eigenvalue becomes the major semi-axis and its eigenvector
    direction the orientation, reduced to [0, pi).  Circles report
    orientation 0.  Eigenvalues within tolerance below zero are clamped.

    Raises:
        IndefiniteMatrixError: if the implied matrix is indefinite beyond
            tolerance.
    """
    if isinstance(y, TransformedState):
        arr = y.as_array()
    else:
        arr = np.asarray(y, dtype=float).reshape(-1)
        if arr.shape != (5,):
            raise InvalidInputError(f"expected 5 components, got shape {arr.shape}")
        _require_finite(arr, "transformed state")
    m_x, m_y, s11, s12, s22 = arr
    sig_max, sig_min, theta = _eig2_sym(s11, s12, s22)
    if sig_min < -PSD_TOL * max(1.0, abs(sig_max)):
        raise IndefiniteMatrixError(
            f"implied matrix has negative eigenvalue {sig_min}"
        )
    return EllipseState(m_x, m_y, theta % math.pi, max(sig_max, 0.0), max(sig_min, 0.0))


def jacobian(state: EllipseState) -> np.ndarray:
    """Jacobian H of the transform at the given state.

    The center block is the identity; the lower-right 3x3 block holds the
    partials of (s11, s12, s22) with respect to (alpha, l, w).

    Raises:
        JacobianSingularError: for circles (|l| == |w| within tolerance,
            orientation unidentifiable) and for vanishing semi-axes.
            Callers may regularize or fall back to finite differences.
    """
    if not isinstance(state, EllipseState):
        state = EllipseState.from_array(state)
    length, width = state.length, state.width
    if min(abs(length), abs(width)) < AXIS_TOL:
        raise JacobianSingularError(
            f"semi-axis too close to zero: l={length}, w={width}"
        )
    if abs(abs(length) - abs(width)) < AXIS_TOL:
        raise JacobianSingularError(
            f"semi-axes coincide (circle): l={length}, w={width}; "
            "orientation carries no information here"
        )

    a = state.alpha
    c, s = math.cos(a), math.sin(a)
    c2, s2 = math.cos(2.0 * a), math.sin(2.0 * a)
    l2, w2 = length * length, width * width

    x11 = l2 * c * c + w2 * s * s
    x12 = (l2 - w2) * c * s
    x22 = l2 * s * s + w2 * c * c
    delta = abs(length * width)
    tau = math.sqrt(x11 + x22 + 2.0 * delta)

    # Rows: partials of (x11, x12, x22) w.r.t. (alpha, l, w).
    d_x11 = np.array([(w2 - l2) * s2, 2.0 * length * c * c, 2.0 * width * s * s])
    d_x12 = np.array([(l2 - w2) * c2, 2.0 * length * c * s, -2.0 * width * s * c])
    d_x22 = np.array([(l2 - w2) * s2, 2.0 * length * s * s, 2.0 * width * c * c])

    # delta = sqrt(det X); differentiate through the determinant.
    d_delta = (d_x11 * x22 + x11 * d_x22 - 2.0 * x12 * d_x12) / (2.0 * delta)
    d_tau = (d_x11 + d_x22 + 2.0 * d_delta) / (2.0 * tau)

    inv_tau = 1.0 / tau
    inv_tau2 = inv_tau * inv_tau
    d_s11 = -inv_tau2 * d_tau * (x11 + delta) + inv_tau * (d_x11 + d_delta)
    d_s12 = -inv_tau2 * d_tau * x12 + inv_tau * d_x12
    d_s22 = -inv_tau2 * d_tau * (x22 + delta) + inv_tau * (d_x22 + d_delta)

    H = np.zeros((5, 5))
    H[0, 0] = 1.0
    H[1, 1] = 1.0
    H[2, 2:] = d_s11
    H[3, 2:] = d_s12
    H[4, 2:] = d_s22
    return H


def equivalent_parametrizations(state: EllipseState) -> list[EllipseState]:
    """The four parameter vectors describing the same ellipse.

    Variant k rotates the orientation by k*pi/2 (reduced modulo 2*pi) and
    swaps the semi-axes when k is odd.  All four share one shape matrix.
    """
    if not isinstance(state, EllipseState):
        state = EllipseState.from_array(state)
    variants = []
    for k in range(4):
        alpha = (state.alpha + k * 0.5 * math.pi) % TWO_PI
        if k % 2:
            variants.append(
                EllipseState(state.m_x, state.m_y, alpha, state.width, state.length)
            )
        else:
            variants.append(
                EllipseState(state.m_x, state.m_y, alpha, state.length, state.width)
            )
    return variants


def permute_covariance(cov, k: int) -> np.ndarray:
    """Reorder a 5x5 covariance to follow the k-th equivalent parametrization.

    Odd k swaps the rows and columns of the two semi-axis entries; even k
    is the identity.  The result is a new array.
    """
    if k not in (0, 1, 2, 3):
        raise InvalidInputError(f"k must be one of 0..3, got {k!r}")
    arr = np.array(cov, dtype=float)
    if arr.shape != (5, 5):
        raise InvalidInputError(f"expected a 5x5 covariance, got shape {arr.shape}")
    if k % 2 == 0:
        return arr
    idx = np.array([0, 1, 2, 4, 3])
    return arr[np.ix_(idx, idx)]


def ellipse_from_shape(center, shape) -> EllipseState:
    """Canonical ellipse state with the given center and shape matrix."""
    cx, cy = np.asarray(center, dtype=float).reshape(2)
    if isinstance(shape, ShapeMatrix):
        a, b, c = shape.x11, shape.x12, shape.x22
    else:
        sm = ShapeMatrix.from_matrix(shape)
        a, b, c = sm.x11, sm.x12, sm.x22
    lam_max, lam_min, theta = _eig2_sym(a, b, c)
    return EllipseState(
        cx,
        cy,
        theta % math.pi,
        math.sqrt(max(lam_max, 0.0)),
        math.sqrt(max(lam_min, 0.0)),
    )
