"""Gaussian Wasserstein distances between ellipses and the aggregate error.

``gw_exact`` evaluates the closed form

    GW(n, Z; m, X) = ||n - m||^2 + Tr{Z + X - 2 (Z^(1/2) X Z^(1/2))^(1/2)}

``gw_approx`` replaces the trace term by the squared Euclidean distance in
square-root space, which coincides with the exact value whenever the two
shape matrices commute.  Both are squared-length quantities (meters^2).
"""

from __future__ import annotations

import math

import numpy as np

from .core import EllipseState, _shape_entries, transform
from .errors import InvalidInputError


def _as_state(state) -> EllipseState:
    if isinstance(state, EllipseState):
        return state
    return EllipseState.from_array(state)


def _gw_exact_entries(ax, ay, za, zb, zc, bx, by, xa, xb, xc) -> float:
    # Every term is evaluated symmetrically in the two arguments, so
    # swapping them reproduces the identical float.  The cross trace uses
    # Tr[(Z^(1/2) X Z^(1/2))^(1/2)] = sqrt(Tr(ZX) + 2 sqrt(det Z det X)),
    # the trace of the closed-form 2x2 PSD square root.
    center_sq = (ax - bx) ** 2 + (ay - by) ** 2
    if (za, zb, zc) == (xa, xb, xc):
        return center_sq
    tr_zx = za * xa + 2.0 * (zb * xb) + zc * xc
    det_z = max(za * zc - zb * zb, 0.0)
    det_x = max(xa * xc - xb * xb, 0.0)
    inner = tr_zx + 2.0 * (math.sqrt(det_z) * math.sqrt(det_x))
    cross = math.sqrt(max(inner, 0.0))
    trace_term = (za + zc) + (xa + xc) - 2.0 * cross
    return center_sq + max(trace_term, 0.0)


def gw_exact(a, b) -> float:
    """Exact squared Gaussian Wasserstein distance between two ellipses.

    Symmetric in its arguments and zero exactly when the two states share
    center and shape matrix; small negative floating-point residues are
    clamped to zero.
    """
    sa, sb = _as_state(a), _as_state(b)
    za, zb_, zc = _shape_entries(sa.alpha, sa.length, sa.width)
    xa, xb_, xc = _shape_entries(sb.alpha, sb.length, sb.width)
    return _gw_exact_entries(
        sa.m_x, sa.m_y, float(za), float(zb_), float(zc),
        sb.m_x, sb.m_y, float(xa), float(xb_), float(xc),
    )


def gw_approx(a, b) -> float:
    """Squared Euclidean distance between the transformed states.

    The off-diagonal square-root entry appears once, matching the
    transform's coordinates; see ``gw_approx_frobenius`` for the variant
    that counts it twice.  Equals ``gw_exact`` for commuting shape
    matrices.
    """
    ya = transform(_as_state(a)).as_array()
    yb = transform(_as_state(b)).as_array()
    diff = ya - yb
    return float(diff @ diff)


def gw_approx_frobenius(a, b) -> float:
    """Center term plus the squared Frobenius distance of the square roots.

    Counts the off-diagonal entry twice; always >= ``gw_approx``.
    """
    ya = transform(_as_state(a)).as_array()
    yb = transform(_as_state(b)).as_array()
    diff = ya - yb
    return float(diff @ diff + diff[3] ** 2)


def aggregate_rmgw(per_run_gw) -> float:
    """Root of the mean squared-GW value over a nonempty collection."""
    values = np.asarray(list(per_run_gw), dtype=float)
    if values.size == 0:
        raise InvalidInputError("cannot aggregate an empty collection")
    if not np.all(np.isfinite(values)):
        raise InvalidInputError("GW values must be finite")
    return float(np.sqrt(np.mean(np.clip(values, 0.0, None))))
