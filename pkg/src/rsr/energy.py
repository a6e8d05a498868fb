"""Least-absolute-deviations energy on G(D, d) and its (sub)derivatives.

The energy of a subspace with basis V over a point set X (rows are points) is
the sum of distances ||x - V V^T x||.  Distances are evaluated through the
residual identity ||x||^2 - ||V^T x||^2, guarded against negative roundoff,
so no D x D projector is ever formed.

A point is treated as lying on the subspace (and skipped by the
subderivatives) when its residual is at most ``tol_active`` times its norm;
the default 1e-12 realizes the "residual > 0" convention numerically.
Zero-norm points are always skipped.  All reductions run in fixed (input)
order, so results are bitwise reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grassmann import (
    GrassmannError,
    PrincipalDecomposition,
    Subspace,
    _qr_orthonormal,
    principal_decomposition,
)

__all__ = [
    "EnergyEval",
    "energy",
    "euclidean_subderivative",
    "grass_gradient",
    "geodesic_subderivative",
    "special_geodesic",
    "special_geodesic_derivative",
]

DEFAULT_TOL_ACTIVE = 1e-12
# Angles within this of the largest are rotated together by the special
# geodesic, matching the equal-angle block of the landscape analysis.
EQUAL_ANGLE_TOL = 1e-9


@dataclass(frozen=True)
class EnergyEval:
    """Energy value plus the active/skipped split of the point set."""

    value: float
    active_count: int
    skipped_count: int


def _validate_points(X: np.ndarray, D: int) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.size == 0:
        return X.reshape(0, D)
    if X.ndim != 2 or X.shape[1] != D:
        raise ValueError(f"points must have shape (N, {D}), got {X.shape}")
    finite = np.isfinite(X).all(axis=1)
    if not finite.all():
        bad = int(np.flatnonzero(~finite)[0])
        raise ValueError(f"non-finite coordinates at point index {bad}")
    return X


def _residual_norms(V: np.ndarray, X: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Row norms, projections X @ V, and residual norms ||Q_V x||."""
    norms = np.linalg.norm(X, axis=1)
    proj = X @ V
    res_sq = norms**2 - np.einsum("ij,ij->i", proj, proj)
    res = np.sqrt(np.maximum(res_sq, 0.0))
    return norms, proj, res


def energy(L: Subspace, X: np.ndarray, tol_active: float = DEFAULT_TOL_ACTIVE) -> EnergyEval:
    """Sum of point-to-subspace distances over the active points."""
    X = _validate_points(X, L.ambient_dim)
    if X.shape[0] == 0:
        return EnergyEval(0.0, 0, 0)
    norms, _, res = _residual_norms(L.basis, X)
    active = res > tol_active * norms
    return EnergyEval(
        value=float(np.sum(res[active])),
        active_count=int(np.sum(active)),
        skipped_count=int(X.shape[0] - np.sum(active)),
    )


def euclidean_subderivative(
    V: Subspace, X: np.ndarray, tol_active: float = DEFAULT_TOL_ACTIVE
) -> np.ndarray:
    """Coordinate subderivative -sum_active x x^T V / ||Q_V x||  (D x d)."""
    if tol_active < 0:
        raise ValueError("tol_active must be >= 0")
    X = _validate_points(X, V.ambient_dim)
    if X.shape[0] == 0:
        return np.zeros_like(V.basis)
    norms, proj, res = _residual_norms(V.basis, X)
    active = res > tol_active * norms
    if not np.any(active):
        return np.zeros_like(V.basis)
    weights = 1.0 / res[active]
    return -(X[active].T @ (proj[active] * weights[:, None]))


def grass_gradient(
    V: Subspace, X: np.ndarray, tol_active: float = DEFAULT_TOL_ACTIVE
) -> np.ndarray:
    """Grassmannian gradient: the subderivative projected tangent at V."""
    der = euclidean_subderivative(V, X, tol_active)
    return der - V.basis @ (V.basis.T @ der)


def geodesic_subderivative(
    L0: Subspace, L1: Subspace, X: np.ndarray, tol_active: float = DEFAULT_TOL_ACTIVE
) -> float:
    """Derivative at t=0 of the energy along the geodesic from L0 to L1.

    The geodesic is the unit-interval parameterization (t=1 reaches L1), so
    the j-th principal direction contributes with weight theta_j:

        -sum_active sum_j theta_j (v_j . x)(u_j . x) / ||Q_L0 x||.
    """
    pd = principal_decomposition(L0, L1)
    if pd.interaction_dim == 0:
        raise GrassmannError("direction undefined: subspaces coincide")
    return _block_derivative(pd, pd.interaction_dim, pd.angles, L0, X, tol_active)


def _block_derivative(
    pd: PrincipalDecomposition,
    n_dirs: int,
    weights: np.ndarray,
    L0: Subspace,
    X: np.ndarray,
    tol_active: float,
) -> float:
    X = _validate_points(X, L0.ambient_dim)
    if X.shape[0] == 0:
        return 0.0
    norms, _, res = _residual_norms(L0.basis, X)
    active = res > tol_active * norms
    if not np.any(active):
        return 0.0
    Xa = X[active]
    vx = Xa @ pd.left_vectors[:, :n_dirs]
    ux = Xa @ pd.complementary[:, :n_dirs]
    per_point = (vx * ux) @ weights[:n_dirs]
    return float(-np.sum(per_point / res[active]))


def _top_block(pd: PrincipalDecomposition) -> int:
    """Size of the maximal leading block of (numerically) equal angles."""
    l = int(np.sum(pd.angles[0] - pd.angles <= EQUAL_ANGLE_TOL))
    return min(l, pd.interaction_dim)


def special_geodesic(L: Subspace, L_star: Subspace, t: float) -> Subspace:
    """Arclength geodesic that rotates only the furthest-angle block toward L_star.

    Every direction in the leading equal-angle block rotates by t; the
    remaining principal directions of L stay fixed.
    """
    pd = principal_decomposition(L, L_star)
    if pd.interaction_dim == 0:
        raise GrassmannError("special geodesic undefined: subspaces coincide")
    l = _top_block(pd)
    cols = pd.left_vectors.copy()
    cols[:, :l] = pd.left_vectors[:, :l] * np.cos(t) + pd.complementary[:, :l] * np.sin(t)
    return Subspace(_qr_orthonormal(cols))


def special_geodesic_derivative(
    L: Subspace, L_star: Subspace, X: np.ndarray, tol_active: float = DEFAULT_TOL_ACTIVE
) -> float:
    """Derivative at t=0 of the energy along :func:`special_geodesic`.

        -sum_active sum_{j<=l} (v_j . x)(u_j . x) / ||Q_L x||,

    where l is the leading equal-angle block size.  The landscape stability
    certificate asserts this is below minus the stability margin everywhere
    in the punctured ball around L_star.
    """
    pd = principal_decomposition(L, L_star)
    if pd.interaction_dim == 0:
        raise GrassmannError("special geodesic undefined: subspaces coincide")
    l = _top_block(pd)
    return _block_derivative(pd, l, np.ones(l), L, X, tol_active)
