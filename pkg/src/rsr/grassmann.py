"""Geometry of the Grassmannian G(D, d).

Subspaces are represented by D x d matrices with orthonormal columns.  All
angle computations go through principal angles: for bases B0, B1 the singular
values of B0.T @ B1 are the cosines of the principal angles.  Small angles are
refined through the sines (singular values of the residual (I - B0 B0.T) B1),
which keeps near-identical subspaces resolvable down to machine precision
instead of the ~1e-8 floor of arccos near 1.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = [
    "GrassmannError",
    "Subspace",
    "PrincipalDecomposition",
    "orthonormalize",
    "principal_angles",
    "principal_decomposition",
    "theta1",
    "geodesic",
    "geodesic_step",
    "random_subspace",
    "subspace_at_angle",
    "save_subspace",
    "load_subspace",
]

# Columns with angle below this are treated as shared between the subspaces.
ZERO_ANGLE_TOL = 1e-10
# Orthonormality guard used by the Subspace constructor.
ORTHO_TOL = 1e-10


class GrassmannError(ValueError):
    """Raised for invalid subspace inputs (rank, shape, angle range)."""


@dataclass(frozen=True)
class Subspace:
    """A point of G(D, d) stored as a D x d orthonormal basis.

    The basis array is made read-only at construction; operations return new
    instances instead of mutating.
    """

    basis: np.ndarray

    def __post_init__(self) -> None:
        basis = np.ascontiguousarray(np.asarray(self.basis, dtype=float))
        if basis.ndim != 2:
            raise GrassmannError(f"basis must be 2-D, got shape {basis.shape}")
        D, d = basis.shape
        if not 1 <= d <= D:
            raise GrassmannError(f"need 1 <= d <= D, got D={D}, d={d}")
        gram = basis.T @ basis
        err = np.max(np.abs(gram - np.eye(d)))
        if not np.isfinite(err) or err > ORTHO_TOL:
            raise GrassmannError(
                f"basis columns are not orthonormal (max |B^T B - I| = {err:.3e})"
            )
        basis.setflags(write=False)
        object.__setattr__(self, "basis", basis)

    @property
    def ambient_dim(self) -> int:
        return self.basis.shape[0]

    @property
    def dim(self) -> int:
        return self.basis.shape[1]

    def project(self, points: np.ndarray) -> np.ndarray:
        """Orthogonal projection of points (rows) onto the subspace."""
        return (points @ self.basis) @ self.basis.T


@dataclass(frozen=True)
class PrincipalDecomposition:
    """Principal angles and vectors between two subspaces of equal dimension.

    angles are non-increasing, in [0, pi/2].  left_vectors / right_vectors
    hold the principal vectors of the first / second subspace column-wise,
    paired with angles.  complementary holds, for each of the
    ``interaction_dim`` nonzero angles, the unit vector u_j orthogonal to the
    j-th left vector inside span(v_j, y_j) with positive component along y_j.
    """

    angles: np.ndarray
    left_vectors: np.ndarray
    right_vectors: np.ndarray
    complementary: np.ndarray
    interaction_dim: int


def _qr_orthonormal(m: np.ndarray) -> np.ndarray:
    """Reduced QR with the R-diagonal forced positive.

    The sign convention makes the map idempotent: an already orthonormal
    input is returned unchanged up to roundoff.
    """
    q, r = np.linalg.qr(m)
    signs = np.sign(np.diag(r))
    signs[signs == 0] = 1.0
    return q * signs


def orthonormalize(m: np.ndarray) -> Subspace:
    """Orthonormal basis for the column space of a full-column-rank matrix."""
    m = np.asarray(m, dtype=float)
    if m.ndim != 2:
        raise GrassmannError(f"expected a 2-D matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise GrassmannError("matrix has non-finite entries")
    D, d = m.shape
    if not 1 <= d <= D:
        raise GrassmannError(f"need 1 <= d <= D, got D={D}, d={d}")
    s = np.linalg.svd(m, compute_uv=False)
    rank_tol = s[0] * max(D, d) * np.finfo(float).eps
    rank = int(np.sum(s > rank_tol))
    if rank < d:
        raise GrassmannError(f"rank deficient: numerical rank {rank} < {d}")
    return Subspace(_qr_orthonormal(m))


def _check_same_shape(L0: Subspace, L1: Subspace) -> None:
    if L0.ambient_dim != L1.ambient_dim or L0.dim != L1.dim:
        raise GrassmannError(
            f"subspace shape mismatch: ({L0.ambient_dim},{L0.dim}) vs "
            f"({L1.ambient_dim},{L1.dim})"
        )


def principal_angles(L0: Subspace, L1: Subspace) -> np.ndarray:
    """Principal angles between L0 and L1, non-increasing, in [0, pi/2]."""
    _check_same_shape(L0, L1)
    m = L0.basis.T @ L1.basis
    cosines = np.linalg.svd(m, compute_uv=False)[::-1]  # ascending: theta desc
    angles = np.arccos(np.clip(cosines, -1.0, 1.0))
    # Sine-based refinement for small angles; svd of the residual is ordered
    # descending which matches the non-increasing angle order directly.
    small = cosines > np.sqrt(0.5)
    if np.any(small):
        resid = L1.basis - L0.basis @ m
        sines = np.linalg.svd(resid, compute_uv=False)
        angles[small] = np.arcsin(np.clip(sines[small], 0.0, 1.0))
    return angles


def theta1(L0: Subspace, L1: Subspace) -> float:
    """Largest principal angle; the metric used for balls B(L, gamma)."""
    return float(principal_angles(L0, L1)[0])


def principal_decomposition(L0: Subspace, L1: Subspace) -> PrincipalDecomposition:
    """Full principal-angle decomposition of the pair (L0, L1).

    Ties in the angles make the principal vectors non-unique; any
    SVD-consistent choice is returned.
    """
    _check_same_shape(L0, L1)
    d = L0.dim
    m = L0.basis.T @ L1.basis
    u_svd, s, vt = np.linalg.svd(m)
    # Reverse so index 0 carries the largest angle (smallest cosine).
    order = np.arange(d - 1, -1, -1)
    cosines = s[order]
    left = L0.basis @ u_svd[:, order]
    right = L1.basis @ vt.T[:, order]
    angles = np.arccos(np.clip(cosines, -1.0, 1.0))
    small = cosines > np.sqrt(0.5)
    if np.any(small):
        resid = L1.basis - L0.basis @ m
        sines = np.linalg.svd(resid, compute_uv=False)
        angles[small] = np.arcsin(np.clip(sines[small], 0.0, 1.0))
    k = int(np.sum(angles > ZERO_ANGLE_TOL))
    comp = np.zeros((L0.ambient_dim, k))
    for j in range(k):
        v, y = left[:, j], right[:, j]
        u = y - (v @ y) * v
        u -= (v @ u) * v  # second pass tightens orthogonality
        nrm = np.linalg.norm(u)
        if nrm == 0.0:  # unreachable for angle > ZERO_ANGLE_TOL
            raise GrassmannError("degenerate complementary direction")
        comp[:, j] = u / nrm
    return PrincipalDecomposition(
        angles=angles,
        left_vectors=left,
        right_vectors=right,
        complementary=comp,
        interaction_dim=k,
    )


def geodesic(L0: Subspace, L1: Subspace, t: float) -> Subspace:
    """Point at parameter t on the unique geodesic from L0 (t=0) to L1 (t=1).

    The j-th principal direction rotates by t * theta_j, so the principal
    angles of the result with L0 are t * theta_j.  Requires theta_1 < pi/2
    for uniqueness.
    """
    pd = principal_decomposition(L0, L1)
    if pd.interaction_dim > 0 and pd.angles[0] >= np.pi / 2 - 1e-8:
        raise GrassmannError("geodesic not unique: largest principal angle >= pi/2")
    cols = pd.left_vectors.copy()
    k = pd.interaction_dim
    if k > 0:
        th = pd.angles[:k] * t
        cols[:, :k] = pd.left_vectors[:, :k] * np.cos(th) + pd.complementary * np.sin(th)
    return Subspace(_qr_orthonormal(cols))


def geodesic_step(V: Subspace, G: np.ndarray, t: float) -> Subspace:
    """Move from V along the geodesic with initial velocity -G for time t.

    G is projected onto the tangent space at V before use; the update is
    V W cos(S t) W^T + U sin(S t) W^T for the SVD -G = U S W^T, followed by
    re-orthonormalization against drift.
    """
    G = np.asarray(G, dtype=float)
    if G.shape != V.basis.shape:
        raise GrassmannError(f"direction shape {G.shape} != basis shape {V.basis.shape}")
    if not np.all(np.isfinite(G)):
        raise GrassmannError("direction has non-finite entries")
    Gt = G - V.basis @ (V.basis.T @ G)
    if t == 0.0 or not np.any(Gt):
        return V
    u, s, wt = np.linalg.svd(-Gt, full_matrices=False)
    w = wt.T
    cos_part = (V.basis @ w) * np.cos(s * t)
    sin_part = u * np.sin(s * t)
    return Subspace(_qr_orthonormal((cos_part + sin_part) @ wt))


def random_subspace(D: int, d: int, rng: np.random.Generator) -> Subspace:
    """Uniform (rotation-invariant) random subspace from a Gaussian matrix."""
    if not 1 <= d <= D:
        raise GrassmannError(f"need 1 <= d <= D, got D={D}, d={d}")
    return orthonormalize(rng.standard_normal((D, d)))


def subspace_at_angle(
    L_star: Subspace, gamma: float, rng: np.random.Generator, max_tries: int = 8
) -> Subspace:
    """Random subspace whose largest principal angle to L_star is exactly gamma.

    The first basis direction is rotated by gamma into a random direction of
    the orthogonal complement; as many remaining directions as the complement
    can host rotate by independent Uniform(0, gamma) angles into fresh
    complement directions.  The resulting max angle is verified and the draw
    retried on (unlikely) numerical failure.
    """
    if not 0.0 < gamma < np.pi / 2:
        raise GrassmannError(f"gamma must lie in (0, pi/2), got {gamma}")
    D, d = L_star.ambient_dim, L_star.dim
    if D < d + 1:
        raise GrassmannError("ambient space has no room: need D >= d + 1")
    n_rot = min(d, D - d)
    for _ in range(max_tries):
        # Orthonormal directions of the complement of L_star.
        raw = rng.standard_normal((D, n_rot))
        raw -= L_star.basis @ (L_star.basis.T @ raw)
        comp = _qr_orthonormal(raw)
        ang = np.empty(n_rot)
        ang[0] = gamma
        if n_rot > 1:
            ang[1:] = rng.uniform(0.0, gamma, size=n_rot - 1)
        cols = L_star.basis.copy()
        cols[:, :n_rot] = cols[:, :n_rot] * np.cos(ang) + comp * np.sin(ang)
        cand = Subspace(_qr_orthonormal(cols))
        if abs(theta1(cand, L_star) - gamma) <= 1e-8:
            return cand
    raise GrassmannError(f"could not realize max angle {gamma} after {max_tries} tries")


def save_subspace(L: Subspace, path: str | Path) -> None:
    """Write the basis as CSV, one row per ambient coordinate."""
    path = Path(path)
    lines = [f"# subspace D={L.ambient_dim} d={L.dim}"]
    for row in L.basis:
        lines.append(",".join(f"{v:.17g}" for v in row))
    path.write_text("\n".join(lines) + "\n")


def load_subspace(path: str | Path) -> Subspace:
    """Read a basis written by :func:`save_subspace`."""
    lines = Path(path).read_text().strip().splitlines()
    header = lines[0].strip()
    if not header.startswith("# subspace"):
        raise GrassmannError(f"not a subspace file: header {header!r}")
    basis = np.array([[float(v) for v in line.split(",")] for line in lines[1:]])
    return Subspace(basis)
