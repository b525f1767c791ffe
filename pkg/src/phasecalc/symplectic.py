"""Linear symplectic geometry: quadratic Hamiltonians, their flows,
normal forms, and Lagrangian planes.

Coordinates on phase space are z = (x, xi) in R^{2d}, with the standard
form sigma(z, w) = <J z, w>, J = [[0, I], [-I, 0]].  A quadratic
Hamiltonian q(z) = <z, Q z> with Q symmetric generates the linear flow
chi_t = exp(2 t F), F = J Q.
"""

import numpy as np
import scipy.linalg

from .errors import ConfigError, GuardError

_SYMPLECTIC_TOL = 1e-8


def jmat(d):
    """Standard symplectic matrix J of size 2d x 2d."""
    J = np.zeros((2 * d, 2 * d))
    J[:d, d:] = np.eye(d)
    J[d:, :d] = -np.eye(d)
    return J


def symplectic_form(w, v):
    """sigma(w, v) = <J w, v>: with w = (x, xi), v = (x', xi') this is
    <x', xi> - <x, xi'>.  Vectorized over leading axes."""
    w = np.asarray(w, dtype=float)
    v = np.asarray(v, dtype=float)
    d = w.shape[-1] // 2
    return (np.sum(w[..., d:] * v[..., :d], axis=-1)
            - np.sum(w[..., :d] * v[..., d:], axis=-1))


class QuadraticHamiltonian:
    """q(z) = <z, Q z> with Q real symmetric, plus its fundamental matrix
    F = J Q."""

    def __init__(self, Q):
        Q = np.asarray(Q, dtype=float)
        if Q.ndim != 2 or Q.shape[0] != Q.shape[1] or Q.shape[0] % 2:
            raise ConfigError("Q must be a 2d x 2d matrix")
        if not np.allclose(Q, Q.T, atol=1e-12):
            raise ConfigError("Q must be symmetric")
        self.Q = 0.5 * (Q + Q.T)
        self.d = Q.shape[0] // 2
        self.F = jmat(self.d) @ self.Q

    def __call__(self, x, xi):
        """Evaluate q on points or meshes (d=1 convenience)."""
        if self.d != 1:
            raise ConfigError("pointwise evaluation implemented for d=1")
        a, b, c = self.Q[0, 0], self.Q[0, 1], self.Q[1, 1]
        return a * x * x + 2.0 * b * x * xi + c * xi * xi

    def __repr__(self):
        return "QuadraticHamiltonian(Q=%r)" % (self.Q.tolist(),)


def harmonic(d=1):
    """q = |x|^2 + |xi|^2; flow is rotation by angle 2t in each plane."""
    return QuadraticHamiltonian(np.eye(2 * d))


def free(d=1):
    """q = |xi|^2; flow is the shear x -> x + 2 t xi."""
    Q = np.zeros((2 * d, 2 * d))
    Q[d:, d:] = np.eye(d)
    return QuadraticHamiltonian(Q)


def anisotropic(weights):
    """q = sum_j w_j (x_j^2 + xi_j^2) for positive weights."""
    w = np.asarray(weights, dtype=float)
    if w.ndim != 1 or np.any(w <= 0):
        raise ConfigError("anisotropic weights must be positive")
    return QuadraticHamiltonian(np.diag(np.concatenate([w, w])))


class SymplecticMap:
    """A 2d x 2d matrix certified to satisfy M^T J M = J.

    `defect` records the max-norm certification residual; construction
    fails if it exceeds 1e-8 unless check=False is passed (used only by
    internal call sites that certify differently).
    """

    def __init__(self, M, check=True):
        M = np.asarray(M, dtype=float)
        if M.ndim != 2 or M.shape[0] != M.shape[1] or M.shape[0] % 2:
            raise ConfigError("symplectic matrix must be 2d x 2d")
        self.M = M
        self.d = M.shape[0] // 2
        J = jmat(self.d)
        self.defect = float(np.abs(M.T @ J @ M - J).max())
        if check and not (self.defect <= _SYMPLECTIC_TOL):
            raise GuardError(
                "matrix is not symplectic: |M^T J M - J| = %.3e" % self.defect)

    def __call__(self, z):
        """Apply to points: z may be shape (2d,) or (..., 2d)."""
        z = np.asarray(z, dtype=float)
        return z @ self.M.T

    def inv(self):
        # symplectic inverse is exact: M^{-1} = -J M^T J
        J = jmat(self.d)
        return SymplecticMap(-J @ self.M.T @ J)

    def __matmul__(self, other):
        return SymplecticMap(self.M @ other.M)

    def blocks(self):
        d = self.d
        M = self.M
        return M[:d, :d], M[:d, d:], M[d:, :d], M[d:, d:]

    def __repr__(self):
        return "SymplecticMap(%r, defect=%.2e)" % (self.M.tolist(), self.defect)


def flow(H, t):
    """Hamiltonian flow chi_t = exp(2 t F) of a quadratic Hamiltonian.

    Diagonalizes F when the eigenvector basis is well conditioned and
    reconstructs the exponential from eigenvalues; falls back to
    scaling-and-squaring otherwise (covers nilpotent F, e.g. free motion,
    exactly).
    """
    F = H.F
    A = 2.0 * float(t) * F
    M = None
    try:
        lam, V = np.linalg.eig(F)
        recon = (V * lam) @ np.linalg.inv(V)
        if np.abs(recon - F).max() <= 1e-8 * max(1.0, np.abs(F).max()):
            M = np.real((V * np.exp(2.0 * float(t) * lam)) @ np.linalg.inv(V))
    except np.linalg.LinAlgError:
        pass
    if M is None:
        M = scipy.linalg.expm(A)
    return SymplecticMap(M)


def williamson(Q):
    """Symplectic diagonalization of a positive definite quadratic form.

    Returns (chi, lam) with chi symplectic and
    q(chi(z)) = sum_j lam_j (x_j^2 + xi_j^2), lam sorted decreasing.

    Construction: factor Q = R^T R (Cholesky), bring the antisymmetric
    S = R J R^T to real Schur form U diag(mu_j J_2) U^T, reorder the
    2x2 blocks so every mu_j > 0, interleave back to (x-block, xi-block)
    ordering with a permutation P, and set chi = R^{-1} U P D^{1/2} with
    D = diag(mu, mu).  Then chi^T Q chi = diag(mu, mu) and
    chi^T J chi = J identically, so lam_j = mu_j.
    """
    Q = np.asarray(Q, dtype=float)
    d = Q.shape[0] // 2
    try:
        R = np.linalg.cholesky(Q).T        # Q = R^T R
    except np.linalg.LinAlgError:
        raise GuardError("Williamson normal form needs Q positive definite")
    J = jmat(d)
    S = R @ J @ R.T                        # antisymmetric
    T, U = scipy.linalg.schur(S, output="real")
    # T is block diagonal with blocks [[0, mu], [-mu, 0]]; flip blocks with
    # mu < 0 by swapping their two Schur vectors
    mu = np.empty(d)
    for j in range(d):
        b = 2 * j
        m = T[b, b + 1]
        if m < 0:
            U[:, [b, b + 1]] = U[:, [b + 1, b]]
            m = -m
        mu[j] = m
    # permutation from interleaved (x1, xi1, x2, xi2, ...) to (x*, xi*)
    P = np.zeros((2 * d, 2 * d))
    for j in range(d):
        P[2 * j, j] = 1.0
        P[2 * j + 1, d + j] = 1.0
    Dh = np.sqrt(np.concatenate([mu, mu]))
    chi = np.linalg.solve(R, U @ P) * Dh[None, :]
    order = np.argsort(-mu)
    perm = np.concatenate([order, d + order])
    chi = chi[:, perm]
    return SymplecticMap(chi), mu[order]


# ---------------------------------------------------------------------------
# Lagrangian planes
# ---------------------------------------------------------------------------

class LagrangianFrame:
    """A Lagrangian plane in R^{2d}, stored as an orthonormal 2d x d basis.

    Graph planes {(x, A x)} carry their symmetric slope matrix A; the
    vertical plane {(0, xi)} is flagged instead.
    """

    def __init__(self, basis, A=None, vertical=False):
        basis = np.asarray(basis, dtype=float)
        self.basis, _ = np.linalg.qr(basis)
        self.d = basis.shape[1]
        self.A = None if A is None else np.asarray(A, dtype=float)
        self.vertical = bool(vertical)
        # Lagrangian check: sigma vanishes on the span
        J = jmat(self.d)
        g = self.basis.T @ J @ self.basis
        if np.abs(g).max() > 1e-10:
            raise ConfigError("basis does not span a Lagrangian plane")

    @classmethod
    def from_graph(cls, A):
        """Plane {(x, A x)} for symmetric A (d=1: scalar slope)."""
        A = np.atleast_2d(np.asarray(A, dtype=float))
        d = A.shape[0]
        if not np.allclose(A, A.T, atol=1e-12):
            raise ConfigError("graph slope matrix must be symmetric")
        B = np.vstack([np.eye(d), A])
        return cls(B, A=0.5 * (A + A.T))

    @classmethod
    def horizontal(cls, d=1):
        return cls.from_graph(np.zeros((d, d)))

    @classmethod
    def vertical_plane(cls, d=1):
        B = np.vstack([np.zeros((d, d)), np.eye(d)])
        return cls(B, vertical=True)

    def __repr__(self):
        if self.vertical:
            return "LagrangianFrame(vertical, d=%d)" % self.d
        if self.A is not None:
            return "LagrangianFrame(graph A=%r)" % (self.A.tolist(),)
        return "LagrangianFrame(basis=%r)" % (self.basis.tolist(),)


def lagrangian_map(chi, frame):
    """Image of a Lagrangian plane under a symplectic map, re-expressed in
    graph form when possible (vertical otherwise)."""
    B = chi.M @ frame.basis
    Bo, _ = np.linalg.qr(B)
    d = frame.d
    X = Bo[:d, :]
    if np.abs(np.linalg.det(X)) > 1e-8:
        A = Bo[d:, :] @ np.linalg.inv(X)
        return LagrangianFrame.from_graph(0.5 * (A + A.T))
    return LagrangianFrame(Bo, vertical=True)


def conormal_plane(frame):
    """The companion plane J . Lambda used to measure position *along* a
    Lagrangian plane (it is again Lagrangian, and transversal unless the
    plane is J-invariant)."""
    d = frame.d
    return LagrangianFrame(jmat(d) @ frame.basis,
                           vertical=not frame.vertical and _is_horizontal(frame))


def _is_horizontal(frame):
    return frame.A is not None and np.abs(frame.A).max() < 1e-12


def dist_to_plane(z, plane):
    """Euclidean distance from points to a linear plane.

    `z` has shape (..., k); `plane` is a LagrangianFrame or any (k, r)
    basis matrix (orthonormalized internally).  Vectorized over leading
    axes -- this is the workhorse behind all the decay-fit binning.
    """
    if isinstance(plane, LagrangianFrame):
        B = plane.basis
    else:
        B = np.asarray(plane, dtype=float)
        B, _ = np.linalg.qr(B)
    z = np.asarray(z, dtype=float)
    coef = z @ B                    # (..., r) coordinates in the plane
    proj = coef @ B.T
    return np.sqrt(np.maximum(np.sum((z - proj) ** 2, axis=-1), 0.0))


def twisted_graph_basis(chi):
    """Orthonormal basis of the twisted graph of a symplectic map in
    (z1, z2, zeta1, zeta2) coordinates of the doubled phase space,
    with the sign convention that the second frequency enters negated.

    For chi = [[a, b], [c, e]] (d=1) the plane is spanned by
    (a, 1, c, 0) and (b, 0, e, -1): the set of points
    (chi w, w, zeta(chi w), -zeta(w)).  The identity map gives the
    diagonal {z1 = z2, zeta1 = -zeta2-negated} = {x=y, xi=eta}.
    """
    if chi.d != 1:
        raise ConfigError("twisted graphs implemented for d=1")
    a, b = chi.M[0]
    c, e = chi.M[1]
    B = np.array([[a, b],
                  [1.0, 0.0],
                  [c, e],
                  [0.0, -1.0]])
    Bo, _ = np.linalg.qr(B)
    return Bo
