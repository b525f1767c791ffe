"""Windowed (Gabor/FBI-type) phase-space transforms.

The basic transform with window g is

    (T_g u)(x0, xi) = (2 pi)^(-1/2) e^{i x0 xi}
                      * integral u(y) conj(g(y - x0)) e^{-i y xi} dy,

realized row-by-row with the lattice FFT: one row per window center x0 on
the position lattice.  With the e^{i x0 xi} phase convention the adjoint
has the clean translation structure used below, and T_h^* T_g = <h, g> id
holds on the lattice to round-off for box-compliant windows.
"""

import numpy as np

from .errors import ConfigError, GuardError
from .phasespace import SQRT_TWO_PI, edge_decay, norm

_EDGE_TOL = 1e-12


def default_window(grid):
    """Unit-norm Gaussian pi^(-1/4) e^{-x^2/2}."""
    return (np.pi ** -0.25) * np.exp(-grid.x ** 2 / 2.0) + 0j


class WindowedTransformPlan:
    """Precomputed machinery for repeated transforms with one window:
    the stack of rolled windows, the center phases, and the adjoint
    gather indices."""

    def __init__(self, grid, window=None):
        if grid.d != 1:
            raise GuardError("windowed transforms are built for d=1")
        self.grid = grid
        g = default_window(grid) if window is None else np.asarray(window,
                                                                   complex)
        if g.shape != (grid.n,):
            raise ConfigError("window shape does not match grid")
        if edge_decay(g, grid) > _EDGE_TOL:
            raise ConfigError(
                "window does not decay at the box edge (relative edge value "
                "%.1e > %.0e); transforms would wrap" % (edge_decay(g, grid),
                                                         _EDGE_TOL))
        self.window = g
        self.window_norm = norm(g, grid)
        n = grid.n
        j = np.arange(n)
        roll_idx = (j[None, :] - (j[:, None] - n // 2)) % n
        self.g_stack = g[roll_idx]                    # row j: g rolled to x_j
        self.phase = np.exp(1j * grid.x[:, None] * grid.xi[None, :])
        self.adj_idx = roll_idx                       # same index set

    def __repr__(self):
        return ("WindowedTransformPlan(n=%d, |g|=%.6f)"
                % (self.grid.n, self.window_norm))


def fbi(plan, u):
    """Windowed transform of a state; rows are window centers x0, columns
    frequencies xi."""
    u = np.asarray(u, dtype=complex)
    return plan.grid.fwd(u[None, :] * np.conj(plan.g_stack)) * plan.phase


def fbi_direct(plan, u):
    """Same transform by explicit quadrature against the DFT matrix --
    O(n^3), kept as an FFT-independent cross-check."""
    grid = plan.grid
    u = np.asarray(u, dtype=complex)
    E = np.exp(-1j * np.outer(grid.x, grid.xi))       # E[y, k]
    T = (u[None, :] * np.conj(plan.g_stack)) @ E * (grid.dx / SQRT_TWO_PI)
    return T * plan.phase


def fbi_adjoint(plan, T):
    """Adjoint transform: T_g^* F for a phase-space array F.

    Per row, undo the frequency transform and translate the window back
    to its center; summing rows with weight dx gives the adjoint exactly
    (the e^{i x0 xi} center phase cancels against the translation)."""
    grid = plan.grid
    V = grid.inv(np.asarray(T, dtype=complex))        # rows: window centers
    W = V * plan.window[None, :]
    rows = np.take_along_axis(W, plan.adj_idx, axis=1)
    return np.sum(rows, axis=0) * grid.dx


def qs_norm(plan, u, s):
    """Shubin-scale norm proxy: || T^*( <z>^s  T u ) ||_{L2}.

    The localization operator in the middle is the anti-Wick weight
    <z>^s; for s = 0 (and a unit-norm window) it is the identity.
    |s| <= 20 is enforced -- beyond that the weight overflows the box's
    dynamic range.
    """
    if abs(s) > 20:
        raise GuardError("weight exponent |s| <= 20 (got %g)" % (s,))
    grid = plan.grid
    X, XI = grid.mesh()[:2]
    v = (1.0 + X ** 2 + XI ** 2) ** (0.5 * s)
    A = fbi_adjoint(plan, v * fbi(plan, u))
    return norm(A, grid)


def localization_symbol(weight, grid):
    """Weyl symbol of the anti-Wick operator with the given phase-space
    weight and the default Gaussian window: the weight smoothed by the
    unit-mass Gaussian pi^{-d} e^{-|z|^2} (linear convolution, cropped).

    The full linear convolution is sliced explicitly at the kernel's mesh
    center n//2: scipy's "same" mode centers even-length kernels at
    (n-1)//2, which would shift the result by one cell.
    """
    import scipy.signal
    n = grid.n
    X, XI = grid.mesh()[:2]
    G = np.exp(-(X ** 2 + XI ** 2)) / np.pi
    b = scipy.signal.fftconvolve(np.asarray(weight, complex), G, mode="full")
    b = b[n // 2:n // 2 + n, n // 2:n // 2 + n]
    return b * grid.dx * grid.dxi


# ---------------------------------------------------------------------------
# kernel-side transforms
# ---------------------------------------------------------------------------

def _chi_slice(plan, kmat, chi, ja, jb):
    """One (x_a, y_b) slice of the chi-adjusted transform of an operator
    kernel: localize the kernel at the window pair, transform both legs,
    apply the two center phases, then the quadratic chi phase.  Returns an
    (n, n) array over (zeta1, zeta2)."""
    grid = plan.grid
    xa = grid.x[ja]
    yb = grid.x[jb]
    ga = plan.g_stack[ja]
    gb = plan.g_stack[jb]
    loc = kmat * np.conj(ga)[:, None] * np.conj(gb)[None, :]
    F = grid.fwd(grid.fwd(loc, axis=0), axis=1)
    Z1, Z2 = np.meshgrid(grid.xi, grid.xi, indexing="ij")
    F = F * np.exp(1j * (xa * Z1 + yb * Z2))
    # quadratic phase: pair (z, zeta) against the map's twisted graph;
    # sigma(w, v) = <J w, v> with w = chi (z2, -zeta2), v = (z1, zeta1)
    w = np.tensordot(chi.M, np.stack([np.full_like(Z2, yb), -Z2]), axes=(1, 0))
    sig = w[1] * xa - w[0] * Z1
    F = F * np.exp(-0.5j * ((xa * Z1 + yb * Z2) + sig))
    return F


class KernelTransform:
    """Materialized chi-adjusted kernel transform on a strided center set."""

    def __init__(self, values, a_idx, b_idx, grid, chi):
        self.values = values
        self.a_idx = a_idx
        self.b_idx = b_idx
        self.grid = grid
        self.chi = chi


def fbi_chi(plan, op, chi, stride=4):
    """Chi-adjusted transform of an operator kernel on a strided grid of
    window centers.  Memory guard: n <= 128 and the output tensor must
    stay under 2^24 complex entries; raise the stride to coarsen the
    center set (frequencies stay fully resolved in every slice)."""
    grid = plan.grid
    n = grid.n
    if n > 128:
        raise GuardError("kernel transforms need n <= 128 (dense 4-tensor); "
                         "got n=%d" % n)
    idx = np.arange(0, n, stride)
    total = len(idx) ** 2 * n * n
    if total > 2 ** 24:
        raise GuardError(
            "kernel transform would hold %d complex entries (> 2^24); "
            "increase stride" % total)
    out = np.empty((len(idx), len(idx), n, n), dtype=complex)
    for i, ja in enumerate(idx):
        for k, jb in enumerate(idx):
            out[i, k] = _chi_slice(plan, op.mat, chi, ja, jb)
    return KernelTransform(out, idx, idx, grid, chi)


def fbi_lagrangian(plan, u, frame):
    """Windowed transform adjusted to a graph Lagrangian plane
    {(x, A x)}: the plain transform times e^{-i A x0^2 / 2} per window
    center, which flattens the oscillation of states microlocalized on
    the plane.  Vertical planes carry no graph phase -> error."""
    if frame.vertical:
        raise ConfigError("plane is vertical: no graph form; rotate "
                          "coordinates before transforming")
    if frame.d != 1 or plan.grid.d != 1:
        raise ConfigError("graph-adjusted transforms implemented for d=1")
    A = float(frame.A[0, 0]) if frame.A is not None else 0.0
    T = fbi(plan, u)
    return T * np.exp(-0.5j * A * plan.grid.x ** 2)[:, None]
