"""Symmetric (Weyl) quantization on the phase lattice, and its inverse.

A symbol a(x, xi) sampled on the phase lattice is mapped to a dense
kernel matrix acting on states by

    (Op(a) u)(x_j) = sum_m K[j, m] u(x_m) dx,
    K[j, m] = (2 pi)^(-1/2) * FT_xi^{-1} a((x_j + x_m)/2, .)[x_j - x_m].

Midpoints (x_j + x_m)/2 fall on the lattice for j+m even and halfway
between nodes for j+m odd, so the kernel is assembled from two symbol
layers: the given samples and samples on the dx/2-staggered lattice
(supplied analytically or by spectral interpolation).  The inverse map
reads the kernel back along diagonals j - m = const *without* using
wrapped-around entries: for a symbol whose kernel decays inside the box,
the |x - y| > L entries of the matrix are pure periodization artifacts,
so they are excluded both when inverting (`dequantize`) and when
composing (`weyl_product` masks them in each factor before the matrix
product).  With that exclusion the calculus is exact to round-off for
box-compliant symbols; without it, wrap-around paths inject O(1) noise.
"""

import numpy as np
import scipy.linalg

from .errors import ConfigError, GuardError, InsufficientRangeError
from .phasespace import SQRT_TWO_PI

__all__ = [
    "OperatorMatrix", "quantize", "dequantize", "weyl_product", "wigner",
    "bulk_localizer", "shubin_fit", "ShubinWitness",
]


class OperatorMatrix:
    """Dense kernel matrix tied to a grid, acting with quadrature weight:
    apply(u) = mat @ u * dx^d.  The identity operator has matrix I/dx^d;
    a unitary matrix in the plain linear-algebra sense corresponds to
    mat = U/dx^d here."""

    def __init__(self, grid, mat):
        if grid.d != 1:
            raise GuardError("dense operator matrices are built for d=1 "
                             "(n^d x n^d storage)")
        mat = np.asarray(mat, dtype=complex)
        N = grid.n ** grid.d
        if mat.shape != (N, N):
            raise ConfigError("kernel matrix shape %r does not match grid"
                              % (mat.shape,))
        self.grid = grid
        self.mat = mat

    @classmethod
    def identity(cls, grid):
        return cls(grid, np.eye(grid.n) / grid.dx)

    @property
    def cell(self):
        return self.grid.dx ** self.grid.d

    def apply(self, u):
        return self.mat @ np.asarray(u, dtype=complex) * self.cell

    def compose(self, other):
        if other.grid != self.grid:
            raise ConfigError("operator grids differ")
        return OperatorMatrix(self.grid, self.mat @ other.mat * self.cell)

    def adjoint(self):
        return OperatorMatrix(self.grid, self.mat.conj().T)

    def op_norm(self):
        """Operator norm on L2 of the box (largest singular value with
        quadrature weighting)."""
        return float(scipy.linalg.svdvals(self.mat)[0] * self.cell)

    def __add__(self, other):
        return OperatorMatrix(self.grid, self.mat + other.mat)

    def __sub__(self, other):
        return OperatorMatrix(self.grid, self.mat - other.mat)

    def __mul__(self, c):
        return OperatorMatrix(self.grid, self.mat * c)

    __rmul__ = __mul__

    def __repr__(self):
        return "OperatorMatrix(n=%d)" % self.mat.shape[0]


# ---------------------------------------------------------------------------
# index plumbing, cached per grid size
# ---------------------------------------------------------------------------

_plans = {}


def _plan(n):
    """Gather/scatter index sets for the diagonal <-> midpoint reshuffles."""
    plan = _plans.get(n)
    if plan is None:
        J, M = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
        q_row = (J + M) // 2                 # midpoint index (doubled lattice)
        q_parity = (J + M) % 2 == 1
        q_col = (J - M + n // 2) % n         # offset diagonal, wrapped
        # inverse map: for midpoint cell i and offset column l, which kernel
        # entry holds that sample -- only unwrapped entries qualify
        IV, LL = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
        S = LL - n // 2
        R = 2 * IV + (S % 2)
        JJ = (R + S) // 2
        MM = (R - S) // 2
        sel = (JJ >= 0) & (JJ < n) & (MM >= 0) & (MM < n)
        odd_cols = (np.abs(np.arange(n) - n // 2) % 2) == 1
        corner = (np.abs(J - M) <= n // 2).astype(float)
        plan = (q_row, q_parity, q_col, JJ.clip(0, n - 1), MM.clip(0, n - 1),
                sel, odd_cols, corner)
        _plans[n] = plan
    return plan


def quantize(a, grid, a_half=None):
    """Weyl quantization of a symbol given by its lattice samples.

    a_half, if given, must hold samples on the position-staggered lattice
    (x + dx/2, xi) -- supply it from the analytic form whenever one is
    available.  It is mandatory in effect for symbols that do *not* decay
    at the box edge (quadratic Hamiltonians): the spectral-interpolation
    fallback assumes edge decay.

    For real symbols the result is self-adjoint to round-off, and
    Op(1) = identity exactly.
    """
    if grid.d != 1:
        raise GuardError("quantize builds dense d=1 matrices")
    n = grid.n
    a = np.asarray(a, dtype=complex)
    if a.shape != (n, n):
        raise ConfigError("symbol shape %r does not match grid" % (a.shape,))
    if a_half is None:
        a_half = grid.shift_half(a, +1, axis=0)
    else:
        a_half = np.asarray(a_half, dtype=complex)
    kk_even = grid.inv(a) / SQRT_TWO_PI          # rows: midpoints on lattice
    kk_odd = grid.inv(a_half) / SQRT_TWO_PI      # rows: staggered midpoints
    q_row, q_parity, q_col = _plan(n)[:3]
    K = np.where(q_parity, kk_odd[q_row, q_col], kk_even[q_row, q_col])
    return OperatorMatrix(grid, K)


def dequantize(op):
    """Symbol of a kernel matrix; inverse of :func:`quantize` for operators
    whose kernel decays inside the box.

    Kernel entries with |x - y| > L are never read: they are wrap-around
    aliases of bulk entries, not independent data, and for a compliant
    operator the true kernel there is below round-off anyway.  Staggered
    midpoint rows are moved back to the primal lattice spectrally.
    """
    grid = op.grid
    n = grid.n
    K = op.mat
    _, _, _, JJ, MM, sel, odd_cols, _ = _plan(n)
    kmid = np.where(sel, K[JJ, MM], 0.0)
    kmid = np.array(kmid, dtype=complex)
    kmid[:, odd_cols] = grid.shift_half(kmid[:, odd_cols], -1, axis=0)
    return grid.fwd(kmid) * SQRT_TWO_PI


def weyl_product(a, b, grid, a_half=None, b_half=None):
    """Symbol of Op(a) Op(b): quantize both factors, compose, read back.

    Wrap-around kernel entries (|x - y| > L) are zeroed in each factor
    before the matrix product.  Those entries are box artifacts with no
    continuum counterpart, but the matrix product would route O(1)
    through-corner paths across them, polluting the composed kernel at
    its edges; with the mask the product symbol is exact to round-off
    for box-compliant factors.
    """
    Ka = quantize(a, grid, a_half)
    Kb = quantize(b, grid, b_half)
    return dequantize(_masked_compose(Ka, Kb))


def _masked_compose(A, B):
    grid = A.grid
    corner = _plan(grid.n)[7]
    mat = (A.mat * corner) @ (B.mat * corner) * grid.dx
    return OperatorMatrix(grid, mat)


_localizers = {}


def bulk_localizer(grid, width=4.5):
    """Gaussian smoothing operator Op(exp(-(x^2+xi^2)/width)) with its
    wrap-around kernel corners zeroed.

    Used to measure operator defects in the box interior.  The corners
    must go: a quantized kernel's |x - y| > L entries couple the two
    position edges at near-diagonal strength (they sample the symbol at
    *central* midpoints), so an unmasked localizer leaks edge states
    straight through and the measurement picks up periodization ghosts
    that have nothing to do with the operator under test.
    """
    key = (grid, float(width))
    if key not in _localizers:
        X, XI = grid.mesh()[:2]
        w = np.exp(-(X ** 2 + XI ** 2) / width) + 0j
        wh = np.exp(-(((X + grid.dx / 2) ** 2) + XI ** 2) / width) + 0j
        G = quantize(w, grid, wh)
        _localizers[key] = OperatorMatrix(grid, G.mat * _plan(grid.n)[7])
    return _localizers[key]


def wigner(g, f, grid):
    """Cross-Wigner distribution W(g, f) on the phase lattice.

    Computed as the symbol of the rank-one operator u -> <f, u> g, scaled
    by (2 pi)^(-1/2): with this normalization the operator/symbol pairing
    <g, Op(a) f> = (2 pi)^(-1/2) integral of a * conj(W(g, f)) over phase
    space holds to round-off, W(f, f) is real, its x-marginal is
    sqrt(2 pi) |f|^2, and the standard Gaussian has total Wigner mass
    sqrt(2 pi).
    """
    g = np.asarray(g, dtype=complex)
    f = np.asarray(f, dtype=complex)
    P = OperatorMatrix(grid, np.outer(g, np.conj(f)))
    return dequantize(P) / SQRT_TWO_PI


# ---------------------------------------------------------------------------
# decay-order diagnostics
# ---------------------------------------------------------------------------

class ShubinWitness:
    """Result of a symbol decay-order fit.

    slopes[alpha] estimates the exponent s in |d^alpha a| ~ <z>^s over
    dyadic shells; order_estimate is the |alpha| = 0 slope.  A multi-index
    passes an order-m hypothesis when slope <= m - |alpha| + 0.25.  Slopes
    are nan (and vacuously passing) when the derivative sits at the noise
    floor everywhere.
    """

    def __init__(self, order_estimate, slopes, residuals, shell_edges, m=None):
        self.order_estimate = order_estimate
        self.slopes = slopes
        self.residuals = residuals
        self.shell_edges = shell_edges
        self.m = m
        if m is None:
            self.passes = None
            self.ok = None
        else:
            self.passes = {}
            for alpha, s in slopes.items():
                if np.isnan(s):
                    self.passes[alpha] = True
                else:
                    self.passes[alpha] = bool(s <= m - sum(alpha) + 0.25)
            self.ok = all(self.passes.values())

    def __repr__(self):
        return ("ShubinWitness(order_estimate=%.3f, ok=%r)"
                % (self.order_estimate, self.ok))


_STENCIL_1 = np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / 12.0     # f'(x) h
_STENCIL_2 = np.array([-1.0, 16.0, -30.0, 16.0, -1.0]) / 12.0  # f''(x) h^2


def _fd(a, axis, order, h):
    """4th-order centered finite difference along one axis (periodic roll;
    shells stay in the bulk so the wrapped cells never enter a fit)."""
    sten = _STENCIL_1 if order == 1 else _STENCIL_2
    out = np.zeros_like(np.asarray(a, dtype=complex))
    for k, c in zip(range(-2, 3), sten):
        if c != 0.0:
            out += c * np.roll(a, -k, axis=axis)
    return out / h ** order


def symbol_derivative(a, grid, alpha):
    """Finite-difference d^alpha a on the phase lattice, alpha = (ax, axi)."""
    out = np.asarray(a, dtype=complex)
    ax, axi = alpha
    if ax:
        out = _fd(out, 0, ax, grid.dx)
    if axi:
        out = _fd(out, 1, axi, grid.dxi)
    return out


def shubin_fit(a, grid, m=None, max_deriv=2):
    """Estimate isotropic decay orders of a symbol and its derivatives.

    Dyadic shells 1 <= |z| < 2 < 4 < ... are laid out up to 0.75 L (at
    least three are required, else InsufficientRangeError).  Per shell and
    multi-index the statistic is max |d^alpha a| paired with <z> at the
    maximizing node; a least-squares line through (log <z>, log max) gives
    the slope.  Pairing with the argmax rather than the shell center keeps
    the fit exact for pure <z>-power laws.
    """
    if grid.d != 1:
        raise GuardError("decay fits implemented for d=1 symbols")
    a = np.asarray(a)
    edges = [1.0]
    while edges[-1] * 2.0 <= 0.75 * grid.L:
        edges.append(edges[-1] * 2.0)
    if len(edges) < 4:
        raise InsufficientRangeError(
            "box half-width L=%g leaves %d dyadic shells; need >= 3 "
            "(increase L)" % (grid.L, len(edges) - 1))
    X, XI = grid.mesh()[:2]
    r = np.hypot(X, XI)
    rho = np.sqrt(1.0 + r * r)
    alphas = [(i, j) for i in range(max_deriv + 1)
              for j in range(max_deriv + 1) if i + j <= max_deriv]
    scale0 = float(np.abs(a).max())
    slopes, residuals = {}, {}
    for alpha in alphas:
        da = np.abs(symbol_derivative(a, grid, alpha))
        logs, logr = [], []
        for lo, hi in zip(edges[:-1], edges[1:]):
            mask = (r >= lo) & (r < hi)
            vals = np.where(mask, da, 0.0)
            k = np.argmax(vals)
            stat = vals.flat[k]
            if stat <= 0.0:
                continue
            logs.append(np.log(stat))
            logr.append(np.log(rho.flat[k]))
        if len(logs) < 3 or max(logs) < np.log(1e-13 * scale0 + 1e-300):
            slopes[alpha] = np.nan
            residuals[alpha] = np.nan
            continue
        coef, res = np.polyfit(logr, logs, 1), None
        fitvals = np.polyval(coef, logr)
        res = float(np.sqrt(np.mean((fitvals - np.asarray(logs)) ** 2)))
        slopes[alpha] = float(coef[0])
        residuals[alpha] = res
    return ShubinWitness(slopes[(0, 0)], slopes, residuals,
                         np.asarray(edges), m=m)
