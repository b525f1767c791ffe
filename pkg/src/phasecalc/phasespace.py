"""Uniform phase-space lattices and the unitary Fourier pair on them.

Everything downstream (quantization, windowed transforms, propagators)
assumes one fixed discretization convention, so it lives here in one place:

* position nodes   x_j  = (j - n/2) * dx,      dx  = 2L/n,  j = 0..n-1
* frequency nodes  xi_k = (k - n/2) * dxi,     dxi = pi/L
* forward transform  (F u)(xi) = (2*pi)^(-1/2) * sum_j u(x_j) e^{-i x_j xi} dx

realized as fftshift . fft . ifftshift with the grid centered at zero.
With these weights F is unitary on the lattice inner product
<u, v> = sum conj(u) v * dx, and F applied to samples of a Schwartz
function reproduces samples of its continuum Fourier transform to
round-off once the function decays below ~1e-14 at the box edge.
"""

import numpy as np

from .errors import ConfigError

TWO_PI = 2.0 * np.pi
SQRT_TWO_PI = np.sqrt(TWO_PI)


class PhaseGrid:
    """Tensor lattice over the centered box [-L, L)^d x [-pi n/(2L), ...)^d.

    Instances are immutable value objects; build them with :func:`make_grid`.
    """

    def __init__(self, d, n, L):
        if d not in (1, 2):
            raise ConfigError("dimension d must be 1 or 2, got %r" % (d,))
        if not (isinstance(n, (int, np.integer)) and n >= 8):
            raise ConfigError("grid size n must be an integer >= 8, got %r" % (n,))
        if n & (n - 1):
            raise ConfigError("grid size n must be a power of two, got %d" % n)
        L = float(L)
        if not (L > 0.0 and np.isfinite(L)):
            raise ConfigError("box half-width L must be finite and positive")
        self.d = int(d)
        self.n = int(n)
        self.L = L
        self.dx = 2.0 * L / n
        self.dxi = np.pi / L
        self.x = (np.arange(n) - n // 2) * self.dx
        self.xi = (np.arange(n) - n // 2) * self.dxi
        self._mesh = None

    # -- basic geometry -------------------------------------------------

    def mesh(self):
        """Position/frequency meshes.

        d=1: (X, XI) with shape (n, n), 'ij' indexing -- X varies along
        axis 0.  d=2: (X1, X2, XI1, XI2) with shape (n,)*4.
        """
        if self._mesh is None:
            if self.d == 1:
                self._mesh = np.meshgrid(self.x, self.xi, indexing="ij")
            else:
                self._mesh = np.meshgrid(self.x, self.x, self.xi, self.xi,
                                         indexing="ij")
        return self._mesh

    def bracket(self):
        """Samples of <z> = sqrt(1 + |x|^2 + |xi|^2) on the phase lattice."""
        m = self.mesh()
        return np.sqrt(1.0 + sum(c * c for c in m))

    def __eq__(self, other):
        return (isinstance(other, PhaseGrid)
                and (self.d, self.n, self.L) == (other.d, other.n, other.L))

    def __hash__(self):
        return hash((self.d, self.n, self.L))

    def __repr__(self):
        return "PhaseGrid(d=%d, n=%d, L=%g)" % (self.d, self.n, self.L)

    # -- transforms ------------------------------------------------------

    def fwd(self, u, axis=-1):
        """Unitary forward Fourier transform along one axis."""
        u = np.asarray(u)
        U = np.fft.fftshift(
            np.fft.fft(np.fft.ifftshift(u, axes=axis), axis=axis), axes=axis)
        return U * (self.dx / SQRT_TWO_PI)

    def inv(self, U, axis=-1):
        """Inverse of :meth:`fwd` along one axis."""
        U = np.asarray(U)
        u = np.fft.fftshift(
            np.fft.ifft(np.fft.ifftshift(U, axes=axis), axis=axis), axes=axis)
        return u * (SQRT_TWO_PI / self.dx)

    def shift_half(self, arr, sign, axis=0):
        """Resample `arr` on the lattice staggered by sign * dx/2.

        Spectral interpolation: multiply the spectrum by e^{i sign (dx/2) xi}
        and zero the unpaired Nyquist mode.  Dropping the Nyquist line is
        what keeps the staggered resampling exactly unitary-symmetric; with
        it, real symbols quantize to Hermitian matrices at round-off.
        """
        a = np.moveaxis(np.asarray(arr, dtype=complex), axis, -1)
        A = self.fwd(a)
        A = A * np.exp(1j * sign * (self.dx / 2.0) * self.xi)
        A[..., 0] = 0.0
        return np.moveaxis(self.inv(A), -1, axis)


def make_grid(d, n, L):
    """Validated PhaseGrid constructor (the one scenario files go through)."""
    return PhaseGrid(d, n, L)


def fourier(u, grid, sign=+1):
    """Unitary Fourier transform of a state sampled on the position lattice.

    sign=+1 is the forward transform (kernel e^{-i x.xi}), sign=-1 the
    inverse.  For d=2 the transform is applied along both axes.
    """
    u = np.asarray(u)
    if u.shape != (grid.n,) * grid.d:
        raise ConfigError("state shape %r does not match grid %r"
                          % (u.shape, grid))
    op = grid.fwd if sign > 0 else grid.inv
    out = u
    for ax in range(grid.d):
        out = op(out, axis=ax)
    return out


def quadrature(values, grid, domain="position"):
    """Lattice quadrature: plain Riemann sum with the right cell volume.

    domain='position' integrates over the x-box (cell dx^d);
    domain='phase' integrates over the full phase-space box (cell
    (dx*dxi)^d).  For functions that decay below round-off at the box
    edge this is spectrally accurate.
    """
    if domain == "position":
        cell = grid.dx ** grid.d
    elif domain == "phase":
        cell = (grid.dx * grid.dxi) ** grid.d
    else:
        raise ConfigError("domain must be 'position' or 'phase'")
    return np.sum(np.asarray(values)) * cell


def norm(u, grid):
    """L2 norm of a position-space state under lattice quadrature."""
    return float(np.sqrt(np.sum(np.abs(np.asarray(u)) ** 2).real)
                 * np.sqrt(grid.dx ** grid.d))


# ---------------------------------------------------------------------------
# standard states
# ---------------------------------------------------------------------------

def gaussian_state(grid, center=0.0, momentum=0.0, width=1.0):
    """Normalized Gaussian coherent state
    psi(x) = (pi w^2)^(-1/4) exp(-(x-c)^2/(2 w^2)) e^{i p x}."""
    if grid.d != 1:
        raise ConfigError("states are 1-d in this build")
    x = grid.x
    psi = (np.pi * width ** 2) ** -0.25 \
        * np.exp(-((x - center) ** 2) / (2.0 * width ** 2)) \
        * np.exp(1j * momentum * x)
    return psi.astype(complex)


def hermite_state(grid, k):
    """k-th Hermite function: eigenstate number k of x^2 + xi^2
    (eigenvalue 2k+1), normalized on the lattice's continuum convention."""
    if grid.d != 1:
        raise ConfigError("states are 1-d in this build")
    x = grid.x
    # stable recurrence on the normalized functions themselves
    h_prev = np.zeros_like(x)
    h = np.pi ** -0.25 * np.exp(-x * x / 2.0)
    for j in range(k):
        h_next = np.sqrt(2.0 / (j + 1.0)) * x * h - np.sqrt(j / (j + 1.0)) * h_prev
        h_prev, h = h, h_next
    return h.astype(complex)


def delta_state(grid, center=0.0):
    """Lattice delta at the node nearest `center`: height 1/dx so that
    quadrature against it evaluates functions pointwise."""
    if grid.d != 1:
        raise ConfigError("states are 1-d in this build")
    u = np.zeros(grid.n, dtype=complex)
    j = int(np.argmin(np.abs(grid.x - center)))
    u[j] = 1.0 / grid.dx
    return u


def chirp_state(grid, a, envelope_width=None):
    """Quadratic chirp e^{i a x^2 / 2}, optionally with a wide Gaussian
    envelope (width in position units) to tame the box edge."""
    if grid.d != 1:
        raise ConfigError("states are 1-d in this build")
    u = np.exp(0.5j * a * grid.x ** 2)
    if envelope_width is not None:
        u = u * np.exp(-grid.x ** 2 / (2.0 * envelope_width ** 2))
    return u.astype(complex)


def random_state(grid, rng, degree=3, width=np.sqrt(2.0)):
    """Random band-limited, box-compliant state: complex polynomial of the
    given degree times a Gaussian envelope, normalized.

    The envelope width default keeps the state below 1e-14 at |x| = 12
    while leaving enough spread that frequency content stays well inside
    the xi-box -- the synthetic-data workhorse for round-trip checks.
    """
    if grid.d != 1:
        raise ConfigError("states are 1-d in this build")
    cs = rng.normal(size=degree + 1) * 0.5 + 1j * rng.normal(size=degree + 1) * 0.5
    env = np.exp(-grid.x ** 2 / (2.0 * width ** 2))
    u = np.polyval(cs, grid.x / 4.0) * env
    return u / norm(u, grid)


def random_symbol(grid, rng, sigma=1.5, waves=6, amp=0.3):
    """Random smooth decaying symbol: Gaussian bump times a low-frequency
    trigonometric polynomial.  Decays below 1e-14 well inside the box for
    sigma <= 1.6 at L = 12, so quantization error is pure round-off."""
    X, XI = grid.mesh()[:2]
    bump = np.exp(-(X ** 2 + XI ** 2) / (2.0 * sigma ** 2))
    mod = np.ones_like(X, dtype=complex)
    for _ in range(waves):
        ax, bx = rng.normal(size=2) * 0.6
        c = (rng.normal() + 1j * rng.normal()) * amp / waves
        mod = mod + c * np.exp(1j * (ax * X + bx * XI))
    return bump * mod


def edge_decay(values, grid):
    """Largest magnitude on the outermost lattice shell, relative to the
    global max.  Used by the guard checks: anything above ~1e-14 here
    means periodization error will show up in transforms."""
    v = np.abs(np.asarray(values))
    vmax = v.max()
    if vmax == 0.0:
        return 0.0
    if v.ndim == 1:
        edge = max(v[0], v[-1])
    else:
        edge = max(v[0, :].max(), v[-1, :].max(), v[:, 0].max(), v[:, -1].max())
    return float(edge / vmax)
