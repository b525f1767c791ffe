"""Numerical wave-front and phase-space concentration diagnostics.

All routines share one mechanism: take a windowed transform, collect
shell maxima of its magnitude (or of tangential derivatives) over dyadic
shells of a distance function -- radial distance for wave-front cones,
distance to a Lagrangian plane for concentration estimates -- and fit a
log-log slope, pairing each shell's statistic with the bracket weight at
the maximizing node so that pure power laws fit exactly.
"""

import numpy as np
import scipy.interpolate

from .errors import ConfigError, GuardError
from . import phasespace
from .gabor import WindowedTransformPlan, fbi, fbi_lagrangian, _chi_slice
from .propagator import exact_propagator
from .symplectic import (SymplecticMap, flow, lagrangian_map,
                         twisted_graph_basis, jmat)
from .weyl import _STENCIL_1

__all__ = [
    "ConeEstimate", "DecayFit", "estimate_wf", "check_propagation",
    "PropagationReport", "kernel_estimates", "KernelReport",
    "lagrangian_solution_estimates", "LagrangianReport",
]


class DecayFit:
    """A fitted log-log decay line: slope, rms residual, and the shell
    data behind it.  slope is nan when fewer than three shells carried
    signal above the floor."""

    def __init__(self, slope, residual, radii, stats, floor_hit=False):
        self.slope = slope
        self.residual = residual
        self.radii = radii
        self.stats = stats
        self.floor_hit = floor_hit

    def __repr__(self):
        return "DecayFit(slope=%.3f, residual=%.3f)" % (self.slope,
                                                        self.residual)


def _fit_shells(stats, radii, floor):
    stats = np.asarray(stats, dtype=float)
    radii = np.asarray(radii, dtype=float)
    good = stats > floor
    if good.sum() < 3:
        return DecayFit(np.nan, np.nan, radii, stats, floor_hit=True)
    lr = np.log(radii[good])
    ls = np.log(stats[good])
    coef = np.polyfit(lr, ls, 1)
    res = float(np.sqrt(np.mean((np.polyval(coef, lr) - ls) ** 2)))
    return DecayFit(float(coef[0]), res, radii, stats)


def _shell_scan(values, dists, edges):
    """Shell maxima of `values` over dyadic bins of `dists`, paired with
    1 + dist at the maximizing entry.  Both arrays are flattened."""
    v = np.asarray(values).ravel()
    d = np.asarray(dists).ravel()
    stats = np.zeros(len(edges) - 1)
    radii = np.ones(len(edges) - 1)
    for s, (lo, hi) in enumerate(zip(edges[:-1], edges[1:])):
        m = (d >= lo) & (d < hi)
        if not m.any():
            continue
        vals = np.where(m, v, 0.0)
        k = int(np.argmax(vals))
        if vals[k] > stats[s]:
            stats[s] = vals[k]
            radii[s] = 1.0 + d[k]
    return stats, radii


# ---------------------------------------------------------------------------
# wave-front cones of states
# ---------------------------------------------------------------------------

class ConeEstimate:
    """Directional decay profile of a state's windowed transform.

    Per direction (angular mesh over [0, 2 pi)): fitted radial slope,
    fit residual, singular flag (slope above -N_threshold), and an
    inconclusive flag for marginal fits (residual > 0.3).
    """

    def __init__(self, angles, slopes, residuals, N_threshold):
        self.angles = angles
        self.slopes = slopes
        self.residuals = residuals
        self.N_threshold = N_threshold
        with np.errstate(invalid="ignore"):
            self.singular = slopes > -float(N_threshold)
        self.singular &= ~np.isnan(slopes)
        self.inconclusive = (~np.isnan(residuals)) & (residuals > 0.3) \
            & self.singular
        self.directions = np.stack([np.cos(angles), np.sin(angles)], axis=-1)

    @property
    def is_empty(self):
        return not bool(self.singular.any())

    def singular_angles(self):
        return self.angles[self.singular]

    def __repr__(self):
        k = int(self.singular.sum())
        return ("ConeEstimate(%d/%d singular directions, threshold %g)"
                % (k, len(self.angles), self.N_threshold))


def _transform_interp(u, grid, window):
    plan = WindowedTransformPlan(grid, window)
    T = np.abs(fbi(plan, u))
    return scipy.interpolate.RegularGridInterpolator(
        (grid.x, grid.xi), T, method="linear", bounds_error=False,
        fill_value=0.0)


def _ladder_slopes(itp, grid, n_dirs, smooth_cells, r_lo, r_hi,
                   samples_per_octave, chi=None):
    """Fitted log-log radial decay slope per direction.

    Rays are sampled on a geometric radius ladder; with `chi` the sample
    points are the chi-images of those ladders (still straight rays --
    the map is linear -- but with per-direction radial rescaling), which
    keeps the detector geometry transported consistently when comparing
    cones across a flow.  Samples falling outside the phase box are
    dropped; a ray needs at least three samples above the floor or its
    slope is reported -inf (decay beyond measurement).
    """
    n_oct = int(np.ceil(np.log2(r_hi / r_lo)))
    radii = r_lo * 2.0 ** (np.arange(n_oct * samples_per_octave + 1)
                           / samples_per_octave)
    radii = radii[radii <= r_hi * (1 + 1e-12)]
    angles = 2.0 * np.pi * np.arange(n_dirs) / n_dirs
    dirs = np.stack([np.cos(angles), np.sin(angles)], axis=-1)
    img = dirs if chi is None else dirs @ chi.M.T
    pts = img[:, None, :] * radii[None, :, None]
    inside = (np.abs(pts[..., 0]) <= 0.95 * grid.x[-1]) \
        & (np.abs(pts[..., 1]) <= 0.95 * grid.xi[-1])
    if not inside.all(axis=1).any():
        raise GuardError("radial ladder reaches outside the phase box")
    vals = itp(pts.reshape(-1, 2)).reshape(n_dirs, len(radii))
    sm = vals.copy()
    for k in range(1, smooth_cells + 1):
        sm = np.maximum(sm, np.roll(vals, k, axis=0))
        sm = np.maximum(sm, np.roll(vals, -k, axis=0))
    floor = sm.max() * 1e-13 + 1e-300
    rho = np.sqrt(1.0 + np.sum(pts ** 2, axis=-1))
    slopes = np.empty(n_dirs)
    resid = np.zeros(n_dirs)
    for i in range(n_dirs):
        good = inside[i] & (sm[i] > floor)
        if good.sum() < 3:
            slopes[i] = -np.inf
            continue
        lr = np.log(rho[i, good])
        ls = np.log(sm[i, good])
        coef = np.polyfit(lr, ls, 1)
        slopes[i] = coef[0]
        resid[i] = float(np.sqrt(np.mean((np.polyval(coef, lr) - ls) ** 2)))
    return angles, img, slopes, resid


def estimate_wf(u, grid, window=None, N_threshold=4, n_dirs=720,
                smooth_cells=1, r_lo=1.0, r_hi=8.0, samples_per_octave=8):
    """Estimate the wave-front directions of a state from the radial decay
    of its windowed transform.

    The transform magnitude is sampled on geometric radius ladders along
    an angular mesh (bilinear interpolation between lattice nodes), padded
    by a small angular max-filter so a cone never slips between mesh
    directions, then each ray's samples are fitted to a log-log line.  A
    direction is singular when the fitted decay is slower than the
    threshold order.
    """
    if r_hi > min(grid.L, grid.xi[-1]) * 0.95:
        raise GuardError("radial ladder reaches outside the phase box")
    itp = _transform_interp(u, grid, window)
    angles, _, slopes, resid = _ladder_slopes(
        itp, grid, n_dirs, smooth_cells, r_lo, r_hi, samples_per_octave)
    return ConeEstimate(angles, slopes, resid, N_threshold)


class PropagationReport:
    """Containment check of wave-front propagation along the classical
    flow: every singular direction of the evolved state must lie within
    tau_deg of the flow image of an initial singular direction."""

    def __init__(self, wf_in, wf_out, mapped_angles, hausdorff_deg, tau_deg):
        self.wf_in = wf_in
        self.wf_out = wf_out
        self.mapped_angles = mapped_angles
        self.hausdorff_deg = hausdorff_deg
        self.tau_deg = tau_deg
        self.passed = bool(hausdorff_deg <= tau_deg)

    def __repr__(self):
        return ("PropagationReport(hausdorff=%.2f deg, tau=%.2f, passed=%r)"
                % (self.hausdorff_deg, self.tau_deg, self.passed))


def check_propagation(prob, u0, t, N_threshold=4, tau_deg=5.0, window=None,
                      n_dirs=720, smooth_cells=1, r_lo=1.0, r_hi=8.0,
                      samples_per_octave=8):
    """Evolve a state, estimate wave fronts before and after, and measure
    the one-sided angular Hausdorff distance from the output cone to the
    flow image of the input cone.

    The output cone is probed with the full flow-transported detector:
    the sample points are the flow images of the input radius ladders
    (same rays through the mapped directions, radii rescaled by the
    per-direction stretch), and the analysis window is the metaplectic
    image of the input window.  Transform covariance then makes the
    output profile along an image ray equal the input profile along its
    preimage, so the two cones are commensurable.  A fixed detector on
    both sides fails by its own width mismatch even for exactly
    propagated singularities: a finite ladder's angular resolution is
    anisotropically rescaled by the flow, and the untransported window
    broadens the evolved transform transversally.
    """
    grid = prob.grid
    wf0 = estimate_wf(u0, grid, N_threshold=N_threshold, window=window,
                      n_dirs=n_dirs, smooth_cells=smooth_cells, r_lo=r_lo,
                      r_hi=r_hi, samples_per_octave=samples_per_octave)
    ut = exact_propagator(prob, t).apply(u0)
    chi = flow(prob.H, t)
    from .gabor import default_window
    from .propagator import metaplectic
    w0 = default_window(grid) if window is None else np.asarray(window)
    wt = metaplectic(prob, t).apply(w0 + 0j)
    itp = _transform_interp(ut, grid, wt)
    _, img, slopes, resid = _ladder_slopes(
        itp, grid, n_dirs, smooth_cells, r_lo, r_hi, samples_per_octave,
        chi=chi)
    img_angles = np.arctan2(img[:, 1], img[:, 0]) % (2 * np.pi)
    wft = ConeEstimate(img_angles, slopes, resid, N_threshold)
    mapped = img[wf0.singular]
    nrm = np.linalg.norm(mapped, axis=-1, keepdims=True)
    mapped = mapped / np.where(nrm == 0.0, 1.0, nrm)
    mapped_angles = np.arctan2(mapped[:, 1], mapped[:, 0]) % (2 * np.pi)
    out_dirs = wft.directions[wft.singular]
    nrm = np.linalg.norm(out_dirs, axis=-1, keepdims=True)
    out_dirs = out_dirs / np.where(nrm == 0.0, 1.0, nrm)
    if len(out_dirs) == 0:
        haus = 0.0
    elif len(mapped) == 0:
        haus = np.inf
    else:
        cosangle = np.clip(out_dirs @ mapped.T, -1.0, 1.0)
        haus = float(np.degrees(np.arccos(cosangle).min(axis=1).max()))
    return PropagationReport(wf0, wft, mapped_angles, haus, tau_deg)


# ---------------------------------------------------------------------------
# kernel concentration estimates
# ---------------------------------------------------------------------------

class KernelReport:
    """Concentration structure of a propagator kernel's adjusted transform.

    off_plane: decay fit of |T| against distance to the twisted graph of
    the flow.  cross[k]: fit of the k-fold tangential derivative magnitude
    against distance to the opposite-sign twisted graph; gains[k] is the
    extra decay order cross[k] achieves over cross[0].  mean_weighted_dist
    measures how tightly transform mass hugs the plane.
    """

    def __init__(self, t, off_plane, cross, gains, mean_weighted_dist,
                 stride):
        self.t = t
        self.off_plane = off_plane
        self.cross = cross
        self.gains = gains
        self.mean_weighted_dist = mean_weighted_dist
        self.stride = stride

    def __repr__(self):
        return ("KernelReport(t=%g, off_slope=%.2f, gains=%r)"
                % (self.t, self.off_plane.slope,
                   [round(g, 2) for g in self.gains]))


def kernel_estimates(prob, t, stride=2, k_max=1, window=None,
                     shell_edges=(1.0, 2.0, 4.0, 8.0), box_margin=4.0):
    """Fit the phase-space decay law of the propagator kernel.

    The kernel's window transform is computed slice by slice over a
    strided set of center pairs (full frequency resolution in each
    slice); tangential derivatives along the twisted-graph plane use
    4th-order finite differences -- in-slice rolls for the frequency
    axes, neighbor slices at full lattice resolution for the position
    axes.  Nothing 4-dimensional is ever materialized.

    All statistics are restricted to the lattice-faithful region: the
    input point (y, zeta2) and output point (x, zeta1) of a transform
    sample must have phase-space radius at most (L - box_margin)
    divided by the flow's largest singular value over [0, t].  A
    classical trajectory whose position leaves the box wraps through
    the seam, and the discrete evolution then carries full-strength
    mass far from the continuum graph; at the standard box this mass
    sits several units off the plane and would masquerade as slow
    decay.  Within the faithful region, seam and alias artifacts only
    reach the scan through window tails, suppressed well below the
    outermost shell's genuine level.  Tangential-derivative stencils
    additionally skip pairs at the position seam, where the quadratic
    adjustment phase is not box-periodic and a finite difference
    across the seam is meaningless.
    """
    grid = prob.grid
    n = grid.n
    if n > 128:
        raise GuardError("kernel estimates need n <= 128")
    if k_max not in (0, 1):
        raise GuardError("k_max must be 0 or 1")
    plan = WindowedTransformPlan(grid, window)
    K = exact_propagator(prob, t).mat
    chi = flow(prob.H, t)
    Bp = twisted_graph_basis(chi)
    Bm = twisted_graph_basis(SymplecticMap(-chi.M))
    centers = np.arange(0, n, stride)
    amp = 1.0
    for s in np.linspace(0.0, t, 9):
        amp = max(amp, float(
            np.linalg.svd(flow(prob.H, s).M, compute_uv=False)[0]))
    r_ok = (grid.L - box_margin) / amp
    if r_ok <= shell_edges[0]:
        raise GuardError("faithful radius %.2f leaves no room for the "
                         "shells; shrink box_margin or the flow time"
                         % r_ok)
    Z1, Z2 = np.meshgrid(grid.xi, grid.xi, indexing="ij")
    nsh = len(shell_edges) - 1
    off_stats = np.zeros(nsh)
    off_radii = np.ones(nsh)
    cross_stats = [np.zeros(nsh) for _ in range(k_max + 1)]
    cross_radii = [np.ones(nsh) for _ in range(k_max + 1)]
    wsum = 0.0
    wdsum = 0.0

    def slice_at(ja, jb):
        return _chi_slice(plan, K, chi, ja, jb)

    for ja in centers:
        for jb in centers:
            xa = grid.x[ja]
            yb = grid.x[jb]
            if max(abs(xa), abs(yb)) > r_ok:
                continue
            faithful = ((yb ** 2 + Z2 ** 2 <= r_ok ** 2)
                        & (xa ** 2 + Z1 ** 2 <= r_ok ** 2))
            T0 = slice_at(ja, jb)
            aT = np.abs(T0) * faithful
            pts = np.empty(Z1.shape + (4,))
            pts[..., 0] = xa
            pts[..., 1] = yb
            pts[..., 2] = Z1
            pts[..., 3] = Z2
            flat = pts.reshape(-1, 4)
            dp = _plane_dist(flat, Bp).reshape(Z1.shape)
            dm = _plane_dist(flat, Bm).reshape(Z1.shape)
            s, r = _shell_scan(aT, dp, shell_edges)
            _merge(off_stats, off_radii, s, r)
            s, r = _shell_scan(aT, dm, shell_edges)
            _merge(cross_stats[0], cross_radii[0], s, r)
            w = (aT ** 2).sum()
            wsum += w
            wdsum += (aT ** 2 * dp).sum()
            if k_max >= 1 and min(ja, jb) >= 2 and max(ja, jb) < n - 2:
                dT = [None] * 4
                # position-axis derivatives from neighbor slices
                for axis, (jc, jother) in enumerate([(ja, jb), (jb, ja)]):
                    acc = np.zeros_like(T0)
                    for step, c in zip(range(-2, 3), _STENCIL_1):
                        if c == 0.0:
                            continue
                        jn = (jc + step) % n
                        Tn = slice_at(jn, jother) if axis == 0 \
                            else slice_at(jother, jn)
                        acc += c * Tn
                    dT[axis] = acc / grid.dx
                # frequency-axis derivatives in-slice
                for axis in (2, 3):
                    acc = np.zeros_like(T0)
                    for step, c in zip(range(-2, 3), _STENCIL_1):
                        if c == 0.0:
                            continue
                        acc += c * np.roll(T0, -step, axis=axis - 2)
                    dT[axis] = acc / grid.dxi
                deriv = np.zeros_like(aT)
                for col in range(Bp.shape[1]):
                    L = sum(Bp[c, col] * dT[c] for c in range(4))
                    deriv = np.maximum(deriv, np.abs(L))
                s, r = _shell_scan(deriv * faithful, dm, shell_edges)
                _merge(cross_stats[1], cross_radii[1], s, r)
    # one fit floor for everything, set by the transform's peak: a
    # tangential derivative that cancels to rounding noise must register
    # as floor-hit, not get fitted against its own noise maximum
    floor0 = off_stats.max() * 1e-12 + 1e-300
    off_fit = _fit_shells(off_stats, off_radii, floor0)
    cross_fits = []
    for k in range(k_max + 1):
        cross_fits.append(_fit_shells(cross_stats[k], cross_radii[k],
                                      floor0))
    gains = []
    for k in range(1, k_max + 1):
        if np.isnan(cross_fits[k].slope) or np.isnan(cross_fits[0].slope):
            gains.append(np.inf)    # derivative at floor: vacuous gain
        else:
            gains.append(cross_fits[0].slope - cross_fits[k].slope)
    mean_wd = wdsum / (wsum + 1e-300)
    return KernelReport(t, off_fit, cross_fits, gains, mean_wd, stride)


def _plane_dist(pts, B):
    """Euclidean distance to span(B) (orthonormal columns)."""
    coef = pts @ B
    return np.sqrt(np.maximum(
        np.sum(pts ** 2, axis=-1) - np.sum(coef ** 2, axis=-1), 0.0))


def _merge(stats, radii, s, r):
    upd = s > stats
    stats[upd] = s[upd]
    radii[upd] = r[upd]


# ---------------------------------------------------------------------------
# Lagrangian solution estimates
# ---------------------------------------------------------------------------

class LagrangianReport:
    """Concentration of an evolved Lagrangian state: transverse decay fit,
    along-plane order fit, tangential-derivative fits, and the angle
    between the transform's principal mass axis and the transported
    plane."""

    def __init__(self, t, frame_t, off_plane, along, cross, axis_angle_deg):
        self.t = t
        self.frame_t = frame_t
        self.off_plane = off_plane
        self.along = along
        self.cross = cross
        self.axis_angle_deg = axis_angle_deg

    def __repr__(self):
        return ("LagrangianReport(t=%g, off=%.2f, along=%.2f, axis=%.2f deg)"
                % (self.t, self.off_plane.slope, self.along.slope,
                   self.axis_angle_deg))


def lagrangian_solution_estimates(prob, frame, t, amplitude=None, k_max=1,
                                  window=None, r_max=8.0,
                                  shell_edges=(1.0, 2.0, 4.0, 8.0)):
    """Evolve the plane-adapted oscillatory state e^{i <x, A x>/2} a(x)
    and fit the concentration law of its adjusted transform around the
    transported plane Lambda_t.

    Fits are restricted to |z| <= r_max so box-edge wrap of the
    non-decaying chirp never enters.  The along-plane fit bins by
    distance to the companion plane J Lambda_t inside the unit tube
    around Lambda_t's image; its slope estimates the state's order.
    """
    grid = prob.grid
    if frame.vertical:
        raise ConfigError("initial plane must be a graph")
    A = float(frame.A[0, 0])
    u0 = np.exp(0.5j * A * grid.x ** 2).astype(complex)
    if amplitude is not None:
        u0 = u0 * np.asarray(amplitude, dtype=complex)
    chi = flow(prob.H, t)
    frame_t = lagrangian_map(chi, frame)
    if frame_t.vertical:
        raise ConfigError("transported plane is vertical at t=%g; pick "
                          "another sample time" % t)
    ut = exact_propagator(prob, t).apply(u0)
    plan = WindowedTransformPlan(grid, window)
    Tc = fbi_lagrangian(plan, ut, frame_t)
    T = np.abs(Tc)
    X, XI = grid.mesh()[:2]
    pts = np.stack([X.ravel(), XI.ravel()], axis=-1)
    d_lam = _plane_dist(pts, _line_basis(frame_t)).reshape(X.shape)
    d_v = _plane_dist(pts, jmat(1) @ _line_basis(frame_t)).reshape(X.shape)
    r = np.hypot(X, XI)
    bulk = r <= r_max
    floor = T[bulk].max() * 1e-12 + 1e-300
    s, rr = _shell_scan(np.where(bulk, T, 0.0), d_lam, shell_edges)
    off_fit = _fit_shells(s, rr, floor)
    tube = bulk & (d_lam <= 1.0)
    s, rr = _shell_scan(np.where(tube, T, 0.0), d_v, shell_edges)
    along_fit = _fit_shells(s, rr, floor)
    cross = [along_fit]
    if k_max >= 1:
        b = _line_basis(frame_t)[:, 0]
        dT = _fd_mesh(Tc, grid, b)
        s, rr = _shell_scan(np.where(tube, np.abs(dT), 0.0), d_v, shell_edges)
        cross.append(_fit_shells(s, rr, floor))
    # principal axis of transform mass (restricted to the bulk)
    W = np.where(bulk, T, 0.0) ** 2
    Z = np.stack([X.ravel(), XI.ravel()], axis=-1)
    C = (Z * W.ravel()[:, None]).T @ Z / (W.sum() + 1e-300)
    evals, evecs = np.linalg.eigh(C)
    axis = evecs[:, -1]
    lam_dir = _line_basis(frame_t)[:, 0]
    cosang = abs(float(axis @ lam_dir))
    axis_angle = float(np.degrees(np.arccos(np.clip(cosang, -1.0, 1.0))))
    return LagrangianReport(t, frame_t, off_fit, along_fit, cross, axis_angle)


def _line_basis(frame):
    B = frame.basis
    return B / np.linalg.norm(B, axis=0, keepdims=True)


def _fd_mesh(T, grid, direction):
    """4th-order directional derivative of a phase-lattice field along a
    unit vector, by axis decomposition."""
    out = np.zeros_like(np.asarray(T, dtype=complex))
    for axis, (comp, h) in enumerate([(direction[0], grid.dx),
                                      (direction[1], grid.dxi)]):
        if abs(comp) < 1e-15:
            continue
        acc = np.zeros_like(out)
        for step, c in zip(range(-2, 3), _STENCIL_1):
            if c == 0.0:
                continue
            acc += c * np.roll(T, -step, axis=axis)
        out += comp * acc / h
    return out
