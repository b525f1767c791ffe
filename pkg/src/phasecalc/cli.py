"""Command-line driver.

    phasecalc COMMAND SCENARIO.yaml --out DIR [--assert] [--jobs N] [--oracle]

Commands: transform, propagate, dyson-convergence, wavefront,
kernel-estimates.  Every run writes its numeric artifacts as CSV plus a
manifest.json tying them to the canonical scenario hash; identical
scenario content yields byte-identical manifests and CSVs.

Exit codes: 0 success, 2 configuration/parse error, 3 numerical guard,
4 assertion failure (--assert).
"""

import argparse
import hashlib
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .errors import ConfigError, GuardError, ParseError
from . import phasespace
from .gabor import WindowedTransformPlan, fbi, fbi_adjoint, fbi_direct, qs_norm
from .propagator import (dyson_terms, exact_propagator, regularizer_defect,
                         residual_symbol)
from .scenario import load_scenario
from .wavefront import check_propagation, estimate_wf, kernel_estimates
from .weyl import shubin_fit

_COMMANDS = ("transform", "propagate", "dyson-convergence", "wavefront",
             "kernel-estimates")


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return "%d" % v
    return "%.17g" % float(v)


def _write_csv(path, header, rows):
    with open(path, "w", newline="\n") as f:
        f.write(",".join(header) + "\n")
        for row in rows:
            f.write(",".join(_fmt(v) for v in row) + "\n")


def _sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as f:
        h.update(f.read())
    return h.hexdigest()


class _Run:
    """Collects artifacts and summary values, then writes the manifest."""

    def __init__(self, command, scen, outdir, assert_on):
        self.command = command
        self.scen = scen
        self.outdir = outdir
        self.assert_on = assert_on
        self.artifacts = []
        self.summary = {}
        self.failures = []
        os.makedirs(outdir, exist_ok=True)

    def csv(self, name, header, rows):
        path = os.path.join(self.outdir, name)
        _write_csv(path, header, rows)
        self.artifacts.append(name)

    def check(self, ok, message):
        if self.assert_on and not ok:
            self.failures.append(message)

    def finish(self):
        manifest = {
            "command": self.command,
            "scenario_hash": self.scen.hash,
            "scenario": self.scen.raw,
            "grid": {"d": self.scen.grid.d, "n": self.scen.grid.n,
                     "L": self.scen.grid.L},
            "artifacts": [
                {"name": a, "sha256": _sha256(os.path.join(self.outdir, a)),
                 "bytes": os.path.getsize(os.path.join(self.outdir, a))}
                for a in sorted(self.artifacts)],
            "summary": self.summary,
            "assertions": {"enabled": self.assert_on,
                           "passed": not self.failures,
                           "failures": self.failures},
        }
        path = os.path.join(self.outdir, "manifest.json")
        with open(path, "w") as f:
            json.dump(manifest, f, sort_keys=True, indent=2)
            f.write("\n")
        return 4 if (self.assert_on and self.failures) else 0


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def _cmd_transform(scen, run, args):
    grid = scen.grid
    u = scen.build_initial()
    plan = WindowedTransformPlan(grid)
    T = fbi(plan, u)
    back = fbi_adjoint(plan, T) / plan.window_norm ** 2
    inv_err = phasespace.norm(back - u, grid) / max(phasespace.norm(u, grid),
                                                    1e-300)
    run.summary["inversion_error"] = inv_err
    for s in (-2.0, 0.0, 2.0):
        run.summary["qs_norm_s%+g" % s] = qs_norm(plan, u, s)
    if args.oracle:
        D = fbi_direct(plan, u)
        run.summary["direct_vs_fft"] = float(
            np.abs(T - D).max() / (np.abs(D).max() + 1e-300))
        run.check(run.summary["direct_vs_fft"] <= 1e-10,
                  "direct quadrature cross-check exceeded 1e-10")
    stride = max(1, grid.n // 64)
    idx = np.arange(0, grid.n, stride)
    rows = [(grid.x[j], grid.xi[k], abs(T[j, k]))
            for j in idx for k in idx]
    run.csv("transform_magnitude.csv", ["x", "xi", "abs_T"], rows)
    run.check(inv_err <= 1e-9, "transform inversion error %.3e > 1e-9"
              % inv_err)


def _cmd_propagate(scen, run, args):
    grid = scen.grid
    prob = scen.problem()
    u0 = scen.build_initial()
    n0 = phasespace.norm(u0, grid)

    def one(i, t):
        U = exact_propagator(prob, t)
        ut = U.apply(u0)
        unit = abs(phasespace.norm(ut, grid) - n0)
        rows = [(grid.x[j], ut[j].real, ut[j].imag) for j in range(grid.n)]
        return i, t, unit, rows

    results = _parallel(one, scen.times, args.jobs)
    unit_max = 0.0
    for i, t, unit, rows in results:
        run.csv("state_t%02d.csv" % i, ["x", "re_u", "im_u"], rows)
        unit_max = max(unit_max, unit)
    run.csv("propagate.csv", ["t", "unitarity_defect"],
            [(t, u) for _, t, u, _ in results])
    run.summary["unitarity_defect_max"] = unit_max
    run.check(unit_max <= 1e-8, "unitarity defect %.3e > 1e-8" % unit_max)


def _cmd_dyson(scen, run, args):
    prob = scen.problem()
    rows = []
    summary_defects = {}

    def one(i, t):
        dy = dyson_terms(prob, t, scen.dyson_N, scen.quad_nodes, scen.panels,
                         certify=True)
        out = []
        for N in range(scen.dyson_N + 1):
            defect = regularizer_defect(prob, t, N, scen.quad_nodes,
                                        scen.panels, dyson=dy)
            r = residual_symbol(prob, t, N, scen.quad_nodes, scen.panels,
                                dyson=dy)
            fit = shubin_fit(np.abs(r), prob.grid)
            out.append((t, N, defect, fit.order_estimate,
                        dy.mesh_halving_delta))
        return i, out

    results = _parallel(one, scen.times, args.jobs)
    for i, out in results:
        rows.extend(out)
        defs = [row[2] for row in out]
        summary_defects["t%g" % out[0][0]] = defs
        run.check(all(b < a for a, b in zip(defs[:-1], defs[1:])),
                  "defects not strictly decreasing at t=%g: %r"
                  % (out[0][0], defs))
    run.csv("dyson_convergence.csv",
            ["t", "N", "op_defect", "residual_order_fit",
             "mesh_halving_delta"], rows)
    run.summary["op_defects"] = summary_defects


def _cmd_wavefront(scen, run, args):
    prob = scen.problem()
    u0 = scen.build_initial()
    wf0 = estimate_wf(u0, scen.grid, N_threshold=scen.N_threshold)
    run.csv("wavefront_initial.csv", ["angle", "slope", "residual",
                                      "singular"],
            [(a, s, r, bool(m)) for a, s, r, m in
             zip(wf0.angles, wf0.slopes, wf0.residuals, wf0.singular)])
    run.summary["initial_singular_count"] = int(wf0.singular.sum())

    def one(i, t):
        rep = check_propagation(prob, u0, t, N_threshold=scen.N_threshold,
                                tau_deg=scen.tau_ang_deg)
        return i, t, rep

    results = _parallel(one, scen.times, args.jobs)
    rows = []
    for i, t, rep in results:
        rows.append((t, int(rep.wf_in.singular.sum()),
                     int(rep.wf_out.singular.sum()), rep.hausdorff_deg,
                     rep.passed))
        run.check(rep.passed, "containment failed at t=%g: hausdorff %.2f "
                  "deg > %.2f" % (t, rep.hausdorff_deg, scen.tau_ang_deg))
    run.csv("wavefront_propagation.csv",
            ["t", "singular_in", "singular_out", "hausdorff_deg", "passed"],
            rows)


def _cmd_kernel(scen, run, args):
    prob = scen.problem()

    def one(i, t):
        return i, t, kernel_estimates(prob, t)

    results = _parallel(one, scen.times, args.jobs)
    rows = []
    for i, t, rep in results:
        gain = rep.gains[0] if rep.gains else float("nan")
        rows.append((t, rep.off_plane.slope, rep.off_plane.residual,
                     rep.cross[0].slope, rep.cross[1].slope
                     if len(rep.cross) > 1 else float("nan"), gain,
                     rep.mean_weighted_dist))
        run.check(rep.off_plane.slope <= -4.0,
                  "off-plane slope %.2f > -4 at t=%g"
                  % (rep.off_plane.slope, t))
        run.check(not np.isfinite(gain) or gain >= 0.5,
                  "derivative gain %.2f < 0.5 at t=%g" % (gain, t))
    run.csv("kernel_estimates.csv",
            ["t", "off_slope", "off_residual", "cross0_slope", "cross1_slope",
             "gain1", "mean_weighted_dist"], rows)


def _parallel(fn, times, jobs):
    tasks = list(enumerate(times))
    if jobs and jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as ex:
            results = list(ex.map(lambda a: fn(*a), tasks))
    else:
        results = [fn(i, t) for i, t in tasks]
    return sorted(results, key=lambda r: r[0])


_DISPATCH = {
    "transform": _cmd_transform,
    "propagate": _cmd_propagate,
    "dyson-convergence": _cmd_dyson,
    "wavefront": _cmd_wavefront,
    "kernel-estimates": _cmd_kernel,
}


def main(argv=None):
    ap = argparse.ArgumentParser(
        prog="phasecalc",
        description="Phase-space calculus runs driven by scenario files.")
    ap.add_argument("command", choices=_COMMANDS)
    ap.add_argument("scenario", help="path to a scenario YAML file")
    ap.add_argument("--out", required=True, help="output directory")
    ap.add_argument("--assert", dest="assert_on", action="store_true",
                    help="enable acceptance assertions (exit 4 on failure)")
    ap.add_argument("--jobs", type=int, default=1,
                    help="parallel workers over the time list")
    ap.add_argument("--oracle", action="store_true",
                    help="add slow independent cross-checks")
    args = ap.parse_args(argv)
    try:
        scen = load_scenario(args.scenario)
        run = _Run(args.command, scen, args.out, args.assert_on)
        _DISPATCH[args.command](scen, run, args)
        code = run.finish()
    except (ParseError, ConfigError) as e:
        print("phasecalc: configuration error: %s" % e, file=sys.stderr)
        return 2
    except GuardError as e:
        print("phasecalc: guard: %s" % e, file=sys.stderr)
        return 3
    if code == 4:
        for msg in run.failures:
            print("phasecalc: assertion failed: %s" % msg, file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
