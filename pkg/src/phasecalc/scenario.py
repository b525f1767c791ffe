"""Scenario files: validated YAML descriptions of an evolution problem
plus run parameters, with a canonical content hash for reproducibility.

The hash is taken over the parsed document re-serialized as canonical
JSON (sorted keys, no whitespace), so formatting, key order, and comments
in the YAML never change it -- only the content does.
"""

import hashlib
import json

import numpy as np
import yaml

from .errors import ConfigError, ParseError
from . import phasespace
from .expressions import parse_symbol_expr
from .symplectic import QuadraticHamiltonian, anisotropic, free, harmonic

_TOP_KEYS = {"grid", "hamiltonian", "perturbation", "initial", "times",
             "dyson", "thresholds"}
_GRID_KEYS = {"d", "n", "L"}
_PERT_KEYS = {"family", "expr", "eps", "delta", "width"}
_INIT_KEYS = {"kind", "center", "momentum", "width", "k", "a",
              "envelope_width", "A"}
_DYSON_KEYS = {"N", "quad_nodes", "panels"}
_THRESH_KEYS = {"N_threshold", "tau_ang_deg"}


def _check_keys(section, d, allowed):
    if not isinstance(d, dict):
        raise ConfigError("section %r must be a mapping" % section)
    bad = set(d) - allowed
    if bad:
        raise ConfigError(
            "unknown field(s) %s in %r; allowed: %s"
            % (", ".join(sorted(repr(k) for k in bad)), section,
               ", ".join(sorted(allowed))))


class Scenario:
    """Parsed and validated scenario: grid/problem builders plus the raw
    document and its canonical hash."""

    def __init__(self, raw, path=None):
        if not isinstance(raw, dict):
            raise ConfigError("scenario document must be a mapping")
        _check_keys("scenario", raw, _TOP_KEYS)
        self.raw = raw
        self.path = path
        self.hash = canonical_hash(raw)

        g = dict(raw.get("grid", {}))
        _check_keys("grid", g, _GRID_KEYS)
        self.grid = phasespace.make_grid(g.get("d", 1), g.get("n", 256),
                                         g.get("L", 12.0))

        self.H = _build_hamiltonian(raw.get("hamiltonian", "harmonic"))

        pert = raw.get("perturbation", {"family": "none"})
        self.p, self.delta = _build_perturbation(pert, self.grid)

        init = dict(raw.get("initial", {"kind": "gaussian"}))
        _check_keys("initial", init, _INIT_KEYS)
        self.initial_spec = init

        times = raw.get("times", [0.5])
        if not isinstance(times, (list, tuple)) or not times:
            raise ConfigError("'times' must be a non-empty list")
        try:
            self.times = [float(t) for t in times]
        except (TypeError, ValueError):
            raise ConfigError("'times' entries must be numbers")
        if any(t < 0 for t in self.times):
            raise ConfigError("'times' entries must be >= 0")

        dy = dict(raw.get("dyson", {}))
        _check_keys("dyson", dy, _DYSON_KEYS)
        self.dyson_N = int(dy.get("N", 4))
        self.quad_nodes = int(dy.get("quad_nodes", 10))
        self.panels = int(dy.get("panels", 2))

        th = dict(raw.get("thresholds", {}))
        _check_keys("thresholds", th, _THRESH_KEYS)
        self.N_threshold = float(th.get("N_threshold", 4))
        self.tau_ang_deg = float(th.get("tau_ang_deg", 5.0))

    def build_initial(self):
        init = self.initial_spec
        kind = init.get("kind", "gaussian")
        g = self.grid
        if kind == "gaussian":
            return phasespace.gaussian_state(
                g, init.get("center", 0.0), init.get("momentum", 0.0),
                init.get("width", 1.0))
        if kind == "hermite":
            return phasespace.hermite_state(g, int(init.get("k", 0)))
        if kind == "delta":
            return phasespace.delta_state(g, init.get("center", 0.0))
        if kind == "chirp":
            return phasespace.chirp_state(g, float(init.get("a", 1.0)),
                                          init.get("envelope_width"))
        if kind == "lagrangian":
            return phasespace.chirp_state(g, float(init.get("A", 1.0)))
        raise ConfigError(
            "unknown initial kind %r; allowed: gaussian, hermite, delta, "
            "chirp, lagrangian" % kind)

    def problem(self):
        from .propagator import EvolutionProblem
        return EvolutionProblem(self.grid, self.H, self.p, delta=self.delta)


def _build_hamiltonian(spec):
    if isinstance(spec, str):
        if spec == "harmonic":
            return harmonic(1)
        if spec == "free":
            return free(1)
        raise ConfigError("unknown hamiltonian %r; allowed: harmonic, free, "
                          "or a mapping" % spec)
    if isinstance(spec, dict):
        kind = spec.get("kind")
        if kind == "anisotropic":
            _check_keys("hamiltonian", spec, {"kind", "weights"})
            return anisotropic(spec.get("weights", [1.0]))
        if kind == "matrix":
            _check_keys("hamiltonian", spec, {"kind", "Q"})
            try:
                return QuadraticHamiltonian(np.asarray(spec["Q"], dtype=float))
            except KeyError:
                raise ConfigError("hamiltonian kind 'matrix' needs field 'Q'")
        raise ConfigError("hamiltonian mapping needs kind: anisotropic or "
                          "matrix (got %r)" % kind)
    raise ConfigError("hamiltonian must be a string or mapping")


def _build_perturbation(pert, grid):
    _check_keys("perturbation", pert, _PERT_KEYS)
    delta = float(pert.get("delta", 1.0))
    expr = pert.get("expr")
    family = pert.get("family")
    if expr is not None and family is not None:
        raise ConfigError("give either 'family' or 'expr', not both")
    if expr is not None:
        sym = parse_symbol_expr(expr)
        X, XI = grid.mesh()[:2]
        vals = np.asarray(sym(X, XI), dtype=complex)
        if not np.all(np.isfinite(vals)):
            raise ConfigError("expression %r is not finite on the lattice"
                              % expr)
        # cross-check the vectorized evaluator against the scalar one
        rng = np.random.default_rng(0)
        for _ in range(32):
            xs = rng.uniform(-grid.L, grid.L)
            ks = rng.uniform(grid.xi[0], grid.xi[-1])
            a = complex(sym(xs, ks))
            b = complex(sym.eval_scalar(xs, ks))
            if abs(a - b) > 1e-12 * (1.0 + abs(b)):
                raise ConfigError("expression evaluators disagree at "
                                  "(%g, %g)" % (xs, ks))
        return sym, delta
    family = family or "none"
    eps = float(pert.get("eps", 0.2))
    if family == "none":
        return None, delta
    if family == "inverse-bracket":
        return (lambda x, xi:
                eps * (1.0 + x ** 2 + xi ** 2) ** (-0.5 * delta)), delta
    if family == "gaussian-bump":
        width = float(pert.get("width", 2.0))
        return (lambda x, xi:
                eps * np.exp(-(x ** 2 + xi ** 2) / (2.0 * width ** 2))), delta
    raise ConfigError("unknown perturbation family %r; allowed: none, "
                      "inverse-bracket, gaussian-bump (or use 'expr')"
                      % family)


def canonical_hash(doc):
    """sha256 over the canonical JSON serialization of a parsed document."""
    blob = json.dumps(doc, sort_keys=True, separators=(",", ":"),
                      ensure_ascii=True)
    return hashlib.sha256(blob.encode()).hexdigest()


def load_scenario(path):
    try:
        with open(path) as f:
            text = f.read()
    except OSError as e:
        raise ConfigError("cannot read scenario file %s: %s" % (path, e))
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as e:
        mark = getattr(e, "problem_mark", None)
        if mark is not None:
            raise ParseError("bad YAML: %s" % getattr(e, "problem", e),
                             mark.line + 1, mark.column + 1)
        raise ParseError("bad YAML: %s" % e)
    return Scenario(raw, path=path)
