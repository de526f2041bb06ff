"""Experiment files -> computations -> ``result.json`` (+ ``series.csv``).

Usage::

    topophase SPEC [--out DIR] [--threads N] [--seed S] [--strict]

SPEC is TOML (or JSON).  The ``[experiment]`` table picks the mode:
identities, phase, spectrum, spin1, scalar, evolve or duality.

Exit codes: 0 all checks passed, 1 a check failed, 2 invalid spec,
3 runtime or numerical failure.
"""
import argparse
import csv
import io
import json
import math
import re
import sys
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

from . import __version__, clifford, currents, diracsim, holonomy, multispin
from ._accel import backend_name, set_threads
from .fieldcfg import AC, HMW, FieldConfig, GeometryError

SCHEMA_VERSION = 1
MODES = ("identities", "phase", "spectrum", "spin1", "scalar", "evolve", "duality")

EXIT_OK, EXIT_CHECK, EXIT_SPEC, EXIT_RUNTIME = 0, 1, 2, 3

DEFAULT_TOLERANCES = {
    "residual": 1e-12,
    "eigen": 1e-10,
    "quadrature": 1e-9,
    "discrepancy": 1e-8,
    "phase_rel": 0.02,
    "phase_abs": 1e-6,
    "norm_drift": 1e-6,
    "block": 1e-12,
    "fidelity": 0.999,
    "order_low": 3.5,
    "order_high": 4.5,
    "seagull_ratio": 10.0,
}

# allowed keys per table; nested tables map to their own key sets
SCHEMA = {
    "experiment": {"mode", "seed", "threads", "effect", "description"},
    "sources": {"electric", "magnetic"},
    "particle": {"m", "mu_m", "mu_e", "kappa_m", "tau_m", "kappa_e", "e", "S", "S_m", "s_hat",
                 "s_prime", "g", "k", "Lambda"},
    "geometry": {"path", "arms", "grid", "region", "spacings", "base"},
    "tolerances": set(DEFAULT_TOLERANCES),
    "sweep": {"parameter", "values"},
    "evolve": {"dt", "guard_radius", "snapshot_every", "boundary", "absorb_width", "gauge"},
    "spectrum": {"draws"},
    "spin1": {"draws"},
    "output": {"series"},
}
NESTED = {
    ("geometry", "path"): {"kind", "vertices", "closed", "center", "radius", "n", "turns", "ccw", "side"},
    ("geometry", "arms"): {"start", "end", "offset", "upper", "lower", "momentum", "width", "clearance"},
    ("geometry", "grid"): {"n", "h"},
    ("evolve", "gauge"): {"region", "duration", "center", "momentum", "width", "n", "h", "grid_center", "base"},
}
SOURCE_KEYS = {"position", "strength"}


@dataclass
class Diagnostic:
    key: str
    message: str
    line: int = None

    def to_dict(self):
        return {"key": self.key, "message": self.message, "line": self.line}

    def __str__(self):
        where = f"line {self.line}: " if self.line else ""
        return f"{where}{self.key}: {self.message}"


class SpecError(ValueError):
    def __init__(self, diagnostics):
        super().__init__("; ".join(str(d) for d in diagnostics))
        self.diagnostics = diagnostics


@dataclass
class ExperimentSpec:
    mode: str
    config: FieldConfig
    particle: dict = field(default_factory=dict)
    geometry: dict = field(default_factory=dict)
    tolerances: dict = field(default_factory=lambda: dict(DEFAULT_TOLERANCES))
    sweep: dict = None
    evolve: dict = field(default_factory=dict)
    options: dict = field(default_factory=dict)
    output: dict = field(default_factory=dict)
    seed: int = 0
    threads: int = 1
    effect: str = AC

    def to_dict(self):
        return {
            "mode": self.mode,
            "effect": self.effect,
            "seed": self.seed,
            "threads": self.threads,
            "sources": self.config.to_dict(),
            "particle": self.particle,
            "geometry": self.geometry,
            "tolerances": self.tolerances,
            "sweep": self.sweep,
            "evolve": self.evolve,
            "options": self.options,
            "output": self.output,
        }


# ------------------------------------------------------------------ parsing

def _line_of(text, key, section=None):
    """Best-effort 1-based line of ``key`` (after ``section``'s header when given)."""
    lines = text.splitlines()
    start = 0
    if section:
        hdr = re.compile(r'^\s*\[+\s*"?' + re.escape(section) + r'"?(\.[^\]]*)?\s*\]+|^\s*"' + re.escape(section) + r'"\s*:')
        for i, ln in enumerate(lines):
            if hdr.search(ln):
                start = i
                break
        else:
            if key is None:
                return None
    if key is None:
        return start + 1
    pat = re.compile(r'(^|[\s{,])"?' + re.escape(key) + r'"?\s*[=:]')
    for i in range(start, len(lines)):
        if pat.search(lines[i]):
            return i + 1
    return start + 1 if section else None


def load_document(text, fmt=None):
    if fmt is None:
        fmt = "json" if text.lstrip().startswith("{") else "toml"
    try:
        if fmt == "json":
            return json.loads(text)
        return tomllib.loads(text)
    except (json.JSONDecodeError, tomllib.TOMLDecodeError) as exc:
        line = getattr(exc, "lineno", None)
        if line is None:
            m = re.search(r"line (\d+)", str(exc))
            line = int(m.group(1)) if m else None
        raise SpecError([Diagnostic("<document>", f"syntax error: {exc}", line)]) from exc


def _is_num(x):
    return isinstance(x, (int, float)) and not isinstance(x, bool)


def _exact(x):
    """Numbers as written: ints stay ints, decimals and strings like '1/3' become Fractions."""
    if isinstance(x, str):
        return Fraction(x)
    if isinstance(x, float) and math.isfinite(x):
        return Fraction(repr(x))
    return x


def parse_spec(text, strict=False, fmt=None):
    """Validate a spec document; raises :class:`SpecError` listing every problem found."""
    doc = load_document(text, fmt)
    diags = []

    def bad(key, msg, section=None, leaf=None):
        diags.append(Diagnostic(key, msg, _line_of(text, leaf, section)))

    if not isinstance(doc, dict):
        raise SpecError([Diagnostic("<document>", "top level must be a table")])
    for sec, val in doc.items():
        if sec not in SCHEMA:
            if strict:
                bad(sec, "unknown table", sec)
            continue
        if not isinstance(val, dict):
            bad(sec, "must be a table", sec)
            continue
        if strict:
            for k, v in val.items():
                if k not in SCHEMA[sec]:
                    bad(f"{sec}.{k}", "unknown key", sec, k)
                elif (sec, k) in NESTED and isinstance(v, dict):
                    for kk in v:
                        if kk not in NESTED[(sec, k)]:
                            bad(f"{sec}.{k}.{kk}", "unknown key", sec, kk)
    if diags:
        raise SpecError(diags)

    exp = doc.get("experiment", {})
    mode = exp.get("mode")
    if mode not in MODES:
        bad("experiment.mode", f"must be one of {', '.join(MODES)}", "experiment", "mode")
        raise SpecError(diags)
    effect = exp.get("effect", AC)
    if effect not in (AC, HMW):
        bad("experiment.effect", "must be 'AC' or 'HMW'", "experiment", "effect")
    seed = exp.get("seed", 0)
    if not isinstance(seed, int) or isinstance(seed, bool) or seed < 0:
        bad("experiment.seed", "must be a non-negative integer", "experiment", "seed")
    threads = exp.get("threads", 1)
    if not isinstance(threads, int) or isinstance(threads, bool) or threads < 1:
        bad("experiment.threads", "must be a positive integer", "experiment", "threads")

    # sources
    srcs = doc.get("sources", {})
    parsed = {}
    for species in ("electric", "magnetic"):
        items = srcs.get(species, [])
        out = []
        if not isinstance(items, list):
            bad(f"sources.{species}", "must be a list of {position, strength}", "sources", species)
            continue
        for i, it in enumerate(items):
            key = f"sources.{species}[{i}]"
            if not isinstance(it, dict) or not {"position", "strength"} <= set(it):
                bad(key, "needs 'position' and 'strength'", "sources", species)
                continue
            if strict and set(it) - SOURCE_KEYS:
                bad(key, f"unknown key(s) {sorted(set(it) - SOURCE_KEYS)}", "sources", species)
            pos = it["position"]
            if not (isinstance(pos, list) and len(pos) == 2 and all(_is_num(c) for c in pos)):
                bad(f"{key}.position", "must be [x, y]", "sources", "position")
                continue
            try:
                q = _exact(it["strength"])
            except (ValueError, ZeroDivisionError):
                bad(f"{key}.strength", "not a number", "sources", "strength")
                continue
            out.append({"position": tuple(float(c) for c in pos), "strength": q})
        parsed[species] = out
    config = None
    try:
        config = FieldConfig.from_sources(
            [(s["position"], s["strength"]) for s in parsed.get("electric", [])],
            [(s["position"], s["strength"]) for s in parsed.get("magnetic", [])])
    except ValueError as exc:
        bad("sources", str(exc), "sources")

    tol = dict(DEFAULT_TOLERANCES)
    for k, v in doc.get("tolerances", {}).items():
        if k in tol:
            if not _is_num(v) or v <= 0:
                bad(f"tolerances.{k}", "must be > 0", "tolerances", k)
            else:
                tol[k] = float(v)

    particle = dict(doc.get("particle", {}))
    geometry = dict(doc.get("geometry", {}))
    evolve = dict(doc.get("evolve", {}))
    sweep = doc.get("sweep")
    options = {"spectrum": doc.get("spectrum", {}), "spin1": doc.get("spin1", {})}

    def need(section, table, keys):
        for k in keys:
            if k not in table:
                bad(f"{section}.{k}", f"required for mode '{mode}'", section)

    for k in ("s_hat", "s_prime"):
        if k in particle and particle[k] not in (1, -1):
            bad(f"particle.{k}", "must be +1 or -1", "particle", k)
    if "m" in particle and (not _is_num(particle["m"]) or particle["m"] <= 0):
        bad("particle.m", "must be > 0", "particle", "m")

    moment = "mu_m" if effect == AC else "mu_e"
    if mode in ("phase", "duality"):
        need("particle", particle, ([moment] if not sweep else []) + ["s_hat"])
        _check_path(geometry, bad, required=True)
    elif mode == "spectrum":
        need("particle", particle, ["S"])
        if "S" in particle:
            try:
                multispin.as_spin(particle["S"])
            except (ValueError, ZeroDivisionError) as exc:
                bad("particle.S", str(exc), "particle", "S")
    elif mode == "spin1":
        need("particle", particle, ["kappa_m", "tau_m", "e", "m", "s_prime"])
    elif mode == "scalar":
        need("particle", particle, ["g"])
        need("geometry", geometry, ["region"])
        _check_region(geometry.get("region"), "geometry.region", bad)
    elif mode == "evolve":
        need("particle", particle, ["mu_m", "s_hat"])
        need("geometry", geometry, ["arms"])
        need("evolve", evolve, ["dt"])
        arms = geometry.get("arms", {})
        if arms and not ({"start", "end", "offset"} <= set(arms) or {"upper", "lower"} <= set(arms)):
            bad("geometry.arms", "give start/end/offset or explicit upper/lower vertices", "geometry", "arms")
        if "dt" in evolve and (not _is_num(evolve["dt"]) or evolve["dt"] <= 0):
            bad("evolve.dt", "must be > 0", "evolve", "dt")
        if "gauge" in evolve:
            need("evolve.gauge", evolve["gauge"], ["region", "duration", "center", "momentum", "width"])
            _check_region(evolve["gauge"].get("region"), "evolve.gauge.region", bad)

    if sweep is not None:
        if not isinstance(sweep, dict) or "values" not in sweep or not isinstance(sweep["values"], list) \
                or not sweep["values"] or not all(_is_num(v) for v in sweep["values"]):
            bad("sweep.values", "must be a non-empty list of numbers", "sweep", "values")
        elif sweep.get("parameter", moment) != moment:
            bad("sweep.parameter", f"only '{moment}' can be swept", "sweep", "parameter")
        elif mode not in ("phase", "duality"):
            bad("sweep", f"sweeps are supported in phase and duality modes, not '{mode}'", "sweep")

    if diags:
        raise SpecError(diags)
    return ExperimentSpec(mode=mode, config=config, particle=particle, geometry=geometry,
                          tolerances=tol, sweep=sweep, evolve=evolve, options=options,
                          output=dict(doc.get("output", {})), seed=seed, threads=threads,
                          effect=effect)


def _check_region(region, key, bad):
    if region is None:
        return
    if not (isinstance(region, list) and len(region) == 4 and all(_is_num(v) for v in region)
            and region[0] < region[1] and region[2] < region[3]):
        bad(key, "must be [xmin, xmax, ymin, ymax] with positive extent", key.split(".")[0], "region")


def _check_path(geometry, bad, required):
    p = geometry.get("path")
    if p is None:
        if required:
            bad("geometry.path", "required", "geometry")
        return
    if not isinstance(p, dict):
        bad("geometry.path", "must be a table", "geometry", "path")
        return
    if p.get("closed", True) is not True:
        bad("geometry.path.closed", "path must be closed", "geometry", "closed")
    try:
        build_path(p)
    except (GeometryError, KeyError, TypeError, ValueError) as exc:
        bad("geometry.path", f"invalid path: {exc}", "geometry", "path")


def build_path(p):
    kind = p.get("kind", "polygon")
    if kind == "polygon":
        return holonomy.PlanarPath(np.asarray(p["vertices"], dtype=float), closed=p.get("closed", True))
    if kind == "circle":
        return holonomy.PlanarPath.circle(p.get("center", (0.0, 0.0)), p.get("radius", 1.0),
                                          p.get("n", 64), p.get("turns", 1), p.get("ccw", True))
    if kind == "square":
        return holonomy.PlanarPath.square(p.get("center", (0.0, 0.0)), p.get("side", 2.0), p.get("ccw", True))
    raise ValueError(f"unknown path kind {kind!r}")


# ------------------------------------------------------------------ running

@dataclass
class RunOutput:
    results: dict
    checks: list
    series: list = None
    series_columns: tuple = ()

    @property
    def passed(self):
        return all(c["passed"] for c in self.checks)


def _check(name, value, tol, passed):
    return {"name": name, "value": value, "tolerance": tol, "passed": bool(passed)}


def _rng(spec):
    return np.random.default_rng(spec.seed)


def run_identities(spec):
    rep = clifford.build_representation()
    rep_d = clifford.identity_report(rep)
    tol = spec.tolerances["residual"]
    checks = [_check(f"product_identity[{k}]", v, 0.0, v == 0.0) for k, v in rep_d["product_identity"].items()]
    checks.append(_check("s_from_sigma12", rep_d["s_from_sigma12"], 0.0, rep_d["s_from_sigma12"] == 0.0))
    checks.append(_check("anticommutator_max", rep_d["anticommutator_max"], tol, rep_d["anticommutator_max"] <= tol))
    checks.append(_check("s_squared", rep_d["s_squared"], tol, rep_d["s_squared"] <= tol))
    return RunOutput(rep_d, checks)


def _phase_call(spec, config, kind, moment, path):
    f = holonomy.ac_phase if kind == AC else holonomy.hmw_phase
    return f(config, moment, spec.particle["s_hat"], path, tol=spec.tolerances["quadrature"])


def _moment_values(spec):
    key = "mu_m" if spec.effect == AC else "mu_e"
    if spec.sweep:
        return key, [_exact(v) for v in spec.sweep["values"]]
    return key, [_exact(spec.particle[key])]


def run_phase(spec):
    path = build_path(spec.geometry["path"])
    key, values = _moment_values(spec)
    records, checks, rows = [], [], []
    tol = spec.tolerances["discrepancy"]
    for mu in values:
        r = _phase_call(spec, spec.config, spec.effect, mu, path)
        d = r.to_dict()
        d[key] = float(mu)
        d["analytic_provenance"] = ("theta = -s_hat mu_m Lambda_e" if spec.effect == AC
                                    else "theta = +s_hat mu_e Lambda_m")
        records.append(d)
        lim = tol * abs(float(mu))
        checks.append(_check(f"discrepancy[{key}={float(mu)}]", r.discrepancy, lim, r.discrepancy <= lim))
        rows.append((float(mu), r.theta, r.analytic_theta, r.discrepancy))
    results = records[0] if not spec.sweep else {"sweep": records}
    series = rows if spec.sweep else None
    return RunOutput(results, checks, series, (key, "theta", "analytic_theta", "discrepancy"))


def run_duality(spec):
    path = build_path(spec.geometry["path"])
    key, values = _moment_values(spec)
    ac_cfg = spec.config if spec.effect == AC else spec.config.dual()
    records, checks, rows = [], [], []
    for mu in values:
        ac = holonomy.ac_phase(ac_cfg, mu, spec.particle["s_hat"], path, tol=spec.tolerances["quadrature"])
        hmw = holonomy.hmw_phase(ac_cfg.dual(), mu, spec.particle["s_hat"], path, tol=spec.tolerances["quadrature"])
        swap_ok = ac.line_integral == hmw.line_integral and hmw.analytic_exact == -ac.analytic_exact
        records.append({"moment": float(mu), "AC": ac.to_dict(), "HMW": hmw.to_dict(),
                        "swap_consistent": swap_ok})
        checks.append(_check(f"swap_consistent[{float(mu)}]", abs(ac.line_integral - hmw.line_integral), 0.0, swap_ok))
        rows.append((float(mu), ac.theta, hmw.theta, ac.line_integral, hmw.line_integral, int(swap_ok)))
    results = {"pairs": records}
    return RunOutput(results, checks, rows if spec.sweep else None,
                     ("moment", "theta_AC", "theta_HMW", "integral_AC", "integral_HMW", "swap_consistent"))


def run_spectrum(spec):
    S = multispin.as_spin(spec.particle["S"])
    p = spec.particle
    draws = int(spec.options["spectrum"].get("draws", 20))
    tol = spec.tolerances
    _, report = multispin.build_symmetric_basis(S)
    sp = multispin.total_s_operator(S)
    rng = _rng(spec)
    comm = []
    for _ in range(draws):
        k = rng.normal(size=3)
        pot = np.r_[0.0, rng.normal(size=2)]
        comm.append(multispin.verify_bw_commutation(S, k, pot, rng.uniform(-2, 2), rng.uniform(0.1, 3))["commutator"])
    bw = multispin.verify_bw_commutation(S, p.get("k", [1.0, 0.3, -0.2]), [0, 0.4, -0.7],
                                         p.get("mu_m", 0.5), p.get("m", 1.0))
    results = {
        "S": str(S),
        "dimension": report["dimension"],
        "expected_dimension": report["expected_dimension"],
        "projector": report,
        "spectrum": sp.distinct(),
        "expected_spectrum": multispin.expected_spectrum(S),
        "eigen_residual": sp.rounding_residual,
        "commutator_max": max(comm) if comm else 0.0,
        "draws": draws,
        "leakage": {str(k): v for k, v in bw["leakage"].items()},
    }
    checks = [
        _check("dimension", report["dimension"], report["expected_dimension"],
               report["dimension"] == report["expected_dimension"]),
        _check("spectrum", 0.0, 0.0, sp.distinct() == multispin.expected_spectrum(S)),
        _check("eigen_residual", sp.rounding_residual, tol["eigen"], sp.rounding_residual < tol["eigen"]),
        _check("commutator", results["commutator_max"], tol["residual"], results["commutator_max"] < tol["residual"]),
    ]
    if "S_m" in p and "Lambda" in p:
        mu = _exact(p.get("mu_m", 1))
        theta = multispin.bw_phase(S, _exact(p["S_m"]), mu, _exact(p["Lambda"]), spec.effect)
        results["bw_phase"] = float(theta)
        results["bw_phase_exact"] = str(theta)
    return RunOutput(results, checks)


def run_spin1(spec):
    p = spec.particle
    tol = spec.tolerances["residual"]
    mom = currents.moments_spin1(_exact(p["kappa_m"]), _exact(p["tau_m"]), _exact(p["e"]), _exact(p["m"]))
    draws = int(spec.options["spin1"].get("draws", 100))
    rng = _rng(spec)
    dual, proca, dip = 0.0, 0.0, 0.0
    m = float(p["m"])
    for _ in range(draws):
        pp = rng.normal(size=3) + 1j * rng.normal(size=3)
        pm = rng.normal(size=3) + 1j * rng.normal(size=3)
        dual = max(dual, currents.dual_current_identity(pp, pm))
        back = currents.proca_decompose(currents.proca_compose(pp, pm, m))
        proca = max(proca, float(max(np.abs(back[0] - pp).max(), np.abs(back[1] - pm).max())))
        F = clifford.field_tensor(*rng.normal(size=3))
        dip = max(dip, currents.dipole_dual_residual(pp, pm, F, float(p["kappa_m"]), m, spec.effect))
    results = {"moments": mom.to_dict(), "dual_current_residual": dual, "proca_roundtrip": proca,
               "dipole_dual_residual": dip, "draws": draws}
    checks = [
        _check("dual_current_identity", dual, tol, dual < tol),
        _check("proca_roundtrip", proca, tol, proca < tol),
        _check("quadrupole_free_iff_equal", float(mom.Q_e), 0.0,
               (mom.Q_e == 0) == (mom.kappa_m == mom.tau_m)),
    ]
    if "Lambda" in p and mom.quadrupole_free:
        th = currents.spin1_phase(p["s_prime"], _exact(p["kappa_m"]), _exact(p["m"]), _exact(p["Lambda"]),
                                  spec.effect, tau=_exact(p["tau_m"]))
        results["phase"] = float(th)
        results["phase_exact"] = str(th)
    return RunOutput(results, checks)


def run_scalar(spec):
    p, g = spec.particle, spec.geometry
    spacings = g.get("spacings", [0.04, 0.02, 0.01, 0.005])
    wave = currents.PlaneWave(tuple(p.get("k", (0.7, 0.3))), float(p.get("m", 1.0)))
    kind = spec.effect
    rows, with_s, without = [], [], []
    for hh in spacings:
        a = currents.scalar_gauge_residual(spec.config, float(p["g"]), True, wave, tuple(g["region"]), hh, kind,
                                           base=g.get("base"))
        b = currents.scalar_gauge_residual(spec.config, float(p["g"]), False, wave, tuple(g["region"]), hh, kind,
                                           base=g.get("base"))
        with_s.append(a)
        without.append(b)
        rows.append((hh, a, b))
    ratios = [with_s[i] / with_s[i + 1] for i in range(len(with_s) - 1)]
    tol = spec.tolerances
    sep = without[-1] / with_s[-1] if with_s[-1] > 0 else math.inf
    checks = [_check(f"order_ratio[{i}]", r, [tol["order_low"], tol["order_high"]],
                     tol["order_low"] <= r <= tol["order_high"]) for i, r in enumerate(ratios)]
    checks.append(_check("seagull_separation", sep, tol["seagull_ratio"], sep > tol["seagull_ratio"]))
    results = {"spacings": spacings, "with_seagull": with_s, "without_seagull": without,
               "ratios": ratios, "separation": sep}
    return RunOutput(results, checks, rows, ("spacing", "residual_with_seagull", "residual_without_seagull"))


def run_evolve(spec):
    p, g, ev = spec.particle, spec.geometry, spec.evolve
    arms = g["arms"]
    grid = g.get("grid", {})
    kw = {k: arms[k] for k in ("momentum", "width", "clearance") if k in arms}
    kw.update(n=int(grid.get("n", 256)), h=float(grid.get("h", 0.3)))
    if "upper" in arms:
        geo = diracsim.TwoArmGeometry(tuple(map(tuple, arms["upper"])), tuple(map(tuple, arms["lower"])), **kw)
    else:
        geo = diracsim.TwoArmGeometry.symmetric(arms["start"], arms["end"], arms["offset"], **kw)
    params = diracsim.SimParams(m=float(p.get("m", 1.0)), mu_m=float(p["mu_m"]), s_hat=int(p["s_hat"]),
                                dt=float(ev["dt"]), guard_radius=float(ev.get("guard_radius", 1.0)),
                                kind=spec.effect)
    res = diracsim.interfere(spec.config, params, geo, snapshot_every=int(ev.get("snapshot_every", 0)),
                             workers=spec.threads)
    tol = spec.tolerances
    results = {"interference": res.to_dict()}
    if params.mu_m == 0:
        checks = [_check("phase_abs", abs(res.extracted), tol["phase_abs"], abs(res.extracted) <= tol["phase_abs"])]
    else:
        checks = [_check("phase_rel", res.rel_error, tol["phase_rel"], res.rel_error <= tol["phase_rel"])]
    checks.append(_check("norm_drift", res.norm_drift, tol["norm_drift"], res.norm_drift < tol["norm_drift"]))
    checks.append(_check("opposite_block", res.opposite_block, tol["block"], res.opposite_block < tol["block"]))
    if "gauge" in ev:
        gg = ev["gauge"]
        ggrid = diracsim.Grid(int(gg.get("n", 128)), int(gg.get("n", 128)), float(gg.get("h", 0.25)),
                              tuple(gg.get("grid_center", (0.0, 0.0))))
        gr = diracsim.gauge_equivalence(spec.config, params, tuple(gg["region"]), float(gg["duration"]), ggrid,
                                        (tuple(gg["center"]), tuple(gg["momentum"]), float(gg["width"])),
                                        base=gg.get("base"), workers=spec.threads)
        results["gauge_equivalence"] = gr.to_dict()
        checks.append(_check("fidelity", gr.fidelity, tol["fidelity"], gr.fidelity > tol["fidelity"]))
        checks.append(_check("contained", gr.leaked_norm, 1e-6, gr.contained))
    series = [tuple(r) for r in res.series] if res.series else None
    return RunOutput(results, checks, series, diracsim.SERIES_COLUMNS)


RUNNERS = {
    "identities": run_identities,
    "phase": run_phase,
    "duality": run_duality,
    "spectrum": run_spectrum,
    "spin1": run_spin1,
    "scalar": run_scalar,
    "evolve": run_evolve,
}


def run(spec):
    """Dispatch a validated spec; returns (exit_code, document, series_rows, columns)."""
    set_threads(spec.threads)
    try:
        out = RUNNERS[spec.mode](spec)
    except (ValueError, ArithmeticError, RuntimeError, MemoryError) as exc:
        doc = _document(spec, {}, [], error={"type": type(exc).__name__, "message": str(exc),
                                             "error_bound": getattr(exc, "error_bound", None)})
        return EXIT_RUNTIME, doc, None, ()
    doc = _document(spec, out.results, out.checks)
    return (EXIT_OK if out.passed else EXIT_CHECK), doc, out.series, out.series_columns


def _document(spec, results, checks, error=None):
    doc = {
        "schema": SCHEMA_VERSION,
        "version": __version__,
        "mode": spec.mode if spec else None,
        "spec": spec.to_dict() if spec else None,
        "results": results,
        "checks": checks,
        "passed": error is None and all(c["passed"] for c in checks),
        "backend": backend_name(),
    }
    if error is not None:
        doc["error"] = error
    return doc


# ------------------------------------------------------------------ output

def _fmt_float(x):
    if math.isnan(x) or math.isinf(x):
        return "null"
    s = format(x, ".17g")
    if not any(c in s for c in ".en"):
        s += ".0"
    return s


def to_json(obj, indent=0):
    """Deterministic JSON: sorted keys, floats with 17 significant digits."""
    pad = "  " * (indent + 1)
    end = "  " * indent
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {to_json(obj[k], indent + 1)}" for k in sorted(obj, key=str)]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        return "[\n" + ",\n".join(pad + to_json(v, indent + 1) for v in obj) + "\n" + end + "]"
    if isinstance(obj, np.ndarray):
        return to_json(obj.tolist(), indent)
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if obj is None:
        return "null"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _fmt_float(float(obj))
    if isinstance(obj, Fraction):
        return json.dumps(str(obj))
    if isinstance(obj, complex):
        return to_json([obj.real, obj.imag], indent)
    return json.dumps(str(obj))


def series_csv(rows, columns):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([format(float(v), ".17g") if isinstance(v, (float, np.floating)) else v for v in r])
    return buf.getvalue()


def emit(doc, out_dir, series=None, columns=()):
    """Write ``result.json`` (and ``series.csv`` when rows exist); returns written paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = [out_dir / "result.json"]
    paths[0].write_text(to_json(doc) + "\n", encoding="utf-8", newline="\n")
    if series:
        paths.append(out_dir / "series.csv")
        paths[1].write_text(series_csv(series, columns), encoding="utf-8", newline="\n")
    return paths


def main(argv=None):
    ap = argparse.ArgumentParser(prog="topophase", description=__doc__.splitlines()[0])
    ap.add_argument("spec", help="experiment file (TOML or JSON)")
    ap.add_argument("--out", default=".", help="output directory (default: current)")
    ap.add_argument("--threads", type=int, help="override experiment.threads")
    ap.add_argument("--seed", type=int, help="override experiment.seed")
    ap.add_argument("--strict", action="store_true", help="reject unknown keys")
    args = ap.parse_args(argv)

    spec = None
    try:
        text = Path(args.spec).read_text(encoding="utf-8")
        fmt = "json" if args.spec.endswith(".json") else None
        spec = parse_spec(text, strict=args.strict, fmt=fmt)
    except OSError as exc:
        doc = _document(None, {}, [], error={"type": "OSError", "message": str(exc)})
        emit(doc, args.out)
        print(f"topophase: {exc}", file=sys.stderr)
        return EXIT_SPEC
    except SpecError as exc:
        doc = _document(None, {}, [], error={"type": "SpecError", "message": str(exc),
                                             "diagnostics": [d.to_dict() for d in exc.diagnostics]})
        emit(doc, args.out)
        for d in exc.diagnostics:
            print(f"topophase: {d}", file=sys.stderr)
        return EXIT_SPEC
    if args.threads is not None:
        spec.threads = args.threads
    if args.seed is not None:
        spec.seed = args.seed
    code, doc, series, cols = run(spec)
    emit(doc, args.out, series, cols)
    if code == EXIT_RUNTIME:
        print(f"topophase: {doc['error']['type']}: {doc['error']['message']}", file=sys.stderr)
    elif code == EXIT_CHECK:
        failed = [c["name"] for c in doc["checks"] if not c["passed"]]
        print(f"topophase: failed checks: {', '.join(failed)}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
