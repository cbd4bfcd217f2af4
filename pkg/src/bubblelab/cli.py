"""Command-line surface: configuration, dispatch, deterministic reports.

Five subcommands: three verification suites (`verify-integrals`,
`verify-bubble`, `verify-hyperbolic`) that write a `verify_report.json`
of identity rows, `corrector` which solves the modal problems and emits
profile CSVs plus a diagnostics JSON, and `locate` which maximizes the
reduced energy over a boundary sample and emits `blowup.json` +
`samples.csv`.

Exit codes: 0 success, 1 numeric or hypothesis failure, 2 configuration
failure.  Reports are byte-deterministic: identical configuration means
identical bytes (fixed seeds, sorted keys, shortest round-trip floats,
no timestamps or timings in any emitted file).

Configuration is one flat JSON document; file paths inside it resolve
relative to the config file's directory.  `--schema` prints the
configuration keys and output formats of a subcommand and exits.
Tolerance semantics: computations always run at fixed internal
precision; the optional `rel_tol` key only loosens pass thresholds
(each identity row uses max(stated bound, rel_tol)), so raising it can
never turn a passing run into a failing one.
"""

import argparse
import json
import math
import os
import sys

import numpy as np

from . import corrector, geom, quad, reduced
from .bubble import (Bubble, alpha_n, bubble_energy,
                     bubble_energy_quadrature, residual_linearized,
                     residual_model)
from .errors import (BubbleLabError, ConfigError, DomainError,
                     HypothesisFailure, NonConvergence, SingularSystem)
from .model import (OVERRIDE_MIN_DIMENSION, SUPPORTED_MIN_DIMENSION,
                    CurvatureFrame, HessianData, ProblemPoint,
                    validate_frame, validate_point)

EXIT_OK = 0
EXIT_NUMERIC = 1
EXIT_CONFIG = 2

# quadrature precision is fixed; config rel_tol only loosens pass bounds
_QUAD_TOL = 1e-12

_CORE_KEYS = {
    "n": 8,
    "K": -56.0,
    "H": 2.0,
    "gamma": 1.0,
    "seed": 1871,
    "rel_tol": None,
    "override_dimension_gate": False,
    "out": None,
}
_GRID_KEYS = {"nr": 400, "nxn": 400, "r_max": 40.0, "stretch": 10.0}

_COMMAND_KEYS = {
    "verify-integrals": set(_CORE_KEYS),
    "verify-bubble": set(_CORE_KEYS),
    "verify-hyperbolic": set(_CORE_KEYS),
    "corrector": set(_CORE_KEYS) | {"frame", "frame_file", "grid"},
    "locate": set(_CORE_KEYS) | {"case", "samples", "frame", "frame_file",
                                 "grid", "hessH", "hessK"},
}


def _schema(command):
    core = {
        "n": "integer dimension, >= 8 (>= 5 with --override-dimension-gate)",
        "K": "prescribed scalar curvature, < 0",
        "H": "prescribed boundary mean curvature, > 0; D = sqrt(n(n-1)) H / sqrt(|K|) must exceed 1",
        "gamma": "perturbation weight gamma(p) > 0 (default 1.0)",
        "seed": "integer seed for every random draw (default 1871)",
        "rel_tol": "optional pass-threshold floor; loosens identity bounds, never tightens",
        "override_dimension_gate": "boolean, same effect as the CLI flag",
        "out": "output directory (the --out flag takes precedence)",
    }
    grid = {"nr": "radial cells >= 16 (default 400)",
            "nxn": "normal cells >= 16 (default 400)",
            "r_max": "truncation radius (default 40.0)",
            "stretch": "algebraic grid stretch (default 10.0)"}
    doc = {"command": command, "config": dict(core),
           "outputs": {"verify_report.json":
                       "command, parameters, identities[{name, passed, "
                       "value, bound, detail}], count, all_passed"}}
    if command == "corrector":
        doc["config"]["frame"] = "'zero' | 'random' | omit and give frame_file"
        doc["config"]["frame_file"] = "path to a curvature-frame JSON, relative to the config file"
        doc["config"]["grid"] = grid
        doc["outputs"] = {
            "corrector.json": "problem, grid, modes[{degree, label, weight, e_csv, psi_csv, info}]",
            "mode<k>_<label>_e.csv / _psi.csv":
                "(nr+1) x (nxn+1) grids, rows = radial index, comma-separated",
            "diagnostics.json": "command, parameters, checks[...], diagnostics, all_passed",
        }
    elif command == "locate":
        doc["config"]["case"] = "'constants' | 'non-constants'"
        doc["config"]["samples"] = ("list of {label, coords, gamma} (constants) "
                                    "or {label, coords, H[, gamma]} (non-constants)")
        doc["config"]["frame"] = "'zero' | 'random' (constants case)"
        doc["config"]["frame_file"] = "path to a curvature-frame JSON (constants case)"
        doc["config"]["grid"] = grid
        doc["config"]["hessH"] = "'identity' or an (n-1)x(n-1) matrix (non-constants case)"
        doc["config"]["hessK"] = "'identity' or an n x n matrix (non-constants case)"
        doc["outputs"] = {
            "blowup.json": "p_star, coords, d_star, rate, case_tag, "
                           "coefficients{E, A, B, S?}, gamma, J_values, "
                           "hypothesis_flags, depth_convention",
            "samples.csv": "columns: sample, E, A, B, d0, G "
                           "(d0/G empty when B <= 0 at that sample)",
        }
    return doc


def _load_config(args, command):
    """Merge file config, defaults and flags; validate; resolve paths."""
    raw = {}
    base_dir = os.getcwd()
    if args.config is not None:
        if not os.path.exists(args.config):
            raise ConfigError(f"config file not found: {args.config}")
        base_dir = os.path.dirname(os.path.abspath(args.config))
        try:
            with open(args.config) as fh:
                raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
        if not isinstance(raw, dict):
            raise ConfigError("config must be a flat JSON object")
    allowed = _COMMAND_KEYS[command]
    unknown = sorted(set(raw) - allowed)
    if unknown:
        raise ConfigError(f"unknown config keys for {command}: "
                          f"{', '.join(unknown)}")

    cfg = dict(_CORE_KEYS)
    cfg.update({k: raw[k] for k in raw if k in _CORE_KEYS})
    for key in ("frame", "frame_file", "case", "samples", "hessH", "hessK"):
        if key in raw:
            cfg[key] = raw[key]
    grid = dict(_GRID_KEYS)
    grid.update(raw.get("grid", {}) or {})
    cfg["grid"] = grid

    if args.override_dimension_gate:
        cfg["override_dimension_gate"] = True
    n = cfg["n"]
    if not isinstance(n, int) or isinstance(n, bool):
        raise ConfigError(f"n must be an integer, got {n!r}")
    floor = OVERRIDE_MIN_DIMENSION if cfg["override_dimension_gate"] \
        else SUPPORTED_MIN_DIMENSION
    if n < floor:
        if cfg["override_dimension_gate"]:
            raise ConfigError(
                f"dimension gate violated: n = {n} < {OVERRIDE_MIN_DIMENSION} "
                "(hard floor even with --override-dimension-gate)")
        raise ConfigError(
            f"dimension gate violated: n = {n} < {SUPPORTED_MIN_DIMENSION}; "
            "pass --override-dimension-gate to explore 5 <= n < 8")
    if cfg["rel_tol"] is not None and not cfg["rel_tol"] > 0.0:
        raise ConfigError(f"rel_tol must be positive, got {cfg['rel_tol']}")
    if cfg["gamma"] <= 0.0:
        raise ConfigError(f"gamma must be positive, got {cfg['gamma']}")
    for key in ("nr", "nxn"):
        if grid[key] < 16:
            raise ConfigError(f"grid.{key} must be >= 16, got {grid[key]}")
    if grid["r_max"] <= 1.0 or grid["stretch"] <= 0.0:
        raise ConfigError("grid needs r_max > 1 and stretch > 0")

    try:
        pt = ProblemPoint(n=n, K=float(cfg["K"]), H=float(cfg["H"]),
                          gamma=float(cfg["gamma"]))
        if pt.D <= 1.0:
            raise ConfigError(
                f"no bubble family at this point: D = {pt.D:.6g} <= 1")
    except DomainError as exc:
        raise ConfigError(str(exc)) from exc
    cfg["_pt"] = pt

    out = args.out or cfg.get("out")
    if out is None:
        out = "out"
    elif args.out is None and args.config is not None:
        out = os.path.join(base_dir, out)
    try:
        os.makedirs(out, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"cannot create output directory {out}: {exc}") \
            from exc
    if not os.access(out, os.W_OK):
        raise ConfigError(f"output directory not writable: {out}")
    cfg["_out"] = out
    cfg["_base_dir"] = base_dir
    return cfg


def _parameters(cfg, with_grid=False):
    """The deterministic config echo embedded in every report."""
    pt = cfg["_pt"]
    doc = {"n": pt.n, "K": pt.K, "H": pt.H, "gamma": pt.gamma,
           "D": pt.D, "seed": cfg["seed"],
           "rel_tol": cfg["rel_tol"],
           "override_dimension_gate": cfg["override_dimension_gate"]}
    if with_grid:
        doc["grid"] = {k: cfg["grid"][k] for k in _GRID_KEYS}
    return doc


def _row(name, value, bound, detail="", passed=None):
    value = float(value)
    bound = float(bound)
    if passed is None:
        passed = value <= bound
    return {"name": name, "passed": bool(passed), "value": value,
            "bound": bound, "detail": detail}


def _report_rows(report):
    return [_row(c.name, c.value, c.bound, detail=c.detail, passed=c.passed)
            for c in report.checks]


def _bound(cfg, stated):
    rt = cfg["rel_tol"]
    return stated if rt is None else max(stated, rt)


def _write_report(cfg, command, rows, extra=None):
    doc = {"command": command, "parameters": _parameters(cfg),
           "identities": rows, "count": len(rows),
           "all_passed": all(r["passed"] for r in rows)}
    if extra:
        doc.update(extra)
    path = os.path.join(cfg["_out"], "verify_report.json")
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True, default=float)
        fh.write("\n")
    for r in rows:
        print(f"[{'pass' if r['passed'] else 'FAIL'}] {r['name']}: "
              f"{r['value']:.3e} (bound {r['bound']:.3e})")
    print(f"{'all passed' if doc['all_passed'] else 'FAILURES'} — "
          f"{len(rows)} identities -> {path}")
    return EXIT_OK if doc["all_passed"] else EXIT_NUMERIC


# ---------------------------------------------------------------------------
# verify suites

def _separable_triples(n):
    """The three moments the coefficients use first, then extras;
    convergent ones only."""
    quoted = [(4, 2, n), (2, 4, n), (0, 2, n - 2)]
    extras = [(0, 0, n - 2), (2, 0, n - 2), (0, 2, n), (2, 2, n),
              (4, 0, n), (0, 4, n), (2, 0, n), (0, 0, n), (4, 4, n + 1),
              (6, 0, n + 1), (2, 2, n + 1)]
    return [(a, b, m) for a, b, m in quoted + extras if 2 * m > n + a + b]


def cmd_verify_integrals(cfg):
    pt = cfg["_pt"]
    n = pt.n
    rows = []

    pairs = [(m, a) for m in range(4, 13) for a in (1, 2, 3, 5, 7)
             if a + 1 < 2 * m]
    worst = 0.0
    for m, a in pairs:
        closed = quad.I(m, a)
        direct = quad.integrate_halfline(
            lambda t, _m=m, _a=a: t ** _a * (1.0 + t * t) ** (-_m),
            rel_tol=_QUAD_TOL)
        worst = max(worst, abs(closed - direct) / abs(direct))
    rows.append(_row(f"beta moments against quadrature ({len(pairs)} pairs)",
                     worst, _bound(cfg, 1e-10)))

    for k in range(8, 13):
        lhs = quad.I(k, k)
        rhs = (k - 3.0) / (k + 1.0) * quad.I(k, k + 2)
        rows.append(_row(f"beta-moment ratio identity n={k}",
                         abs(lhs - rhs) / lhs, _bound(cfg, 1e-10)))

    for k in range(8, 13):
        for dd in (1.5, 2.0, 3.0):
            lhs = quad.phi_tilde(0.5 * (k - 1.0), dd, rel_tol=_QUAD_TOL)
            rhs = 3.0 / (k - 3.0) * quad.phi_hat(0.5 * (k - 3.0), dd,
                                                 rel_tol=_QUAD_TOL) \
                - dd * quad.phi_power(3, 0.5 * (k - 1.0), dd,
                                      rel_tol=_QUAD_TOL)
            rows.append(_row(
                f"tail-moment integration by parts n={k} D={dd}",
                abs(lhs - rhs) / abs(lhs), _bound(cfg, 1e-8)))

    tbl = quad.MomentTable(n, pt.D, rel_tol=_QUAD_TOL)
    for a, b, m in _separable_triples(n):
        closed = tbl.halfspace_moment(a, b, m)
        brute = quad.brute_halfspace(
            lambda x, _a=a, _b=b, _m=m: float(
                x[-1] ** _a * np.sum(x[:-1] ** 2) ** (0.5 * _b)
                * (np.sum(x[:-1] ** 2) + (x[-1] + pt.D) ** 2 - 1.0) ** -_m),
            n, rel_tol=1e-9)
        rows.append(_row(f"separable half-space moment (a={a}, b={b}, m={m})",
                         abs(closed - brute) / abs(closed),
                         _bound(cfg, 1e-8)))

    if n >= 7:
        s1 = reduced.compute_S(pt, rel_tol=_QUAD_TOL)
        s2 = reduced.compute_S_alt(pt, rel_tol=_QUAD_TOL)
        rows.append(_row("sign quantity: two expressions agree",
                         abs(s1 - s2) / abs(s1), _bound(cfg, 1e-8)))
        rows.append(_row("sign quantity positive", s1, 0.0,
                         detail="value must exceed the bound",
                         passed=s1 > 0.0))
        amp2 = alpha_n(n) ** 2 / abs(pt.K) ** (0.5 * (n - 2.0))
        scale = 0.5 * amp2 * tbl.halfspace_moment(2, 0, n - 2)
        rows.append(_row("vanishing second bracket of the depth-4 term",
                         abs(reduced.compute_I2(pt, rel_tol=_QUAD_TOL))
                         / scale, _bound(cfg, 1e-8)))
    return _write_report(cfg, "verify-integrals", rows)


def cmd_verify_bubble(cfg):
    pt = cfg["_pt"]
    n = pt.n
    b = Bubble(pt)
    rng = np.random.default_rng(cfg["seed"])
    rows = []

    pts = rng.normal(size=(100, n)) * rng.lognormal(0.0, 1.0, size=(100, 1))
    pts[:, -1] = np.abs(pts[:, -1])
    pts[::2, -1] = 0.0          # half the sample probes the boundary trace
    worst_i = worst_b = 0.0
    for x in pts:
        ri, rb = residual_model(b, x)
        worst_i = max(worst_i, abs(ri))
        if rb is not None:
            worst_b = max(worst_b, abs(rb))
    rows.append(_row("model problem interior residual (100 points)",
                     worst_i, _bound(cfg, 1e-8)))
    rows.append(_row("model problem boundary residual (50 points)",
                     worst_b, _bound(cfg, 1e-8)))

    worst = 0.0
    for i in range(1, n + 1):
        for x in pts:
            ri, rb = residual_linearized(b, i, x)
            worst = max(worst, abs(ri))
            if rb is not None:
                worst = max(worst, abs(rb))
    rows.append(_row(f"linearized problem residuals ({n} kernel fields "
                     "x 100 points)", worst, _bound(cfg, 1e-8)))

    closed = bubble_energy(pt, rel_tol=_QUAD_TOL)
    direct = bubble_energy_quadrature(pt, rel_tol=1e-9)
    rows.append(_row("bubble energy: closed form vs quadrature",
                     abs(closed - direct) / abs(closed), _bound(cfg, 1e-6)))

    ds = np.linspace(1.2, 4.0, 12)
    es = [bubble_energy(ProblemPoint(
              n=n, K=pt.K,
              H=float(d) * math.sqrt(abs(pt.K) / (n * (n - 1.0)))))
          for d in ds]
    slope = max(e2 - e1 for e1, e2 in zip(es, es[1:]))
    rows.append(_row("bubble energy decreasing in D", slope, 0.0,
                     detail="max forward difference, must be negative",
                     passed=slope < 0.0))

    pt4 = ProblemPoint(n=n, K=4.0 * pt.K, H=2.0 * pt.H)
    ratio = bubble_energy(pt4, rel_tol=_QUAD_TOL) / closed
    expected = 4.0 ** (-0.5 * (n - 2.0))
    rows.append(_row("bubble energy |K|-scaling at fixed D",
                     abs(ratio - expected) / expected, _bound(cfg, 1e-10)))

    frame = geom.random_frame(n, rng)
    suite = geom.cancellation_suite(frame, pt, tol=_bound(cfg, 1e-8))
    rows.extend(_report_rows(suite))

    ep_norm = geom.forcing_norm(frame, b)
    worst = 0.0
    for s in range(1, n + 1):
        val, scale = geom.integral_Ep_jacobi(frame, b, s, ep_norm=ep_norm)
        worst = max(worst, abs(val) / scale)
    rows.append(_row(f"forcing orthogonal to the kernel ({n} fields)",
                     worst, _bound(cfg, 1e-8)))
    return _write_report(cfg, "verify-bubble", rows)


def cmd_verify_hyperbolic(cfg):
    pt = cfg["_pt"]
    n = pt.n
    rows = []

    hp = corrector.hyperbolic_picture(pt.D)
    rows.append(_row("ball radius inverts to mu1 = D",
                     abs(hp.mu1 - pt.D) / pt.D, _bound(cfg, 1e-14)))
    rows.append(_row("eigenvalue product mu0 mu1 = 1",
                     abs(hp.mu0 * hp.mu1 - 1.0), _bound(cfg, 1e-14)))
    hp2 = corrector.hyperbolic_picture(2.0)
    rows.append(_row("ball radius closed form at D=2",
                     abs(hp2.R - (2.0 - math.sqrt(3.0))), _bound(cfg, 1e-14)))
    worst = max(abs((1.0 + (h := corrector.hyperbolic_picture(d)).R ** 2)
                    / (2.0 * h.R) - d) / d
                for d in (1.5, 2.0, 3.0, 10.0))
    rows.append(_row("radius round trip D in {1.5, 2, 3, 10}", worst,
                     _bound(cfg, 1e-14)))
    hp_lim = corrector.hyperbolic_picture(1.0 + 1e-6)
    rows.append(_row("approach to the unit ball as D -> 1+",
                     1.0 - hp_lim.R, 2e-3,
                     detail="R = 1 - sqrt(2e-6) + O(e-6) at D = 1 + 1e-6"))

    vrep, annihilating = corrector.steklov_variants(
        hp, n, tol=_bound(cfg, 1e-10), seed=cfg["seed"])
    rows.append(_row("an annihilating operator variant exists",
                     float(len(annihilating)), 0.0,
                     detail=", ".join(f"{op} + {lab}"
                                      for op, lab in annihilating),
                     passed=len(annihilating) > 0))
    measured = {c.name: c for c in vrep.checks}
    for op, lab in annihilating:
        c = measured[f"{op} operator + {lab}"]
        rows.append(_row(f"steklov residual: {op} operator + {lab}",
                         c.value, _bound(cfg, 1e-10), detail=c.detail))
    variants = [{"combination": c.name, "residual": c.value,
                 "detail": c.detail} for c in vrep.checks]
    return _write_report(cfg, "verify-hyperbolic", rows,
                         extra={"variants": variants,
                                "annihilating": [list(p)
                                                 for p in annihilating]})


# ---------------------------------------------------------------------------
# corrector and locator

def _build_frame(cfg):
    choice = cfg.get("frame")
    path = cfg.get("frame_file")
    if path is not None:
        full = os.path.join(cfg["_base_dir"], path)
        if not os.path.exists(full):
            raise ConfigError(f"frame file not found: {full}")
        with open(full) as fh:
            doc = json.load(fh)
        try:
            return CurvatureFrame.from_json_dict(doc)
        except (DomainError, KeyError, ValueError) as exc:
            raise ConfigError(f"invalid frame file {full}: {exc}") from exc
    if choice in (None, "zero"):
        return CurvatureFrame.zero(cfg["_pt"].n)
    if choice == "random":
        return geom.random_frame(cfg["_pt"].n,
                                 np.random.default_rng(cfg["seed"]))
    raise ConfigError(f"frame must be 'zero', 'random' or a frame_file, "
                      f"got {choice!r}")


def _grid_spec(cfg):
    g = cfg["grid"]
    try:
        return corrector.GridSpec(nr=int(g["nr"]), nxn=int(g["nxn"]),
                                  r_max=float(g["r_max"]),
                                  stretch=float(g["stretch"]))
    except DomainError as exc:
        raise ConfigError(str(exc)) from exc


def cmd_corrector(cfg):
    pt = cfg["_pt"]
    frame = _build_frame(cfg)
    frep = validate_frame(frame)
    if not all(c.passed for c in frep.checks):
        bad = [c.name for c in frep.checks if not c.passed]
        raise ConfigError(f"curvature frame fails validation: "
                          f"{', '.join(bad)}")
    gs = _grid_spec(cfg)
    out = cfg["_out"]
    doc = {"command": "corrector", "parameters": _parameters(cfg,
                                                             with_grid=True)}
    try:
        sol = corrector.solve_corrector(frame, pt, gs)
        rep = corrector.corrector_diagnostics(sol, frame, pt)
    except (SingularSystem, NonConvergence) as exc:
        doc["error"] = f"{type(exc).__name__}: {exc}"
        with open(os.path.join(out, "diagnostics.json"), "w") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True, default=float)
            fh.write("\n")
        print(f"corrector solve failed: {doc['error']}", file=sys.stderr)
        return EXIT_NUMERIC
    sol.save(out)
    rows = _report_rows(rep)
    doc["checks"] = rows
    doc["diagnostics"] = {k: v for k, v in sol.diagnostics.items()
                          if isinstance(v, (int, float, bool, str))}
    doc["modes"] = [{"degree": m.degree, "label": m.label} for m in sol.modes]
    doc["all_passed"] = all(r["passed"] for r in rows)
    with open(os.path.join(out, "diagnostics.json"), "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True, default=float)
        fh.write("\n")
    for r in rows:
        print(f"[{'pass' if r['passed'] else 'FAIL'}] {r['name']}: "
              f"{r['value']:.3e}")
    print(f"{len(sol.modes)} modes -> {out}")
    return EXIT_OK if doc["all_passed"] else EXIT_NUMERIC


def _parse_samples(cfg, need_h):
    raw = cfg.get("samples")
    if not raw or not isinstance(raw, list):
        raise ConfigError("locate needs a non-empty 'samples' list")
    out = []
    for i, entry in enumerate(raw):
        if not isinstance(entry, dict) or "label" not in entry:
            raise ConfigError(f"sample {i} must be an object with a label")
        coords = tuple(float(c) for c in entry.get("coords", (float(i),)))
        gamma = float(entry.get("gamma", cfg["gamma"]))
        if gamma <= 0.0:
            raise ConfigError(f"sample {entry['label']!r}: gamma must be "
                              f"positive, got {gamma}")
        if need_h:
            if "H" not in entry:
                raise ConfigError(f"sample {entry['label']!r} needs H in the "
                                  "non-constants case")
            h_val = float(entry["H"])
        else:
            h_val = cfg["_pt"].H
        out.append((str(entry["label"]), coords, h_val, gamma))
    return out


def _parse_hessian(value, size, name):
    if value in (None, "identity"):
        return np.eye(size)
    arr = np.array(value, dtype=float)
    if arr.shape != (size, size):
        raise ConfigError(f"{name} must be {size}x{size}, got {arr.shape}")
    return arr


def cmd_locate(cfg):
    pt = cfg["_pt"]
    n = pt.n
    case = cfg.get("case", "constants")
    if case not in ("constants", "non-constants"):
        raise ConfigError(f"case must be 'constants' or 'non-constants', "
                          f"got {case!r}")
    if case == "constants":
        parsed = _parse_samples(cfg, need_h=False)
        frame = _build_frame(cfg)
        frep = validate_frame(frame)
        if not all(c.passed for c in frep.checks):
            bad = [c.name for c in frep.checks if not c.passed]
            raise ConfigError(f"curvature frame fails validation: "
                              f"{', '.join(bad)}")
        gs = _grid_spec(cfg)
        # one geometry, many gammas: the corrector solve is shared
        sol = corrector.solve_corrector(frame, pt, gs)
        samples = [reduced.BoundarySample(
                       label=lab, coords=coords,
                       pt=ProblemPoint(n=n, K=pt.K, H=h, gamma=g),
                       frame=frame, sol=sol)
                   for lab, coords, h, g in parsed]
        report = reduced.optimize_constants(samples)
    else:
        try:
            hess = HessianData(
                hessH=_parse_hessian(cfg.get("hessH"), n - 1, "hessH"),
                hessK=_parse_hessian(cfg.get("hessK"), n, "hessK"))
        except DomainError as exc:
            raise ConfigError(str(exc)) from exc
        samples = []
        for lab, coords, h, g in _parse_samples(cfg, need_h=True):
            try:
                sample_pt = ProblemPoint(n=n, K=pt.K, H=h, gamma=g)
            except DomainError as exc:
                raise ConfigError(f"sample {lab!r}: {exc}") from exc
            samples.append(reduced.BoundarySample(label=lab, coords=coords,
                                                  pt=sample_pt, hess=hess))
        report = reduced.optimize_nonconstant(samples)
    report.save(cfg["_out"])
    print(f"blow-up point {report.p_star} at depth d = {report.d_star:.8g}, "
          f"rate eps^{report.rate:.6g} -> {cfg['_out']}")
    return EXIT_OK


_DISPATCH = {
    "verify-integrals": cmd_verify_integrals,
    "verify-bubble": cmd_verify_bubble,
    "verify-hyperbolic": cmd_verify_hyperbolic,
    "corrector": cmd_corrector,
    "locate": cmd_locate,
}

_HELP = {
    "verify-integrals": "moment identities: beta suite, ratio, integration "
                        "by parts, separable reduction, sign quantity",
    "verify-bubble": "bubble residuals, energy, cancellation suite, forcing "
                     "orthogonality",
    "verify-hyperbolic": "ball radius, Steklov eigenvalues, operator "
                         "variant report",
    "corrector": "solve the modal corrector problems, emit profiles and "
                 "diagnostics",
    "locate": "maximize the reduced energy over a boundary sample",
}


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="bubblelab",
        description="desk-scale verification of a boundary bubble "
                    "construction")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _DISPATCH:
        p = sub.add_parser(name, help=_HELP[name])
        p.add_argument("--config", metavar="PATH",
                       help="flat JSON config (paths resolve relative to it)")
        p.add_argument("--out", metavar="DIR",
                       help="output directory (default: 'out')")
        p.add_argument("--override-dimension-gate", action="store_true",
                       help="allow 5 <= n < 8 for exploration")
        p.add_argument("--schema", action="store_true",
                       help="print config/output schema and exit")
    args = parser.parse_args(argv)
    if args.schema:
        print(json.dumps(_schema(args.command), indent=2, sort_keys=True))
        return EXIT_OK
    try:
        cfg = _load_config(args, args.command)
        return _DISPATCH[args.command](cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except HypothesisFailure as exc:
        print(f"hypothesis failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except BubbleLabError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
