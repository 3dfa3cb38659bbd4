"""Command implementations. Each returns (exit code, {file name: rows}) and never prints."""
from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field


from . import presets
from .cocycle import fiber_bunching, holonomy_residuals, log_det_integral, straighten
from .coupling import demo_instance, energy_descent, energy, min_pair_distance
from .exponents import agreement, kingman, periodic_route, sl2_consistency, ustate_route
from .projective import InfeasibleError
from .symbolic import format_word
from .thermo import (equilibrium, gibbs_ratio_residual, jacobian_triangle_check, measure_distance,
                     product_residual, rpf_residuals, solve_xi)
from .ustate import atom_spectrum, lyap_from_family, solve_s_state, solve_u_state, su_check

OK, CONFIG_ERROR, INVARIANT, INFEASIBLE = 0, 1, 2, 3
SUM_RULE_TOL = 1e-6
CHECK_TOL = 1e-10
HOLONOMY_TOL = 1e-9


class InvariantViolation(RuntimeError):
    pass


@dataclass
class Outcome:
    code: int = OK
    tables: dict = field(default_factory=dict)
    messages: list = field(default_factory=list)

    def fail(self, msg, code=INVARIANT):
        self.messages.append(msg)
        self.code = max(self.code, code)


def _measure(cfg):
    if cfg.measure is None:
        raise InfeasibleError("no measure configured")
    return cfg.measure


def _cocycle(cfg):
    if cfg.cocycle is None:
        raise InfeasibleError("no cocycle configured")
    return cfg.cocycle


# ----------------------------------------------------------------- commands

def cmd_validate(cfg, workers=1):
    out = Outcome()
    spec = cfg.spec
    rows = [{"item": "alphabet_size", "value": spec.alphabet_size},
            {"item": "period", "value": spec.period},
            {"item": "theta", "value": spec.theta}]
    if cfg.cocycle is not None:
        c = cfg.cocycle
        rows += [{"item": "cocycle_window", "value": f"[{c.lo},{c.hi})"},
                 {"item": "cocycle_future_only", "value": c.future_only},
                 {"item": "cocycle_sl2", "value": c.is_sl2}]
    if cfg.measure is not None:
        m = cfg.measure
        rows += [{"item": "measure_block_length", "value": m.k},
                 {"item": "measure_full_support", "value": m.full_support},
                 {"item": "log_lambda", "value": m.log_lambda}]
    rows.append({"item": "config_hash", "value": cfg.digest})
    out.tables["validate.csv"] = rows
    return out


def cmd_exponents(cfg, workers=1):
    out = Outcome()
    c, m, s = _cocycle(cfg), _measure(cfg), cfg.settings
    ests = [kingman(c, m, s["n"], s["samples"], s["seed"]),
            periodic_route(c, m, s["max_period"]),
            ustate_route(c, m, s["depth"], s["eps"], s["max_iter"], s["tol"], s["grid"])]
    rows = [e.row() for e in ests]
    det = log_det_integral(c, m)
    for r in rows:
        r["log_det_integral"] = det
    out.tables["exponents.csv"] = rows
    agr = agreement(ests, s["z"])
    sl2 = sl2_consistency(c, m, n=min(s["n"], 2000), samples=min(s["samples"], 20), seed=s["seed"])
    agr.append({"pair": "direct-sl2", "quantity": "lam_plus", "difference": sl2,
                "combined_se": 0.0, "agree": bool(sl2 <= 1e-9)})
    out.tables["agreement.csv"] = agr
    for r in agr:
        if r["quantity"] == "sum_rule" and not r["agree"]:
            out.fail(f"determinant sum rule fails for {r['pair']}: {r['difference']:.3g}")
    if sl2 > 1e-9:
        out.fail(f"sl2 reduction mismatch {sl2:.3g}")
    for r in agr:
        if r["quantity"] != "sum_rule" and not r["agree"]:
            out.messages.append(f"estimators {r['pair']} disagree on {r['quantity']}")
    return out


def cmd_bunching(cfg, workers=1):
    out = Outcome()
    c, s = _cocycle(cfg), cfg.settings
    cert = fiber_bunching(c, s["holder_alpha"], s["N_max"])
    out.tables["bunching.csv"] = [{
        "holder_alpha": s["holder_alpha"], "theta": c.spec.theta, "certified": cert is not None,
        "N": cert.N if cert else None, "worst_ratio": cert.worst_ratio if cert else None,
        "exact": cert.exact if cert else None, "N_max": s["N_max"]}]
    if cert is None:
        out.messages.append(f"no bunching certificate up to N = {s['N_max']}")
    return out


def cmd_holonomy(cfg, workers=1):
    out = Outcome()
    c, s = _cocycle(cfg), cfg.settings
    cert = fiber_bunching(c, s["holder_alpha"], s["N_max"])
    if cert is None and not c.future_only:
        raise InfeasibleError("holonomies need a fiber-bunched cocycle; no certificate found")
    rep = holonomy_residuals(c, s["holonomy_samples"], s["seed"])
    out.tables["holonomy.csv"] = rep.rows()
    if rep.max_residual > HOLONOMY_TOL:
        out.fail(f"holonomy residual {rep.max_residual:.3g} exceeds {HOLONOMY_TOL:g}")
    return out


def cmd_equilibrium(cfg, workers=1):
    out = Outcome()
    m = _measure(cfg)
    out.tables["equilibrium.csv"] = m.to_rows()
    checks = []
    if m.phi is not None:
        r1, r2 = rpf_residuals(m)
        checks += [{"check": "rpf_left", "residual": r1}, {"check": "rpf_right", "residual": r2},
                   {"check": "gibbs_ratio", "residual": gibbs_ratio_residual(m)}]
    if m.full_support:
        xi, ls = solve_xi(m)
        checks += [{"check": "jacobian_formula", "residual": jacobian_triangle_check(m)},
                   {"check": "product_structure_psi", "residual": product_residual(m)},
                   {"check": "product_structure_xi", "residual": product_residual(m, density=xi)},
                   {"check": "xi_cohomology", "residual": ls}]
    rows_err, inv_err = m.transition_counts_check()
    checks += [{"check": "stochastic_rows", "residual": rows_err},
               {"check": "stationarity", "residual": inv_err}]
    for r in checks:
        r["ok"] = bool(r["residual"] <= CHECK_TOL)
        if not r["ok"]:
            out.fail(f"equilibrium check {r['check']} residual {r['residual']:.3g}")
    out.tables["equilibrium_checks.csv"] = checks
    return out


def _states(cfg):
    c, m, s = _cocycle(cfg), _measure(cfg), cfg.settings
    b = c if c.future_only else straighten(c)
    fu, ru = solve_u_state(b, m, s["depth"], s["eps"], s["max_iter"], s["tol"], s["grid"])
    return b, m, fu, ru


def cmd_ustate(cfg, workers=1):
    out = Outcome()
    b, m, fu, ru = _states(cfg)
    s = cfg.settings
    fs, rs = solve_s_state(b, m, s["depth"], s["eps"], s["max_iter"], s["tol"], s["grid"])
    rows = [{"state": "u", **r} for r in fu.to_rows()] + [{"state": "s", **r} for r in fs.to_rows()]
    out.tables["ustate_family.csv"] = rows
    lp, lm = lyap_from_family(fu, b, m), lyap_from_family(fs, b, m)
    det = log_det_integral(cfg.cocycle, m)
    summary = [{"state": "u", "depth": fu.depth, "residual": ru, "converged": fu.info["converged"],
                "iterations": fu.info["iterations"], "exponent": lp},
               {"state": "s", "depth": fs.depth, "residual": rs, "converged": fs.info["converged"],
                "iterations": fs.info["iterations"], "exponent": lm}]
    out.tables["ustate_summary.csv"] = summary
    defect = abs(lp + lm - det)
    if defect > SUM_RULE_TOL:
        out.fail(f"u-state/s-state sum rule defect {defect:.3g}")
    return out


def cmd_atoms(cfg, workers=1):
    out = Outcome()
    b, m, fu, ru = _states(cfg)
    rep = atom_spectrum(fu, c=b)
    su = su_check(fu, b, seed=cfg.settings["seed"] or 0)
    rows = []
    for w, V in rep.V.items():
        rows.append({"word": format_word(w), "gamma0": rep.gamma0, "cardinality": rep.cards[w],
                     "angles": " ".join(format(float(a), ".17g") for a in V)})
    out.tables["atoms.csv"] = rows
    out.tables["atoms_summary.csv"] = [{
        "gamma0": rep.gamma0, "constant_cardinality": rep.constant_card,
        "equivariant": rep.equivariant, "equivariance_error": rep.equivariance_error,
        "su_u_residual": su.u_residual, "su_s_residual": su.s_residual, "u_residual": ru}]
    return out


# -------------------------------------------------------------------- sweep

def sweep_grid(t_star, delta_t, levels):
    """t_k = t* + delta_t 2^-k for k = 0..levels-1."""
    return [t_star + delta_t * 2.0 ** -k for k in range(levels)]


def sweep_point(t, sweep, settings, t_star):
    """Everything computed at one parameter value (pure; safe in a worker process)."""
    cfam = presets.COCYCLE_FAMILIES[sweep["cocycle"]]
    pfam = presets.POTENTIAL_FAMILIES[sweep["potential"]]
    c = cfam(t)
    m = equilibrium(pfam(t, c.spec))
    m_star = equilibrium(pfam(t_star, c.spec))
    cert = fiber_bunching(c, settings["holder_alpha"], settings["N_max"])
    k = kingman(c, m, sweep["n"], sweep["samples"], settings["seed"])
    depth = settings["depth"] or 1
    u = ustate_route(c, m, depth, settings["eps"], settings["max_iter"], settings["tol"], settings["grid"])
    ws, gap = measure_distance(m, m_star, sweep["gap_depth"])
    det = log_det_integral(c, m)
    return {"t": t, "certified": cert is not None, "bunching_N": cert.N if cert else None,
            "lambda_plus": k.lam_plus, "lambda_minus": k.lam_minus, "se_plus": k.se_plus,
            "se_minus": k.se_minus, "ustate_lambda_plus": u.lam_plus, "ustate_lambda_minus": u.lam_minus,
            "log_det_integral": det, "residual": u.lam_plus + u.lam_minus - det,
            "weak_star_gap": ws, "psi_gap": gap}


def _pool_map(fn, args, workers):
    if workers <= 1 or len(args) <= 1:
        return [fn(*a) for a in args]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        futures = [ex.submit(fn, *a) for a in args]
        return [f.result() for f in futures]


def run_sweep(sweep, settings, workers=1):
    t_star = float(sweep["t_star"])
    grid = sweep_grid(t_star, float(sweep["delta_t"]), int(sweep["levels"]))
    pts = _pool_map(sweep_point, [(t, sweep, settings, t_star) for t in grid + [t_star]], workers)
    ref = pts[-1]
    rows = []
    for level, p in enumerate(pts):
        row = {"level": level if level < len(grid) else "reference", **p}
        comb_p = math.hypot(p["se_plus"], ref["se_plus"])
        comb_m = math.hypot(p["se_minus"], ref["se_minus"])
        row.update(deviation_plus=abs(p["lambda_plus"] - ref["lambda_plus"]), combined_se_plus=comb_p,
                   deviation_minus=abs(p["lambda_minus"] - ref["lambda_minus"]), combined_se_minus=comb_m,
                   ustate_deviation_plus=abs(p["ustate_lambda_plus"] - ref["ustate_lambda_plus"]))
        rows.append(row)
    return rows


def sweep_checks(rows, factor=5.0):
    """Convergence properties of a sweep table (the reference row is excluded)."""
    grid = [r for r in rows if r["level"] != "reference"]
    finest = grid[-2:]
    below = all(r["deviation_plus"] <= factor * r["combined_se_plus"] for r in finest)
    ws = [r["weak_star_gap"] for r in grid]
    ps = [r["psi_gap"] for r in grid]
    mono_ws = all(b < a for a, b in zip(ws, ws[1:]))
    mono_ps = all(b < a for a, b in zip(ps, ps[1:]))
    resid = max(abs(r["residual"]) for r in rows)
    return {"finest_below_error": below, "weak_star_monotone": mono_ws, "psi_gap_monotone": mono_ps,
            "max_residual": resid, "all_certified": all(r["certified"] for r in rows),
            "all_finite": all(math.isfinite(r["lambda_plus"]) for r in rows)}


def cmd_sweep(cfg, workers=1):
    out = Outcome()
    rows = run_sweep(cfg.sweep, cfg.settings, workers)
    out.tables["sweep.csv"] = rows
    chk = sweep_checks(rows)
    out.tables["sweep_checks.csv"] = [{"check": k, "value": v} for k, v in chk.items()]
    if chk["max_residual"] > SUM_RULE_TOL:
        out.fail(f"sweep residual {chk['max_residual']:.3g} exceeds {SUM_RULE_TOL:g}")
    if not chk["all_finite"]:
        out.fail("non-finite exponent in sweep")
    return out


# ------------------------------------------------------------ coupling demo

def coupling_instance(seed):
    inst = demo_instance(seed)
    fam = inst.family
    r0 = inst.spread_radius / 2
    e0 = energy(fam, inst.measure)
    res, _ = energy_descent(fam, inst.cocycle, inst.measure, inst.params)
    summary = {"instance_seed": seed, "alpha": inst.params.alpha, "delta": inst.params.delta,
               "N": inst.params.N, "M1": inst.params.M1, "M2": inst.params.M2,
               "lebesgue_radius": r0, "min_pair_distance": min(min_pair_distance(x) for x in fam.couplings),
               "max_word_energy": max(x.energy() for x in fam.couplings), "energy_bound": -math.log(r0),
               "marginal_error": fam.marginal_error(), "symmetry_error": fam.symmetry_error(),
               "E0": e0, "bound_steps": res.bound_steps, "steps": len(res.steps),
               "min_drop": min((st.drop for st in res.steps), default=math.nan),
               "contradiction": res.contradiction, "reason": res.reason}
    ledger = [{"instance_seed": seed, **r} for r in res.ledger_rows()]
    return summary, ledger


def cmd_coupling_demo(cfg, workers=1):
    out = Outcome()
    base = int(cfg.settings["seed"])
    n = int(cfg.coupling["instances"])
    results = _pool_map(coupling_instance, [(base + i,) for i in range(n)], workers)
    summary = [s for s, _ in results]
    ledger = [r for _, rows in results for r in rows]
    out.tables["coupling_summary.csv"] = summary
    out.tables["coupling_ledger.csv"] = ledger
    for s in summary:
        if not s["contradiction"]:
            out.fail(f"instance {s['instance_seed']}: no contradiction flag ({s['reason']})")
        if s["steps"] and s["min_drop"] < s["alpha"] - 1e-9:
            out.fail(f"instance {s['instance_seed']}: drop {s['min_drop']:.3g} below alpha")
    for r in ledger:
        if not r["ok"]:
            out.fail(f"instance {r['instance_seed']} step {r['step']}: ledger term {r['term']} out of bound")
    return out


COMMAND_TABLE = {
    "validate": cmd_validate,
    "exponents": cmd_exponents,
    "bunching": cmd_bunching,
    "holonomy": cmd_holonomy,
    "equilibrium": cmd_equilibrium,
    "ustate": cmd_ustate,
    "atoms": cmd_atoms,
    "sweep": cmd_sweep,
    "coupling-demo": cmd_coupling_demo,
}


def default_workers():
    return max(1, len(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity") else os.cpu_count() or 1)


def run(cfg, workers=None):
    """Dispatch the configured command; returns an Outcome."""
    workers = default_workers() if workers is None else max(1, int(workers))
    return COMMAND_TABLE[cfg.command](cfg, workers)
