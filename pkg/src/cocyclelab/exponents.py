"""Three estimators of the extremal Lyapunov exponents and their agreement report."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .cocycle import det2, log_det_integral, singular_values, sl2_split, straighten
from .symbolic import PointRep, cycle_words, shift
from .thermo import sample_paths
from .ustate import lyap_from_family, solve_s_state, solve_u_state


@dataclass
class Estimate:
    method: str
    lam_plus: float
    lam_minus: float
    se_plus: float = 0.0
    se_minus: float = 0.0
    det_residual: float = 0.0
    se_det: float = 0.0
    info: dict = field(default_factory=dict)

    def row(self):
        return {"method": self.method, "lambda_plus": self.lam_plus, "lambda_minus": self.lam_minus,
                "se_plus": self.se_plus, "se_minus": self.se_minus,
                "det_residual": self.det_residual, "se_det": self.se_det}


def orbit_products(c, paths, n):
    """Per-row log sigma_max of A^n and sum of log|det A| along the row.

    Rows of paths hold coordinates lo..n-1+hi-1.  Products are renormalised each step.
    """
    mats = c.matrices_along(paths)[:, :n]
    rows = mats.shape[0]
    P = np.broadcast_to(np.eye(2), (rows, 2, 2)).copy()
    logscale = np.zeros(rows)
    for j in range(n):
        P = np.einsum("mij,mjk->mik", mats[:, j], P)
        s = np.abs(P).max(axis=(1, 2))
        P /= s[:, None, None]
        logscale += np.log(s)
    smax, _ = singular_values(P)
    log_top = np.log(smax) + logscale
    log_det = np.log(np.abs(det2(mats))).sum(axis=1)
    return log_top, log_det


def _mean_se(v):
    v = np.asarray(v, dtype=float)
    se = float(v.std(ddof=1) / math.sqrt(len(v))) if len(v) > 1 else 0.0
    return float(v.mean()), se


def kingman(c, m, n=10_000, samples=100, seed=0, paths=None):
    """Monte Carlo estimate from normalised products along sampled orbits.

    lambda_+ = log sigma_max(A^n) / n per sample; lambda_- = mean log|det| - lambda_+.
    """
    if paths is None:
        rng = np.random.default_rng(seed)
        paths = sample_paths(m, n + c.width - 1, samples, rng)
    top, logdet = orbit_products(c, paths, n)
    lp = top / n
    lm = logdet / n - lp
    exact_det = log_det_integral(c, m)
    mp, sp = _mean_se(lp)
    mm, sm = _mean_se(lm)
    md, sd = _mean_se(logdet / n)
    return Estimate("kingman", mp, mm, sp, sm, mp + mm - exact_det, sd,
                    {"n": n, "samples": len(paths)})


def sl2_consistency(c, m, n=2000, samples=20, seed=0):
    """Max |lambda_+(A) - lambda_+(B) - mean log|g|| over identical sampled orbits."""
    g_table, b = sl2_split(c)
    rng = np.random.default_rng(seed)
    paths = sample_paths(m, n + c.width - 1, samples, rng)
    top_a, _ = orbit_products(c, paths, n)
    top_b, _ = orbit_products(b, paths, n)
    g = np.array([g_table[tuple(w)] for w in c.words.tolist()])
    log_g = np.log(np.abs(g))[c.indices_along(paths)[:, :n]].sum(axis=1)
    return float(np.abs(top_a / n - (top_b / n + log_g / n)).max())


def periodic_route(c, m, max_period=6):
    """Average of (1/p) log |eigenvalues of A^p| over period-p points weighted by the chain."""
    per = []
    rec = m.rec
    for p in range(1, max_period + 1):
        words = cycle_words(c.spec, p)
        if not len(words):
            continue
        wts, lp, lm = [], [], []
        for w in words.tolist():
            x = PointRep.periodic(c.spec, tuple(w))
            codes = rec.encode(x.word(0, p + rec.k))
            weight = 1.0
            for a, b in zip(codes[:-1], codes[1:]):
                weight *= m.p[a, b]
            if weight <= 0:
                continue
            P = np.eye(2)
            for j in range(p):
                P = c.values[c.index_at(shift(x, j))] @ P
            ev = np.abs(np.linalg.eigvals(P))
            wts.append(weight)
            lp.append(math.log(ev.max()) / p)
            lm.append(math.log(ev.min()) / p)
        wts = np.array(wts) / np.sum(wts)
        per.append((p, float(np.dot(wts, lp)), float(np.dot(wts, lm))))
    p, lp, lm = per[-1]
    # truncation error proxy: change between the two longest periods
    ep = abs(lp - per[-2][1]) if len(per) > 1 else 0.0
    em = abs(lm - per[-2][2]) if len(per) > 1 else 0.0
    ed = abs(lp + lm - per[-2][1] - per[-2][2]) if len(per) > 1 else 0.0
    exact_det = log_det_integral(c, m)
    return Estimate("periodic", lp, lm, ep, em, det_residual=lp + lm - exact_det, se_det=ed,
                    info={"by_period": per})


def ustate_route(c, m, depth=None, eps=None, max_iter=500, tol=1e-10, grid=64):
    """Exponents as integrals against the solved u-state (lambda_+) and s-state (lambda_-)."""
    from .ustate import DEFAULT_EPS
    eps = DEFAULT_EPS if eps is None else eps
    b = c if c.future_only else straighten(c)
    fu, ru = solve_u_state(b, m, depth, eps, max_iter, tol, grid)
    fs, rs = solve_s_state(b, m, depth, eps, max_iter, tol, grid)
    lp = lyap_from_family(fu, b, m)
    lm = lyap_from_family(fs, b, m)
    exact_det = log_det_integral(c, m)
    # discretisation error proxy: the sum-rule defect
    err = abs(lp + lm - exact_det)
    return Estimate("ustate", float(lp), float(lm), err, err, det_residual=float(lp + lm - exact_det),
                    info={"u_residual": ru, "s_residual": rs, "depth": fu.depth,
                          "u_converged": fu.info["converged"], "s_converged": fs.info["converged"],
                          "families": (fu, fs)})


def agreement(estimates, z=3.0):
    """Pairwise comparison rows: |difference| against z times the combined standard error.

    Deterministic routes report an error proxy in the se fields (period truncation
    for the periodic route, sum-rule defect for the u-state route); a floor of 1e-8
    absorbs rounding.
    """
    rows = []
    for i, a in enumerate(estimates):
        for b in estimates[i + 1:]:
            for key, sa, sb in (("lam_plus", a.se_plus, b.se_plus), ("lam_minus", a.se_minus, b.se_minus)):
                diff = abs(getattr(a, key) - getattr(b, key))
                err = math.hypot(sa, sb)
                rows.append({"pair": f"{a.method}-{b.method}", "quantity": key, "difference": diff,
                             "combined_se": err, "agree": bool(diff <= z * err + 1e-8)})
    for e in estimates:
        rows.append({"pair": f"{e.method}-det", "quantity": "sum_rule", "difference": abs(e.det_residual),
                     "combined_se": e.se_det, "agree": bool(abs(e.det_residual) <= z * e.se_det + 1e-6)})
    return rows
