"""Symmetric self-couplings of atomic measures and the energy-decrement construction."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .projective import (HALF_PI, Q_ANGLE, InfeasibleError, ProjMeasure, act, dist,
                         margulis_phi, solve_rho)
from .symbolic import admissible_words, format_word
from .ustate import ConditionalFamily, forward_edges

DIAGONAL_FLOOR = 2.0 ** -40


class DiagonalAtomError(ValueError):
    pass


class HypothesisError(InfeasibleError):
    """A standing inequality of the parameter ledger fails for the current family."""


def _group(angles, masses):
    """Merge exactly equal angles."""
    if not len(angles):
        return ProjMeasure.empty()
    ua, inv = np.unique(angles, return_inverse=True)
    return ProjMeasure(ua, np.bincount(inv.reshape(-1), weights=masses, minlength=len(ua)), sort=False)


class Coupling:
    """Finite measure on P1 x P1 stored as parallel arrays (u, v, w)."""

    __slots__ = ("u", "v", "w")

    def __init__(self, u, v, w):
        self.u = np.asarray(u, dtype=float).reshape(-1)
        self.v = np.asarray(v, dtype=float).reshape(-1)
        self.w = np.asarray(w, dtype=float).reshape(-1)

    @classmethod
    def empty(cls):
        return cls([], [], [])

    @classmethod
    def product(cls, a, b, scale=1.0):
        """scale * (a x b) for atomic measures a, b."""
        u = np.repeat(a.angles, len(b))
        v = np.tile(b.angles, len(a))
        w = np.outer(a.masses, b.masses).reshape(-1) * scale
        return cls(u, v, w)

    def __len__(self):
        return len(self.w)

    def __add__(self, other):
        return Coupling(np.r_[self.u, other.u], np.r_[self.v, other.v], np.r_[self.w, other.w])

    def __repr__(self):
        return f"Coupling({len(self)} atoms, mass={self.mass:.6g})"

    @property
    def mass(self):
        return float(self.w.sum())

    def swapped(self):
        return Coupling(self.v, self.u, self.w)

    def symmetrized(self):
        return self + self.swapped()

    def select(self, mask):
        return Coupling(self.u[mask], self.v[mask], self.w[mask])

    def reweighted(self, factor):
        return Coupling(self.u, self.v, self.w * factor)

    def square_mask(self, pred):
        return pred(self.u) & pred(self.v)

    def mass_in(self, pred_u, pred_v=None):
        pred_v = pred_u if pred_v is None else pred_v
        return float(self.w[pred_u(self.u) & pred_v(self.v)].sum())

    def marginal(self, axis=0):
        return _group(self.u if axis == 0 else self.v, self.w)

    def merged(self):
        """Combine atoms at identical (u, v) and drop zero masses."""
        keep = self.w > 0
        if not keep.any():
            return Coupling.empty()
        uv = np.stack([self.u[keep], self.v[keep]], axis=1)
        uniq, inv = np.unique(uv, axis=0, return_inverse=True)
        w = np.bincount(inv.reshape(-1), weights=self.w[keep], minlength=len(uniq))
        return Coupling(uniq[:, 0], uniq[:, 1], w)

    def push(self, M, weight=1.0):
        return Coupling(act(M, self.u), act(M, self.v), self.w * weight)

    def energy(self, locator=""):
        if not len(self):
            return 0.0
        d = dist(self.u, self.v)
        bad = (d < DIAGONAL_FLOOR) & (self.w > 0)
        if bad.any():
            i = int(np.nonzero(bad)[0][0])
            raise DiagonalAtomError(
                f"near-diagonal atom {locator} at ({self.u[i]:.17g}, {self.v[i]:.17g}) mass {self.w[i]:.3g}")
        return float(np.dot(self.w, margulis_phi(self.u, self.v)))

    def symmetry_error(self):
        a = self.merged()
        b = self.swapped().merged()
        if len(a) != len(b):
            return math.inf if abs(a.mass - b.mass) > 0 or len(a) else 0.0
        return float(max(np.abs(a.u - b.u).max(initial=0), np.abs(a.v - b.v).max(initial=0),
                         np.abs(a.w - b.w).max(initial=0)))


def marginal_error(xi, target):
    """Total variation between both marginals of xi and target on the atom algebra."""
    worst = 0.0
    for axis in (0, 1):
        marg = xi.marginal(axis)
        keys = np.concatenate([marg.angles, target.angles])
        w = np.concatenate([marg.masses, -target.masses])
        if not len(keys):
            continue
        _, inv = np.unique(keys, return_inverse=True)
        worst = max(worst, float(np.abs(np.bincount(inv.reshape(-1), weights=w)).sum()))
    return worst


def trivial_coupling(nu):
    """nu x nu / |nu|."""
    mass = nu.total_mass
    if mass <= 0:
        raise ValueError("cannot couple a zero measure")
    return Coupling.product(nu, nu, 1.0 / mass)


# ------------------------------------------------------------------ families

def ball(center, radius, closed=False):
    if closed:
        return lambda a: dist(a, center) <= radius
    return lambda a: dist(a, center) < radius


def outside(pred):
    return lambda a: ~pred(a)


@dataclass
class CouplingFamily:
    """Couplings xi_x of the targets m_x restricted to U_x = closed B(q, rho(x))."""
    spec: object
    depth: int
    couplings: list
    targets: list
    full: list
    rho: np.ndarray
    info: dict = field(default_factory=dict)

    @property
    def words(self):
        return admissible_words(self.spec, self.depth)

    def word_tuples(self):
        return [tuple(w) for w in self.words.tolist()]

    def U(self, i):
        return ball(Q_ANGLE, self.rho[i], closed=True)

    def replace(self, couplings):
        return CouplingFamily(self.spec, self.depth, couplings, self.targets, self.full, self.rho,
                              dict(self.info))

    def marginal_error(self):
        return max(marginal_error(xi, t) for xi, t in zip(self.couplings, self.targets))

    def symmetry_error(self):
        return max(xi.symmetry_error() for xi in self.couplings)


def restrict_family(full, rho):
    """Targets m_x|U_x for a ConditionalFamily and per-word radii."""
    out = []
    for i, meas in enumerate(full.measures):
        keep = dist(meas.angles, Q_ANGLE) <= rho[i]
        out.append(meas.restrict(keep))
    return out


def family_from_conditionals(full, params):
    """Trivial couplings of m_x|U_x with rho from the parameter ledger."""
    rho = np.array([params.rho[w] for w in full.word_tuples()])
    targets = restrict_family(full, rho)
    return CouplingFamily(full.spec, full.depth, [trivial_coupling(t) for t in targets],
                          targets, list(full.measures), rho)


def energy(famC, m):
    """sum over words x of mu[x] * integral of -log d(u, v) d xi_x."""
    w = m.cylinder_weights(famC.depth)
    total = 0.0
    for i, (word, xi) in enumerate(zip(famC.word_tuples(), famC.couplings)):
        e = xi.energy(locator=f"in word {format_word(word)}")
        total += w[i] * e
    return total


def word_energies(famC):
    return np.array([xi.energy() for xi in famC.couplings])


# -------------------------------------------------------- finite energy step

def max_ball_mass(meas, radius):
    """sup over u of meas(B(u, radius)), open ball, d-units."""
    if not len(meas):
        return 0.0
    a = meas.angles / HALF_PI
    m = meas.masses
    a2 = np.concatenate([a, a + 2.0])
    m2 = np.concatenate([m, m])
    csum = np.concatenate([[0.0], np.cumsum(m2)])
    # an open ball of radius r covers atoms in an interval of length < 2r starting at some atom
    ends = np.searchsorted(a2, a + 2 * radius, side="left")
    starts = np.arange(len(a))
    return float((csum[ends] - csum[starts]).max())


def spread_ball(xi, center, r, locator=""):
    """One step of the diagonal spreading: clear B(center, r)^2 keeping marginals.

    Returns (new coupling, moved mass, theta).
    """
    inB = ball(center, r)
    far = outside(ball(center, 2 * r))
    sq = inB(xi.u) & inB(xi.v)
    S = float(xi.w[sq].sum())
    if S <= 0:
        return xi, 0.0, 0.0
    fq = far(xi.u) & far(xi.v)
    F = float(xi.w[fq].sum())
    if not F > S:
        raise InfeasibleError(
            f"spreading {locator} near angle {center:.6g}: mass {S:.3g} on the small square "
            f"is not below the far-square mass {F:.3g}")
    theta = S / F
    w = xi.w.copy()
    w[sq] = 0.0
    w[fq] *= 1.0 - theta
    near_marg = _group(xi.u[sq], xi.w[sq])
    far_marg = _group(xi.u[fq], xi.w[fq] * theta)
    zeta = Coupling.product(near_marg, far_marg, 1.0 / S)
    out = Coupling(xi.u, xi.v, w) + zeta + zeta.swapped()
    return out.merged(), S, theta


def cover_centers(r):
    """Centres i*r (d-units), i = 0..ceil(2/r), of an r-ball cover of the projective line."""
    n = int(math.ceil(2.0 / r))
    return np.arange(n + 1)


def spread_diagonal(famC, r, ball_bound=None, max_passes=4):
    """Clear every square B(v_i, r)^2 of the cover; the Lebesgue number is r/2.

    ball_bound, if given, is the admissible mass of any ball of radius 2r in the
    full conditionals (checked before anything is moved).
    """
    if ball_bound is not None:
        for word, meas in zip(famC.word_tuples(), famC.full):
            mb = max_ball_mass(meas, 2 * r)
            if not mb < ball_bound:
                raise InfeasibleError(
                    f"small-ball bound fails at word {format_word(word)}: mass {mb:.6g} >= {ball_bound:.6g}")
    n_centers = int(math.ceil(2.0 / r)) + 1
    out, thetas, moved = [], [], []
    for word, xi in zip(famC.word_tuples(), famC.couplings):
        for _ in range(max_passes):
            # only squares that can hold an atom pair: both coordinates within r of the centre
            pos_u = np.mod(xi.u / HALF_PI, 2.0) / r
            cand = np.unique(np.concatenate([np.floor(pos_u), np.ceil(pos_u)]).astype(np.int64) % n_centers)
            changed = False
            for i in cand:
                center = float(i * r * HALF_PI)
                xi, S, th = spread_ball(xi, center, r, locator=f"word {format_word(word)}")
                if S > 0:
                    changed = True
                    thetas.append(th)
                    moved.append(S)
            if not changed:
                break
        out.append(xi)
    new = famC.replace(out)
    new.info.update(spread_radius=r, lebesgue=r / 2, max_theta=max(thetas, default=0.0),
                    moved=float(sum(moved)))
    return new


def choose_spread_radius(famC, alpha, delta, r_start=0.125):
    """Largest dyadic r <= r_start with sup_u m_x(B(u, 2r)) < (alpha + delta)/10 for all x."""
    bound = (alpha + delta) / 10
    r = r_start
    while r > 2.0 ** -60:
        if all(max_ball_mass(meas, 2 * r) < bound for meas in famC.full):
            return r
        r /= 2
    raise InfeasibleError("conditionals carry atoms heavier than (alpha + delta)/10")


def min_pair_distance(xi):
    return float(dist(xi.u, xi.v).min()) if len(xi) else math.inf


# ------------------------------------------------------------------ confine

def confine(famC, params, check=True):
    """Move mass off U2^c x U2^c onto U2^c x U3 and U3 x U2^c, keeping marginals.

    Returns (new family, per-word energy increase).
    """
    r2, r3 = params.radii[2], params.radii[3]
    inU2 = ball(Q_ANGLE, r2)
    inU3 = ball(Q_ANGLE, r3)
    out, deltas = [], []
    for word, xi in zip(famC.word_tuples(), famC.couplings):
        far = ~inU2(xi.u) & ~inU2(xi.v)
        core = inU3(xi.u) & inU3(xi.v)
        nu = _group(xi.u[far], xi.w[far])
        eta = _group(xi.u[core], xi.w[core])
        n_nu, n_eta = nu.total_mass, eta.total_mass
        if n_nu <= 0:
            out.append(xi)
            deltas.append(0.0)
            continue
        if not n_nu <= n_eta:
            raise HypothesisError(
                f"confine at word {format_word(word)}: far mass {n_nu:.3g} exceeds core mass {n_eta:.3g}")
        w = xi.w.copy()
        w[far] = 0.0
        w[core] *= 1.0 - n_nu / n_eta
        cross = Coupling.product(nu, eta, 1.0 / n_eta)
        new = (Coupling(xi.u, xi.v, w) + cross + cross.swapped()).merged()
        d = new.energy() - xi.energy()
        if check and d > 4 * params.delta * params.M2 + 1e-9:
            raise HypothesisError(f"confine energy increase {d:.3g} exceeds 4 delta M2")
        out.append(new)
        deltas.append(d)
    return famC.replace(out), np.array(deltas)


# ---------------------------------------------------------- push-forward

@dataclass
class RawFamily:
    couplings: list
    exterior: list      # sum g(y) A_* (m_y restricted to U_y^c), full line
    pushed_full: list   # sum g(y) A_* m_y


def transfer_pushforward(famC, c, m, N):
    """xi_hat_x = sum over N-step predecessors y of g(y) (A^N(y) x A^N(y))_* xi_y.

    Also pushes the exterior parts m_y|U_y^c and the full conditionals with the same weights.
    """
    n = len(famC.couplings)
    if N == 0:
        return RawFamily(list(famC.couplings), [_exterior(famC, i) for i in range(n)], list(famC.full))
    edges = forward_edges(c, m, famC.depth, N)
    parts = [[] for _ in range(n)]
    ext = [[] for _ in range(n)]
    full = [[] for _ in range(n)]
    for e in range(len(edges.target)):
        g = edges.weights[e]
        if g <= 0:
            continue
        t, s, M = edges.target[e], edges.source[e], edges.matrices[e]
        parts[t].append(famC.couplings[s].push(M, g))
        ex = _exterior(famC, s)
        ext[t].append((act(M, ex.angles), ex.masses * g))
        fm = famC.full[s]
        full[t].append((act(M, fm.angles), fm.masses * g))
    couplings = [sum(p[1:], p[0]).merged() if p else Coupling.empty() for p in parts]
    exterior = [_group(np.concatenate([a for a, _ in q]), np.concatenate([w for _, w in q]))
                if q else ProjMeasure.empty() for q in ext]
    pushed = [_group(np.concatenate([a for a, _ in q]), np.concatenate([w for _, w in q]))
              if q else ProjMeasure.empty() for q in full]
    return RawFamily(couplings, exterior, pushed)


def _exterior(famC, i):
    meas = famC.full[i]
    keep = dist(meas.angles, Q_ANGLE) > famC.rho[i]
    return meas.restrict(keep)


# ---------------------------------------------------------- defect split

@dataclass
class Defects:
    eta: ProjMeasure
    I: ProjMeasure
    O: ProjMeasure
    residual: float


def defect_split(raw, targets_full, rho, params, check=True):
    """Per word: m_x|U_x = eta + I + O with
    eta = first marginal of xi_hat on U_x x U_x, O = first marginal on U_x x U_x^c,
    I = pushed exterior mass landing in U_x."""
    r1 = params.radii[1]
    out = []
    for i, xi in enumerate(raw.couplings):
        Ux = ball(Q_ANGLE, rho[i], closed=True)
        inside = Ux(xi.u) & Ux(xi.v)
        leaving = Ux(xi.u) & ~Ux(xi.v)
        eta = _group(xi.u[inside], xi.w[inside])
        O = _group(xi.u[leaving], xi.w[leaving])
        ex = raw.exterior[i]
        I = ex.restrict(Ux(ex.angles))
        tgt = targets_full[i].restrict(Ux(targets_full[i].angles))
        keys = np.concatenate([tgt.angles, eta.angles, I.angles, O.angles])
        w = np.concatenate([tgt.masses, -eta.masses, -I.masses, -O.masses])
        if len(keys):
            _, inv = np.unique(keys, return_inverse=True)
            resid = float(np.abs(np.bincount(inv.reshape(-1), weights=w)).max())
        else:
            resid = 0.0
        if check:
            if resid > 1e-10:
                raise HypothesisError(f"defect identity residual {resid:.3g} at word index {i}")
            nI, nO = I.total_mass, O.total_mass
            if nO > nI + 1e-12:
                raise HypothesisError(f"outbound defect {nO:.3g} exceeds inbound {nI:.3g}")
            if nI > 2 * params.delta + 1e-12:
                raise HypothesisError(f"inbound defect {nI:.3g} exceeds 2 delta")
            if len(I) and np.any(dist(I.angles, Q_ANGLE) < r1):
                raise HypothesisError("inbound defect charges U1")
        out.append(Defects(eta, I, O, resid))
    return out


# -------------------------------------------------------- decrement step

@dataclass
class StepReport:
    energy_before: float
    energy_after: float
    ledger: list
    targets_changed: bool

    @property
    def drop(self):
        return self.energy_before - self.energy_after


def check_hypotheses(full, rho, params):
    """Mass conditions of the ledger on the current conditionals: m(U4) > alpha - delta and
    m(U0) < alpha + delta for every word."""
    a, d = params.alpha, params.delta
    for i, meas in enumerate(full):
        m4 = meas.ball_mass(Q_ANGLE, params.radii[4], closed=False)
        m0 = meas.ball_mass(Q_ANGLE, params.radii[0], closed=False)
        if not m4 > a - d:
            raise HypothesisError(f"m(U4) = {m4:.6g} is not above alpha - delta at word index {i}")
        if not m0 < a + d:
            raise HypothesisError(f"m(U0) = {m0:.6g} is not below alpha + delta at word index {i}")


def decrement_step(famC, c, m, params):
    """confine -> push-forward -> defect split -> reassembly.

    The new targets are the pushed conditionals (equal to the old ones when the
    family is invariant), with rho re-solved so each U_x again carries alpha + delta.
    """
    a, dl, M1, M2 = params.alpha, params.delta, params.M1, params.M2
    N = params.N
    r1, r2, r3 = params.radii[1], params.radii[2], params.radii[3]
    mu = m.cylinder_weights(famC.depth)
    e0 = energy(famC, m)
    ledger = []

    def row(term, bound, measured, kind="le"):
        ok = measured <= bound + 1e-9 if kind == "le" else measured >= bound - 1e-9
        ledger.append({"term": term, "bound": bound, "measured": measured, "ok": bool(ok)})

    dot, deltas = confine(famC, params)
    row("confine", 4 * dl * M2, float(np.dot(mu, deltas)))

    # expansion gain and cross term measured on the confined family before pushing
    inU1 = ball(Q_ANGLE, r1)
    inU2 = ball(Q_ANGLE, r2)
    edges = forward_edges(c, m, famC.depth, N)
    gain = 0.0
    cross = 0.0
    for e in range(len(edges.target)):
        g = edges.weights[e]
        if g <= 0:
            continue
        t, s, M = edges.target[e], edges.source[e], edges.matrices[e]
        xi = dot.couplings[s]
        sq = inU1(xi.u) & inU1(xi.v)
        before = margulis_phi(xi.u[sq], xi.v[sq])
        after = margulis_phi(act(M, xi.u[sq]), act(M, xi.v[sq]))
        gain += mu[t] * g * float(np.dot(xi.w[sq], before - after))
        cr = (inU2(xi.u) & ~inU1(xi.v)) | (~inU1(xi.u) & inU2(xi.v))
        cross += mu[t] * g * float(np.dot(xi.w[cr], margulis_phi(act(M, xi.u[cr]), act(M, xi.v[cr]))))
    row("expansion_gain", 2 * a, gain, kind="ge")
    row("cross", 4 * dl * M1 * M2, cross)

    raw = transfer_pushforward(dot, c, m, N)
    full_new = raw.pushed_full
    rho_new = _rho_for(full_new, famC, a + dl)
    check_hypotheses(full_new, rho_new, params)
    defects = defect_split(raw, full_new, rho_new, params)

    inU3 = ball(Q_ANGLE, r3)
    out, oi_terms, lt_terms = [], [], []
    for i, (xi, df) in enumerate(zip(raw.couplings, defects)):
        Ux = ball(Q_ANGLE, rho_new[i], closed=True)
        inside = Ux(xi.u) & Ux(xi.v)
        base = xi.select(inside)
        core = inU3(base.u) & inU3(base.v)
        theta = _group(base.u[core], base.w[core])
        nI = df.I.total_mass
        O_in = df.O.restrict(inU2(df.O.angles))
        O_out = df.O.restrict(~inU2(df.O.angles))
        nOin = O_in.total_mass
        ratio = nOin / nI if nI > 0 else 0.0
        lam = _group(np.concatenate([df.I.angles, O_out.angles]),
                     np.concatenate([df.I.masses * (1 - ratio), O_out.masses]))
        n_lam, n_theta = lam.total_mass, theta.total_mass
        if n_lam > n_theta:
            raise HypothesisError(f"correction mass {n_lam:.3g} exceeds core mass {n_theta:.3g}")
        w = base.w.copy()
        if n_theta > 0:
            w[core] *= 1 - n_lam / n_theta
        new = Coupling(base.u, base.v, w)
        oi = Coupling.empty()
        if nI > 0 and nOin > 0:
            oi = Coupling.product(O_in, df.I, 1.0 / nI)
            new = new + oi + oi.swapped()
        lt = Coupling.empty()
        if n_theta > 0 and n_lam > 0:
            lt = Coupling.product(lam, theta, 1.0 / n_theta)
            new = new + lt + lt.swapped()
        out.append(new.merged())
        oi_terms.append(2 * oi.energy() if len(oi) else 0.0)
        lt_terms.append(2 * lt.energy() if len(lt) else 0.0)
    row("outbound_inbound", 4 * dl * M2, float(np.dot(mu, oi_terms)))
    row("correction_core", 8 * dl * M2, float(np.dot(mu, lt_terms)))

    targets_new = restrict_family_list(full_new, rho_new)
    new_fam = CouplingFamily(famC.spec, famC.depth, out, targets_new, full_new, rho_new,
                             dict(famC.info))
    e1 = energy(new_fam, m)
    row("net_drop", a, e0 - e1, kind="ge")
    changed = any(len(f1) != len(f0) or not np.array_equal(f1.angles, f0.angles)
                  for f1, f0 in zip(full_new, famC.full))
    return new_fam, StepReport(e0, e1, ledger, changed)


def restrict_family_list(full, rho):
    return [meas.restrict(dist(meas.angles, Q_ANGLE) <= rho[i]) for i, meas in enumerate(full)]


def _rho_for(full, famC, target):
    fam = ConditionalFamily(famC.spec, famC.depth, list(full))
    try:
        r = solve_rho(fam, target)
    except InfeasibleError as exc:
        raise HypothesisError(str(exc)) from exc
    return np.array([r[w] for w in fam.word_tuples()])


# ------------------------------------------------------------ descent loop

@dataclass
class DescentResult:
    E0: float
    steps: list
    contradiction: bool
    reason: str
    bound_steps: int
    alpha: float

    def ledger_rows(self):
        rows = []
        for t, st in enumerate(self.steps, 1):
            for r in st.ledger:
                rows.append({"step": t, **r})
            rows.append({"step": t, "term": "energy_after", "bound": self.E0 - t * self.alpha,
                         "measured": st.energy_after, "ok": bool(st.energy_after <= self.E0 - t * self.alpha + 1e-9)})
        return rows


def energy_descent(famC, c, m, params, max_steps=None):
    """Apply decrement_step until the accumulated bound E0 - t*alpha is negative or a
    standing hypothesis fails; either outcome raises the contradiction flag."""
    E0 = energy(famC, m)
    bound = int(math.ceil(E0 / params.alpha)) if E0 > 0 else 0
    max_steps = bound + 1 if max_steps is None else max_steps
    steps = []
    reason = "step budget exhausted"
    contradiction = False
    fam = famC
    for t in range(1, max_steps + 1):
        try:
            fam, rep = decrement_step(fam, c, m, params)
        except HypothesisError as exc:
            contradiction, reason = True, f"hypothesis failed at step {t}: {exc}"
            break
        steps.append(rep)
        if rep.drop < params.alpha - 1e-9:
            reason = f"step {t} dropped only {rep.drop:.6g}"
            break
        if E0 - t * params.alpha < 0:
            contradiction, reason = True, f"energy bound E0 - t alpha negative at step {t}"
            break
    return DescentResult(E0, steps, contradiction, reason, bound, params.alpha), fam


# --------------------------------------------------------- demo instances

@dataclass
class DemoInstance:
    spec: object
    cocycle: object
    measure: object
    full: ConditionalFamily
    params: object
    family: CouplingFamily
    spread_radius: float


def demo_instance(seed=0, bump_atoms=None):
    """Generated instance satisfying the parameter ledger.

    Constant cocycle diag(a, 1/a) with a < 1 (q expanding), Bernoulli base,
    depth-1 conditionals made of a narrow bump at q of mass alpha - delta/2,
    a ring of mass 3 delta/2 at distance 0.55..0.6 and the remaining mass near p.
    """
    from .cocycle import WindowedCocycle
    from .projective import margulis_setup
    from .symbolic import SubshiftSpec
    from .thermo import bernoulli

    rng = np.random.default_rng(seed)
    spec = SubshiftSpec.full_shift(2, 0.5)
    reasons = []
    for _ in range(50):
        a = math.exp(-rng.uniform(0.605, 0.69))
        alpha = float(rng.uniform(0.3, 0.6))
        wts = rng.uniform(0.3, 0.7)
        m = bernoulli(spec, [wts, 1 - wts])
        c = WindowedCocycle.constant(spec, np.diag([a, 1 / a]))
        try:
            params = margulis_setup(c, m, None, alpha)
        except InfeasibleError as exc:
            reasons.append(str(exc))
            continue
        E = float(a ** (-2 * params.N))
        r4 = params.radii[4]
        half = 0.5 * r4 / E
        nb = bump_atoms or int(rng.integers(11, 16))
        spacing = 2 * half / (nb - 1)
        if spacing < 2.0 ** -38:
            reasons.append("bump spacing below 2^-38")
            continue
        dl = params.delta
        measures = []
        for _w in range(2):
            bump = ProjMeasure(np.linspace(-half, half, nb) * HALF_PI,
                               np.full(nb, (alpha - dl / 2) / nb))
            nr = 12
            ring_d = np.sort(rng.uniform(0.55, 0.6, nr))
            side = np.where(np.arange(nr) % 2 == 0, 1.0, -1.0)
            ring = ProjMeasure(side * ring_d * HALF_PI, np.full(nr, 1.5 * dl / nr))
            npc = int(math.ceil(12 * (1 - alpha) / alpha)) + 4
            pc_d = rng.uniform(0.95, 1.0, npc)
            side = np.where(np.arange(npc) % 2 == 0, 1.0, -1.0)
            pcl = ProjMeasure(side * pc_d * HALF_PI, np.full(npc, (1 - alpha - dl) / npc))
            measures.append(bump + ring + pcl)
        full = ConditionalFamily(spec, 1, measures)
        params.rho = solve_rho(full, alpha + dl)
        famC = family_from_conditionals(full, params)
        r = spacing / 5
        bound = (alpha + dl) / 10
        if any(max_ball_mass(meas, 2 * r) >= bound for meas in full.measures):
            reasons.append("small-ball bound")
            continue
        famC = spread_diagonal(famC, r, ball_bound=bound)
        return DemoInstance(spec, c, m, full, params, famC, r)
    raise InfeasibleError("could not generate a demo instance: " + "; ".join(sorted(set(reasons))))
