"""Projective line: action of 2x2 matrices, angular metric, atomic measures and
the parameter choices for the Margulis-function argument."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .cocycle import det2, inv2, products_along, singular_values
from .symbolic import admissible_words, format_word

HALF_PI = math.pi / 2
Q_ANGLE = 0.0
P_ANGLE = HALF_PI


class InfeasibleError(RuntimeError):
    """A construction could not satisfy one of its constraints; message names which."""


def reduce_angle(a):
    return np.mod(a, math.pi)


def act(M, v):
    """Direction of M applied to the line at angle v (vectorised over v)."""
    M = np.asarray(M, dtype=float)
    c, s = np.cos(v), np.sin(v)
    x = M[..., 0, 0] * c + M[..., 0, 1] * s
    y = M[..., 1, 0] * c + M[..., 1, 1] * s
    out = np.mod(np.arctan2(y, x), math.pi)
    # arctan2 can return exactly pi after the mod for tiny negative y
    return np.where(out >= math.pi, 0.0, out)


def dist(u, v):
    """Angular distance normalised to diameter 1."""
    u, v = np.asarray(u), np.asarray(v)
    # ordered difference so that dist(u, v) == dist(v, u) bit for bit
    d = np.mod(np.maximum(u, v) - np.minimum(u, v), math.pi)
    return np.minimum(d, math.pi - d) / HALF_PI


def signed_offset(u, v):
    """Signed angle from v to u in [-pi/2, pi/2)."""
    return np.mod(np.asarray(u) - np.asarray(v) + HALF_PI, math.pi) - HALF_PI


def log_gain(M, v):
    M = np.asarray(M, dtype=float)
    c, s = np.cos(v), np.sin(v)
    x = M[..., 0, 0] * c + M[..., 0, 1] * s
    y = M[..., 1, 0] * c + M[..., 1, 1] * s
    return 0.5 * np.log(x * x + y * y)


def deriv_norm(M, v):
    """Norm of the derivative of the projective action at v: |det M| / |M v|^2."""
    M = np.asarray(M, dtype=float)
    c, s = np.cos(v), np.sin(v)
    x = M[..., 0, 0] * c + M[..., 0, 1] * s
    y = M[..., 1, 0] * c + M[..., 1, 1] * s
    return np.abs(det2(M)) / (x * x + y * y)


def margulis_phi(u, v):
    """-log d(u, v); +inf when the directions coincide."""
    d = dist(u, v)
    with np.errstate(divide="ignore"):
        out = -np.log(d)
    return out if np.ndim(out) else float(out)


class ProjMeasure:
    """Finite atomic measure on the projective line, atoms sorted by angle."""

    __slots__ = ("angles", "masses")

    def __init__(self, angles, masses, sort=True):
        a = reduce_angle(np.asarray(angles, dtype=float).reshape(-1))
        m = np.asarray(masses, dtype=float).reshape(-1)
        if a.shape != m.shape:
            raise ValueError("angles and masses must have the same length")
        if np.any(m < 0):
            raise ValueError("masses must be nonnegative")
        if sort and len(a) > 1:
            order = np.argsort(a, kind="stable")
            a, m = a[order], m[order]
        self.angles = a
        self.masses = m

    @classmethod
    def empty(cls):
        return cls(np.zeros(0), np.zeros(0))

    @classmethod
    def dirac(cls, angle, mass=1.0):
        return cls([angle], [mass])

    @classmethod
    def uniform_grid(cls, G, mass=1.0, offset=0.5):
        """G equal atoms at (i + offset) pi / G."""
        return cls((np.arange(G) + offset) * math.pi / G, np.full(G, mass / G))

    @classmethod
    def uniform_ball(cls, center, radius, count, mass=1.0):
        """count atoms evenly spread over the closed ball B(center, radius) (d-units)."""
        off = np.linspace(-radius, radius, count) * HALF_PI
        return cls(center + off, np.full(count, mass / count))

    @property
    def total_mass(self):
        return float(self.masses.sum())

    def __len__(self):
        return len(self.angles)

    def __repr__(self):
        return f"ProjMeasure({len(self)} atoms, mass={self.total_mass:.6g})"

    def __add__(self, other):
        return ProjMeasure(np.concatenate([self.angles, other.angles]),
                           np.concatenate([self.masses, other.masses]))

    def scaled(self, c):
        return ProjMeasure(self.angles, self.masses * c, sort=False)

    def push(self, M):
        return ProjMeasure(act(M, self.angles), self.masses)

    def mass_where(self, mask):
        return float(self.masses[mask].sum())

    def restrict(self, mask):
        return ProjMeasure(self.angles[mask], self.masses[mask], sort=False)

    def ball_mass(self, center, radius, closed=True):
        d = dist(self.angles, center)
        return self.mass_where(d <= radius if closed else d < radius)

    def coalesce(self, eps):
        """Merge atoms falling in the same angular bin (see angle_bins).

        Merged atoms sit at the mass-weighted circular mean (doubled-angle average),
        so every merged group spans less than eps.
        """
        n = len(self)
        if n <= 1 or eps <= 0:
            return self.drop_zero()
        a, m = self.angles, self.masses
        bins = angle_bins(a, eps)
        if len(np.unique(bins)) == n:
            return self.drop_zero()
        _, labels = np.unique(bins, return_inverse=True)
        return _merge(a, m, labels.reshape(-1))

    def drop_zero(self):
        keep = self.masses > 0
        return ProjMeasure(self.angles[keep], self.masses[keep], sort=False)

    def cdf_on(self, edges):
        """Cumulative mass of atoms with angle < each edge."""
        csum = np.concatenate([[0.0], np.cumsum(self.masses)])
        return csum[np.searchsorted(self.angles, edges, side="left")]


def _merge(a, m, labels):
    count = labels.max() + 1
    mass = np.bincount(labels, weights=m, minlength=count)
    z = np.bincount(labels, weights=m * np.cos(2 * a), minlength=count) \
        + 1j * np.bincount(labels, weights=m * np.sin(2 * a), minlength=count)
    # clusters with zero mass keep their first angle
    first = np.full(count, np.nan)
    first[labels[::-1]] = a[::-1]
    ang = np.where(mass > 0, np.angle(z) / 2, first)
    keep = mass > 0
    return ProjMeasure(ang[keep], mass[keep])


def angle_bins(a, eps):
    """Bin j collects angles within eps/2 of j*eps (mod pi), so q and p sit at bin centres
    and angles just below pi share bin 0 with angles just above 0."""
    return np.floor(np.mod(np.asarray(a) + eps / 2, math.pi) / eps).astype(np.int64)


def kolmogorov(m1, m2, resolution=1e-12):
    """Max CDF gap between two measures after binning angles at the given resolution."""
    b1 = angle_bins(m1.angles, resolution)
    b2 = angle_bins(m2.angles, resolution)
    keys = np.concatenate([b1, b2])
    w = np.concatenate([m1.masses, -m2.masses])
    if not len(keys):
        return 0.0
    order = np.argsort(keys, kind="stable")
    keys, w = keys[order], w[order]
    last = np.r_[keys[1:] != keys[:-1], True]
    c = np.cumsum(w)[last]
    tot = abs(m1.total_mass - m2.total_mass)
    return float(max(np.abs(c).max(), tot))


# ---------------------------------------------------------------- parameters

@dataclass
class MargulisParams:
    N: int
    kappa: dict
    radii: tuple
    M1: float
    M2: float
    delta: float
    alpha: float
    beta: float | None = None
    rho: dict = field(default_factory=dict)
    integral: float = 0.0
    window: tuple = (0, 1)
    products: dict = field(default_factory=dict, repr=False)
    checks: dict = field(default_factory=dict)

    @property
    def kappa_integral(self):
        return self.integral / 2

    def rows(self):
        r = [{"name": "N", "value": self.N}, {"name": "integral", "value": self.integral}]
        r += [{"name": f"r{i}", "value": v} for i, v in enumerate(self.radii)]
        r += [{"name": "M1", "value": self.M1}, {"name": "M2", "value": self.M2},
              {"name": "delta", "value": self.delta}, {"name": "alpha", "value": self.alpha}]
        r += [{"name": f"kappa[{format_word(w)}]", "value": v} for w, v in self.kappa.items()]
        r += [{"name": f"rho[{format_word(w)}]", "value": v} for w, v in self.rho.items()]
        return r


def _is_diagonal(values, tol=1e-12):
    return bool(np.all(np.abs(values[:, 0, 1]) <= tol) and np.all(np.abs(values[:, 1, 0]) <= tol))


def expansion_integral(c, m, N, word_cap=1 << 14):
    """Exact integral of log ||D_q P A^N|| against m."""
    L = N + c.width - 1
    words = admissible_words(c.spec, L) if _count(c.spec, L) <= word_cap else None
    if words is not None:
        P, _ = products_along(c, words, N)
        return float(np.dot(m.cylinder_weights(L), np.log(deriv_norm(P, Q_ANGLE))))
    # diagonal cocycles: the log-derivative at q is additive along the orbit
    g = np.log(deriv_norm(c.values, Q_ANGLE))
    return N * float(np.dot(m.cylinder_weights(c.width), g))


def _count(spec, L):
    v = np.ones(spec.alphabet_size)
    for _ in range(L - 1):
        v = spec.Q @ v
    return v.sum()


def _bisect(pred, hi, iters=60):
    """Largest r in (0, hi) with pred(r) true, assuming monotone (true near 0)."""
    lo = 0.0
    if pred(hi):
        return hi
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if pred(mid):
            lo = mid
        else:
            hi = mid
    return lo


def solve_rho(family, target, tol=1e-12):
    """rho(x) with m_x of the closed ball B(q, rho) equal to target (within tol).

    Atom-exact: rho is the distance of the last atom in the cumulative prefix
    that reaches the target, and the next atom must lie strictly farther out.
    """
    rho = {}
    for w, meas in zip(family.word_tuples(), family.measures):
        d = dist(meas.angles, Q_ANGLE)
        order = np.argsort(d, kind="stable")
        ds, cm = d[order], np.cumsum(meas.masses[order])
        hit = np.nonzero(np.abs(cm - target) <= tol)[0]
        # ties at equal distance must be taken together
        hit = [i for i in hit if i + 1 == len(ds) or ds[i + 1] > ds[i]]
        if not hit:
            raise InfeasibleError(
                f"conditional at {format_word(w)} has no closed ball around q of mass {target:.6g}")
        rho[w] = float(ds[hit[0]])
    return rho


def margulis_setup(c, m, conditionals=None, alpha=0.5, beta=None, r0=0.5,
                   N_max=64, grid=2048, margin=1e-9, check_masses=True):
    """Choose N, kappa, nested radii, M1, M2, delta and rho for a cocycle fixing q and p."""
    vals = c.values
    if not _is_diagonal(vals):
        raise InfeasibleError("cocycle must leave the directions q and p invariant (diagonal table)")
    if not 0 < alpha < 1:
        raise InfeasibleError("alpha must lie in (0, 1)")
    if not 0 < r0 < 1:
        raise InfeasibleError("r0 must lie in (0, 1) so that p stays outside the closure of U0")
    N = None
    for n in range(1, N_max + 1):
        integral = expansion_integral(c, m, n)
        if integral > 6:
            N = n
            break
    if N is None:
        raise InfeasibleError(f"expansion integral never exceeds 6 for N <= {N_max}")
    L = N + c.width - 1
    words = admissible_words(c.spec, L)
    P, scale = products_along(c, words, N)
    P = P * np.exp(scale)[:, None, None]
    # one representative per distinct product
    uniq, inv = np.unique(np.round(P.reshape(len(P), 4), 12), axis=0, return_inverse=True)
    U = uniq.reshape(-1, 2, 2)
    Uinv = inv2(U)
    kap_u = 0.5 * np.log(deriv_norm(U, Q_ANGLE))
    if np.any(kap_u <= 0):
        raise InfeasibleError("P A^N does not expand at q for every word")
    kappa = {tuple(w): float(kap_u[inv[i]]) for i, w in enumerate(words.tolist())}

    t = np.linspace(-1.0, 1.0, grid)

    def grid_ball(r):
        return t * r * HALF_PI

    def dmax(Ms, pts):
        return dist(act(Ms[:, None], pts[None, :]), Q_ANGLE).max()

    def ok_r1(r):
        pts = grid_ball(r)
        h = 2 * r / (grid - 1)
        lip = np.exp(np.abs(np.log(deriv_norm(U[:, None], pts[None, :]))).max())
        if dmax(U, pts) + lip * h >= r0 - margin:
            return False
        if dmax(Uinv, pts) + lip * h >= r0 - margin:
            return False
        dn = deriv_norm(U[:, None], pts[None, :])
        return bool(np.all(dn >= np.exp(kap_u)[:, None] + margin))

    r1 = _bisect(ok_r1, r0 * (1 - 1e-6))
    if r1 <= 0:
        raise InfeasibleError("no neighbourhood U1 satisfies the containment and expansion bounds")
    r2, r3 = 0.875 * r1, 0.75 * r1

    def ok_r4(r):
        pts = grid_ball(r)
        h = 2 * r / (grid - 1)
        lip = np.exp(np.abs(np.log(deriv_norm(U[:, None], pts[None, :]))).max())
        return dmax(U, pts) + lip * h < r3 - margin

    r4 = _bisect(ok_r4, r3 * (1 - 1e-6))
    if r4 <= 0:
        raise InfeasibleError("no U4 maps into U3")
    smax, smin = singular_values(U)
    M1 = max(float(np.log(smax / smin).max()) + margin, 1.0 + margin)
    M2 = max(-math.log(min(r1 - r2, r2 - r3)), 1.0 + margin)
    delta = None
    for j in range(1, 41):
        d = 2.0 ** -j
        if d < 1 - alpha and 100 * d * M1 * M2 < alpha:
            delta = d
            break
    if delta is None:
        raise InfeasibleError("no dyadic delta >= 2^-40 meets 100 delta M1 M2 < alpha")
    params = MargulisParams(N, kappa, (r0, r1, r2, r3, r4), M1, M2, delta, alpha, beta,
                            integral=integral, window=(c.lo, c.lo + L),
                            products={tuple(w): P[i] for i, w in enumerate(words.tolist())})
    if conditionals is not None:
        if check_masses:
            for w, meas in zip(conditionals.word_tuples(), conditionals.measures):
                m4 = meas.ball_mass(Q_ANGLE, r4, closed=False)
                m0 = meas.ball_mass(Q_ANGLE, r0, closed=False)
                if not m4 > alpha - delta:
                    raise InfeasibleError(
                        f"conditional at {format_word(w)} not concentrated near q: m(U4)={m4:.6g}")
                if not m0 < alpha + delta:
                    raise InfeasibleError(
                        f"conditional at {format_word(w)} too heavy near q: m(U0)={m0:.6g}")
        params.rho = solve_rho(conditionals, alpha + delta)
    params.checks = verify_params(params)
    return params


def verify_params(params, grid=257):
    """Grid check of the contraction estimate for the Margulis function on U1 pairs.

    Returns the worst slack of phi(Au, Av) - phi(u, v) + kappa (must be <= 1e-9).
    """
    r1 = params.radii[1]
    pts = np.linspace(-r1, r1, grid)[1:-1] * HALF_PI
    u, v = np.meshgrid(pts, pts)
    off = u != v
    u, v = u[off], v[off]
    worst = -math.inf
    seen = set()
    for w, P in params.products.items():
        key = tuple(np.round(P.ravel(), 12))
        if key in seen:
            continue
        seen.add(key)
        lhs = margulis_phi(act(P, u), act(P, v))
        slack = lhs - margulis_phi(u, v) + params.kappa[w]
        worst = max(worst, float(slack.max()))
    return {"phi_contraction_slack": worst}
