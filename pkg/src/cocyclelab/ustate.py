"""Invariant families of measures on the projective line indexed by future cylinders."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .cocycle import HolonomyError, holonomy, inv2, iterate, products_along
from .projective import (HALF_PI, ProjMeasure, act, angle_bins, dist, kolmogorov,
                         log_gain)
from .symbolic import (admissible_words, format_word, random_point, shift,
                       sliding_indices, with_random_future)

DEFAULT_EPS = HALF_PI * 2.0 ** -12
# irrational grid offset: a grid symmetric about an invariant direction can merge
# mirror-image atoms exactly onto it, where the mass is never released
GRID_OFFSET = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass
class ConditionalFamily:
    """One probability measure on the projective line per admissible depth-k word."""
    spec: object
    depth: int
    measures: list
    eps: float = DEFAULT_EPS
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.measures) != len(self.words):
            raise ValueError("one measure per admissible depth-k word is required")

    @property
    def words(self):
        return admissible_words(self.spec, self.depth)

    def word_tuples(self):
        return [tuple(w) for w in self.words.tolist()]

    def index(self, word):
        return int(sliding_indices(self.spec, np.array(word)[None], self.depth)[0, 0])

    def __getitem__(self, word):
        return self.measures[self.index(word)]

    @classmethod
    def constant(cls, spec, depth, meas, eps=DEFAULT_EPS):
        n = len(admissible_words(spec, depth))
        return cls(spec, depth, [meas] * n, eps)

    @classmethod
    def uniform(cls, spec, depth, G=64, eps=DEFAULT_EPS):
        return cls.constant(spec, depth, ProjMeasure.uniform_grid(G, offset=GRID_OFFSET), eps)

    def mass_error(self):
        return max(abs(m.total_mass - 1.0) for m in self.measures)

    def max_atoms(self):
        return max(len(m) for m in self.measures)

    def to_rows(self):
        rows = []
        for w, meas in zip(self.word_tuples(), self.measures):
            for a, mass in zip(meas.angles, meas.masses):
                rows.append({"word": format_word(w), "angle": float(a), "mass": float(mass)})
        return rows


@dataclass(frozen=True)
class TransportEdges:
    """Edges of a transport step: target word <- source word through matrix, with weight."""
    target: np.ndarray
    source: np.ndarray
    matrices: np.ndarray
    weights: np.ndarray
    long_words: np.ndarray


def _full_products(c, seqs, n):
    P, scale = products_along(c, seqs, n)
    return P * np.exp(scale)[:, None, None]


def forward_edges(c, m, k, N=1):
    """Edges for (A^N)_* from depth-k words y to depth-k words x = f^N y.

    Weight mu[y_0..y_{N+k-1}] / mu[x]: probability of the N-step past given x.
    """
    spec = c.spec
    if not c.future_only:
        raise ValueError("cocycle must be future-only")
    if k + 1 < c.hi:
        raise ValueError(f"depth {k} too small for a cocycle reading {c.hi} coordinates")
    L = N + k
    ext = admissible_words(spec, L)
    tgt = sliding_indices(spec, ext[:, N:], k)[:, 0]
    src = sliding_indices(spec, ext[:, :k], k)[:, 0]
    need = N + c.hi - 1
    mats = _full_products(c, ext[:, :need], N) if need <= L else None
    w_ext = m.cylinder_weights(L)
    w_k = m.cylinder_weights(k)
    with np.errstate(divide="ignore", invalid="ignore"):
        g = np.where(w_k[tgt] > 0, w_ext / w_k[tgt], 0.0)
    return TransportEdges(tgt, src, mats, g, ext)


def backward_edges(c, m, k):
    """Edges for the s-side operator m_x = sum_b P(b|x) (A(x)^-1)_* m_{x_1..x_{k-1} b}."""
    spec = c.spec
    if not c.future_only:
        raise ValueError("cocycle must be future-only")
    if k < c.hi:
        raise ValueError(f"depth {k} too small for a cocycle reading {c.hi} coordinates")
    ext = admissible_words(spec, k + 1)
    tgt = sliding_indices(spec, ext[:, :k], k)[:, 0]
    src = sliding_indices(spec, ext[:, 1:], k)[:, 0]
    mats = inv2(_full_products(c, ext[:, :c.hi], 1))
    w_ext = m.cylinder_weights(k + 1)
    w_k = m.cylinder_weights(k)
    with np.errstate(divide="ignore", invalid="ignore"):
        g = np.where(w_k[tgt] > 0, w_ext / w_k[tgt], 0.0)
    return TransportEdges(tgt, src, mats, g, ext)


def transport(measures, edges, n_targets, eps):
    """Apply weighted matrix pushes along edges and coalesce per target.

    All edges are processed in one pass: atoms are keyed by (target, angle bin)
    and merged at their mass-weighted circular mean.
    """
    live = np.nonzero(edges.weights > 0)[0]
    sizes = np.array([len(measures[edges.source[e]]) for e in live], dtype=np.int64)
    if not len(live) or sizes.sum() == 0:
        return [ProjMeasure.empty() for _ in range(n_targets)]
    ang = np.concatenate([measures[edges.source[e]].angles for e in live])
    mass = np.concatenate([measures[edges.source[e]].masses for e in live])
    edge_of = np.repeat(live, sizes)
    new_ang = act(edges.matrices[edge_of], ang)
    new_mass = mass * edges.weights[edge_of]
    tgt = edges.target[edge_of]
    nb = int(math.ceil(math.pi / eps)) + 1
    key = tgt * nb + angle_bins(new_ang, eps)
    uk, lab = np.unique(key, return_inverse=True)
    lab = lab.reshape(-1)
    tot = np.bincount(lab, weights=new_mass, minlength=len(uk))
    z = np.bincount(lab, weights=new_mass * np.cos(2 * new_ang), minlength=len(uk)) \
        + 1j * np.bincount(lab, weights=new_mass * np.sin(2 * new_ang), minlength=len(uk))
    single = np.bincount(lab, minlength=len(uk)) == 1
    first = np.empty(len(uk))
    first[lab[::-1]] = new_ang[::-1]
    pos = np.where(single, first, np.mod(np.angle(z) / 2, math.pi))
    owner = uk // nb
    out = []
    bounds = np.searchsorted(owner, np.arange(n_targets + 1))
    for t in range(n_targets):
        sl = slice(bounds[t], bounds[t + 1])
        keep = tot[sl] > 0
        out.append(ProjMeasure(pos[sl][keep], tot[sl][keep]))
    return out


def push_invariance(fam, c, m, eps=None):
    """One application of m_x <- sum over predecessors y of (1/J(y)) A(y)_* m_y."""
    eps = fam.eps if eps is None else eps
    edges = forward_edges(c, m, fam.depth)
    return ConditionalFamily(fam.spec, fam.depth, transport(fam.measures, edges, len(fam.measures), eps), eps)


def pull_invariance(fam, c, m, eps=None):
    eps = fam.eps if eps is None else eps
    edges = backward_edges(c, m, fam.depth)
    return ConditionalFamily(fam.spec, fam.depth, transport(fam.measures, edges, len(fam.measures), eps), eps)


def family_distance(f1, f2, resolution=None):
    """Max over words of the binned Kolmogorov distance (bins = coalescing bins by default)."""
    resolution = f1.eps if resolution is None else resolution
    return max(kolmogorov(a, b, resolution) for a, b in zip(f1.measures, f2.measures))


def _iterate_family(step, fam, tol, max_iter, resolution):
    history = []
    residual = math.inf
    for it in range(1, max_iter + 1):
        new = step(fam)
        residual = family_distance(new, fam, resolution)
        history.append(residual)
        fam = new
        if residual <= tol:
            break
    fam.info = {"converged": residual <= tol, "iterations": len(history), "history": history}
    return fam, residual


def default_depth(c, m, depth=None):
    """Depth used for families: at least the cocycle window (so exponents can be read)
    and the block length of the measure (so the transport weights are exact)."""
    need = max(c.hi, m.k, 1)
    return need if depth is None else max(depth, c.hi)


def solve_u_state(c, m, depth=None, eps=DEFAULT_EPS, max_iter=500, tol=1e-10,
                  grid=64, init=None, resolution=None):
    """Fixed point of push_invariance from a uniform grid.  Returns (family, residual);
    family.info carries the converged flag and residual history."""
    k = default_depth(c, m, depth)
    fam = init or ConditionalFamily.uniform(c.spec, k, grid, eps)
    return _iterate_family(lambda f: push_invariance(f, c, m), fam, tol, max_iter, resolution)


def solve_s_state(c, m, depth=None, eps=DEFAULT_EPS, max_iter=500, tol=1e-10,
                  grid=64, init=None, resolution=None):
    """Fixed point of the inverse-cocycle operator (measures carried by stable directions)."""
    k = default_depth(c, m, depth)
    fam = init or ConditionalFamily.uniform(c.spec, k, grid, eps)
    return _iterate_family(lambda f: pull_invariance(f, c, m), fam, tol, max_iter, resolution)


def lyap_from_family(fam, c, m):
    """sum over depth-k words x of mu[x] * integral of log|A(x) v| dm_x(v)."""
    if fam.depth < c.hi:
        raise ValueError("family depth must cover the cocycle window")
    words = fam.words
    mats = c.values[sliding_indices(c.spec, words[:, c.lo:c.hi], c.width)[:, 0]]
    w = m.cylinder_weights(fam.depth)
    total = 0.0
    for i, meas in enumerate(fam.measures):
        if w[i] > 0 and len(meas):
            total += w[i] * float(np.dot(meas.masses, log_gain(mats[i], meas.angles)))
    return total


# ------------------------------------------------------------ Oseledets data

@dataclass(frozen=True)
class OseledetsResult:
    E_u: float
    E_s: float
    residual_u: float
    residual_s: float


def oseledets_dirs(c, x, n=50, seed_angle=1.0):
    """Unstable direction from n-step forward products out of the past, stable from backward."""
    def e_u(z):
        return float(act(iterate(c, shift(z, -n), n), seed_angle))

    def e_s(z):
        return float(act(iterate(c, shift(z, n), -n), seed_angle))

    eu, es = e_u(x), e_s(x)
    A = c(x)
    fx = shift(x, 1)
    ru = float(dist(act(A, eu), e_u(fx)))
    rs = float(dist(act(A, es), e_s(fx)))
    return OseledetsResult(eu, es, ru, rs)


def empirical_families(c, m, depth, samples=2000, n=40, seed=0, seed_angle=1.0):
    """Families of equal-weight atoms at sampled unstable / stable directions, grouped
    by the depth-k future word of the sample point.  Returns (fam_u, fam_s)."""
    from .thermo import sample_paths
    rng = np.random.default_rng(seed)
    lo, hi = c.lo, c.hi
    back = n - lo
    length = back + max(n + hi - 1, depth)
    paths = sample_paths(m, length, samples, rng)
    x0 = back  # column of coordinate 0
    Pu = _full_products(c, paths[:, x0 - n + lo:x0 + hi - 1], n)
    Ps = _full_products(c, paths[:, x0 + lo:x0 + n + hi - 1], n)
    eu = act(Pu, seed_angle)
    es = act(inv2(Ps), seed_angle)
    idx = sliding_indices(c.spec, paths[:, x0:x0 + depth], depth)[:, 0]
    nw = len(admissible_words(c.spec, depth))
    fam_u, fam_s = [], []
    for i in range(nw):
        sel = idx == i
        cnt = max(int(sel.sum()), 1)
        fam_u.append(ProjMeasure(eu[sel], np.full(sel.sum(), 1.0 / cnt)))
        fam_s.append(ProjMeasure(es[sel], np.full(sel.sum(), 1.0 / cnt)))
    return (ConditionalFamily(c.spec, depth, fam_u), ConditionalFamily(c.spec, depth, fam_s))


# ----------------------------------------------------------------- atoms

@dataclass
class AtomReport:
    gamma0: float
    V: dict
    cards: dict
    constant_card: bool
    equivariant: bool | None
    equivariance_error: float | None


def atom_spectrum(fam, eps=None, c=None, tol=1e-9):
    """Largest atom mass, the atoms attaining it per word, and (given a cocycle)
    the check A(y)^-1 V_x within eps of V_y for every predecessor word y of x."""
    eps = fam.eps if eps is None else eps
    gamma0 = max(float(m.masses.max()) for m in fam.measures if len(m))
    V, cards = {}, {}
    for w, meas in zip(fam.word_tuples(), fam.measures):
        V[w] = meas.angles[meas.masses >= gamma0 - tol]
        cards[w] = len(V[w])
    constant = len(set(cards.values())) == 1
    equiv, err = None, None
    if c is not None:
        err = 0.0
        k = fam.depth
        ext = admissible_words(c.spec, k + 1)
        words = fam.word_tuples()
        for row in ext.tolist():
            y, x = tuple(row[:k]), tuple(row[1:])
            A = c.values[sliding_indices(c.spec, np.array(row[:c.hi])[None], c.width)[0, 0]]
            Vx, Vy = V[x], V[y]
            if not len(Vx):
                continue
            back = act(inv2(A), Vx)
            if not len(Vy):
                err = math.inf
                continue
            gaps = np.abs(((back[:, None] - Vy[None, :]) + HALF_PI) % math.pi - HALF_PI)
            err = max(err, float(gaps.min(axis=1).max()))
        equiv = err <= eps
    return AtomReport(gamma0, V, cards, constant, equiv, err)


# ------------------------------------------------------------ su diagnostics

@dataclass(frozen=True)
class SUReport:
    u_residual: float
    s_residual: float
    pairs: int


def su_check(fam, c, tol=None, samples=50, seed=0, radius=None):
    """Holonomy invariance of a future-indexed family.

    u-side: pairs sharing the past with different futures, compare
    (H^u)_* fam[x] with fam[y].  s-side: pairs sharing the future; for a
    future-only cocycle the holonomy is the identity and the family is the
    same measure, so the residual is exactly 0.
    """
    res = fam.eps if tol is None else tol
    rng = np.random.default_rng(seed)
    radius = radius or fam.depth + max(c.hi, 1) + 2
    u_res = 0.0
    for _ in range(samples):
        x = random_point(c.spec, rng, radius)
        y = with_random_future(x, rng, radius)
        try:
            H = holonomy(c, x, y, "u").matrix
        except HolonomyError:
            u_res = math.inf
            continue
        mx = fam[x.word(0, fam.depth)]
        my = fam[y.word(0, fam.depth)]
        u_res = max(u_res, kolmogorov(mx.push(H), my, res))
    s_res = 0.0
    if not c.future_only:
        s_res = math.nan
    return SUReport(u_res, s_res, samples)
