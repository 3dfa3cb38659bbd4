"""Equilibrium states of locally constant potentials as finite Markov chains."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .symbolic import (SpecError, WindowedTable, admissible_words, bracket,
                       point_from_word, recode, shift, sliding_indices)

POWER_TOL = 1e-13
POWER_CAP = 100_000


class NotPrimitiveError(ValueError):
    def __init__(self, period):
        super().__init__(f"transition matrix is not primitive (graph period {period})")
        self.period = period


class ZeroEdgeError(ValueError):
    pass


class Potential(WindowedTable):
    """Real function of the coordinates x_lo..x_{hi-1}."""

    def __init__(self, spec, window, table):
        if isinstance(table, dict):
            words, values = self._from_mapping(spec, window, table, float)
        else:
            values = np.array(table, dtype=float).reshape(-1)
            words = admissible_words(spec, window[1] - window[0])
        if not np.all(np.isfinite(values)):
            raise SpecError("potential values must be finite")
        super().__init__(spec, window, words, values)

    @classmethod
    def constant(cls, spec, value=0.0):
        return cls(spec, (0, 1), np.full(spec.alphabet_size, float(value)))

    @classmethod
    def from_function(cls, spec, window, fn):
        words = admissible_words(spec, window[1] - window[0])
        return cls(spec, window, [fn(tuple(w)) for w in words.tolist()])

    def __call__(self, x):
        return float(self.values[self.index_at(x)])

    def scaled(self, t):
        return Potential(self.spec, self.window, t * self.values)

    def __add__(self, other):
        lo = min(self.lo, other.lo)
        hi = max(self.hi, other.hi)
        a, b = self.extend((lo, hi)), other.extend((lo, hi))
        return Potential(self.spec, (lo, hi), a.values + b.values)

    def extend(self, window):
        """Same function tabulated on a larger window."""
        lo, hi = window
        if lo > self.lo or hi < self.hi:
            raise ValueError("extension window must contain the current one")
        words = admissible_words(self.spec, hi - lo)
        idx = sliding_indices(self.spec, words[:, self.lo - lo:self.hi - lo], self.width)[:, 0]
        return Potential(self.spec, (lo, hi), self.values[idx])


def _anchors(spec, anchors):
    if anchors is None:
        from .cocycle import default_anchors
        anchors = default_anchors(spec)
    return anchors


def stabilize_potential(phi, anchors=None):
    """Cohomologous future-only potential: phi_u = phi + psi_u o f - psi_u.

    psi_u(x) = sum_j [phi(f^j x) - phi(f^j g x)], g(x) = anchored past, future of x.
    Only j < -lo contributes for a windowed phi.
    """
    spec = phi.spec
    if phi.future_only:
        return phi, Potential.constant(spec, 0.0)
    anchors = _anchors(spec, anchors)
    r = -phi.lo
    psi_win = (phi.lo, max(r + phi.hi - 1, 1))

    def psi_at(x):
        gx = bracket(anchors[x[0]], x)
        return sum(phi(shift(x, j)) - phi(shift(gx, j)) for j in range(r))

    psi = Potential.from_function(
        spec, psi_win, lambda w: psi_at(point_from_word(spec, w, start=psi_win[0])))
    out_win = (0, max(1, r + phi.hi))

    def phi_u_at(w):
        x = bracket(anchors[w[0]], point_from_word(spec, w))
        return phi(x) + psi(shift(x, 1)) - psi(x)

    return Potential.from_function(spec, out_win, phi_u_at), psi


def stabilize_residual(phi, phi_u, psi_u, samples=100, seed=0):
    """Max pointwise |phi + psi o f - psi - phi_u| over random points."""
    from .symbolic import random_point
    rng = np.random.default_rng(seed)
    radius = max(abs(psi_u.lo), abs(psi_u.hi), abs(phi.lo), abs(phi.hi), phi_u.hi) + 2
    worst = 0.0
    for _ in range(samples):
        x = random_point(phi.spec, rng, radius)
        worst = max(worst, abs(phi(x) + psi_u(shift(x, 1)) - psi_u(x) - phi_u(x)))
    return worst


def memory_one(phi):
    """(recoding, per-symbol values) for a future-only potential."""
    if not phi.future_only:
        raise ValueError("potential must be future-only; stabilize it first")
    k = max(phi.hi, 1)
    rec = recode(phi.spec, k)
    return rec, phi.extend((0, k)).values


def transfer_apply(phi, g, x):
    """T g(x) = sum over admissible predecessors y of exp(phi(y)) g(y), memory-one phi."""
    rec, vals = memory_one(phi)
    if rec.k != 1:
        raise ValueError("transfer_apply expects a memory-one potential")
    Q = phi.spec.Q
    g = np.asarray(g, dtype=float)
    return float(np.sum(Q[:, x] * np.exp(vals) * g))


def _power(M, tol=POWER_TOL, cap=POWER_CAP):
    n = M.shape[0]
    v = np.full(n, 1.0 / n)
    for it in range(1, cap + 1):
        w = M @ v
        w /= w.sum()
        if np.max(np.abs(w - v)) < tol:
            return w, it
        v = w
    raise RuntimeError(f"power iteration did not converge in {cap} steps")


def _polish(M, lam, v, steps=2):
    # inverse iteration near the Perron root; keeps the positive vector from the power step
    n = len(v)
    A = M - lam * (1 + 1e-10) * np.eye(n)
    for _ in range(steps):
        try:
            w = np.linalg.solve(A, v)
        except np.linalg.LinAlgError:
            return v
        w = w / w.sum()
        if np.any(w <= 0) or not np.all(np.isfinite(w)):
            return v
        v = w
    return v


def rpf_solve(phi):
    """(log lambda, zeta, nu) on the recoded alphabet, with sum zeta*nu = 1."""
    if not phi.future_only:
        phi, _ = stabilize_potential(phi)
    rec, vals = memory_one(phi)
    return _rpf(rec, vals)


def _rpf(rec, vals):
    spec = rec.coded
    if spec.period != 1:
        raise NotPrimitiveError(spec.period)
    shift_ = vals.max()
    M = np.exp(vals - shift_)[:, None] * spec.Q
    nu, _ = _power(M)
    zeta, _ = _power(M.T)
    lam = float(np.dot(M @ nu, nu) / np.dot(nu, nu))
    nu, zeta = _polish(M, lam, nu), _polish(M.T, lam, zeta)
    lam = float(np.dot(M @ nu, zeta) / np.dot(nu, zeta))
    zeta = zeta / np.dot(zeta, nu)
    return math.log(lam) + shift_, zeta, nu


@dataclass(frozen=True, eq=False)
class GibbsMeasure:
    """Stationary Markov chain (pi, p) on the k-block recoding of a subshift."""
    spec: object
    rec: object
    p: np.ndarray
    pi: np.ndarray
    log_lambda: float
    zeta: np.ndarray
    nu: np.ndarray
    phi: np.ndarray = field(default=None, repr=False)

    @property
    def k(self):
        return self.rec.k

    @property
    def full_support(self):
        return bool(np.all(self.pi > 0) and np.array_equal(self.p > 0, self.rec.coded.Q > 0))

    # cylinder measures -------------------------------------------------
    def cylinder_weights(self, length):
        """mu of every admissible word of the given length (rows of admissible_words)."""
        words = admissible_words(self.spec, length)
        k = self.k
        if length >= k:
            codes = self.rec.encode_array(words)
            w = self.pi[codes[:, 0]].copy()
            for j in range(codes.shape[1] - 1):
                w *= self.p[codes[:, j], codes[:, j + 1]]
            return w
        full = self.cylinder_weights(k)
        kwords = admissible_words(self.spec, k)
        idx = sliding_indices(self.spec, kwords[:, :length], length)[:, 0]
        return np.bincount(idx, weights=full, minlength=len(words))

    def weight(self, word):
        word = tuple(word)
        if not self.spec.is_admissible(word):
            return 0.0
        if len(word) >= self.k:
            codes = self.rec.encode(word)
            w = self.pi[codes[0]]
            for a, b in zip(codes, codes[1:]):
                w *= self.p[a, b]
            return float(w)
        words = admissible_words(self.spec, len(word))
        i = int(np.nonzero((words == np.array(word)).all(axis=1))[0][0])
        return float(self.cylinder_weights(len(word))[i])

    # structure functions ----------------------------------------------
    def jacobians(self):
        """Edge tables on the recoding: jac_u[a, b] = pi_b / (pi_a p_ab), jac_s[a, b] = 1/p_ab.

        jac_s is the Jacobian of the past shift at a past ending with the edge a -> b,
        computed from the time-reversed chain p*_ba = pi_a p_ab / pi_b.
        """
        edges = self.rec.coded.Q > 0
        if np.any(self.p[edges] <= 0) or np.any(self.pi <= 0):
            raise ZeroEdgeError("measure gives zero mass to an admissible edge")
        with np.errstate(divide="ignore"):
            ju = np.where(edges, self.pi[None, :] / (self.pi[:, None] * self.p), np.inf)
            js = np.where(edges, 1.0 / self.p, np.inf)
        return ju, js

    def reversed_chain(self):
        with np.errstate(divide="ignore", invalid="ignore"):
            pr = np.where(self.pi[:, None] > 0, self.p.T * self.pi[None, :] / self.pi[:, None], 0.0)
        return pr

    @property
    def psi_recoded(self):
        """Product-structure density on the recoded shift: 1/pi."""
        return 1.0 / self.pi

    def psi_table(self, K=None):
        """psi on the original shift, window [1-K, K) for K >= k:
        mu[x_{1-K}..x_{K-1}] / (mu[x_{1-K}..x_0] mu[x_0..x_{K-1}])."""
        K = self.k if K is None else K
        if K < self.k:
            raise ValueError("K must be at least the block length")
        words = admissible_words(self.spec, 2 * K - 1)
        full = self.cylinder_weights(2 * K - 1)
        half = self.cylinder_weights(K)
        past = sliding_indices(self.spec, words[:, :K], K)[:, 0]
        fut = sliding_indices(self.spec, words[:, K - 1:], K)[:, 0]
        return Potential(self.spec, (1 - K, K), full / (half[past] * half[fut]))

    def transition_counts_check(self):
        rows = np.abs(self.p.sum(axis=1) - 1).max()
        inv = np.abs(self.pi @ self.p - self.pi).max()
        return float(rows), float(inv)

    def to_rows(self):
        """Flat rows for CSV export."""
        ju, js = self.jacobians() if self.full_support else (None, None)
        rows = []
        n = len(self.pi)
        for a in range(n):
            word = "".join(str(s + 1) for s in self.rec.words[a])
            rows.append({"kind": "state", "word": word, "pi": self.pi[a], "zeta": self.zeta[a],
                         "nu": self.nu[a], "psi": 1.0 / self.pi[a] if self.pi[a] > 0 else math.inf})
            for b in range(n):
                if self.rec.coded.Q[a, b]:
                    to = "".join(str(s + 1) for s in self.rec.words[b])
                    row = {"kind": "edge", "word": f"{word}>{to}", "p": self.p[a, b]}
                    if ju is not None:
                        row.update(jac_u=ju[a, b], jac_s=js[a, b])
                    rows.append(row)
        return rows


def equilibrium(phi, anchors=None):
    """Equilibrium state of a windowed potential (stabilised and recoded first)."""
    if not phi.future_only:
        phi, _ = stabilize_potential(phi, anchors)
    rec, vals = memory_one(phi)
    log_lam, zeta, nu = _rpf(rec, vals)
    Q = rec.coded.Q
    p = np.exp(vals - log_lam)[:, None] * Q * nu[None, :] / nu[:, None]
    p /= p.sum(axis=1, keepdims=True)
    pi = zeta * nu
    pi /= pi.sum()
    return GibbsMeasure(phi.spec, rec, p, pi, log_lam, zeta, nu, vals)


def stationary(p):
    """Stationary vector of a row-stochastic matrix (least squares, any support)."""
    n = p.shape[0]
    A = np.vstack([p.T - np.eye(n), np.ones((1, n))])
    b = np.zeros(n + 1)
    b[-1] = 1.0
    pi, *_ = np.linalg.lstsq(A, b, rcond=None)
    pi = np.clip(pi, 0.0, None)
    return pi / pi.sum()


def markov_chain(spec, p):
    """Measure given directly by a row-stochastic matrix on the symbols (zeros allowed).

    The eigen-data are those of the normalised operator: lambda = 1, nu uniform.
    """
    p = np.asarray(p, dtype=float)
    n = spec.alphabet_size
    if p.shape != (n, n):
        raise SpecError("transition matrix has the wrong shape")
    if np.any(p < 0) or np.any(np.abs(p.sum(axis=1) - 1) > 1e-12):
        raise SpecError("transition matrix must be row-stochastic")
    if np.any((p > 0) & (spec.Q == 0)):
        raise SpecError("transition matrix charges a forbidden edge")
    pi = stationary(p)
    nu = np.full(n, 1.0 / n)
    return GibbsMeasure(spec, recode(spec, 1), p, pi, 0.0, pi * n, nu, None)


def bernoulli(spec, weights):
    w = np.asarray(weights, dtype=float)
    if not np.all(spec.Q == 1):
        raise SpecError("Bernoulli measures need the full shift")
    w = w / w.sum()
    return markov_chain(spec, np.tile(w, (len(w), 1)))


def markov_potential(spec, p):
    """Potential log p_ab on window [0, 2); its equilibrium state is the chain p."""
    p = np.asarray(p, dtype=float)
    return Potential.from_function(spec, (0, 2), lambda w: math.log(p[w[0], w[1]]))


# checks -----------------------------------------------------------------

def rpf_residuals(m):
    """(||T zeta - lambda zeta||, ||T* nu - lambda nu||) relative to lambda."""
    if m.phi is None:
        return 0.0, 0.0
    lam = math.exp(m.log_lambda)
    M = np.exp(m.phi)[:, None] * m.rec.coded.Q
    r1 = np.abs(M.T @ m.zeta - lam * m.zeta).max() / lam
    r2 = np.abs(M @ m.nu - lam * m.nu).max() / lam
    return float(r1), float(r2)


def gibbs_ratio_residual(m, depth=8):
    """max |mu[a_0..a_n] lambda^n e^{-S phi} / (zeta_a0 nu_an) - 1| over recoded words."""
    if m.phi is None:
        raise ValueError("measure has no potential")
    worst = 0.0
    coded = m.rec.coded
    for n in range(0, depth):
        words = admissible_words(coded, n + 1)
        w = m.pi[words[:, 0]].copy()
        for j in range(n):
            w *= m.p[words[:, j], words[:, j + 1]]
        S = m.phi[words[:, :n]].sum(axis=1) if n else np.zeros(len(words))
        ratio = w * np.exp(n * m.log_lambda - S) / (m.zeta[words[:, 0]] * m.nu[words[:, -1]])
        worst = max(worst, float(np.abs(ratio - 1).max()))
    return worst


def jacobian_triangle_check(m):
    """max |1/(psi_b pi_a p_ab) - jac_u[a, b]| over recoded edges."""
    ju, _ = m.jacobians()
    edges = m.rec.coded.Q > 0
    with np.errstate(divide="ignore"):
        alt = 1.0 / (m.psi_recoded[None, :] * m.pi[:, None] * m.p)
    return float(np.abs(alt[edges] - ju[edges]).max())


def solve_xi(m):
    """Solve xi(f x)/xi(x) = J_s(P^s f x) / J_u(P^u x) for xi on recoded 2-blocks.

    Unknowns are log xi on edges (x_{-1}, x_0); one equation per 3-path.  The
    constant is fixed by sum xi(a, b) pi_a p_ab pi_b = 1.  Returns (xi matrix,
    least-squares residual).
    """
    ju, js = m.jacobians()
    Q = m.rec.coded.Q
    edges = list(zip(*np.nonzero(Q)))
    eidx = {e: i for i, e in enumerate(edges)}
    rows, rhs = [], []
    for (a, b) in edges:
        for c in np.nonzero(Q[b])[0]:
            row = np.zeros(len(edges))
            row[eidx[(b, c)]] += 1
            row[eidx[(a, b)]] -= 1
            rows.append(row)
            rhs.append(math.log(js[b, c]) - math.log(ju[b, c]))
    A = np.array(rows)
    y = np.array(rhs)
    sol, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = float(np.abs(A @ sol - y).max()) if len(y) else 0.0
    xi = np.zeros_like(m.p)
    for (a, b), s in zip(edges, sol):
        xi[a, b] = math.exp(s)
    mass = sum(xi[a, b] * m.pi[a] * m.p[a, b] * m.pi[b] for a, b in edges)
    return xi / mass, resid


def product_residual(m, depth=6, density=None):
    """max over two-sided recoded cylinders [x_-s..x_t] (s+t+1 <= depth) of
    |mu(cyl) - density(x_-1, x_0) mu^s[x_-s..x_0] mu^u[x_0..x_t]|.

    density defaults to psi (depends on x_0 only); pass xi for the 2-block version.
    """
    coded = m.rec.coded
    worst = 0.0
    for L in range(2, depth + 1):
        words = admissible_words(coded, L)
        chain = m.pi[words[:, 0]].copy()
        for j in range(L - 1):
            chain *= m.p[words[:, j], words[:, j + 1]]
        for s in range(1, L):
            # x_0 at column s, past cylinder columns 0..s, future s..L-1
            past = m.pi[words[:, 0]].copy()
            for j in range(s):
                past *= m.p[words[:, j], words[:, j + 1]]
            fut = m.pi[words[:, s]].copy()
            for j in range(s, L - 1):
                fut *= m.p[words[:, j], words[:, j + 1]]
            if density is None:
                dens = m.psi_recoded[words[:, s]]
            else:
                dens = density[words[:, s - 1], words[:, s]]
            worst = max(worst, float(np.abs(chain - dens * past * fut).max()))
    return worst


def psi_and_xi(m):
    """(psi on the original shift, xi on recoded 2-blocks, residual)."""
    xi, ls = solve_xi(m)
    resid = max(product_residual(m), product_residual(m, density=xi), ls)
    return m.psi_table(), xi, resid


def measure_distance(m1, m2, depth=4):
    """(weak_star, psi_gap): cylinder distance up to depth and sup gap of psi."""
    if m1.spec != m2.spec:
        raise SpecError("measures live on different shifts")
    ws = 0.0
    for L in range(1, depth + 1):
        ws = max(ws, float(np.abs(m1.cylinder_weights(L) - m2.cylinder_weights(L)).max()))
    K = max(m1.k, m2.k)
    try:
        gap = float(np.abs(m1.psi_table(K).values - m2.psi_table(K).values).max())
    except (FloatingPointError, ZeroDivisionError):
        gap = math.inf
    return ws, gap


# sampling -----------------------------------------------------------------

def _chain_paths(p, pi, steps, count, rng):
    cum = np.cumsum(p, axis=1)
    cum[:, -1] = 1.0
    start = np.searchsorted(np.cumsum(pi), rng.random(count), side="right")
    start = np.minimum(start, len(pi) - 1)
    out = np.empty((count, steps), dtype=np.int64)
    out[:, 0] = start
    for t in range(1, steps):
        u = rng.random(count)
        prev = out[:, t - 1]
        out[:, t] = (u[:, None] >= cum[prev]).sum(axis=1)
    return out


def sample_paths(m, length, count, rng):
    """count stationary words of the given length (original symbols), shape (count, length)."""
    k = m.k
    steps = max(length - k + 1, 1)
    codes = _chain_paths(m.p, m.pi, steps, count, rng)
    words = np.array(m.rec.words, dtype=np.int64)
    out = np.concatenate([words[codes[:, 0]], words[codes[:, 1:], -1]], axis=1)
    return out[:, :length]


def sample_orbit(m, n, seed=0):
    if n < 1:
        raise ValueError("n must be positive")
    rng = np.random.default_rng(seed)
    return tuple(int(a) for a in sample_paths(m, n, 1, rng)[0])


def sample_pasts(m, length, count, rng):
    """Stationary words read from the time-reversed chain, returned in forward order."""
    k = m.k
    steps = max(length - k + 1, 1)
    codes = _chain_paths(m.reversed_chain(), m.pi, steps, count, rng)[:, ::-1]
    words = np.array(m.rec.words, dtype=np.int64)
    out = np.concatenate([words[codes[:, 0]], words[codes[:, 1:], -1]], axis=1)
    return out[:, -length:]
