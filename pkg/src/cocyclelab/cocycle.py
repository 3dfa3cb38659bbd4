"""2x2 linear cocycles over a subshift: products, Holder norms, bunching, holonomies."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .symbolic import (SpecError, WindowedTable, admissible_words, bracket,
                       cycle_words, format_word, point_from_word, project,
                       random_point, shift, with_random_future, with_random_past,
                       word_indices)

DET_FLOOR = 1e-12
IDENTITY = np.eye(2)


class CocycleError(ValueError):
    pass


class HolonomyError(RuntimeError):
    pass


def singular_values(M):
    """(sigma_max, sigma_min) of 2x2 matrices, closed form, broadcasting over leading axes."""
    M = np.asarray(M, dtype=float)
    fro = np.einsum("...ij,...ij->...", M, M)
    det = np.abs(M[..., 0, 0] * M[..., 1, 1] - M[..., 0, 1] * M[..., 1, 0])
    disc = np.sqrt(np.maximum(fro * fro - 4 * det * det, 0.0))
    smax = np.sqrt((fro + disc) / 2)
    with np.errstate(divide="ignore", invalid="ignore"):
        smin = np.where(smax > 0, det / smax, 0.0)
    return smax, smin


def spectral_norm(M):
    return singular_values(M)[0]


def det2(M):
    M = np.asarray(M, dtype=float)
    return M[..., 0, 0] * M[..., 1, 1] - M[..., 0, 1] * M[..., 1, 0]


def inv2(M):
    M = np.asarray(M, dtype=float)
    d = det2(M)
    out = np.empty_like(M)
    out[..., 0, 0] = M[..., 1, 1]
    out[..., 1, 1] = M[..., 0, 0]
    out[..., 0, 1] = -M[..., 0, 1]
    out[..., 1, 0] = -M[..., 1, 0]
    return out / d[..., None, None]


def rotation(beta):
    c, s = math.cos(beta), math.sin(beta)
    return np.array([[c, -s], [s, c]])


def _as_matrix(value):
    M = np.asarray(value, dtype=float).reshape(2, 2)
    return M


class WindowedCocycle(WindowedTable):
    """Locally constant cocycle: A(x) depends on x_lo..x_{hi-1}."""

    def __init__(self, spec, window, table):
        if isinstance(table, dict):
            words, values = self._from_mapping(spec, window, table, _as_matrix)
        else:
            values = np.array(table, dtype=float).reshape(-1, 2, 2)
            words = admissible_words(spec, window[1] - window[0])
        super().__init__(spec, window, words, values)
        dets = np.abs(det2(self.values))
        if (dets <= DET_FLOOR).any():
            bad = format_word(self.words[int(np.argmin(dets))])
            raise CocycleError(f"matrix for word {bad} is not invertible")

    @classmethod
    def constant(cls, spec, M):
        n = spec.alphabet_size
        return cls(spec, (0, 1), np.repeat(_as_matrix(M)[None], n, axis=0))

    @classmethod
    def from_function(cls, spec, window, fn):
        words = admissible_words(spec, window[1] - window[0])
        return cls(spec, window, np.array([_as_matrix(fn(tuple(w))) for w in words.tolist()]))

    def __call__(self, x):
        return self.values[self.index_at(x)]

    def matrices_along(self, seq):
        """A at each window start of seq (array of symbols, last axis = time)."""
        return self.values[self.indices_along(seq)]

    def map_values(self, fn):
        return WindowedCocycle(self.spec, self.window, fn(self.values))

    def shifted_window(self, offset):
        """Same function read through a window moved by offset (pure relabelling)."""
        return WindowedCocycle(self.spec, (self.lo + offset, self.hi + offset), self.values)

    @property
    def is_sl2(self):
        return bool(np.all(np.abs(det2(self.values) - 1) <= 1e-9))

    def describe(self):
        return {format_word(w): self.values[i].tolist() for i, w in enumerate(self.words.tolist())}


class CallbackCocycle:
    """Cocycle given by a function of the point, with declared Holder data.

    bunching_ratio, if given, is a worst ratio from a fiber-bunching certificate
    at block length bunching_N; it sets the holonomy iteration budget.
    """

    future_only = False

    def __init__(self, spec, func, alpha=1.0, holder_constant=None,
                 bunching_ratio=None, bunching_N=1):
        self.spec = spec
        self.func = func
        self.alpha = alpha
        self.holder_constant = holder_constant
        self.bunching_ratio = bunching_ratio
        self.bunching_N = bunching_N

    def __call__(self, x):
        M = _as_matrix(self.func(x))
        if abs(det2(M)) <= DET_FLOOR:
            raise CocycleError("callback returned a non-invertible matrix")
        return M


def iterate(c, x, n):
    """Cocycle product A^n(x); A^{-n}(x) uses inverses along the backward orbit."""
    P = IDENTITY.copy()
    if n > 0:
        for j in range(n):
            P = c(shift(x, j)) @ P
    elif n < 0:
        for j in range(1, -n + 1):
            P = inv2(c(shift(x, -j))) @ P
    return P


def products_along(c, seqs, n):
    """Products A^n over each row of seqs, rows giving coordinates lo..n-1+hi-1.

    Returns (normalised products, log scale) so that A^n = exp(scale) * P.
    """
    mats = c.matrices_along(seqs)
    m = mats.shape[0]
    P = np.broadcast_to(IDENTITY, (m, 2, 2)).copy()
    scale = np.zeros(m)
    for j in range(n):
        P = np.einsum("mij,mjk->mik", mats[:, j], P)
        s = np.abs(P).max(axis=(1, 2))
        P /= s[:, None, None]
        scale += np.log(s)
    return P, scale


@dataclass(frozen=True)
class HolderNorm:
    sup_norm: float
    seminorm: float

    @property
    def total(self):
        return self.sup_norm + self.seminorm

    def __iter__(self):
        return iter((self.sup_norm, self.seminorm))


def holder_norm(c, alpha):
    """Sup norm and alpha-Holder seminorm of a windowed cocycle (exact).

    For two window words a != b the closest pair of points reading them
    agrees on |n| < N with N the smallest |j| over positions where a and b differ.
    """
    vals = c.values
    sup = float(spectral_norm(vals).max())
    words = c.words
    coords = np.abs(np.arange(c.lo, c.hi))
    theta = c.spec.theta
    semi = 0.0
    for i in range(len(words)):
        diff = words[i + 1:] != words[i]
        if not len(diff):
            continue
        N = np.where(diff, coords, np.iinfo(np.int64).max).min(axis=1)
        gaps = spectral_norm(vals[i + 1:] - vals[i])
        ratio = gaps / theta ** (alpha * N)
        semi = max(semi, float(ratio.max()))
    return HolderNorm(sup, semi)


@dataclass(frozen=True)
class BunchingCertificate:
    alpha: float
    N: int
    worst_ratio: float
    exact: bool = True


def _condition_max(c, N):
    words = admissible_words(c.spec, N + c.width - 1)
    P, _ = products_along(c, words, N)
    smax, smin = singular_values(P)
    return float((smax / smin).max())


def fiber_bunching(c, alpha, N_max=64, word_cap=1 << 14):
    """Smallest N <= N_max with max ||A^N|| ||(A^N)^-1|| theta^(N alpha) < 1.

    Exact enumeration while the number of words stays below word_cap; beyond that
    the bound K(N) <= K(a) K(N-a) (submultiplicativity of the condition number)
    is used, and the certificate is flagged exact=False.
    """
    theta = c.spec.theta
    K = {}
    for N in range(1, N_max + 1):
        if _word_count(c.spec, N + c.width - 1) <= word_cap:
            K[N] = (_condition_max(c, N), True)
        else:
            best = min(K[a][0] * K[N - a][0] for a in range(1, N // 2 + 1))
            K[N] = (best, False)
        ratio = K[N][0] * theta ** (N * alpha)
        if ratio < 1:
            return BunchingCertificate(alpha, N, ratio, K[N][1])
    return None


def _word_count(spec, length):
    v = np.ones(spec.alphabet_size)
    for _ in range(length - 1):
        v = spec.Q @ v
    return float(v.sum())


def sl2_split(c):
    """A = g * B with g = sgn(det) |det|^(1/2); |det B| = 1 (det B = -1 when det A < 0)."""
    d = det2(c.values)
    g = np.sign(d) * np.sqrt(np.abs(d))
    B = c.values / g[:, None, None]
    g_table = {tuple(w): float(g[i]) for i, w in enumerate(c.words.tolist())}
    return g_table, WindowedCocycle(c.spec, c.window, B)


@dataclass(frozen=True)
class HolonomyResult:
    matrix: np.ndarray
    steps: int
    residual: float
    exact: bool


def _check_pair(x, y, side):
    if project(x, "u" if side == "s" else "s") != project(y, "u" if side == "s" else "s"):
        where = "n >= 0" if side == "s" else "n <= 0"
        raise HolonomyError(f"points are not on the same local {side}-set (must agree for {where})")


def holonomy(c, x, y, side="s", tol=1e-12, max_steps=None):
    """Canonical holonomy H_{xy}: lim A^n(y)^-1 A^n(x) (side s) or the same with n -> -n (side u)."""
    _check_pair(x, y, side)
    sign = 1 if side == "s" else -1
    if isinstance(c, WindowedCocycle):
        # factors agree once the window has moved past the disagreement
        n0 = max(0, -c.lo) if side == "s" else max(0, c.hi - 2)
        H = inv2(iterate(c, y, sign * n0)) @ iterate(c, x, sign * n0)
        return HolonomyResult(H, n0, 0.0, True)
    if max_steps is None:
        r = getattr(c, "bunching_ratio", None)
        if r is not None and 0 < r < 1:
            max_steps = int(math.ceil(64 / -math.log(r))) * getattr(c, "bunching_N", 1)
        else:
            max_steps = 4096
    Px, Py = IDENTITY.copy(), IDENTITY.copy()
    H = IDENTITY.copy()
    for n in range(1, max_steps + 1):
        if side == "s":
            Px = c(shift(x, n - 1)) @ Px
            Py = c(shift(y, n - 1)) @ Py
        else:
            Px = inv2(c(shift(x, -n))) @ Px
            Py = inv2(c(shift(y, -n))) @ Py
        Hn = inv2(Py) @ Px
        step = float(spectral_norm(Hn - H))
        H = Hn
        if step < tol:
            return HolonomyResult(H, n, step, False)
    raise HolonomyError(f"holonomy did not converge within {max_steps} steps (last step {step:.3g})")


def default_anchors(spec):
    """For each symbol i the lexicographically least point among shortest-period
    periodic points in the cylinder [0; i]."""
    anchors = {}
    for i in range(spec.alphabet_size):
        for p in range(1, spec.alphabet_size + 1):
            words = cycle_words(spec, p)
            words = words[words[:, 0] == i]
            if len(words):
                anchors[i] = point_from_periodic(spec, words[0])
                break
    return anchors


def point_from_periodic(spec, word):
    from .symbolic import PointRep
    return PointRep.periodic(spec, tuple(int(a) for a in word))


def straighten(c, anchors=None, tol=1e-12):
    """Cohomologous cocycle constant on local stable sets.

    B(x) = C(fx) A(x) C(x)^-1 with C(x) = H^s_{x, g x}, where g(x) keeps the
    future of x and takes the past of the anchor in the cylinder of x_0.
    """
    if not isinstance(c, WindowedCocycle):
        raise CocycleError("straighten needs a windowed cocycle")
    if c.future_only:
        return c
    spec = c.spec
    anchors = anchors or default_anchors(spec)
    reach = max(0, -c.lo)
    hi = max(1, reach + c.hi)
    words = admissible_words(spec, hi)
    out = np.empty((len(words), 2, 2))
    for i, w in enumerate(words.tolist()):
        x = bracket(anchors[w[0]], point_from_word(spec, w))
        out[i] = _straightened_table_value(c, x, anchors)
    return WindowedCocycle(spec, (0, hi), out)


def straightened_value(c, x, anchors):
    """Conjugate by C(x) = H^s_{x, g x}: B(x) = C(fx) A(x) C(x)^-1, evaluated as three factors."""
    fx = shift(x, 1)
    gx = bracket(anchors[x[0]], x)
    gfx = bracket(anchors[fx[0]], fx)
    C_fx = holonomy(c, fx, gfx, "s").matrix
    C_x_inv = holonomy(c, gx, x, "s").matrix
    return C_fx @ c(x) @ C_x_inv


def _straightened_table_value(c, gx, anchors):
    # on the anchored point the formula collapses to H_{f(gx), g(f gx)} A(gx)
    fgx = shift(gx, 1)
    gfgx = bracket(anchors[fgx[0]], fgx)
    return holonomy(c, fgx, gfgx, "s").matrix @ c(gx)


@dataclass(frozen=True)
class HolonomyReport:
    samples: int
    identity_s: float
    composition_s: float
    equivariance_s: float
    identity_u: float
    composition_u: float
    equivariance_u: float

    @property
    def max_residual(self):
        return max(self.identity_s, self.composition_s, self.equivariance_s,
                   self.identity_u, self.composition_u, self.equivariance_u)

    def rows(self):
        return [{"side": side, "law": law, "residual": getattr(self, f"{law}_{side}")}
                for side in ("s", "u") for law in ("identity", "composition", "equivariance")]


def holonomy_residuals(c, samples=50, seed=0, tol=1e-12, radius=6):
    """Sampled residuals of the holonomy laws (identity, composition, equivariance), both sides."""
    rng = np.random.default_rng(seed)
    spec = c.spec
    res = {k: 0.0 for k in ("identity_s", "composition_s", "equivariance_s",
                            "identity_u", "composition_u", "equivariance_u")}

    def rel(A, B):
        return float(spectral_norm(A - B)) / max(1.0, float(spectral_norm(B)))

    for _ in range(samples):
        x = random_point(spec, rng, radius)
        # stable side: share n >= 0
        y = with_random_past(x, rng, radius)
        z = with_random_past(x, rng, radius)
        H = lambda a, b: holonomy(c, a, b, "s", tol).matrix
        res["identity_s"] = max(res["identity_s"], rel(H(x, x), IDENTITY))
        res["composition_s"] = max(res["composition_s"], rel(H(x, z), H(y, z) @ H(x, y)))
        # H(fx, fy) A(x) = A(y) H(x, y), compared without inverting A
        lhs = H(shift(x, 1), shift(y, 1)) @ c(x)
        rhs = c(y) @ H(x, y)
        res["equivariance_s"] = max(res["equivariance_s"], rel(lhs, rhs))
        # unstable side: share n <= 0
        y = with_random_future(x, rng, radius)
        z = with_random_future(x, rng, radius)
        H = lambda a, b: holonomy(c, a, b, "u", tol).matrix
        res["identity_u"] = max(res["identity_u"], rel(H(x, x), IDENTITY))
        res["composition_u"] = max(res["composition_u"], rel(H(x, z), H(y, z) @ H(x, y)))
        xm, ym = shift(x, -1), shift(y, -1)
        lhs = c(ym) @ H(xm, ym)
        rhs = H(x, y) @ c(xm)
        res["equivariance_u"] = max(res["equivariance_u"], rel(lhs, rhs))
    return HolonomyReport(samples, **res)


def log_det_integral(c, m):
    """Exact integral of log|det A| against a Gibbs measure (cylinder sum)."""
    w = m.cylinder_weights(c.width)
    return float(np.dot(w, np.log(np.abs(det2(c.values)))))
