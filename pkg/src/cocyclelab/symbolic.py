"""Two-sided subshifts of finite type.

Symbols are stored 0-based internally; configs and reports use 1..l.
Points are eventually periodic sequences so that every coordinate,
shift and distance is exact.
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property, lru_cache

import numpy as np


class SpecError(ValueError):
    """Raised for an invalid transition matrix or metric parameter."""


@dataclass(frozen=True)
class SpecDiagnostics:
    valid: bool
    square: bool
    empty_rows: tuple
    empty_cols: tuple
    transitive: bool
    period: int | None
    problems: tuple


def _graph_period(Q):
    # gcd of level differences along edges of a BFS tree
    n = Q.shape[0]
    level = [-1] * n
    level[0] = 0
    todo = deque([0])
    g = 0
    while todo:
        u = todo.popleft()
        for v in np.flatnonzero(Q[u]):
            if level[v] < 0:
                level[v] = level[u] + 1
                todo.append(v)
            else:
                g = math.gcd(g, level[u] + 1 - level[v])
    return abs(g) if g else None


def _reachable(Q, start):
    seen = {start}
    todo = [start]
    while todo:
        u = todo.pop()
        for v in np.flatnonzero(Q[u]):
            if v not in seen:
                seen.add(int(v))
                todo.append(int(v))
    return seen


def validate_spec(transitions, theta=0.5):
    """Check a transition matrix without raising; returns SpecDiagnostics."""
    problems = []
    Q = np.asarray(transitions)
    square = Q.ndim == 2 and Q.shape[0] == Q.shape[1] and Q.shape[0] > 0
    if not square:
        return SpecDiagnostics(False, False, (), (), False, None,
                               ("transition matrix must be square and non-empty",))
    if not np.isin(Q, (0, 1)).all():
        problems.append("transition matrix must be 0/1")
    Q = (Q != 0).astype(np.int64)
    empty_rows = tuple(int(i) + 1 for i in np.flatnonzero(Q.sum(axis=1) == 0))
    empty_cols = tuple(int(j) + 1 for j in np.flatnonzero(Q.sum(axis=0) == 0))
    for i in empty_rows:
        problems.append(f"row {i} has no allowed transition")
    for j in empty_cols:
        problems.append(f"column {j} has no allowed transition")
    n = Q.shape[0]
    transitive = len(_reachable(Q, 0)) == n and len(_reachable(Q.T, 0)) == n
    if not transitive:
        problems.append("transition graph is not strongly connected")
    period = _graph_period(Q) if transitive else None
    if not (0.0 < float(theta) < 1.0):
        problems.append(f"theta must lie in (0,1), got {theta}")
    return SpecDiagnostics(not problems, True, empty_rows, empty_cols,
                           transitive, period, tuple(problems))


@dataclass(frozen=True)
class SubshiftSpec:
    transitions: tuple
    theta: float = 0.5

    def __post_init__(self):
        rows = tuple(tuple(int(v) for v in row) for row in np.asarray(self.transitions).tolist()) \
            if np.asarray(self.transitions).ndim == 2 else ()
        object.__setattr__(self, "transitions", rows)
        object.__setattr__(self, "theta", float(self.theta))
        diag = validate_spec(np.array(rows) if rows else np.zeros((0, 0)), self.theta)
        if not diag.valid:
            raise SpecError("; ".join(diag.problems))

    @classmethod
    def full_shift(cls, n, theta=0.5):
        return cls(np.ones((n, n), dtype=int), theta)

    @cached_property
    def Q(self):
        return np.array(self.transitions, dtype=np.int64)

    @property
    def alphabet_size(self):
        return len(self.transitions)

    @cached_property
    def period(self):
        return _graph_period(self.Q)

    def allowed(self, a, b):
        return self.transitions[a][b] == 1

    def is_admissible(self, word):
        return all(self.transitions[a][b] for a, b in zip(word, word[1:]))

    def successors(self, a):
        return [b for b in range(self.alphabet_size) if self.transitions[a][b]]

    def predecessors(self, b):
        return [a for a in range(self.alphabet_size) if self.transitions[a][b]]

    @cached_property
    def shortest_cycles(self):
        """For each symbol a, a shortest cyclic word starting with a."""
        out = []
        for a in range(self.alphabet_size):
            prev = {a: None}
            todo = deque([a])
            found = None
            while todo and found is None:
                u = todo.popleft()
                for v in self.successors(u):
                    if v == a:
                        found = u
                        break
                    if v not in prev:
                        prev[v] = u
                        todo.append(v)
            path = [found]
            while path[-1] != a:
                path.append(prev[path[-1]])
            out.append(tuple(reversed(path)))
        return tuple(out)


def format_word(word, sep=""):
    return sep.join(str(a + 1) for a in word)


def parse_word(text, alphabet_size):
    """Parse '12', '1,2' or '1 2' (1-based) into a 0-based tuple."""
    text = str(text).strip()
    if any(c in text for c in ", "):
        parts = [p for p in text.replace(",", " ").split() if p]
    elif alphabet_size <= 9:
        parts = list(text)
    else:
        parts = [text]
    word = tuple(int(p) - 1 for p in parts)
    if not word or any(a < 0 or a >= alphabet_size for a in word):
        raise SpecError(f"word {text!r} uses symbols outside 1..{alphabet_size}")
    return word


@lru_cache(maxsize=256)
def admissible_words(spec, length):
    """All admissible words of the given length as an (n, length) array, lexicographic."""
    if length == 0:
        return np.zeros((1, 0), dtype=np.int64)
    words = np.arange(spec.alphabet_size, dtype=np.int64)[:, None]
    Q = spec.Q
    for _ in range(length - 1):
        last = words[:, -1]
        rows, cols = np.nonzero(Q[last])
        words = np.concatenate([words[rows], cols[:, None]], axis=1)
    words.setflags(write=False)
    return words


@lru_cache(maxsize=256)
def word_lookup(spec, length):
    """Dense array mapping base-l word codes to row indices of admissible_words (-1 if absent)."""
    words = admissible_words(spec, length)
    size = spec.alphabet_size ** length
    table = np.full(size, -1, dtype=np.int64)
    table[encode_codes(words, spec.alphabet_size)] = np.arange(len(words))
    table.setflags(write=False)
    return table


def encode_codes(words, base):
    words = np.asarray(words, dtype=np.int64)
    code = np.zeros(words.shape[:-1], dtype=np.int64)
    for j in range(words.shape[-1]):
        code = code * base + words[..., j]
    return code


def word_indices(spec, words):
    """Row indices (into admissible_words) of an array of words; -1 for inadmissible."""
    words = np.asarray(words, dtype=np.int64)
    return word_lookup(spec, words.shape[-1])[encode_codes(words, spec.alphabet_size)]


def sliding_indices(spec, seq, length):
    """Index of each length-`length` window of the symbol array(s) `seq`."""
    seq = np.asarray(seq, dtype=np.int64)
    win = np.lib.stride_tricks.sliding_window_view(seq, length, axis=-1)
    idx = word_indices(spec, win)
    if (idx < 0).any():
        raise SpecError("sequence contains an inadmissible window")
    return idx


@dataclass(frozen=True, eq=False)
class PointRep:
    """Eventually periodic point: ... L L L core R R R ...

    Coordinate n lives at position n + origin of the core; negative positions
    read the left period backwards, positions past the core read the right period.
    """
    spec: SubshiftSpec
    left_period: tuple
    core: tuple
    right_period: tuple
    origin: int = 0

    def __post_init__(self):
        for name in ("left_period", "core", "right_period"):
            object.__setattr__(self, name, tuple(int(a) for a in getattr(self, name)))
        object.__setattr__(self, "origin", int(self.origin))
        L, C, R = self.left_period, self.core, self.right_period
        if not L or not R:
            raise SpecError("periods must be non-empty")
        seq = L + C + R
        ok = self.spec.is_admissible(seq) and self.spec.allowed(L[-1], L[0]) \
            and self.spec.allowed(R[-1], R[0])
        if not ok:
            raise SpecError("point has an inadmissible junction")

    @classmethod
    def periodic(cls, spec, word):
        word = tuple(word)
        return cls(spec, word, (), word, 0)

    @classmethod
    def from_coords(cls, spec, coord, lo, hi, left_len, right_len):
        """Build from a coordinate function that is periodic below lo and from hi on."""
        left = tuple(coord(n) for n in range(lo - left_len, lo))
        core = tuple(coord(n) for n in range(lo, hi))
        right = tuple(coord(n) for n in range(hi, hi + right_len))
        return cls(spec, left, core, right, -lo)

    @property
    def span(self):
        """Coordinates [lo, hi) covered by the core."""
        return -self.origin, len(self.core) - self.origin

    def __getitem__(self, n):
        i = n + self.origin
        if 0 <= i < len(self.core):
            return self.core[i]
        if i < 0:
            return self.left_period[i % len(self.left_period)]
        return self.right_period[(i - len(self.core)) % len(self.right_period)]

    def word(self, lo, hi):
        return tuple(self[n] for n in range(lo, hi))

    def _common_range(self, other):
        lo1, hi1 = self.span
        lo2, hi2 = other.span
        pl = math.lcm(len(self.left_period), len(other.left_period))
        pr = math.lcm(len(self.right_period), len(other.right_period))
        return min(lo1, lo2) - pl, max(hi1, hi2) + pr

    def __eq__(self, other):
        if not isinstance(other, PointRep):
            return NotImplemented
        lo, hi = self._common_range(other)
        return all(self[n] == other[n] for n in range(lo, hi))

    def __hash__(self):
        return hash(self.word(-8, 9))

    def __repr__(self):
        lo, hi = self.span
        lo, hi = min(lo, -3), max(hi, 4)
        past = format_word(self.word(lo, 0))
        fut = format_word(self.word(0, hi))
        return f"PointRep(...{past}.{fut}...)"


def d_theta(x, y):
    """theta^N with N the largest integer such that x_n = y_n for |n| < N."""
    lo, hi = x._common_range(y)
    bound = max(-lo, hi) + 1
    for k in range(bound + 1):
        if x[k] != y[k] or x[-k] != y[-k]:
            return x.spec.theta ** k
    return 0.0


def shift(x, n):
    """The point f^n(x): coordinate m of the result is x_{m+n}."""
    return PointRep(x.spec, x.left_period, x.core, x.right_period, x.origin + n)


@dataclass(frozen=True, eq=False)
class OneSidedView:
    """Projection of a point to its future (side 'u') or past (side 's')."""
    point: PointRep
    side: str

    def __getitem__(self, n):
        if (self.side == "u" and n < 0) or (self.side == "s" and n > 0):
            raise IndexError(f"coordinate {n} is not on the {self.side} side")
        return self.point[n]

    def __eq__(self, other):
        if not isinstance(other, OneSidedView) or other.side != self.side:
            return NotImplemented
        lo, hi = self.point._common_range(other.point)
        rng = range(0, max(hi, 1)) if self.side == "u" else range(min(lo, 0), 1)
        return all(self.point[n] == other.point[n] for n in rng)

    def __hash__(self):
        rng = range(0, 9) if self.side == "u" else range(-8, 1)
        return hash((self.side, tuple(self.point[n] for n in rng)))


def project(x, side):
    if side not in ("u", "s"):
        raise ValueError("side must be 'u' or 's'")
    return OneSidedView(x, side)


def bracket(x, y):
    """Point with the past of x (n < 0) and the future of y (n >= 0)."""
    if not x.spec.allowed(x[-1], y[0]):
        raise SpecError("past and future do not glue admissibly")
    lo = min(x.span[0], 0)
    hi = max(y.span[1], 0)
    return PointRep.from_coords(x.spec, lambda n: x[n] if n < 0 else y[n], lo, hi,
                                len(x.left_period), len(y.right_period))


def periodic_points(spec, n):
    """All points of period n (not necessarily least period); count = trace(Q^n)."""
    words = admissible_words(spec, n)
    closing = spec.Q[words[:, -1], words[:, 0]] == 1
    return [PointRep.periodic(spec, w) for w in words[closing].tolist()]


def cycle_words(spec, n):
    """Cyclic admissible words of length n as an array (rows = periodic points)."""
    words = admissible_words(spec, n)
    return words[spec.Q[words[:, -1], words[:, 0]] == 1]


def point_from_word(spec, word, start=0):
    """A point whose coordinates start..start+len-1 read `word`, closed by shortest cycles."""
    word = tuple(word)
    cyc = spec.shortest_cycles
    # left tail: a cycle through word[0], entered so the junction is admissible
    left = cyc[word[0]]
    right_start = next(b for b in spec.successors(word[-1]))
    right = cyc[right_start]
    return PointRep(spec, left, word, right, -start)


def random_word(spec, rng, length, first=None):
    a = int(rng.integers(spec.alphabet_size)) if first is None else int(first)
    out = [a]
    for _ in range(length - 1):
        succ = spec.successors(out[-1])
        out.append(succ[int(rng.integers(len(succ)))])
    return tuple(out)


def random_past(spec, rng, length, last):
    """Word w of the given length with w[-1] -> last admissible."""
    out = [last]
    for _ in range(length):
        pred = spec.predecessors(out[-1])
        out.append(pred[int(rng.integers(len(pred)))])
    return tuple(reversed(out[1:]))


def random_point(spec, rng, radius=8):
    """Random point with a random admissible core on [-radius, radius]."""
    w = random_word(spec, rng, 2 * radius + 1)
    return point_from_word(spec, w, start=-radius)


def with_random_past(x, rng, length=8):
    """Point agreeing with x on n >= 0 and random on [-length, -1]."""
    spec = x.spec
    hi = max(x.span[1], 1)
    fut = x.word(0, hi)
    core = random_past(spec, rng, length, fut[0]) + fut
    right = x.word(hi, hi + len(x.right_period))
    return PointRep(spec, spec.shortest_cycles[core[0]], core, right, length)


def with_random_future(x, rng, length=8):
    """Point agreeing with x on n <= 0 and random on [1, length]."""
    spec = x.spec
    lo = min(x.span[0], 0)
    past = x.word(lo, 1)
    core = past + random_word(spec, rng, length + 1, first=past[-1])[1:]
    left = x.word(lo - len(x.left_period), lo)
    right = spec.shortest_cycles[spec.successors(core[-1])[0]]
    return PointRep(spec, left, core, right, -lo)


@dataclass(frozen=True)
class Cylinder:
    offset: int
    word: tuple

    def contains(self, x):
        return all(x[self.offset + i] == a for i, a in enumerate(self.word))


@dataclass(frozen=True, eq=False)
class Recoding:
    """Higher block presentation: symbols of the new shift are admissible k-words."""
    spec: SubshiftSpec
    k: int
    words: tuple
    index: dict = field(repr=False)
    coded: SubshiftSpec = field(repr=False)

    def encode(self, word):
        word = tuple(word)
        if len(word) < self.k:
            raise ValueError("word shorter than the block length")
        return tuple(self.index[word[i:i + self.k]] for i in range(len(word) - self.k + 1))

    def decode(self, codes):
        codes = list(codes)
        if not codes:
            return ()
        out = list(self.words[codes[0]])
        out.extend(self.words[c][-1] for c in codes[1:])
        return tuple(out)

    def encode_array(self, seq):
        """Vectorised encode of symbol arrays (last axis)."""
        return sliding_indices(self.spec, seq, self.k)

    def encode_point(self, x):
        lo, hi = x.span
        k = self.k
        coord = lambda n: self.index[x.word(n, n + k)]
        return PointRep.from_coords(self.coded, coord, lo - k + 1, hi,
                                    len(x.left_period), len(x.right_period))


@lru_cache(maxsize=64)
def recode(spec, k):
    """Memory-k recoding. Returns a Recoding carrying the new spec and the dictionaries."""
    if k < 1:
        raise ValueError("k must be positive")
    words = [tuple(w) for w in admissible_words(spec, k).tolist()]
    index = {w: i for i, w in enumerate(words)}
    n = len(words)
    Q = np.zeros((n, n), dtype=int)
    for i, a in enumerate(words):
        for j, b in enumerate(words):
            if a[1:] == b[:-1] and spec.allowed(a[-1], b[-1]):
                Q[i, j] = 1
    if k == 1:
        Q = spec.Q.copy()
    return Recoding(spec, k, tuple(words), index, SubshiftSpec(Q, spec.theta))


class WindowedTable:
    """Function of the coordinates x_lo..x_{hi-1}, stored per admissible window word."""

    def __init__(self, spec, window, words, values):
        lo, hi = int(window[0]), int(window[1])
        if hi <= lo:
            raise SpecError(f"empty window [{lo},{hi})")
        self.spec = spec
        self.window = (lo, hi)
        self.values = values
        self.values.setflags(write=False)
        ref = admissible_words(spec, hi - lo)
        if len(words) != len(ref) or not np.array_equal(np.asarray(words), ref):
            raise SpecError("table must cover exactly the admissible window words")

    @classmethod
    def _from_mapping(cls, spec, window, table, convert):
        lo, hi = window
        width = hi - lo
        words = admissible_words(spec, width)
        keys = {tuple(w) for w in table}
        missing = [format_word(w) for w in words.tolist() if tuple(w) not in keys]
        extra = [format_word(w) for w in keys
                 if len(w) != width or not spec.is_admissible(w)]
        if missing or extra:
            raise SpecError(f"table mismatch: missing {missing[:5]} inadmissible/extra {extra[:5]}")
        values = np.array([convert(table[tuple(w)]) for w in words.tolist()], dtype=float)
        return words, values

    @property
    def lo(self):
        return self.window[0]

    @property
    def hi(self):
        return self.window[1]

    @property
    def width(self):
        return self.hi - self.lo

    @property
    def future_only(self):
        return self.lo >= 0

    @property
    def words(self):
        return admissible_words(self.spec, self.width)

    def index_at(self, x):
        return int(word_indices(self.spec, np.array(x.word(self.lo, self.hi))))

    def value_at(self, x):
        return self.values[self.index_at(x)]

    def indices_along(self, seq):
        """Window indices for every start position of the symbol array(s) seq."""
        return sliding_indices(self.spec, seq, self.width)

    def as_dict(self):
        return {tuple(w): self.values[i] for i, w in enumerate(self.words.tolist())}
