"""YAML experiment configuration: parsing, defaults and validation.

Every problem found is collected so a bad file is reported in one pass.
"""
from __future__ import annotations

import copy
import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from . import presets
from .cocycle import CocycleError, WindowedCocycle
from .symbolic import SpecError, SubshiftSpec, parse_word, validate_spec
from .thermo import Potential, bernoulli, equilibrium, markov_chain

COMMANDS = ("validate", "exponents", "bunching", "holonomy", "equilibrium", "ustate",
            "atoms", "sweep", "coupling-demo")
STOCHASTIC = {"exponents", "holonomy", "sweep", "coupling-demo"}

DEFAULT_SETTINGS = {
    "seed": None,
    "depth": None,
    "eps": math.pi / 2 * 2.0 ** -12,
    "n": 10_000,
    "samples": 100,
    "max_period": 6,
    "max_iter": 500,
    "tol": 1e-10,
    "grid": 64,
    "holder_alpha": 1.0,
    "N_max": 64,
    "holonomy_samples": 50,
    "z": 3.0,
}

DEFAULT_SWEEP = {
    "cocycle": "bunched",
    "potential": "bunched",
    "t_star": 0.0,
    "delta_t": 0.5,
    "levels": 6,
    "n": 4000,
    "samples": 64,
    "gap_depth": 4,
}

DEFAULT_COUPLING = {"instances": 3, "max_steps": None}

# (low, high, integer?) for numeric knobs; None means unbounded
RANGES = {
    "depth": (1, 12, True),
    "eps": (0.0, 1.0, False),
    "n": (1, 10 ** 8, True),
    "samples": (2, 10 ** 6, True),
    "max_period": (1, 16, True),
    "max_iter": (1, 10 ** 6, True),
    "tol": (0.0, 1.0, False),
    "grid": (1, 1 << 16, True),
    "holder_alpha": (0.0, 1.0, False),
    "N_max": (1, 4096, True),
    "holonomy_samples": (1, 10 ** 5, True),
    "z": (0.0, 100.0, False),
}


class ConfigError(ValueError):
    """Carries every violation found while loading a configuration."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("\n".join(self.problems))


@dataclass
class ExperimentConfig:
    command: str
    spec: SubshiftSpec
    cocycle: WindowedCocycle | None
    measure: object | None
    potential: Potential | None
    settings: dict
    sweep: dict
    coupling: dict
    output: str
    raw: dict = field(repr=False, default_factory=dict)

    @property
    def seed(self):
        return self.settings["seed"]

    @property
    def digest(self):
        return config_hash({"raw": self.raw, "command": self.command, "settings": self.settings,
                            "sweep": self.sweep, "coupling": self.coupling})


def config_hash(raw):
    blob = json.dumps(raw, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def _matrix(value, where, problems):
    try:
        M = np.asarray(value, dtype=float)
    except (TypeError, ValueError):
        problems.append(f"{where}: not a numeric matrix")
        return None
    if M.shape != (2, 2):
        problems.append(f"{where}: expected a 2x2 matrix (row-major), got shape {M.shape}")
        return None
    if not np.all(np.isfinite(M)):
        problems.append(f"{where}: non-finite entry")
        return None
    return M


def _word_table(block, spec, where, problems, convert):
    """Parse {'window': [lo, hi], 'values': {word: value}}; returns (window, mapping)."""
    if not isinstance(block, dict):
        problems.append(f"{where}: expected a mapping with 'window' and 'values'")
        return None, None
    window = block.get("window", [0, 1])
    if (not isinstance(window, (list, tuple)) or len(window) != 2
            or not all(isinstance(v, int) for v in window) or window[1] <= window[0]):
        problems.append(f"{where}.window: expected [lo, hi] integers with lo < hi")
        return None, None
    width = window[1] - window[0]
    values = block.get("values")
    if not isinstance(values, dict):
        problems.append(f"{where}.values: expected a mapping word -> value")
        return None, None
    table = {}
    ok = True
    for key, val in values.items():
        loc = f"{where}.values[{key!r}]"
        try:
            word = parse_word(key, spec.alphabet_size)
        except SpecError as exc:
            problems.append(f"{loc}: {exc}")
            ok = False
            continue
        if len(word) != width:
            problems.append(f"{loc}: word length {len(word)} does not match window width {width}")
            ok = False
            continue
        if not spec.is_admissible(word):
            bad = next(i for i in range(len(word) - 1) if not spec.allowed(word[i], word[i + 1]))
            problems.append(f"{loc}: transition {word[bad] + 1}->{word[bad + 1] + 1} at position "
                            f"{bad + 1} is forbidden by the transition matrix")
            ok = False
            continue
        v = convert(val, loc, problems)
        if v is None:
            ok = False
            continue
        table[word] = v
    if ok:
        from .symbolic import admissible_words, format_word
        missing = [format_word(w) for w in admissible_words(spec, width).tolist() if tuple(w) not in table]
        if missing:
            problems.append(f"{where}.values: missing admissible words {missing[:8]}")
            ok = False
    return (tuple(window), table) if ok else (None, None)


def _scalar(val, loc, problems):
    try:
        v = float(val)
    except (TypeError, ValueError):
        problems.append(f"{loc}: not a number")
        return None
    if not math.isfinite(v):
        problems.append(f"{loc}: not finite")
        return None
    return v


def _parse_spec(raw, problems):
    block = raw.get("subshift", {"full": 2})
    if not isinstance(block, dict):
        problems.append("subshift: expected a mapping")
        return None
    theta = block.get("theta", 0.5)
    try:
        theta = float(theta)
    except (TypeError, ValueError):
        problems.append("subshift.theta: not a number")
        return None
    if "transitions" in block:
        Q = block["transitions"]
    elif "full" in block:
        n = block["full"]
        if not isinstance(n, int) or n < 1:
            problems.append("subshift.full: expected a positive integer alphabet size")
            return None
        Q = np.ones((n, n), dtype=int).tolist()
    else:
        problems.append("subshift: give 'transitions' (0/1 matrix) or 'full' (alphabet size)")
        return None
    try:
        arr = np.asarray(Q)
    except ValueError:
        problems.append("subshift.transitions: ragged matrix")
        return None
    diag = validate_spec(arr, theta)
    if not diag.valid:
        problems.extend(f"subshift: {p}" for p in diag.problems)
        # a bad theta alone does not change admissibility: keep checking the other sections
        if not validate_spec(arr, 0.5).valid:
            return None
        theta = 0.5
    return SubshiftSpec(arr, theta)


def _preset_args(block, where, problems):
    if not isinstance(block, dict) or "name" not in block:
        problems.append(f"{where}: expected a mapping with 'name'")
        return None, {}
    args = {k: v for k, v in block.items() if k != "name"}
    return block["name"], args


def _parse_cocycle(raw, spec, problems):
    block = raw.get("cocycle")
    if block is None:
        return None
    if not isinstance(block, dict):
        problems.append("cocycle: expected a mapping")
        return None
    keys = [k for k in ("constant", "table", "preset") if k in block]
    if len(keys) != 1:
        problems.append("cocycle: give exactly one of 'constant', 'table', 'preset'")
        return None
    try:
        if keys[0] == "constant":
            M = _matrix(block["constant"], "cocycle.constant", problems)
            return None if M is None else WindowedCocycle.constant(spec, M)
        if keys[0] == "table":
            window, table = _word_table(block["table"], spec, "cocycle.table", problems, _matrix)
            return None if table is None else WindowedCocycle(spec, window, table)
        name, args = _preset_args(block["preset"], "cocycle.preset", problems)
        if name is None:
            return None
        return _build_preset_cocycle(name, args, spec, problems)
    except (CocycleError, SpecError, TypeError, ValueError) as exc:
        problems.append(f"cocycle: {exc}")
        return None


def _build_preset_cocycle(name, args, spec, problems):
    t = float(args.get("t", 0.0))
    if name == "bunched":
        if spec.alphabet_size != 2:
            problems.append("cocycle.preset: 'bunched' lives on the full 2-shift")
            return None
        return presets.bunched_cocycle(t, spec, rotate=bool(args.get("rotate", True)))
    if name == "diagonal_rotation":
        betas = tuple(args.get("betas", (0.0, math.pi / 2)))
        return presets.diagonal_rotation_cocycle(t, float(args.get("sigma", 2.0)), betas, spec)
    if name == "diagonal":
        return presets.diagonal_constant(float(args.get("s", 2.0)), spec)
    if name == "rotation":
        return presets.rotation_constant(float(args.get("beta", 1.0)), spec)
    problems.append(f"cocycle.preset: unknown family {name!r}")
    return None


def _parse_measure(raw, spec, problems):
    """Returns (GibbsMeasure or None, Potential or None)."""
    block = raw.get("measure", {"bernoulli": None})
    if not isinstance(block, dict):
        problems.append("measure: expected a mapping")
        return None, None
    keys = [k for k in ("bernoulli", "markov", "potential", "preset") if k in block]
    if len(keys) != 1:
        problems.append("measure: give exactly one of 'bernoulli', 'markov', 'potential', 'preset'")
        return None, None
    kind = keys[0]
    try:
        if kind == "bernoulli":
            w = block["bernoulli"]
            n = spec.alphabet_size
            w = [1.0 / n] * n if w is None else w
            if len(w) != n or any(float(v) < 0 for v in w) or sum(float(v) for v in w) <= 0:
                problems.append(f"measure.bernoulli: expected {n} nonnegative weights")
                return None, None
            if not np.all(spec.Q == 1):
                problems.append("measure.bernoulli: requires a full shift")
                return None, None
            return bernoulli(spec, [float(v) for v in w]), None
        if kind == "markov":
            P = np.asarray(block["markov"], dtype=float)
            n = spec.alphabet_size
            if P.shape != (n, n):
                problems.append(f"measure.markov: expected a {n}x{n} stochastic matrix")
                return None, None
            bad = np.argwhere((P > 0) & (spec.Q == 0))
            for i, j in bad:
                problems.append(f"measure.markov[{i + 1}][{j + 1}]: positive weight on a forbidden transition")
            if np.any(P < 0) or np.any(np.abs(P.sum(axis=1) - 1) > 1e-9):
                problems.append("measure.markov: rows must be nonnegative and sum to 1")
            if len(bad) or problems:
                return None, None
            return markov_chain(spec, P), None
        if kind == "potential":
            window, table = _word_table(block["potential"], spec, "measure.potential", problems, _scalar)
            if table is None:
                return None, None
            phi = Potential(spec, window, table)
            return equilibrium(phi), phi
        name, args = _preset_args(block["preset"], "measure.preset", problems)
        if name is None:
            return None, None
        if name != "bunched":
            problems.append(f"measure.preset: unknown family {name!r}")
            return None, None
        phi = presets.bunched_potential(float(args.get("t", 0.0)), spec)
        return equilibrium(phi), phi
    except (SpecError, TypeError, ValueError) as exc:
        problems.append(f"measure: {exc}")
        return None, None


def _check_ranges(settings, problems, where="settings"):
    for key, (lo, hi, integer) in RANGES.items():
        v = settings.get(key)
        if v is None:
            continue
        if integer and (not isinstance(v, int) or isinstance(v, bool)):
            problems.append(f"{where}.{key}: expected an integer, got {v!r}")
            continue
        if not isinstance(v, (int, float)) or isinstance(v, bool):
            problems.append(f"{where}.{key}: expected a number, got {v!r}")
            continue
        if not (lo < v <= hi if not integer else lo <= v <= hi):
            problems.append(f"{where}.{key}: {v} outside the documented range")


def parse_config(raw, command=None, overrides=None):
    """Validate an already-parsed mapping; raises ConfigError listing all problems."""
    problems = []
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError(["top level: expected a mapping"])
    raw = copy.deepcopy(raw)
    overrides = {k: v for k, v in (overrides or {}).items() if v is not None}
    known = {"command", "subshift", "cocycle", "measure", "settings", "sweep", "coupling", "output"}
    for key in raw:
        if key not in known:
            problems.append(f"{key}: unknown section")
    cmd = command or raw.get("command") or "validate"
    if cmd not in COMMANDS:
        problems.append(f"command: unknown command {cmd!r}")
    settings = dict(DEFAULT_SETTINGS)
    user = raw.get("settings", {}) or {}
    if not isinstance(user, dict):
        problems.append("settings: expected a mapping")
        user = {}
    for key in user:
        if key not in DEFAULT_SETTINGS:
            problems.append(f"settings.{key}: unknown setting")
    settings.update({k: v for k, v in user.items() if k in DEFAULT_SETTINGS})
    settings.update({k: v for k, v in overrides.items() if k in DEFAULT_SETTINGS})
    _check_ranges(settings, problems)
    seed = settings["seed"]
    if seed is not None and (not isinstance(seed, int) or isinstance(seed, bool) or not 0 <= seed < 2 ** 64):
        problems.append(f"settings.seed: expected an unsigned 64-bit integer, got {seed!r}")
    if cmd in STOCHASTIC and seed is None:
        problems.append(f"settings.seed: required for the stochastic command {cmd!r} (or pass --seed)")

    sweep = dict(DEFAULT_SWEEP)
    sweep.update(raw.get("sweep", {}) or {})
    if "levels" in overrides:
        sweep["levels"] = overrides["levels"]
    for key in ("levels", "n", "samples", "gap_depth"):
        v = sweep.get(key)
        if not isinstance(v, int) or isinstance(v, bool) or v < (2 if key in ("levels", "samples") else 1):
            problems.append(f"sweep.{key}: expected an integer >= {2 if key in ('levels', 'samples') else 1}")
    for key in ("t_star", "delta_t"):
        if not isinstance(sweep.get(key), (int, float)):
            problems.append(f"sweep.{key}: expected a number")
    if sweep.get("cocycle") not in presets.COCYCLE_FAMILIES:
        problems.append(f"sweep.cocycle: unknown family {sweep.get('cocycle')!r}")
    if sweep.get("potential") not in presets.POTENTIAL_FAMILIES:
        problems.append(f"sweep.potential: unknown family {sweep.get('potential')!r}")

    coupling = dict(DEFAULT_COUPLING)
    coupling.update(raw.get("coupling", {}) or {})
    inst = coupling.get("instances")
    if not isinstance(inst, int) or inst < 1:
        problems.append("coupling.instances: expected a positive integer")

    spec = _parse_spec(raw, problems)
    cocycle = measure = potential = None
    if spec is not None:
        cocycle = _parse_cocycle(raw, spec, problems)
        measure, potential = _parse_measure(raw, spec, problems)
    needs_cocycle = cmd in {"exponents", "bunching", "holonomy", "ustate", "atoms"}
    if needs_cocycle and cocycle is None and "cocycle" not in raw:
        problems.append(f"cocycle: required by {cmd!r}")
    if cmd == "sweep" and spec is not None and spec.alphabet_size != 2:
        problems.append("sweep: the stock families live on the full 2-shift")

    output = overrides.get("output") or raw.get("output") or "out"
    if problems:
        raise ConfigError(problems)
    return ExperimentConfig(cmd, spec, cocycle, measure, potential, settings, sweep, coupling,
                            str(output), raw)


def load_config(path, command=None, overrides=None):
    """Read and validate a YAML file; raises ConfigError with every violation."""
    p = Path(path)
    if not p.exists():
        raise ConfigError([f"{path}: file not found"])
    try:
        raw = yaml.safe_load(p.read_text())
    except yaml.YAMLError as exc:
        raise ConfigError([f"{path}: parse error: {exc}"]) from exc
    return parse_config(raw, command, overrides)
