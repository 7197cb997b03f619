"""Experiment configuration files and plain-text MDP / feature tables.

A configuration is an INI file.  Each ``[experiment NAME]`` section is one
experiment grid; ``[DEFAULT]`` values apply to every experiment; sections
named after a check subcommand (``[prop2]``, ``[landscape]``, ``[binomial]``)
hold that subcommand's settings.  See ``configs/`` for annotated examples.
"""

from __future__ import annotations

import configparser
import dataclasses
import itertools
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .cloning import policy_from_text
from .discriminator import FeatureMap, one_hot_features
from .harness import ALGORITHMS
from .instances import disjoint_support_instance, shared_expert_instance, standard_imitation
from .mdp import ShapeError, TabularMdp

INSTANCES = ("standard_imitation", "shared_expert", "disjoint_support", "file")
SEED_MAX = 2 ** 64 - 1

DEFAULTS = {
    "trials": 200,
    "seed": 0,
    "delta": 0.0,
    "tol": 1e-10,
    "grid": "product",
    "rate_vs": "none",
    "rate_floor": 1e-6,
    "lower_bound": "none",
    "exclude_failures": False,
}

_INSTANCE_KEYS = {
    "standard_imitation": {"num_states": None, "num_actions": 2, "horizon": 5, "initial": "uniform"},
    "shared_expert": {"num_states": None, "num_actions": 2, "horizon": 5, "initial": "geometric"},
    "disjoint_support": {"num_states_per_branch": None, "num_actions": 2, "horizon": 5,
                         "entry": "uniform"},
    "file": {"mdp_file": None, "expert_file": None, "behavior_file": None},
}
_EXPERIMENT_KEYS = {"instance", "algorithms", "eta", "n_tot", "trials", "seed", "delta", "tol",
                    "grid", "rate_vs", "rate_floor", "slope_min", "slope_max", "max_variation",
                    "lower_bound", "exclude_failures", "features"}
_ALL_INSTANCE_KEYS = set().union(*(set(k) for k in _INSTANCE_KEYS.values()))

CHECK_SECTIONS = {
    "example1": {},
    "prop2": {"trials": 100, "seed": 0, "max_states": 8, "max_actions": 4, "max_horizon": 6,
              "max_trajectories": 30},
    "landscape": {"trials": 200, "seed": 0},
    "binomial": {"n_max": 100, "p_values": "0.05:0.95:0.05"},
}


class ConfigError(ValueError):
    """Raised with every problem found; ``errors`` lists them one per entry."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("\n".join(self.errors))


@dataclass(frozen=True)
class InstanceSpec:
    name: str
    params: tuple    # sorted (key, value) pairs

    def build(self):
        p = dict(self.params)
        if self.name == "standard_imitation":
            return standard_imitation(p["num_states"], p["num_actions"], p["horizon"], p["initial"])
        if self.name == "shared_expert":
            base, expert, _ = standard_imitation(p["num_states"], p["num_actions"], p["horizon"],
                                                 p["initial"])
            return shared_expert_instance(base, expert)
        if self.name == "disjoint_support":
            return disjoint_support_instance(p["num_states_per_branch"], p["num_actions"],
                                             p["horizon"], p["entry"])
        mdp = mdp_from_text(Path(p["mdp_file"]).read_text())
        expert = policy_from_text(Path(p["expert_file"]).read_text(), mdp.shape)
        behavior = policy_from_text(Path(p["behavior_file"]).read_text(), mdp.shape)
        return mdp, expert, behavior


@dataclass(frozen=True)
class FeatureSpec:
    kind: str            # "one_hot" or "file"
    path: str | None = None

    def build(self, mdp: TabularMdp) -> FeatureMap:
        if self.kind == "one_hot":
            return one_hot_features(mdp.shape)
        fm = features_from_text(Path(self.path).read_text())
        if fm.shape != mdp.shape:
            raise ShapeError(f"feature table shape {fm.shape} does not match MDP {mdp.shape}")
        return fm


@dataclass(frozen=True)
class ExperimentConfig:
    name: str
    instance: InstanceSpec
    algorithms: tuple
    eta: tuple
    n_tot: tuple
    trials: int = 200
    seed: int = 0
    delta: float = 0.0
    tol: float = 1e-10
    grid: str = "product"
    rate_vs: str = "none"
    rate_floor: float = 1e-6
    slope_range: tuple | None = None
    max_variation: float | None = None
    lower_bound: str = "none"
    exclude_failures: bool = False
    features: FeatureSpec | None = None

    def cells(self):
        """(eta, n_tot) pairs in configuration order."""
        if self.grid == "product":
            return list(itertools.product(self.eta, self.n_tot))
        eta, n_tot = self.eta, self.n_tot
        if len(eta) == 1:
            eta = eta * len(n_tot)
        if len(n_tot) == 1:
            n_tot = n_tot * len(eta)
        return list(zip(eta, n_tot))


@dataclass(frozen=True)
class SuiteConfig:
    experiments: tuple = ()
    checks: dict = field(default_factory=dict)   # subcommand -> settings dict

    def with_overrides(self, trials=None, seed=None) -> "SuiteConfig":
        changes = {}
        if trials is not None:
            changes["trials"] = trials
        if seed is not None:
            changes["seed"] = seed
        exps = tuple(dataclasses.replace(e, **changes) for e in self.experiments)
        checks = {k: {**v, **{c: changes[c] for c in changes if c in v}}
                  for k, v in self.checks.items()}
        return SuiteConfig(exps, checks)

    def check_settings(self, name) -> dict:
        return dict(self.checks.get(name, CHECK_SECTIONS[name]))


_SECTION_RE = re.compile(r"^\s*\[([^\]]+)\]")
_KEY_RE = re.compile(r"^\s*([^=:\s#;][^=:]*?)\s*[=:]")


def _line_map(text):
    """(section, key) -> first line number, plus section header line numbers."""
    lines, section = {}, None
    for i, line in enumerate(text.splitlines(), 1):
        m = _SECTION_RE.match(line)
        if m:
            section = m.group(1).strip()
            lines.setdefault((section, None), i)
            continue
        m = _KEY_RE.match(line)
        if m and section is not None and not line[:1].isspace():
            lines.setdefault((section, m.group(1).strip().lower()), i)
    return lines


class _Reader:
    def __init__(self, parser, lines):
        self.parser = parser
        self.lines = lines
        self.errors = []

    def where(self, section, key=None):
        line = self.lines.get((section, key)) or self.lines.get(("DEFAULT", key))
        if line is None:
            line = self.lines.get((section, None))
        loc = f"line {line}: " if line else ""
        return f"{loc}[{section}]" + (f" {key}" if key else "")

    def error(self, section, key, msg):
        self.errors.append(f"{self.where(section, key)}: {msg}")

    def raw(self, section, key):
        return self.parser.get(section, key, fallback=None)

    def get(self, section, key, conv, default=None, required=False, check=None, what=""):
        raw = self.raw(section, key)
        if raw is None or raw.strip() == "":
            if required:
                self.error(section, key, "missing required key")
            return default
        try:
            value = conv(raw.strip())
        except (ValueError, TypeError) as exc:
            self.error(section, key, f"invalid value {raw.strip()!r} ({exc})")
            return default
        if check is not None:
            values = value if isinstance(value, tuple) else (value,)
            if not all(check(v) for v in values):
                self.error(section, key, f"value {raw.strip()!r} out of range; expected {what}")
                return default
        return value


def _float_list(raw):
    return tuple(float(x) for x in re.split(r"[,\s]+", raw) if x)


def _int_strict(raw):
    value = float(raw)
    if not value.is_integer():
        raise ValueError("not an integer")
    return int(raw) if re.fullmatch(r"[+-]?\d+", raw) else int(value)


def _int_list(raw):
    return tuple(_int_strict(x) for x in re.split(r"[,\s]+", raw) if x)


def _bool(raw):
    low = raw.lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError("expected true or false")


def _choice(options):
    def conv(raw):
        if raw not in options:
            raise ValueError(f"supported: {', '.join(options)}")
        return raw
    return conv


def _algorithms(raw):
    names = tuple(x.strip() for x in raw.split(",") if x.strip())
    canon = {a.lower(): a for a in ALGORITHMS}
    out = []
    for name in names:
        if name.lower() not in canon:
            raise ValueError(f"unknown algorithm {name!r}; supported: {', '.join(ALGORITHMS)}")
        out.append(canon[name.lower()])
    if not out:
        raise ValueError("no algorithms listed")
    return tuple(out)


def _initial_spec(raw):
    if raw in ("uniform", "geometric"):
        return raw
    probs = _float_list(raw)
    if any(p < 0 for p in probs) or abs(sum(probs) - 1.0) > 1e-9:
        raise ValueError("expected uniform, geometric or a probability vector")
    return probs


def _parse_instance(rd, section, base_dir):
    name = rd.get(section, "instance", _choice(INSTANCES), required=True)
    if name is None:
        return None
    spec = _INSTANCE_KEYS[name]
    params = {}
    for key, default in spec.items():
        if key.endswith("_file"):
            raw = rd.get(section, key, str, required=True)
            if raw is not None:
                path = (base_dir / raw) if not Path(raw).is_absolute() else Path(raw)
                if not path.is_file():
                    rd.error(section, key, f"file not found: {path}")
                params[key] = str(path)
        elif key in ("initial", "entry"):
            params[key] = rd.get(section, key, _initial_spec, default)
        elif key == "num_actions":
            params[key] = rd.get(section, key, _int_strict, default, check=lambda v: v >= 2,
                                 what="an integer >= 2")
        elif key == "horizon":
            low = 2 if name == "disjoint_support" else 1
            params[key] = rd.get(section, key, _int_strict, default, check=lambda v: v >= low,
                                 what=f"an integer >= {low}")
        else:
            params[key] = rd.get(section, key, _int_strict, default, required=default is None,
                                 check=lambda v: v >= 1, what="a positive integer")
    for key in _ALL_INSTANCE_KEYS - set(spec):
        if rd.parser.has_option(section, key) and key not in rd.parser.defaults():
            rd.error(section, key, f"not a parameter of instance {name!r}")
    if any(v is None for v in params.values()):
        return None
    return InstanceSpec(name, tuple(sorted((k, v) for k, v in params.items())))


def _parse_features(rd, section, base_dir):
    raw = rd.raw(section, "features")
    if raw is None or raw.strip() in ("", "one_hot"):
        return FeatureSpec("one_hot")
    raw = raw.strip()
    if not raw.startswith("file:"):
        rd.error(section, "features", "expected one_hot or file:PATH")
        return None
    path = Path(raw[5:].strip())
    path = path if path.is_absolute() else base_dir / path
    if not path.is_file():
        rd.error(section, "features", f"file not found: {path}")
        return None
    return FeatureSpec("file", str(path))


def _parse_experiment(rd, section, name, base_dir):
    for key in rd.parser.options(section):
        if key not in _EXPERIMENT_KEYS and key not in _ALL_INSTANCE_KEYS:
            rd.error(section, key, "unknown key")
    instance = _parse_instance(rd, section, base_dir)
    algorithms = rd.get(section, "algorithms", _algorithms, required=True)
    eta = rd.get(section, "eta", _float_list, required=True, check=lambda v: 0.0 <= v <= 1.0,
                 what="values in [0, 1]")
    n_tot = rd.get(section, "n_tot", _int_list, required=True, check=lambda v: v >= 1,
                   what="positive integers")
    kw = {
        "trials": rd.get(section, "trials", _int_strict, DEFAULTS["trials"],
                         check=lambda v: v >= 2, what="an integer >= 2"),
        "seed": rd.get(section, "seed", _int_strict, DEFAULTS["seed"],
                       check=lambda v: 0 <= v <= SEED_MAX, what="an unsigned 64-bit integer"),
        "delta": rd.get(section, "delta", float, DEFAULTS["delta"],
                        check=lambda v: v >= 0 and math.isfinite(v), what="a finite value >= 0"),
        "tol": rd.get(section, "tol", float, DEFAULTS["tol"], check=lambda v: v > 0,
                      what="a positive value"),
        "grid": rd.get(section, "grid", _choice(("product", "paired")), DEFAULTS["grid"]),
        "rate_vs": rd.get(section, "rate_vs", _choice(("none", "n_tot", "n_expert")),
                          DEFAULTS["rate_vs"]),
        "rate_floor": rd.get(section, "rate_floor", float, DEFAULTS["rate_floor"],
                             check=lambda v: v > 0, what="a positive value"),
        "max_variation": rd.get(section, "max_variation", float, None, check=lambda v: v > 0,
                                what="a positive value"),
        "lower_bound": rd.get(section, "lower_bound", _choice(("none", "nbcu")),
                              DEFAULTS["lower_bound"]),
        "exclude_failures": rd.get(section, "exclude_failures", _bool,
                                   DEFAULTS["exclude_failures"]),
    }
    lo = rd.get(section, "slope_min", float)
    hi = rd.get(section, "slope_max", float)
    if (lo is None) != (hi is None):
        rd.error(section, "slope_min" if lo is None else "slope_max",
                 "slope_min and slope_max must be given together")
    elif lo is not None and lo > hi:
        rd.error(section, "slope_min", "slope_min exceeds slope_max")
    kw["slope_range"] = (lo, hi) if lo is not None and hi is not None else None
    if eta is not None and n_tot is not None and kw["grid"] == "paired":
        if len(eta) != len(n_tot) and 1 not in (len(eta), len(n_tot)):
            rd.error(section, "n_tot", "paired grid needs eta and n_tot lists of equal length")
    if algorithms is not None and "WBCU-featured" in algorithms:
        kw["features"] = _parse_features(rd, section, base_dir)
    if None in (instance, algorithms, eta, n_tot) or rd.errors:
        return None
    if kw["rate_vs"] != "none" and len(ExperimentConfig(name, instance, algorithms, eta, n_tot,
                                                        grid=kw["grid"]).cells()) < 3:
        rd.error(section, "rate_vs", "a rate fit needs at least three grid cells")
        return None
    return ExperimentConfig(name, instance, algorithms, eta, n_tot, **kw)


def _parse_check(rd, section):
    spec = CHECK_SECTIONS[section]
    out = dict(spec)
    for key in rd.parser.options(section):
        if key in rd.parser.defaults() and not _own_option(rd, section, key):
            continue
        if key not in spec:
            rd.error(section, key, "unknown key")
            continue
        if key == "p_values":
            out[key] = rd.get(section, key, str, spec[key])
        elif key == "seed":
            out[key] = rd.get(section, key, _int_strict, spec[key],
                              check=lambda v: 0 <= v <= SEED_MAX, what="an unsigned 64-bit integer")
        else:
            out[key] = rd.get(section, key, _int_strict, spec[key], check=lambda v: v >= 1,
                              what="a positive integer")
    return out


def _own_option(rd, section, key):
    return (section, key) in rd.lines


def parse_config_text(text: str, base_dir=".") -> SuiteConfig:
    """Parse and validate configuration text; raise :class:`ConfigError` listing every problem."""
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError([f"syntax error: {exc}"]) from None
    rd = _Reader(parser, _line_map(text))
    base_dir = Path(base_dir)
    experiments, checks = [], {}
    for section in parser.sections():
        if section.startswith("experiment"):
            name = section[len("experiment"):].strip()
            if not name:
                rd.error(section, None, "experiment section needs a name: [experiment NAME]")
                continue
            exp = _parse_experiment(rd, section, name, base_dir)
            if exp is not None:
                experiments.append(exp)
        elif section in CHECK_SECTIONS:
            checks[section] = _parse_check(rd, section)
        else:
            rd.error(section, None, "unknown section; expected [experiment NAME] or one of "
                     + ", ".join(f"[{s}]" for s in CHECK_SECTIONS))
    if rd.errors:
        raise ConfigError(rd.errors)
    return SuiteConfig(tuple(experiments), checks)


def parse_config(path) -> SuiteConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError([f"cannot read {path}: {exc.strerror}"]) from None
    return parse_config_text(text, base_dir=path.parent)


def parse_range(spec: str) -> tuple:
    """``"a:b:step"`` (inclusive) or a comma list, as floats."""
    if ":" in spec:
        a, b, step = (float(x) for x in spec.split(":"))
        n = int(round((b - a) / step)) + 1
        return tuple(round(a + i * step, 12) for i in range(n))
    return _float_list(spec)


# Plain-text tables.

def _tokens(text):
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if line:
            yield lineno, line.split()


def mdp_to_text(mdp: TabularMdp) -> str:
    """``shape H S A``, ``initial``, then ``transition h s a p...`` and nonzero ``reward h s a r``."""
    H, S, A = mdp.shape
    lines = [f"shape {H} {S} {A}",
             "initial " + " ".join(repr(float(x)) for x in mdp.initial_dist)]
    for h, s, a in itertools.product(range(H), range(S), range(A)):
        lines.append(f"transition {h} {s} {a} "
                     + " ".join(repr(float(x)) for x in mdp.transitions[h, s, a]))
    for h, s, a in itertools.product(range(H), range(S), range(A)):
        if mdp.rewards[h, s, a] != 0:
            lines.append(f"reward {h} {s} {a} {float(mdp.rewards[h, s, a])!r}")
    return "\n".join(lines) + "\n"


def _read_shape(tokens, name, ndims):
    for lineno, fields in tokens:
        if fields[0] != "shape" or len(fields) != ndims + 1:
            raise ValueError(f"line {lineno}: {name} files start with 'shape' and {ndims} sizes")
        sizes = tuple(int(x) for x in fields[1:])
        if min(sizes) < 1:
            raise ValueError(f"line {lineno}: sizes must be positive")
        return sizes
    raise ValueError(f"empty {name} file")


def mdp_from_text(text: str) -> TabularMdp:
    tokens = _tokens(text)
    H, S, A = _read_shape(tokens, "MDP", 3)
    P = np.full((H, S, A, S), np.nan)
    r = np.zeros((H, S, A))
    rho = None
    for lineno, fields in tokens:
        kind = fields[0]
        try:
            if kind == "initial" and len(fields) == S + 1:
                rho = np.array([float(x) for x in fields[1:]])
            elif kind == "transition" and len(fields) == 4 + S:
                h, s, a = (int(x) for x in fields[1:4])
                P[h, s, a] = [float(x) for x in fields[4:]]
            elif kind == "reward" and len(fields) == 5:
                h, s, a = (int(x) for x in fields[1:4])
                r[h, s, a] = float(fields[4])
            else:
                raise ValueError(f"unexpected record {kind!r} with {len(fields) - 1} values")
        except IndexError:
            raise ValueError(f"line {lineno}: index out of range for shape {(H, S, A)}") from None
        except ValueError as exc:
            raise ValueError(f"line {lineno}: {exc}") from None
    if rho is None:
        raise ValueError("missing 'initial' record")
    if np.isnan(P).any():
        h, s, a = np.argwhere(np.isnan(P[..., 0]))[0]
        raise ValueError(f"missing transition row for h={h} s={s} a={a}")
    return TabularMdp(P, r, rho)


def features_to_text(features: FeatureMap) -> str:
    H, S, A = features.shape
    lines = [f"shape {H} {S} {A} {features.dim}"]
    for h, s, a in itertools.product(range(H), range(S), range(A)):
        lines.append(f"phi {h} {s} {a} " + " ".join(repr(float(x)) for x in features.phi[h, s, a]))
    return "\n".join(lines) + "\n"


def features_from_text(text: str) -> FeatureMap:
    tokens = _tokens(text)
    H, S, A, d = _read_shape(tokens, "feature", 4)
    phi = np.full((H, S, A, d), np.nan)
    for lineno, fields in tokens:
        if fields[0] != "phi" or len(fields) != 4 + d:
            raise ValueError(f"line {lineno}: expected 'phi h s a' and {d} values")
        try:
            h, s, a = (int(x) for x in fields[1:4])
            phi[h, s, a] = [float(x) for x in fields[4:]]
        except IndexError:
            raise ValueError(f"line {lineno}: index out of range") from None
    if np.isnan(phi).any():
        raise ValueError("feature table is missing (h, s, a) rows")
    return FeatureMap(phi)
