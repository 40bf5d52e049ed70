"""Experiment configuration: YAML documents validated against a JSON schema."""

import copy
import hashlib
import json
from importlib import resources

import jsonschema
import numpy as np
import yaml

from . import fixtures
from .annealed import MarkovEnvironment
from .dynamics import ExpandingSystem, LinearMap, expression_potential
from .errors import ConfigError, SystemDefinitionError

EXPERIMENTS = (
    "quenched-measure", "contraction-rate", "eigen-cocycle", "annealed-spectrum",
    "annealed-decay", "equidistribution", "asip", "ncifs-pressure", "bowen-root",
    "boundary-probe",
)

# experiments that draw random numbers and therefore need a seed
MONTE_CARLO = {"contraction-rate", "annealed-decay", "asip", "boundary-probe"}

# per-experiment defaults; a config may only override these keys
DEFAULTS = {
    "quenched-measure": {
        "system": "cos-potential", "u": "", "omega": "12", "depth": 30,
    },
    "contraction-rate": {
        "system": "cos-potential", "trials": 12, "lengths": [1, 24], "span": 10,
        "kinds": ["measure", "function"],
    },
    "eigen-cocycle": {
        "system": "cos-potential", "omega": "12", "depth": 40,
        "pairs": [["1", "2"], ["12", "2"], ["21", "112"]],
    },
    "annealed-spectrum": {
        "system": "cos-potential", "environment": "markov-slow", "f": "cos(2*pi*x)",
        "n_range": [10, 30], "depth": 4,
    },
    "annealed-decay": {
        "system": "cos-potential", "environment": "markov-decay", "f": "sin(2*pi*x)",
        "g": "sin(2*pi*x)", "n_range": [1, 10], "samples": 1000, "depth": 30,
    },
    "equidistribution": {
        "system": "doubling-tripling-zero", "environment": "bernoulli-half",
        "points": [0.0, 0.5], "n_range": [1, 30],
    },
    "asip": {
        "system": "doubling-cos", "omega": "1", "f": "cos(2*pi*x)", "n": 200,
        "samples": 10000, "depth": 40,
    },
    "ncifs-pressure": {
        "ifs": "affine-mixture", "deltas": [0.0, 1.0, 21], "n_range": [10, 40],
    },
    "bowen-root": {
        "ifs": "cantor-third", "tol": 1e-10,
    },
    "boundary-probe": {
        "system": "cos-potential", "core": "12", "left": "1", "right": "2", "n_max": 8,
        "pairs": 100, "max_shared": 8, "depth": 40,
    },
}


def load_schema():
    text = resources.files("ruellelab").joinpath("schemas/config.schema.json").read_text()
    return json.loads(text)


def validate(doc):
    """Raise :class:`ConfigError` if ``doc`` violates the schema."""
    try:
        jsonschema.validate(doc, load_schema())
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"{where}: {exc.message}") from None


def load(path):
    """Read and validate a YAML config file."""
    try:
        with open(path) as fh:
            doc = yaml.safe_load(fh)
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from None
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None
    if doc is None:
        doc = {}
    if not isinstance(doc, dict):
        raise ConfigError("the config document must be a mapping")
    validate(doc)
    return doc


def config_hash(doc):
    """SHA-256 of the canonical JSON form."""
    text = json.dumps(doc, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(text.encode()).hexdigest()


def resolve(doc, experiment, seed=None, grid_n=None, threads=None):
    """Fill in defaults and command-line overrides.

    Returns a new document with ``experiment``, ``seed``, ``grid_n``,
    ``threads``, ``scheme`` and the full ``parameters`` mapping.
    """
    doc = copy.deepcopy(doc or {})
    if doc.get("experiment", experiment) != experiment:
        raise ConfigError(f"config is for {doc['experiment']!r}, not {experiment!r}")
    doc["experiment"] = experiment
    params = dict(DEFAULTS[experiment])
    unknown = set(doc.get("parameters", {})) - set(params)
    if unknown:
        raise ConfigError(f"unknown parameters for {experiment}: {sorted(unknown)}")
    params.update(doc.get("parameters", {}))
    for key in ("system", "environment", "ifs"):
        # an explicit top-level definition replaces the default fixture
        if key in doc and key in params:
            del params[key]
    doc["parameters"] = params
    if seed is not None:
        doc["seed"] = seed
    if grid_n is not None:
        doc["grid_n"] = grid_n
    if threads is not None:
        doc["threads"] = threads
    doc.setdefault("threads", 1)
    doc.setdefault("scheme", "linear")
    if experiment in MONTE_CARLO and "seed" not in doc:
        raise ConfigError(f"{experiment} is a Monte Carlo experiment and needs a seed")
    validate({k: v for k, v in doc.items()})
    return doc


# -- building objects --------------------------------------------------------

def _fixture(name, kind):
    try:
        fx = fixtures.get_fixture(name)
    except KeyError as exc:
        raise ConfigError(str(exc.args[0])) from None
    if fx.kind != kind:
        raise ConfigError(f"fixture {name!r} is a {fx.kind}, not a {kind}")
    return fx.build()


def build_system(spec):
    """An :class:`ExpandingSystem` from a fixture name or an alphabet mapping."""
    if isinstance(spec, str):
        return _fixture(spec, "system")
    if "fixture" in spec:
        return _fixture(spec["fixture"], "system")
    maps, pots = [], []
    for letter in spec["alphabet"]:
        maps.append(LinearMap(int(letter["branches"])))
        try:
            pots.append(expression_potential(letter.get("potential", "zero"),
                                             letter.get("holder_alpha", 1.0),
                                             letter.get("holder_const")))
        except (SyntaxError, TypeError, ValueError) as exc:
            raise ConfigError(f"bad potential {letter.get('potential')!r}: {exc}") from None
    ms = [T.branches for T in maps]
    a = spec.get("a", 0.9 * 0.5 / max(ms))
    lam = spec.get("lambda", 1.0 / min(ms))
    return ExpandingSystem(tuple(maps), tuple(pots), a, lam)


def build_environment(spec):
    if isinstance(spec, str):
        return _fixture(spec, "environment")
    if "fixture" in spec:
        return _fixture(spec["fixture"], "environment")
    return MarkovEnvironment(np.array(spec["initial"], float), np.array(spec["transition"], float),
                             bool(spec.get("invariant", False)))


def build_ifs(spec):
    from .ncifs import AffineMap, MobiusMap, Ncifs
    if isinstance(spec, str):
        return _fixture(spec, "ncifs")
    if "fixture" in spec:
        return _fixture(spec["fixture"], "ncifs")
    systems = []
    for maps in spec["systems"]:
        systems.append([MobiusMap(m["r"], m["b"], m["c"]) if m.get("c", 0.0) != 0.0
                        else AffineMap(m["r"], m["b"]) for m in maps])
    if "environment" in spec:
        env = build_environment(spec["environment"])
    else:
        env = MarkovEnvironment.bernoulli(np.full(len(systems), 1.0 / len(systems)))
    return Ncifs(systems, env)


def observable(expr):
    """Vectorised callable from a sympy expression in ``x``."""
    import sympy

    sx = sympy.Symbol("x")
    try:
        parsed = sympy.sympify(expr, locals={"x": sx, "pi": sympy.pi})
    except (sympy.SympifyError, SyntaxError, TypeError) as exc:
        raise ConfigError(f"bad observable {expr!r}: {exc}") from None
    if parsed.free_symbols - {sx}:
        raise ConfigError(f"observable {expr!r} may only depend on x")
    f = sympy.lambdify(sx, parsed, "numpy")

    def func(x):
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(np.asarray(f(x), dtype=float), x.shape).copy()
    func.expr = str(expr)
    return func


def objects(doc):
    """System, environment and IFS named in ``doc`` (``None`` where absent).

    Top-level ``system``, ``environment`` and ``ifs`` entries take precedence
    over the fixture names in ``parameters``.
    """
    p = doc["parameters"]
    needed = set(DEFAULTS[doc["experiment"]])
    out = {}
    try:
        if "system" in needed:
            out["system"] = build_system(doc.get("system", p.get("system")))
        if "environment" in needed:
            out["environment"] = build_environment(doc.get("environment", p.get("environment")))
        if "ifs" in needed:
            out["ifs"] = build_ifs(doc.get("ifs", p.get("ifs")))
    except SystemDefinitionError as exc:
        raise ConfigError(f"invalid definition: {exc}") from None
    return out
