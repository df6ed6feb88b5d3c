"""Run configuration: a YAML file of nested sections with explicit defaults.

Parsing keeps YAML line marks so that every error names the offending key
and the line it sits on (or the line of its enclosing section when the key
is missing).  ``S3Config.to_yaml`` writes every value, defaults included,
and parses back to an equal config.
"""

from __future__ import annotations

import copy
from dataclasses import asdict, dataclass, fields, is_dataclass
from dataclasses import field as dc_field
from typing import Optional

import yaml

from .errors import ConfigError

MAP_FAMILIES = ("cat", "perturbed_cat")
QUADRATURE_METHODS = ("probabilistic", "deterministic")
DERIVATIVE_MODES = ("auto", "analytic", "fd")
HESSIAN_MODES = ("analytic", "fd")


@dataclass
class MapSection:
    family: str = "cat"
    matrix: list = dc_field(default_factory=lambda: [[2, 1], [1, 1]])
    t: float = 0.0
    perturbation: list = dc_field(default_factory=lambda: ["0", "sin(2*pi*x)"])
    hessian: str = "analytic"


@dataclass
class FieldSection:
    X: list = dc_field(default_factory=lambda: ["0", "sin(2*pi*x)"])
    derivative: str = "auto"
    fd_step: float = 1e-5


@dataclass
class ObservableSection:
    f: str = "cos(2*pi*x)"


@dataclass
class WindowSection:
    n_o1: int = 40
    n_o2: int = 40
    n_o3: int = 40
    neumann_n: int = 40
    series_length: int = 20


@dataclass
class QuadratureSection:
    method: str = "probabilistic"
    n_samples: int = 1_000_000
    n_chains: Optional[int] = None
    chunk_chains: int = 100
    curve_length: float = 0.05
    n_push: int = 12
    n_nodes: int = 100_000


@dataclass
class OracleSection:
    t_step: float = 1e-3
    orbit_length: int = 10_000_000
    n_seeds: int = 8
    burn_in: int = 100


@dataclass
class ValidateSection:
    tolerance: float = 1e-8
    sigmas: float = 3.0
    n_samples: int = 1_000_000
    coboundary: list = dc_field(default_factory=lambda: ["0.1*sin(2*pi*x)", "0"])
    telescoping_terms: int = 30
    g: str = "cos(2*pi*y)"
    decay_terms: int = 15
    decay_p_value: float = 0.01


@dataclass
class S3Config:
    map: MapSection = dc_field(default_factory=MapSection)
    field: FieldSection = dc_field(default_factory=FieldSection)
    observable: ObservableSection = dc_field(default_factory=ObservableSection)
    windows: WindowSection = dc_field(default_factory=WindowSection)
    quadrature: QuadratureSection = dc_field(default_factory=QuadratureSection)
    oracle: OracleSection = dc_field(default_factory=OracleSection)
    validate: ValidateSection = dc_field(default_factory=ValidateSection)
    seed: int = 20240601

    def to_dict(self) -> dict:
        return asdict(self)

    def to_yaml(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=False)

    def replace(self, **changes) -> "S3Config":
        """Copy with dotted-key overrides, e.g. replace(**{"windows.n_o2": 3})."""
        out = copy.deepcopy(self)
        for key, value in changes.items():
            *path, last = key.split(".")
            target = out
            for part in path:
                target = getattr(target, part)
            if not hasattr(target, last):
                raise ConfigError(f"unknown key '{key}'", key=key)
            setattr(target, last, value)
        check(out)
        return out


# keys that must be present in a config file (others take defaults)
REQUIRED = ("map.family",)


def _node_line(node) -> int:
    return node.start_mark.line + 1


def _convert(value, default, key, line):
    """Coerce a plain YAML value to the type of ``default``."""
    if isinstance(default, bool):
        ok = isinstance(value, bool)
    elif isinstance(default, int) and not isinstance(default, bool):
        if isinstance(value, float) and value.is_integer():
            value = int(value)
        ok = isinstance(value, int) and not isinstance(value, bool)
    elif isinstance(default, float):
        if isinstance(value, int) and not isinstance(value, bool):
            value = float(value)
        ok = isinstance(value, float)
    elif isinstance(default, str):
        ok = isinstance(value, str)
    elif isinstance(default, list):
        ok = isinstance(value, list)
    else:  # Optional[int] defaults to None
        ok = value is None or (isinstance(value, int) and not isinstance(value, bool))
    if not ok:
        raise ConfigError(f"key '{key}' has invalid value {value!r}", line, key)
    return value


def _fill(obj, node, prefix, seen_lines):
    if not isinstance(node, yaml.MappingNode):
        raise ConfigError(f"section '{prefix or '<root>'}' must be a mapping",
                          _node_line(node), prefix or None)
    known = {f.name: f for f in fields(obj)}
    for key_node, value_node in node.value:
        name = key_node.value
        key = f"{prefix}{name}"
        line = _node_line(key_node)
        if name not in known:
            raise ConfigError(f"unknown key '{key}'", line, key)
        seen_lines[key] = line
        current = getattr(obj, name)
        if is_dataclass(current):
            _fill(current, value_node, key + ".", seen_lines)
            continue
        value = yaml.safe_load(yaml.serialize(value_node))
        setattr(obj, name, _convert(value, current, key, line))


def parse_config_text(text: str) -> S3Config:
    """Parse YAML text into a validated S3Config."""
    try:
        root = yaml.compose(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ConfigError(f"malformed YAML: {getattr(exc, 'problem', exc)}",
                          mark.line + 1 if mark else None) from None
    if root is None:
        raise ConfigError("missing key 'map.family' (empty config)", 1, "map.family")
    cfg = S3Config()
    lines: dict = {}
    _fill(cfg, root, "", lines)
    for key in REQUIRED:
        if key not in lines:
            section = key.rsplit(".", 1)[0]
            raise ConfigError(f"missing key '{key}'", lines.get(section, 1), key)
    check(cfg, lines)
    return cfg


def load_config(path) -> S3Config:
    with open(path) as fh:
        return parse_config_text(fh.read())


def check(cfg: S3Config, lines: Optional[dict] = None):
    """Semantic checks; raises ConfigError naming the key."""
    lines = lines or {}

    def fail(key, msg):
        raise ConfigError(f"key '{key}' {msg}", lines.get(key), key)

    def choice(key, value, allowed):
        if value not in allowed:
            fail(key, f"must be one of {', '.join(allowed)} (got {value!r})")

    def positive(key, value):
        if value is None or value <= 0:
            fail(key, f"must be positive (got {value!r})")

    choice("map.family", cfg.map.family, MAP_FAMILIES)
    choice("map.hessian", cfg.map.hessian, HESSIAN_MODES)
    choice("field.derivative", cfg.field.derivative, DERIVATIVE_MODES)
    choice("quadrature.method", cfg.quadrature.method, QUADRATURE_METHODS)
    m = cfg.map.matrix
    if (len(m) != 2 or any(not isinstance(r, list) or len(r) != 2 for r in m)
            or any(not isinstance(v, int) or isinstance(v, bool) for r in m for v in r)):
        fail("map.matrix", "must be a 2x2 integer matrix")
    for key, value in (("map.perturbation", cfg.map.perturbation),
                       ("field.X", cfg.field.X),
                       ("validate.coboundary", cfg.validate.coboundary)):
        if len(value) != 2 or not all(isinstance(v, (str, int, float)) for v in value):
            fail(key, "must list two component expressions")
    for name in ("n_o1", "n_o2", "n_o3", "neumann_n", "series_length"):
        positive(f"windows.{name}", getattr(cfg.windows, name))
    for key, value in (("field.fd_step", cfg.field.fd_step),
                       ("quadrature.n_samples", cfg.quadrature.n_samples),
                       ("quadrature.chunk_chains", cfg.quadrature.chunk_chains),
                       ("quadrature.curve_length", cfg.quadrature.curve_length),
                       ("quadrature.n_nodes", cfg.quadrature.n_nodes),
                       ("oracle.t_step", cfg.oracle.t_step),
                       ("oracle.orbit_length", cfg.oracle.orbit_length),
                       ("oracle.n_seeds", cfg.oracle.n_seeds),
                       ("validate.tolerance", cfg.validate.tolerance),
                       ("validate.sigmas", cfg.validate.sigmas),
                       ("validate.n_samples", cfg.validate.n_samples),
                       ("validate.telescoping_terms", cfg.validate.telescoping_terms),
                       ("validate.decay_terms", cfg.validate.decay_terms),
                       ("validate.decay_p_value", cfg.validate.decay_p_value)):
        positive(key, value)
    if cfg.quadrature.n_chains is not None:
        positive("quadrature.n_chains", cfg.quadrature.n_chains)
        if cfg.quadrature.n_chains < 2:
            fail("quadrature.n_chains", "must be at least 2 for error bars")
    if cfg.quadrature.n_push < 0:
        fail("quadrature.n_push", "must be >= 0")
    if cfg.oracle.burn_in < 0:
        fail("oracle.burn_in", "must be >= 0")
    if cfg.quadrature.n_samples < 1000:
        fail("quadrature.n_samples", "must be at least 1000")
    from .expressions import parse

    for key, exprs in (("map.perturbation", cfg.map.perturbation),
                       ("field.X", cfg.field.X),
                       ("validate.coboundary", cfg.validate.coboundary),
                       ("observable.f", [cfg.observable.f]),
                       ("validate.g", [cfg.validate.g])):
        for e in exprs:
            try:
                parse(e)
            except ValueError as exc:
                fail(key, str(exc))
    return cfg
