"""Experiment configuration: flat ``key = value`` sections (INI).

A config round-trips through :func:`dumps`/:func:`loads` exactly; its hash
(SHA-256 of the canonical text) is recorded in every report.
"""

from __future__ import annotations

import configparser
import hashlib
from dataclasses import dataclass, field, fields, replace

from stochconv.model import GeneratorSpec

KINDS = ("convolve", "bdg", "tail", "interp", "doob", "dilation-check", "renorm-check", "cr-probe")


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending field."""


def _floats(text: str) -> tuple:
    return tuple(float(v) for v in text.replace(",", " ").split()) if text.strip() else ()


def _ints(text: str) -> tuple:
    return tuple(int(v) for v in text.replace(",", " ").split()) if text.strip() else ()


def _fmt(values) -> str:
    return ", ".join(repr(v) for v in values)


@dataclass(frozen=True)
class ExperimentConfig:
    id: str
    kind: str
    generator: GeneratorSpec = field(default_factory=GeneratorSpec)
    q: tuple = (2.0,)
    d: int = 1
    family: str = "deterministic"
    T: float = 1.0
    N: int = 64
    refinements: int = 0
    steps: tuple = ()
    p: tuple = (2.0,)
    paths: int = 100_000
    seed: int = 20261017
    thresholds: tuple = ()  # sorted (name, value) pairs

    def __post_init__(self):
        validate(self)

    def threshold(self, name: str, default: float) -> float:
        return dict(self.thresholds).get(name, default)

    def with_seed(self, seed: int) -> "ExperimentConfig":
        return replace(self, seed=int(seed))


def validate(cfg: ExperimentConfig) -> None:
    if cfg.kind not in KINDS:
        raise ConfigError(f"experiment.kind: unknown kind {cfg.kind!r} (choose from {', '.join(KINDS)})")
    if not cfg.q:
        raise ConfigError("space.q: at least one exponent required")
    for q in cfg.q:
        if not q >= 1:
            raise ConfigError(f"space.q: q must be ≥ 1 (got {q})")
    if cfg.d < 1:
        raise ConfigError(f"space.d: d must be a positive integer (got {cfg.d})")
    if not cfg.T > 0:
        raise ConfigError(f"grid.T: must be positive (got {cfg.T})")
    if cfg.N < 1:
        raise ConfigError(f"grid.N: must be >= 1 (got {cfg.N})")
    if cfg.refinements < 0:
        raise ConfigError("grid.refinements: must be nonnegative")
    if any(s < 1 for s in cfg.steps):
        raise ConfigError("grid.steps: step counts must be >= 1")
    if any(not p > 0 for p in cfg.p):
        raise ConfigError("process.p: exponents must be positive")
    if cfg.paths < 1:
        raise ConfigError("sampling.paths: must be >= 1")
    if not 0 <= cfg.seed < 2**64:
        raise ConfigError("sampling.seed: must fit in an unsigned 64-bit integer")
    if cfg.generator.kind not in ("spectral", "matrix"):
        raise ConfigError(f"generator.kind: unknown generator kind {cfg.generator.kind!r}")


def dumps(cfg: ExperimentConfig) -> str:
    g = cfg.generator
    lines = [
        "[experiment]",
        f"id = {cfg.id}",
        f"kind = {cfg.kind}",
        "",
        "[generator]",
        f"kind = {g.kind}",
        f"preset = {g.preset or ''}",
        f"d = {g.d}",
        f"eigenvalues = {', '.join(str(v) for v in g.eigenvalues)}",
        f"entries = {', '.join(str(v) for v in g.entries)}",
        "",
        "[space]",
        f"q = {_fmt(cfg.q)}",
        f"d = {cfg.d}",
        "",
        "[process]",
        f"family = {cfg.family}",
        f"p = {_fmt(cfg.p)}",
        "",
        "[grid]",
        f"T = {cfg.T!r}",
        f"N = {cfg.N}",
        f"refinements = {cfg.refinements}",
        f"steps = {', '.join(str(s) for s in cfg.steps)}",
        "",
        "[sampling]",
        f"paths = {cfg.paths}",
        f"seed = {cfg.seed}",
        "",
        "[thresholds]",
    ]
    lines += [f"{k} = {v!r}" for k, v in cfg.thresholds]
    return "\n".join(lines) + "\n"


def _get(cp: configparser.ConfigParser, section: str, key: str, conv, default):
    if not cp.has_option(section, key):
        return default
    raw = cp.get(section, key)
    try:
        return conv(raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{section}.{key}: cannot parse {raw!r} ({exc})") from None


def loads(text: str) -> ExperimentConfig:
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str  # keys are case sensitive (T, N)
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"config syntax: {exc}") from None
    if not cp.has_section("experiment"):
        raise ConfigError("experiment: section missing")
    base = ExperimentConfig.__dataclass_fields__
    gen = GeneratorSpec(
        kind=_get(cp, "generator", "kind", str, "spectral"),
        preset=_get(cp, "generator", "preset", lambda s: s or None, "heat"),
        d=_get(cp, "generator", "d", int, 8),
        eigenvalues=_get(cp, "generator", "eigenvalues",
                         lambda s: tuple(v.strip() for v in s.split(",") if v.strip()), ()),
        entries=_get(cp, "generator", "entries",
                     lambda s: tuple(v.strip() for v in s.split(",") if v.strip()), ()),
    )
    try:
        for v in gen.eigenvalues + gen.entries:
            complex(v)
    except ValueError:
        raise ConfigError("generator.eigenvalues/entries: entries must be numbers") from None
    thresholds = ()
    if cp.has_section("thresholds"):
        try:
            thresholds = tuple(sorted((k, float(v)) for k, v in cp.items("thresholds")))
        except ValueError as exc:
            raise ConfigError(f"thresholds: {exc}") from None
    kw = dict(
        id=_get(cp, "experiment", "id", str, "experiment"),
        kind=_get(cp, "experiment", "kind", str, ""),
        generator=gen,
        q=_get(cp, "space", "q", _floats, base["q"].default),
        d=_get(cp, "space", "d", int, base["d"].default),
        family=_get(cp, "process", "family", str, base["family"].default),
        p=_get(cp, "process", "p", _floats, base["p"].default),
        T=_get(cp, "grid", "T", float, base["T"].default),
        N=_get(cp, "grid", "N", int, base["N"].default),
        refinements=_get(cp, "grid", "refinements", int, base["refinements"].default),
        steps=_get(cp, "grid", "steps", _ints, ()),
        paths=_get(cp, "sampling", "paths", int, base["paths"].default),
        seed=_get(cp, "sampling", "seed", int, base["seed"].default),
        thresholds=thresholds,
    )
    return ExperimentConfig(**kw)


def load(path) -> ExperimentConfig:
    with open(path, encoding="utf-8") as fh:
        return loads(fh.read())


def config_hash(cfg: ExperimentConfig) -> str:
    return hashlib.sha256(dumps(cfg).encode("utf-8")).hexdigest()


def field_names() -> list[str]:
    return [f.name for f in fields(ExperimentConfig)]
