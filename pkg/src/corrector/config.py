"""Experiment configuration read from ``[section] key = value`` files.

Matrices are written row by row with ``;`` between rows, e.g.
``lam = 0 0.001 0.001; 0.001 0 inf; 0.001 inf 0``.  Unknown sections or keys
are rejected with the offending name in the message.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .errors import ConfigError

MODES = ("policy-iteration", "discounted", "both")


@dataclass(frozen=True)
class MarketBlock:
    mu: tuple = (0.1,)
    r: float = 0.02
    sigma: tuple = ((1.0,),)
    beta: float = 0.1
    p: float = 0.5
    lam: tuple = ((0.0, 0.001), (0.001, 0.0))
    epsilon: float = 0.0
    wealth: float = 1.0


@dataclass(frozen=True)
class CorrectorBlock:
    sigma: str = "market"  # market | identity | matrix
    alpha: str = "merton"  # merton | sigma | identity | matrix
    sigma_matrix: tuple | None = None
    alpha_matrix: tuple | None = None
    diffusion_floor: float = 1e-10


@dataclass(frozen=True)
class SolverBlock:
    radius: str = "auto"
    n: int = 201
    margin: float = 3.0
    min_radius: float = 1e-3
    tol_switch: float = 1e-10
    tol_a_rel: float = 1e-9
    tol_bind: float | None = None
    max_iters: int = 200
    backend: str = "auto"
    cost_convention: str = "sigma"
    band: int = 2
    mode: str = "policy-iteration"
    eta: float = 1e-3


@dataclass(frozen=True)
class ValidationBlock:
    mc: bool = False
    horizon: float = 2e4
    dt: float = 1e-3
    seed: int = 0
    paths: int = 4000


@dataclass(frozen=True)
class OutputBlock:
    directory: str = "out"
    csv: bool = True
    image: bool = True
    scale: int = 2


@dataclass(frozen=True)
class ExperimentConfig:
    name: str = "custom"
    description: str = ""
    market: MarketBlock = field(default_factory=MarketBlock)
    corrector: CorrectorBlock = field(default_factory=CorrectorBlock)
    solver: SolverBlock = field(default_factory=SolverBlock)
    validation: ValidationBlock = field(default_factory=ValidationBlock)
    output: OutputBlock = field(default_factory=OutputBlock)

    @property
    def d(self) -> int:
        return len(self.market.mu)


SECTIONS = {
    "market": MarketBlock,
    "corrector": CorrectorBlock,
    "solver": SolverBlock,
    "validation": ValidationBlock,
    "output": OutputBlock,
}

MATRIX_KEYS = {
    ("market", "sigma"),
    ("market", "lam"),
    ("corrector", "sigma_matrix"),
    ("corrector", "alpha_matrix"),
}
VECTOR_KEYS = {("market", "mu")}
OPTIONAL_FLOAT = {("solver", "tol_bind")}


# value parsers


def parse_vector(text: str) -> tuple:
    try:
        vals = tuple(float(x) for x in text.replace(",", " ").split())
    except ValueError as exc:
        raise ConfigError(f"bad number in {text!r}") from exc
    if not vals:
        raise ConfigError("empty vector")
    return vals


def parse_matrix(text: str) -> tuple:
    rows = tuple(parse_vector(r) for r in text.split(";") if r.strip())
    if not rows or len({len(r) for r in rows}) != 1:
        raise ConfigError(f"ragged or empty matrix {text!r}")
    return rows


def format_matrix(m) -> str:
    return "; ".join(" ".join(_fmt(x) for x in row) for row in np.atleast_2d(m))


def _fmt(x: float) -> str:
    return "inf" if np.isinf(x) else repr(float(x))


def _parse_bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"expected a boolean, got {text!r}")


def _convert(section: str, key: str, text: str, default):
    where = f"[{section}] {key}"
    try:
        if (section, key) in MATRIX_KEYS:
            return parse_matrix(text)
        if (section, key) in VECTOR_KEYS:
            return parse_vector(text)
        if (section, key) in OPTIONAL_FLOAT:
            return None if text.strip().lower() in ("", "auto", "none") else float(text)
        if isinstance(default, bool):
            return _parse_bool(text)
        if isinstance(default, int):
            return int(text)
        if isinstance(default, float):
            return float(text)
        return text.strip()
    except ConfigError as exc:
        raise ConfigError(f"{where}: {exc}") from None
    except ValueError:
        raise ConfigError(f"{where}: cannot parse {text!r}") from None


def apply_text(cfg: ExperimentConfig, text: str, source: str = "<string>") -> ExperimentConfig:
    """Overlay the settings in ``text`` on ``cfg``."""
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",))
    parser.optionxform = str
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from None
    updates = {}
    for section in parser.sections():
        if section == "experiment":
            for key, val in parser.items(section):
                if key not in ("name", "description", "preset"):
                    raise ConfigError(f"{source}: unknown key [experiment] {key}")
                if key != "preset":
                    updates[key] = val.strip()
            continue
        if section not in SECTIONS:
            raise ConfigError(f"{source}: unknown section [{section}]")
        block = getattr(cfg, section)
        known = {f.name: f for f in fields(block)}
        changes = {}
        for key, val in parser.items(section):
            if key not in known:
                raise ConfigError(f"{source}: unknown key [{section}] {key}")
            changes[key] = _convert(section, key, val, getattr(block, key))
        updates[section] = replace(block, **changes)
    return validate(replace(cfg, **updates))


def preset_name(text: str) -> str | None:
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",))
    try:
        parser.read_string(text)
    except configparser.Error:
        return None
    return parser.get("experiment", "preset", fallback=None)


def validate(cfg: ExperimentConfig) -> ExperimentConfig:
    m, c, s = cfg.market, cfg.corrector, cfg.solver
    d = len(m.mu)
    if np.shape(m.sigma) != (d, d):
        raise ConfigError(f"[market] sigma must be {d}x{d}")
    if np.shape(m.lam) != (d + 1, d + 1):
        raise ConfigError(f"[market] lam must be {d + 1}x{d + 1}")
    if c.sigma not in ("market", "identity", "matrix"):
        raise ConfigError("[corrector] sigma must be market, identity or matrix")
    if c.alpha not in ("merton", "sigma", "identity", "matrix"):
        raise ConfigError("[corrector] alpha must be merton, sigma, identity or matrix")
    for key, kind in (("sigma_matrix", c.sigma), ("alpha_matrix", c.alpha)):
        mat = getattr(c, key)
        if kind == "matrix" and (mat is None or np.shape(mat) != (d, d)):
            raise ConfigError(f"[corrector] {key} must be a {d}x{d} matrix")
    if s.mode not in MODES:
        raise ConfigError(f"[solver] mode must be one of {', '.join(MODES)}")
    if s.backend not in ("auto", "direct", "krylov"):
        raise ConfigError("[solver] backend must be auto, direct or krylov")
    if s.cost_convention not in ("sigma", "sigmaT"):
        raise ConfigError("[solver] cost_convention must be sigma or sigmaT")
    if s.radius != "auto":
        try:
            if float(s.radius) <= 0:
                raise ValueError
        except ValueError:
            raise ConfigError("[solver] radius must be 'auto' or a positive number") from None
    if s.n < 5 or s.n % 2 == 0:
        raise ConfigError("[solver] n must be odd and at least 5")
    if s.eta <= 0:
        raise ConfigError("[solver] eta must be positive")
    v = cfg.validation
    if v.horizon <= 0 or v.dt <= 0 or v.paths < 2:
        raise ConfigError("[validation] horizon, dt must be positive and paths >= 2")
    if cfg.output.scale < 1:
        raise ConfigError("[output] scale must be a positive integer")
    return cfg


def load(source: str) -> ExperimentConfig:
    """Load a preset name or a config file (which may start from a preset)."""
    from . import presets

    if source in presets.PRESETS:
        return presets.get(source)
    path = Path(source)
    if not path.is_file():
        raise ConfigError(f"{source!r} is neither a preset nor a readable file")
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {source}: {exc}") from None
    base_name = preset_name(text)
    if base_name is not None:
        if base_name not in presets.PRESETS:
            raise ConfigError(f"{source}: unknown preset {base_name!r}")
        base = presets.get(base_name)
    else:
        base = ExperimentConfig(name=path.stem)
    return apply_text(base, text, source=str(path))


def to_text(cfg: ExperimentConfig) -> str:
    """Round-trippable text form of a configuration."""
    lines = ["[experiment]", f"name = {cfg.name}"]
    if cfg.description:
        lines.append(f"description = {cfg.description}")
    for section in SECTIONS:
        block = getattr(cfg, section)
        lines += ["", f"[{section}]"]
        for f in fields(block):
            val = getattr(block, f.name)
            key = (section, f.name)
            if val is None:
                if key in OPTIONAL_FLOAT:
                    lines.append(f"{f.name} = auto")
                continue
            if key in MATRIX_KEYS:
                text = format_matrix(val)
            elif key in VECTOR_KEYS:
                text = " ".join(_fmt(x) for x in val)
            elif isinstance(val, bool):
                text = "true" if val else "false"
            else:
                text = str(val)
            lines.append(f"{f.name} = {text}")
    return "\n".join(lines) + "\n"
