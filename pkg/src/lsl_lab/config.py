"""
Experiment configuration: an INI-style file with ``[grid]``, ``[potential]``,
``[run]`` and ``[output]`` sections.

Example::

    [grid]
    kmax = 4.0
    half_count = 32
    scheme = gauss-legendre

    [potential]
    kind = separable      # separable | dense | random
    lambda = 0.5
    beta = 1.0            # form-factor range (separable)
    profile = yamaguchi   # yamaguchi | gaussian (separable)
    sigma = 1.0           # kernel width (dense)

    [run]
    eps_list = 1e-1, 1e-2, 1e-3
    pairs = auto          # or "16:47, 16:17"
    seed = 0
    route = auto          # auto | ls-solve | low-solve | separable-closed
    incident = 16         # channel dumped by `solve`
    gram = yes            # include the Gram check in `verify`

    [output]
    path = report.csv
    format = csv          # csv | json
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

from .hilbert import (
    SCHEMES,
    ModelGrid,
    build_grid,
    gaussian_kernel,
    gaussian_profile,
    random_dense,
    sample_dense,
    sample_separable,
    yamaguchi,
)
from .lsl import ROUTES

KINDS = ("separable", "dense", "random")
PROFILES = {"yamaguchi": yamaguchi, "gaussian": gaussian_profile}
FORMATS = ("csv", "json")


class ConfigError(ValueError):
    """Unreadable or invalid configuration; the message names the field."""


@dataclass(frozen=True)
class GridSpec:
    kmax: float = 4.0
    half_count: int = 32
    scheme: str = "gauss-legendre"


@dataclass(frozen=True)
class PotentialSpec:
    kind: str = "separable"
    coupling: float = 0.5
    beta: float = 1.0
    sigma: float = 1.0
    profile: str = "yamaguchi"


@dataclass(frozen=True)
class ExperimentConfig:
    grid: GridSpec = field(default_factory=GridSpec)
    potential: PotentialSpec = field(default_factory=PotentialSpec)
    eps_list: tuple = (1e-2,)
    pairs: object = "auto"
    seed: int = 0
    route: str = "auto"
    incident: Optional[int] = None
    gram: bool = True
    output_path: Optional[str] = None
    output_format: str = "csv"

    def build_grid(self) -> ModelGrid:
        g = self.grid
        return build_grid(g.kmax, g.half_count, g.scheme)

    def build_potential(self, grid: ModelGrid):
        p = self.potential
        if p.kind == "separable":
            return sample_separable(grid, p.coupling, PROFILES[p.profile](p.beta))
        if p.kind == "dense":
            return sample_dense(grid, gaussian_kernel(p.coupling, p.sigma))
        return random_dense(grid, p.coupling, self.seed)

    def resolve_pairs(self, grid: ModelGrid):
        from .verify import auto_pairs

        pairs = auto_pairs(grid) if self.pairs == "auto" else list(self.pairs)
        for n, k in pairs:
            for i in (n, k):
                if not 0 <= i < grid.size:
                    raise ConfigError(f"[run] pairs: index {i} outside [0, {grid.size})")
        return pairs


def _get(parser, section, key, conv, default, what):
    if not parser.has_option(section, key):
        return default
    raw = parser.get(section, key)
    try:
        return conv(raw)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"[{section}] {key}: cannot read {raw!r} as {what} ({exc})") from None


def _bool(raw: str) -> bool:
    v = raw.strip().lower()
    if v in ("1", "yes", "true", "on"):
        return True
    if v in ("0", "no", "false", "off"):
        return False
    raise ValueError("expected yes/no")


def parse_eps_list(raw: str) -> tuple:
    items = [s for s in (p.strip() for p in raw.split(",")) if s]
    return tuple(float(s) for s in items)


def parse_pairs(raw: str):
    raw = raw.strip()
    if raw.lower() == "auto":
        return "auto"
    pairs = []
    for item in raw.split(","):
        item = item.strip()
        if not item:
            continue
        n, sep, k = item.partition(":")
        if not sep:
            raise ValueError(f"pair {item!r} is not of the form n:k")
        pairs.append((int(n), int(k)))
    if not pairs:
        raise ValueError("no pairs given")
    return tuple(pairs)


def load_config(path) -> ExperimentConfig:
    """Read and validate a configuration file; raises :class:`ConfigError`."""
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    try:
        parser.read_string(text, source=str(path))
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from None
    known = {"grid", "potential", "run", "output"}
    for section in parser.sections():
        if section not in known:
            raise ConfigError(f"unknown section [{section}]")

    d = ExperimentConfig()
    grid = GridSpec(
        kmax=_get(parser, "grid", "kmax", float, d.grid.kmax, "a number"),
        half_count=_get(parser, "grid", "half_count", int, d.grid.half_count, "an integer"),
        scheme=_get(parser, "grid", "scheme", str.strip, d.grid.scheme, "a scheme name"),
    )
    pot = PotentialSpec(
        kind=_get(parser, "potential", "kind", str.strip, d.potential.kind, "a kind"),
        coupling=_get(parser, "potential", "lambda", float, d.potential.coupling, "a number"),
        beta=_get(parser, "potential", "beta", float, d.potential.beta, "a number"),
        sigma=_get(parser, "potential", "sigma", float, d.potential.sigma, "a number"),
        profile=_get(parser, "potential", "profile", str.strip, d.potential.profile, "a profile name"),
    )
    cfg = ExperimentConfig(
        grid=grid,
        potential=pot,
        eps_list=_get(parser, "run", "eps_list", parse_eps_list, d.eps_list, "a comma-separated list of numbers"),
        pairs=_get(parser, "run", "pairs", parse_pairs, d.pairs, "'auto' or n:k pairs"),
        seed=_get(parser, "run", "seed", int, d.seed, "an integer"),
        route=_get(parser, "run", "route", str.strip, d.route, "a route name"),
        incident=_get(parser, "run", "incident", int, d.incident, "an integer"),
        gram=_get(parser, "run", "gram", _bool, d.gram, "yes/no"),
        output_path=_get(parser, "output", "path", str.strip, d.output_path, "a path"),
        output_format=_get(parser, "output", "format", str.strip, d.output_format, "csv or json"),
    )
    validate(cfg)
    return cfg


def override(cfg: ExperimentConfig, eps=None, coupling=None, out=None, seed=None, fmt=None, route=None) -> ExperimentConfig:
    """Apply command-line overrides and re-validate."""
    if eps is not None:
        try:
            cfg = replace(cfg, eps_list=parse_eps_list(eps))
        except ValueError as exc:
            raise ConfigError(f"--eps: {exc}") from None
    if coupling is not None:
        cfg = replace(cfg, potential=replace(cfg.potential, coupling=coupling))
    if out is not None:
        cfg = replace(cfg, output_path=out)
        if fmt is None and Path(out).suffix.lower() in (".csv", ".json"):
            fmt = Path(out).suffix.lower()[1:]
    if seed is not None:
        cfg = replace(cfg, seed=seed)
    if fmt is not None:
        cfg = replace(cfg, output_format=fmt)
    if route is not None:
        cfg = replace(cfg, route=route)
    validate(cfg)
    return cfg


def validate(cfg: ExperimentConfig) -> None:
    import math

    g, p = cfg.grid, cfg.potential
    if not (math.isfinite(g.kmax) and g.kmax > 0):
        raise ConfigError(f"[grid] kmax: must be positive and finite, got {g.kmax!r}")
    if g.half_count < 2:
        raise ConfigError(f"[grid] half_count: must be >= 2, got {g.half_count}")
    if g.scheme not in SCHEMES:
        raise ConfigError(f"[grid] scheme: {g.scheme!r} is not one of {', '.join(SCHEMES)}")
    if p.kind not in KINDS:
        raise ConfigError(f"[potential] kind: {p.kind!r} is not one of {', '.join(KINDS)}")
    if p.profile not in PROFILES:
        raise ConfigError(f"[potential] profile: {p.profile!r} is not one of {', '.join(PROFILES)}")
    for key, value in (("lambda", p.coupling), ("beta", p.beta), ("sigma", p.sigma)):
        if not math.isfinite(value):
            raise ConfigError(f"[potential] {key}: must be finite, got {value!r}")
    if p.beta <= 0 or p.sigma <= 0:
        raise ConfigError("[potential] beta and sigma must be positive")
    if not cfg.eps_list:
        raise ConfigError("[run] eps_list: must not be empty")
    for e in cfg.eps_list:
        if not (math.isfinite(e) and e > 0):
            raise ConfigError(f"[run] eps_list: entry {e!r} must be positive and finite")
    if any(b >= a for a, b in zip(cfg.eps_list, cfg.eps_list[1:])):
        raise ConfigError("[run] eps_list: entries must be strictly decreasing")
    if cfg.route != "auto" and cfg.route not in ROUTES:
        raise ConfigError(f"[run] route: {cfg.route!r} is not auto or one of {', '.join(ROUTES)}")
    if cfg.route == "separable-closed" and p.kind != "separable":
        raise ConfigError("[run] route: separable-closed needs [potential] kind = separable")
    if cfg.output_format not in FORMATS:
        raise ConfigError(f"[output] format: {cfg.output_format!r} is not one of {', '.join(FORMATS)}")
    n = 2 * g.half_count
    if cfg.pairs != "auto":
        for a, b in cfg.pairs:
            for i in (a, b):
                if not 0 <= i < n:
                    raise ConfigError(f"[run] pairs: index {i} outside [0, {n})")
    if cfg.incident is not None and not 0 <= cfg.incident < n:
        raise ConfigError(f"[run] incident: index {cfg.incident} outside [0, {n})")
