"""Sectioned ``key = value`` run descriptions.

Example::

    [scenario]
    name = linear_wave

    [grid]
    kind = periodic
    length = 2pi
    n_points = 64
    dt_over_h = 0.25
    t_obs = 3.0

    [model]
    term1 = dirichlet lam=1

    [data]
    w0 = cos_mode k=1 a=1
    w1 = zero

    [schedule]
    epsilons = 0.2, 0.1, 0.05, 0.025

Profiles and terms are written ``name key=value ...``.  Lines starting with
``#`` or ``;`` are comments.  Unknown keys, duplicates and out-of-range values
are reported with their line number.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from .continuation import BaseProblem, EpsilonSchedule
from .energy import DissipationModel, EnergyTerm, ModelError, conjecture_model, make_model
from .functional import MOLLIFIERS, SCALINGS, ForcingSpec
from .grid import InvalidDomainError, SpatialGrid, build_spatial_grid
from .minimize import MinimizerOptions

__all__ = ["ConfigError", "Profile", "RunConfig", "parse_config", "load_config", "format_config"]


class ConfigError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(prefix + message)


@dataclass(frozen=True)
class Profile:
    name: str
    params: tuple[tuple[str, float | str], ...] = ()

    def get(self, key, default=None):
        return dict(self.params).get(key, default)

    def text(self) -> str:
        parts = [self.name] + [f"{k}={_fmt(v)}" for k, v in self.params]
        return " ".join(parts)


DATA_PROFILES = {
    "zero": (),
    "constant": ("c",),
    "cos_mode": ("k", "a"),
    "gaussian_bump": ("x0", "sigma", "a"),
}
FORCING_PROFILES = {"none": (), "sin_t_cos_x": ("a",), "table": ("path",)}
TERM_KEYS = {"lam", "p", "s", "c_ns", "symbol"}


@dataclass(frozen=True)
class RunConfig:
    name: str = "unnamed"
    grid_kind: str = "periodic"
    length: float = 2 * math.pi
    n_points: int = 64
    dt: float | None = None
    dt_over_h: float | None = None
    t_obs: float = 1.0
    kappa: float = 40.0
    terms: tuple[EnergyTerm, ...] = ()
    gamma: float = 0.0
    w0: Profile = Profile("zero")
    w1: Profile = Profile("zero")
    forcing: Profile = Profile("none")
    mollifier: str = "identity"
    epsilons: tuple[float, ...] = ()
    grad_tol: float = 1e-8
    max_outer: int = 60
    max_inner: int = 20
    armijo_c: float = 1e-4
    backtrack_factor: float = 0.5
    scaling: str = "abstract_eq6"
    energy_tol: float = 2e-2
    dissipation_slack: float = 1e-3
    out_dir: str = ""
    figures: bool = True
    source_dir: str = field(default=".", compare=False)

    # -- derived objects ----------------------------------------------------
    def grid(self) -> SpatialGrid:
        return build_spatial_grid(self.grid_kind, self.length, self.n_points)

    def time_step(self) -> float:
        return self.dt if self.dt is not None else self.dt_over_h * self.grid().h

    def model(self):
        return make_model(self.terms)

    def schedule(self) -> EpsilonSchedule:
        return EpsilonSchedule(self.epsilons)

    def minimizer_options(self) -> MinimizerOptions:
        return MinimizerOptions(grad_tol=self.grad_tol, max_outer=self.max_outer,
                                max_inner=self.max_inner, armijo_c=self.armijo_c,
                                backtrack_factor=self.backtrack_factor)

    def data(self) -> tuple[np.ndarray, np.ndarray]:
        g = self.grid()
        return _profile_values(self.w0, g), _profile_values(self.w1, g)

    def forcing_spec(self) -> ForcingSpec:
        return _forcing_spec(self.forcing, self.grid(), self.mollifier, Path(self.source_dir))

    def base_problem(self) -> BaseProblem:
        w0, w1 = self.data()
        return BaseProblem(
            space=self.grid(), model=self.model(), w0=w0, w1=w1, dt=self.time_step(),
            t_obs=self.t_obs, kappa=self.kappa, dissipation=DissipationModel(self.gamma),
            forcing=self.forcing_spec(), scaling=self.scaling,
        )

    @property
    def constant_data(self) -> bool:
        return all(p.name in ("zero", "constant") for p in (self.w0, self.w1))


def _profile_values(p: Profile, grid: SpatialGrid) -> np.ndarray:
    x = grid.x
    if p.name == "zero":
        return np.zeros_like(x)
    if p.name == "constant":
        return np.full_like(x, p.get("c"))
    if p.name == "cos_mode":
        return p.get("a", 1.0) * np.cos(2 * np.pi * p.get("k", 1.0) * x / grid.length)
    x0, sigma = p.get("x0"), p.get("sigma")
    return p.get("a", 1.0) * np.exp(-0.5 * ((x - x0) / sigma) ** 2)


def _load_table(path: Path, grid: SpatialGrid):
    raw = np.genfromtxt(path, delimiter=",", comments="#", names=None, dtype=float)
    raw = np.atleast_2d(raw)
    if np.isnan(raw[0]).any():
        raw = raw[1:]
    if raw.shape[1] != grid.n_points + 1:
        raise ConfigError(f"forcing table {path} has {raw.shape[1] - 1} spatial columns, "
                          f"grid has {grid.n_points}")
    t_tab, values = raw[:, 0], raw[:, 1:]

    def func(t, x):
        return np.stack([np.interp(t, t_tab, values[:, i]) for i in range(values.shape[1])], axis=1)

    return func


def _forcing_spec(p: Profile, grid: SpatialGrid, mollifier: str, source: Path) -> ForcingSpec:
    if p.name == "none":
        return ForcingSpec(None, mollifier, "none")
    if p.name == "sin_t_cos_x":
        a = p.get("a", 1.0)
        length = grid.length

        def func(t, x):
            return a * np.sin(t)[:, None] * np.cos(2 * np.pi * x / length)[None, :]

        return ForcingSpec(func, mollifier, p.text())
    path = Path(str(p.get("path")))
    if not path.is_absolute():
        path = source / path
    return ForcingSpec(_load_table(path, grid), mollifier, p.text())


# -- parsing -----------------------------------------------------------------

_SECTIONS = {
    "scenario": {"name"},
    "grid": {"kind", "length", "n_points", "dt", "dt_over_h", "t_obs", "kappa"},
    "model": None,  # term<k> / preset
    "dissipation": {"gamma"},
    "data": {"w0", "w1"},
    "forcing": {"profile", "mollifier"},
    "schedule": {"epsilons", "geometric"},
    "minimizer": {"grad_tol", "max_outer", "max_inner", "armijo_c", "backtrack_factor", "scaling"},
    "diagnostics": {"energy_tol", "dissipation_slack"},
    "output": {"dir", "figures"},
}
_REQUIRED = ("grid", "model", "data", "schedule")
_NUM = re.compile(r"^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)?\s*\*?\s*pi\s*$")


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _float(text: str, line: int, what: str) -> float:
    t = text.strip()
    m = _NUM.match(t)
    try:
        if m:
            val = (float(m.group(1)) if m.group(1) else 1.0) * math.pi
        else:
            val = float(t)
    except ValueError:
        raise ConfigError(f"{what}: expected a number, got {text!r}", line) from None
    if not math.isfinite(val):
        raise ConfigError(f"{what}: value must be finite", line)
    return val


def _int(text: str, line: int, what: str) -> int:
    try:
        return int(text.strip())
    except ValueError:
        raise ConfigError(f"{what}: expected an integer, got {text!r}", line) from None


def _bool(text: str, line: int, what: str) -> bool:
    t = text.strip().lower()
    if t in ("true", "yes", "1", "on"):
        return True
    if t in ("false", "no", "0", "off"):
        return False
    raise ConfigError(f"{what}: expected true/false, got {text!r}", line)


def _parse_profile(text: str, line: int, allowed: dict, what: str, string_keys=()) -> Profile:
    parts = text.split()
    if not parts:
        raise ConfigError(f"{what}: empty profile", line)
    name, rest = parts[0], parts[1:]
    if name not in allowed:
        raise ConfigError(f"{what}: unknown profile {name!r} (expected one of {sorted(allowed)})", line)
    params = []
    seen = set()
    for item in rest:
        if "=" not in item:
            raise ConfigError(f"{what}: expected key=value, got {item!r}", line)
        k, v = item.split("=", 1)
        if k not in allowed[name]:
            raise ConfigError(f"{what}: unknown parameter {k!r} for {name}", line)
        if k in seen:
            raise ConfigError(f"{what}: duplicate parameter {k!r}", line)
        seen.add(k)
        params.append((k, v if k in string_keys else _float(v, line, f"{what}.{k}")))
    missing = [k for k in allowed[name] if k not in seen and not (k in ("a", "k") and name == "cos_mode")
               and not (k == "a" and name in ("gaussian_bump", "sin_t_cos_x"))]
    if missing:
        raise ConfigError(f"{what}: {name} needs {', '.join(missing)}", line)
    return Profile(name, tuple(params))


def _parse_term(text: str, line: int) -> EnergyTerm:
    parts = text.split()
    if not parts:
        raise ConfigError("empty term", line)
    kwargs = {"kind": parts[0]}
    for item in parts[1:]:
        if "=" not in item:
            raise ConfigError(f"term: expected key=value, got {item!r}", line)
        k, v = item.split("=", 1)
        if k not in TERM_KEYS:
            raise ConfigError(f"term: unknown parameter {k!r}", line)
        if k in kwargs:
            raise ConfigError(f"term: duplicate parameter {k!r}", line)
        kwargs[k] = v if k == "symbol" else _float(v, line, f"term.{k}")
    try:
        return EnergyTerm(**kwargs)
    except ModelError as exc:
        raise ConfigError(str(exc), line) from None


def _tokenize(text: str):
    """Yield (section, key, value, line); raises on structural errors."""
    section = None
    seen_sections: dict[str, int] = {}
    seen_keys: dict[tuple[str, str], int] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line[0] in "#;":
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ConfigError(f"malformed section header {line!r}", lineno)
            section = line[1:-1].strip()
            if section not in _SECTIONS:
                raise ConfigError(f"unknown section [{section}]", lineno)
            if section in seen_sections:
                raise ConfigError(f"duplicate section [{section}] (first at line {seen_sections[section]})", lineno)
            seen_sections[section] = lineno
            yield section, None, None, lineno
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {line!r}", lineno)
        if section is None:
            raise ConfigError("key outside of any section", lineno)
        key, value = (s.strip() for s in line.split("=", 1))
        allowed = _SECTIONS[section]
        if allowed is None:
            if not (re.fullmatch(r"term\d+", key) or key == "preset"):
                raise ConfigError(f"unknown key {key!r} in [model] (use term1, term2, ... or preset)", lineno)
        elif key not in allowed:
            raise ConfigError(f"unknown key {key!r} in [{section}]", lineno)
        if (section, key) in seen_keys:
            raise ConfigError(
                f"duplicate key {key!r} in [{section}] (first at line {seen_keys[section, key]})", lineno)
        seen_keys[section, key] = lineno
        yield section, key, value, lineno


def parse_config(text: str, source_dir: str | Path = ".") -> RunConfig:
    vals: dict = {"source_dir": str(source_dir)}
    lines: dict = {}
    sections: dict[str, int] = {}
    terms: list[tuple[int, int, EnergyTerm]] = []
    for section, key, value, line in _tokenize(text):
        if key is None:
            sections[section] = line
            continue
        lines[key] = line
        what = f"[{section}] {key}"
        if section == "scenario":
            if not value:
                raise ConfigError("scenario name must not be empty", line)
            vals["name"] = value
        elif section == "grid":
            if key == "kind":
                if value not in ("periodic", "dirichlet"):
                    raise ConfigError(f"{what}: expected periodic or dirichlet", line)
                vals["grid_kind"] = value
            elif key == "n_points":
                vals["n_points"] = _int(value, line, what)
            else:
                vals[key] = _float(value, line, what)
        elif section == "model":
            if key == "preset":
                parts = value.split()
                if not parts or parts[0] != "conjecture" or len(parts) != 2 or not parts[1].startswith("p="):
                    raise ConfigError(f"{what}: expected 'conjecture p=<value>'", line)
                p = _float(parts[1][2:], line, what)
                if not p > 1:
                    raise ConfigError(f"{what}: exponent must satisfy p > 1", line)
                for i, t in enumerate(conjecture_model(p).terms):
                    terms.append((-1, i, t))
            else:
                terms.append((int(key[4:]), 0, _parse_term(value, line)))
        elif section == "dissipation":
            vals["gamma"] = _float(value, line, what)
            if vals["gamma"] < 0:
                raise ConfigError(f"{what}: gamma must be >= 0", line)
        elif section == "data":
            vals[key] = _parse_profile(value, line, DATA_PROFILES, what)
        elif section == "forcing":
            if key == "profile":
                vals["forcing"] = _parse_profile(value, line, FORCING_PROFILES, what, string_keys=("path",))
            else:
                if value not in MOLLIFIERS:
                    raise ConfigError(f"{what}: expected one of {MOLLIFIERS}", line)
                vals["mollifier"] = value
        elif section == "schedule":
            if key == "epsilons":
                eps = tuple(_float(v, line, what) for v in value.split(","))
            else:
                prof = _parse_profile("geometric " + value, line,
                                      {"geometric": ("eps0", "count", "ratio")}, what)
                count = prof.get("count")
                if count != int(count) or count < 1:
                    raise ConfigError(f"{what}: count must be a positive integer", line)
                eps = EpsilonSchedule.geometric(prof.get("eps0"), int(count), prof.get("ratio")).values
            if "epsilons" in vals:
                raise ConfigError("give either epsilons or geometric, not both", line)
            try:
                EpsilonSchedule(eps)
            except ValueError as exc:
                raise ConfigError(f"{what}: {exc}", line) from None
            vals["epsilons"] = eps
        elif section == "minimizer":
            if key in ("max_outer", "max_inner"):
                vals[key] = _int(value, line, what)
                if vals[key] < 0:
                    raise ConfigError(f"{what}: must be >= 0", line)
            elif key == "scaling":
                if value not in SCALINGS:
                    raise ConfigError(f"{what}: expected one of {SCALINGS}", line)
                vals[key] = value
            else:
                vals[key] = _float(value, line, what)
        elif section == "diagnostics":
            vals[key] = _float(value, line, what)
            if vals[key] < 0:
                raise ConfigError(f"{what}: must be >= 0", line)
        elif section == "output":
            if key == "dir":
                vals["out_dir"] = value
            else:
                vals["figures"] = _bool(value, line, what)

    for name in _REQUIRED:
        if name not in sections:
            raise ConfigError(f"missing required section [{name}]")
    if not terms:
        raise ConfigError("[model] needs at least one term", sections["model"])
    vals["terms"] = tuple(t for _, _, t in sorted(terms, key=lambda x: (x[0], x[1])))
    for key in ("w0", "w1"):
        if key not in vals:
            raise ConfigError(f"[data] needs {key}", sections["data"])
    if "epsilons" not in vals:
        raise ConfigError("[schedule] needs epsilons or geometric", sections["schedule"])
    _validate(vals, lines, sections)
    return RunConfig(**vals)


def _validate(vals: dict, lines: dict, sections: dict) -> None:
    g_line = sections["grid"]
    for key in ("length", "n_points", "t_obs"):
        if key not in vals:
            raise ConfigError(f"[grid] needs {key}", g_line)
    if ("dt" in vals) == ("dt_over_h" in vals):
        raise ConfigError("[grid] needs exactly one of dt, dt_over_h", g_line)
    try:
        grid = build_spatial_grid(vals.get("grid_kind", "periodic"), vals["length"], vals["n_points"])
    except InvalidDomainError as exc:
        key = "length" if "length" in str(exc) else "n_points"
        raise ConfigError(str(exc), lines.get(key, g_line)) from None
    dt = vals["dt"] if "dt" in vals else vals["dt_over_h"] * grid.h
    if not dt > 0:
        raise ConfigError("time step must be positive", lines.get("dt", lines.get("dt_over_h")))
    if not vals["t_obs"] > dt:
        raise ConfigError("t_obs must exceed the time step", lines["t_obs"])
    if vals.get("kappa", 40.0) < 10:
        raise ConfigError("kappa must be >= 10", lines["kappa"])
    if not grid.periodic and any(t.kind == "fractional" for t in vals["terms"]):
        raise ConfigError("fractional terms need a periodic grid", sections["model"])
    try:
        MinimizerOptions(grad_tol=vals.get("grad_tol", 1e-8), max_outer=vals.get("max_outer", 60),
                         max_inner=vals.get("max_inner", 20), armijo_c=vals.get("armijo_c", 1e-4),
                         backtrack_factor=vals.get("backtrack_factor", 0.5))
    except ValueError as exc:
        raise ConfigError(str(exc), sections.get("minimizer")) from None
    for key in ("w0", "w1"):
        p = vals[key]
        if p.name == "gaussian_bump" and not p.get("sigma") > 0:
            raise ConfigError(f"{key}: sigma must be > 0", lines[key])


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None
    return parse_config(text, path.parent)


def format_config(cfg: RunConfig) -> str:
    """Canonical text for a config; ``parse_config(format_config(c)) == c``."""
    out = ["[scenario]", f"name = {cfg.name}", "", "[grid]", f"kind = {cfg.grid_kind}",
           f"length = {cfg.length!r}", f"n_points = {cfg.n_points}"]
    if cfg.dt is not None:
        out.append(f"dt = {cfg.dt!r}")
    else:
        out.append(f"dt_over_h = {cfg.dt_over_h!r}")
    out += [f"t_obs = {cfg.t_obs!r}", f"kappa = {cfg.kappa!r}", "", "[model]"]
    for i, t in enumerate(cfg.terms, start=1):
        parts = [t.kind, f"lam={t.lam!r}"]
        if t.p is not None:
            parts.append(f"p={t.p!r}")
        if t.s is not None:
            parts += [f"s={t.s!r}", f"c_ns={t.c_ns!r}", f"symbol={t.symbol}"]
        out.append(f"term{i} = " + " ".join(parts))
    out += ["", "[dissipation]", f"gamma = {cfg.gamma!r}", "", "[data]",
            f"w0 = {cfg.w0.text()}", f"w1 = {cfg.w1.text()}", "", "[forcing]",
            f"profile = {cfg.forcing.text()}", f"mollifier = {cfg.mollifier}", "", "[schedule]",
            "epsilons = " + ", ".join(repr(e) for e in cfg.epsilons), "", "[minimizer]"]
    for key in ("grad_tol", "max_outer", "max_inner", "armijo_c", "backtrack_factor", "scaling"):
        out.append(f"{key} = {_fmt(getattr(cfg, key))}")
    out += ["", "[diagnostics]", f"energy_tol = {cfg.energy_tol!r}",
            f"dissipation_slack = {cfg.dissipation_slack!r}", "", "[output]"]
    if cfg.out_dir:
        out.append(f"dir = {cfg.out_dir}")
    out.append(f"figures = {'true' if cfg.figures else 'false'}")
    return "\n".join(out) + "\n"


def config_dict(cfg: RunConfig) -> dict:
    d = {}
    for f in fields(cfg):
        if f.name == "source_dir":
            continue
        v = getattr(cfg, f.name)
        if f.name == "terms":
            v = [{k: getattr(t, k) for k in ("kind", "lam", "p", "s", "c_ns", "symbol")} for t in v]
        elif isinstance(v, Profile):
            v = v.text()
        elif isinstance(v, tuple):
            v = list(v)
        d[f.name] = v
    return d
