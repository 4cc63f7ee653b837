"""Run configuration: a small ``key = value`` text format.

Grammar::

    # comment (also after a value)
    [section]
    key = value
    vortex = <complex> : <multiplicity>     # repeatable

Complex numbers use ``i`` for the imaginary unit (``1.5-2i``, ``0+0i``);
lists are comma separated; ``none`` is accepted where a value is optional.
Every problem reports the line number and key.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace

from .errors import ConfigurationError

# ------------------------------------------------------------ sections


@dataclass(frozen=True)
class GridConfig:
    n: int = 129
    extent: float = 6.0

    @property
    def h(self) -> float:
        return 2 * self.extent / (self.n - 1)


@dataclass(frozen=True)
class GenerateConfig:
    family: str = "divisor"
    c1: complex = 1 + 0j
    c2: complex = 0.5 + 0j
    theta: float = 0.0
    sign: int = 1
    R: float | None = None
    connection: str = "literal"
    vortex: tuple[tuple[complex, int], ...] = ()


@dataclass(frozen=True)
class SolveConfig:
    M: float = 0.25
    Mprime: float = 0.0
    R: float = 5.0
    eps: float = 0.2
    tol_newton: float = 1e-8
    tol_linear: float = 1e-10
    continuation_steps: int = 8
    eps_floor: float = 2.0
    mode: str = "newton"
    residual_tol: float = 5e-2
    vortex: tuple[tuple[complex, int], ...] = ()


@dataclass(frozen=True)
class RefineConfig:
    eps_schedule: tuple[float, ...] = (0.2, 0.1, 0.05)
    R_schedule: tuple[float, ...] = (6.0,)
    window_outer: float = 3.0
    window_inner: float = 0.5


@dataclass(frozen=True)
class VerifyConfig:
    input: str = ""
    threshold: float = 1e-2


@dataclass(frozen=True)
class VekuaConfig:
    n: int = 257
    points: int = 10


@dataclass(frozen=True)
class EnergyConfig:
    count: int = 5
    n: int = 192
    period: float = 24.0


@dataclass(frozen=True)
class RunSection:
    seed: int = 0


_SECTION_NAMES = ("run", "grid", "generate", "solve", "refine", "verify", "vekua", "energy")


@dataclass(frozen=True)
class RunConfig:
    run: RunSection = field(default_factory=RunSection)
    grid: GridConfig = field(default_factory=GridConfig)
    generate: GenerateConfig = field(default_factory=GenerateConfig)
    solve: SolveConfig = field(default_factory=SolveConfig)
    refine: RefineConfig = field(default_factory=RefineConfig)
    verify: VerifyConfig = field(default_factory=VerifyConfig)
    vekua: VekuaConfig = field(default_factory=VekuaConfig)
    energy: EnergyConfig = field(default_factory=EnergyConfig)
    # sections written in the source document; cross-section checks apply to these
    present: frozenset = field(default=frozenset(_SECTION_NAMES) - {"verify"}, compare=False, repr=False)

    @property
    def seed(self) -> int:
        return self.run.seed

    def with_overrides(self, grid_n: int | None = None, seed: int | None = None) -> "RunConfig":
        cfg = self
        if grid_n is not None:
            if grid_n < 3:
                raise ConfigurationError(f"--grid: n = {grid_n} out of range >= 3")
            cfg = replace(cfg, grid=replace(cfg.grid, n=grid_n))
        if seed is not None:
            cfg = replace(cfg, run=RunSection(seed=seed))
        _cross_validate(cfg, {})
        return cfg


_SECTIONS = {f.name: f.type for f in fields(RunConfig) if f.name != "present"}
_CLASSES = {
    "run": RunSection, "grid": GridConfig, "generate": GenerateConfig, "solve": SolveConfig,
    "refine": RefineConfig, "verify": VerifyConfig, "vekua": VekuaConfig, "energy": EnergyConfig,
}

# ------------------------------------------------------------ value parsing


def parse_complex(text: str) -> complex:
    t = text.strip().replace(" ", "")
    if not t:
        raise ValueError("empty complex number")
    if t.endswith("i"):
        body = t[:-1]
        if body in ("", "+", "-"):
            body += "1"
        elif body[-1] in "+-":
            body += "1"
        t = body + "j"
    return complex(t)


def format_complex(c: complex) -> str:
    im = c.imag
    sign = "-" if math.copysign(1.0, im) < 0 else "+"
    return f"{c.real!r}{sign}{abs(im)!r}i"


def _float(t):
    return float(t)


def _opt_float(t):
    return None if t.strip().lower() == "none" else float(t)


def _int(t):
    v = float(t)
    if v != int(v):
        raise ValueError(f"{t!r} is not an integer")
    return int(v)


def _floats(t):
    return tuple(float(x) for x in t.split(",") if x.strip())


def _str(t):
    return t.strip()


def _choice(*opts):
    def parse(t):
        t = t.strip()
        if t not in opts:
            raise ValueError(f"expected one of {', '.join(opts)}")
        return t

    return parse


def _positive(v):
    return v > 0


def _open_unit(v):
    return 0 < v < 1


_SCHEMA = {
    "run": {"seed": (_int, lambda v: v >= 0, ">= 0")},
    "grid": {
        "n": (_int, lambda v: v >= 3, ">= 3"),
        "extent": (_float, _positive, "> 0"),
    },
    "generate": {
        "family": (_choice("divisor", "plane_wave", "higgs"), None, ""),
        "c1": (parse_complex, lambda v: v != 0, "nonzero"),
        "c2": (parse_complex, None, ""),
        "theta": (_float, math.isfinite, "finite"),
        "sign": (_int, lambda v: v in (1, -1), "+1 or -1"),
        "R": (_opt_float, lambda v: v is None or v > 0, "> 0"),
        "connection": (_choice("literal", "real"), None, ""),
    },
    "solve": {
        "M": (_float, _open_unit, "(0,1)"),
        "Mprime": (_float, lambda v: v >= 0, ">= 0"),
        "R": (_float, _positive, "> 0"),
        "eps": (_float, _positive, "> 0"),
        "tol_newton": (_float, _positive, "> 0"),
        "tol_linear": (_float, _positive, "> 0"),
        "continuation_steps": (_int, lambda v: v >= 1, ">= 1"),
        "eps_floor": (_float, lambda v: v > 0, "> 0"),
        "mode": (_choice("newton", "monotone"), None, ""),
        "residual_tol": (_float, _positive, "> 0"),
    },
    "refine": {
        "eps_schedule": (_floats, lambda v: len(v) > 0 and all(x > 0 for x in v), "non-empty, positive"),
        "R_schedule": (_floats, lambda v: len(v) > 0 and all(x > 0 for x in v), "non-empty, positive"),
        "window_outer": (_float, _positive, "> 0"),
        "window_inner": (_float, lambda v: v >= 0, ">= 0"),
    },
    "verify": {"input": (_str, lambda v: len(v) > 0, "non-empty"), "threshold": (_float, _positive, "> 0")},
    "vekua": {"n": (_int, lambda v: v >= 9, ">= 9"), "points": (_int, lambda v: v >= 1, ">= 1")},
    "energy": {
        "count": (_int, lambda v: v >= 1, ">= 1"),
        "n": (_int, lambda v: v >= 16, ">= 16"),
        "period": (_float, _positive, "> 0"),
    },
}
_REQUIRED = {"verify": ("input",)}
_VORTEX_SECTIONS = {"generate": 1, "solve": 2}


def _parse_vortex(text: str, min_mult: int):
    if ":" not in text:
        raise ValueError("expected '<point> : <multiplicity>'")
    pt, mult = text.rsplit(":", 1)
    p = parse_complex(pt)
    m = _int(mult)
    if m < min_mult:
        raise ValueError(f"multiplicity {m} out of range (must be >= {min_mult})")
    return (p, m)


def parse_config(text: str) -> RunConfig:
    """Parse and validate a configuration document."""
    values: dict[str, dict] = {name: {} for name in _SECTIONS}
    lines: dict[tuple[str, str], int] = {}
    seen_sections = set()
    section = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ConfigurationError(f"line {lineno}: malformed section header {raw.strip()!r}")
            section = line[1:-1].strip()
            if section not in _SECTIONS:
                raise ConfigurationError(f"line {lineno}: unknown section [{section}]")
            seen_sections.add(section)
            continue
        if "=" not in line:
            raise ConfigurationError(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
        if section is None:
            raise ConfigurationError(f"line {lineno}: key outside of any [section]")
        key, val = (s.strip() for s in line.split("=", 1))
        if key == "vortex" and section in _VORTEX_SECTIONS:
            try:
                entry = _parse_vortex(val, _VORTEX_SECTIONS[section])
            except ValueError as exc:
                raise ConfigurationError(f"line {lineno}: key 'vortex' in [{section}]: {exc}") from None
            values[section].setdefault("vortex", []).append(entry)
            lines.setdefault((section, "vortex"), lineno)
            continue
        spec = _SCHEMA[section].get(key)
        if spec is None:
            raise ConfigurationError(f"line {lineno}: unknown key '{key}' in [{section}]")
        if key in values[section]:
            raise ConfigurationError(f"line {lineno}: key '{key}' repeated in [{section}]")
        parse, check, desc = spec
        try:
            v = parse(val)
        except ValueError as exc:
            raise ConfigurationError(f"line {lineno}: key '{key}' in [{section}]: cannot parse {val!r} ({exc})") from None
        if check is not None and not check(v):
            raise ConfigurationError(f"line {lineno}: key '{key}' in [{section}]: value {val} out of range {desc}")
        values[section][key] = v
        lines[(section, key)] = lineno
    for sec, keys in _REQUIRED.items():
        if sec in seen_sections:
            for k in keys:
                if k not in values[sec]:
                    raise ConfigurationError(f"section [{sec}]: missing required key '{k}'")
    parts = {}
    for name, cls in _CLASSES.items():
        kw = dict(values[name])
        if "vortex" in kw:
            kw["vortex"] = tuple(kw["vortex"])
        parts[name] = cls(**kw)
    cfg = RunConfig(**parts, present=frozenset(seen_sections))
    _cross_validate(cfg, lines)
    return cfg


def _cross_validate(cfg: RunConfig, lines: dict) -> None:
    def where(sec, key):
        ln = lines.get((sec, key))
        return f"line {ln}: " if ln else ""

    g = cfg.generate
    if g.R is not None and g.R > cfg.grid.extent * (1 + 1e-12):
        raise ConfigurationError(f"{where('generate', 'R')}key 'R' in [generate]: R = {g.R} exceeds grid extent")

    s = cfg.solve
    h = cfg.grid.h
    if "solve" not in cfg.present and "refine" not in cfg.present:
        return
    if s.eps < s.eps_floor * h * (1 - 1e-12):
        raise ConfigurationError(
            f"{where('solve', 'eps')}key 'eps' in [solve]: eps = {s.eps} is below the floor "
            f"eps_floor*h = {s.eps_floor * h:.6g} for grid n={cfg.grid.n}, extent={cfg.grid.extent}"
        )
    if s.R > cfg.grid.extent * (1 + 1e-12):
        raise ConfigurationError(f"{where('solve', 'R')}key 'R' in [solve]: R = {s.R} exceeds grid extent")
    pts = [p for p, _ in s.vortex]
    if len(set(pts)) != len(pts):
        raise ConfigurationError(f"{where('solve', 'vortex')}key 'vortex' in [solve]: repeated vortex point")
    rf = cfg.refine
    if rf.window_inner >= rf.window_outer:
        raise ConfigurationError(f"{where('refine', 'window_inner')}key 'window_inner' in [refine]: must be < window_outer")


# ------------------------------------------------------------ serialization


def _format_value(v) -> str:
    if v is None:
        return "none"
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, complex):
        return format_complex(v)
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, tuple):
        return ", ".join(repr(float(x)) for x in v)
    return str(v)


def config_to_text(cfg: RunConfig) -> str:
    """Canonical text form; ``parse_config(config_to_text(c)) == c``."""
    out = []
    for name in _CLASSES:
        if name not in cfg.present and name not in ("run", "grid"):
            continue
        sec = getattr(cfg, name)
        out.append(f"[{name}]")
        for f in fields(sec):
            val = getattr(sec, f.name)
            if f.name == "vortex":
                for p, m in val:
                    out.append(f"vortex = {format_complex(complex(p))} : {m}")
                continue
            out.append(f"{f.name} = {_format_value(val)}")
        out.append("")
    return "\n".join(out)
