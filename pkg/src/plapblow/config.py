"""Flat ``section.key = value`` run configuration.

Every key has a type and a default in :data:`SCHEMA`; unknown keys, bad
values and duplicates are rejected with the offending line number.
:func:`dumps` writes the full configuration in schema order so that
``parse(dumps(cfg)) == cfg`` holds exactly.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass

from .discretization import DEFAULT_GRADING, Interval, Radial
from .hypotheses import ProblemSpec
from .ladder import LadderConfig
from .model import ABSORPTION, REACTION, NonlinearityModel, WeightModel, decaying_ratio_absorption
from .solver import SolveOptions

__all__ = ["ConfigError", "RunConfig", "SCHEMA", "parse", "load", "dumps"]


class ConfigError(ValueError):
    def __init__(self, message: str, line: int | None = None, key: str | None = None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if key is not None:
            where.append(f"key {key!r}")
        super().__init__(f"{', '.join(where)}: {message}" if where else message)
        self.line = line
        self.key = key


FORMS_F = ("power", "powersum", "tabulated", "decaying_ratio")
FORMS_G = ("none", "power", "powersum", "tabulated")

# key -> (type, default); types: float, int, bool, str choices (tuple), "pairs", "floats", "auto"
SCHEMA: dict[str, tuple] = {
    "problem.p": (float, 2.0),
    "problem.lambda": (float, 1.0),
    "problem.domain": (("interval", "ball", "annulus"), "interval"),
    "problem.x_lo": (float, 0.0),
    "problem.x_hi": (float, 2.0),
    "problem.blowup": (("both", "left", "right"), "both"),
    "problem.N": (int, 3),
    "problem.r_lo": (float, 0.0),
    "problem.r_hi": (float, 1.0),
    "problem.f.form": (FORMS_F, "power"),
    "problem.f.exponent": (float, 3.0),
    "problem.f.coeff": (float, 1.0),
    "problem.f.terms": ("pairs", ()),
    "problem.f.table": ("pairs", ()),
    "problem.f.tail_exponent": ("auto", None),
    "problem.g.form": (FORMS_G, "none"),
    "problem.g.exponent": (float, 1.0),
    "problem.g.coeff": (float, 1.0),
    "problem.g.terms": ("pairs", ()),
    "problem.g.table": ("pairs", ()),
    "problem.g.tail_exponent": ("auto", None),
    "problem.a.coeff": (float, 0.0),
    "problem.a.exponent": (float, 0.0),
    "problem.a.offset": (float, 0.0),
    "problem.b.coeff": (float, 0.0),
    "problem.b.exponent": (float, 0.0),
    "problem.b.offset": (float, 1.0),
    "grid.n_cells": (int, 2048),
    "grid.grading_ratio": (float, DEFAULT_GRADING),
    "ladder.L0": ("auto", None),
    "ladder.growth": (float, 2.0),
    "ladder.max_rungs": (int, 12),
    "ladder.interior_margin": (float, 0.5),
    "ladder.interior_tol": (float, 1e-3),
    "ladder.tol_order": (float, 1e-6),
    "solver.tol": (float, 1e-10),
    "solver.max_iter": (int, 200),
    "solver.merit": (("energy", "residual"), "energy"),
    "rate.points": ("floats", ()),
    "rate.cap_fraction": (float, 0.01),
    "rate.asymptotic_factor": (float, 10.0),
    "oracle.x_min": (float, 1e-3),
    "oracle.x_max": (float, 1e3),
    "oracle.n_points": (int, 13),
    "oracle.a_scale": (float, 1.0),
    "mode.strict_hypotheses": (bool, True),
    "output.directory": (str, "plapblow-out"),
    "output.emit_plot_script": (bool, False),
}


def _parse_value(kind, raw: str, key: str, line: int | None):
    raw = raw.strip()
    try:
        if kind is float:
            v = float(raw)
            if math.isnan(v):
                raise ValueError("nan")
            return v
        if kind is int:
            return int(raw)
        if kind is bool:
            low = raw.lower()
            if low in ("true", "yes", "1", "on"):
                return True
            if low in ("false", "no", "0", "off"):
                return False
            raise ValueError(raw)
        if kind is str:
            if not raw:
                raise ValueError("empty")
            return raw
        if isinstance(kind, tuple):
            if raw not in kind:
                raise ValueError(f"expected one of {', '.join(kind)}")
            return raw
        if kind == "auto":
            return None if raw.lower() in ("auto", "none", "") else float(raw)
        if kind == "floats":
            return tuple(float(t) for t in raw.split(",") if t.strip()) if raw else ()
        if kind == "pairs":
            out = []
            for item in (t for t in raw.split(",") if t.strip()):
                x, y = item.split(":")
                out.append((float(x), float(y)))
            return tuple(out)
    except ValueError as exc:
        raise ConfigError(f"invalid value {raw!r} ({exc})", line, key) from None
    raise ConfigError(f"unsupported schema type for {key}", line, key)


def _format_value(kind, value) -> str:
    if value is None:
        return "auto"
    if kind is bool:
        return "true" if value else "false"
    if kind is float or kind == "auto":
        return repr(float(value))
    if kind == "floats":
        return ", ".join(repr(float(v)) for v in value)
    if kind == "pairs":
        return ", ".join(f"{float(x)!r}:{float(y)!r}" for x, y in value)
    return str(value)


@dataclass(frozen=True)
class RunConfig:
    values: tuple[tuple[str, object], ...]

    def __getitem__(self, key: str):
        return dict(self.values)[key]

    def as_dict(self) -> dict:
        return dict(self.values)

    def replace(self, **updates) -> RunConfig:
        """Copy with ``section__key=value`` style overrides (``__`` stands for ``.``)."""
        cur = dict(self.values)
        for k, v in updates.items():
            key = k.replace("__", ".")
            if key not in SCHEMA:
                raise ConfigError("unknown key", key=key)
            cur[key] = v
        return RunConfig(tuple((k, cur[k]) for k in SCHEMA))

    def sha256(self) -> str:
        return hashlib.sha256(dumps(self).encode("utf-8")).hexdigest()

    # -- typed views ------------------------------------------------------

    def geometry(self) -> Interval | Radial:
        dom = self["problem.domain"]
        if dom == "interval":
            flags = {"both": (True, True), "left": (True, False), "right": (False, True)}
            lo, hi = self["problem.x_lo"], self["problem.x_hi"]
            if not hi > lo:
                raise ConfigError("problem.x_hi must exceed problem.x_lo", key="problem.x_hi")
            return Interval(lo, hi, flags[self["problem.blowup"]])
        r_lo = 0.0 if dom == "ball" else self["problem.r_lo"]
        r_hi = self["problem.r_hi"]
        if dom == "annulus" and not r_lo > 0:
            raise ConfigError("an annulus needs problem.r_lo > 0", key="problem.r_lo")
        if not r_hi > r_lo:
            raise ConfigError("problem.r_hi must exceed problem.r_lo", key="problem.r_hi")
        if self["problem.N"] < 1:
            raise ConfigError("problem.N must be at least 1", key="problem.N")
        return Radial(self["problem.N"], r_lo, r_hi)

    def _nonlinearity(self, which: str) -> NonlinearityModel | None:
        kind = ABSORPTION if which == "f" else REACTION
        pre = f"problem.{which}."
        form = self[pre + "form"]
        try:
            if form == "none":
                return None
            if form == "power":
                return NonlinearityModel.power(kind, self[pre + "exponent"], self[pre + "coeff"])
            if form == "powersum":
                if not self[pre + "terms"]:
                    raise ConfigError("powersum needs coeff:exponent terms", key=pre + "terms")
                return NonlinearityModel.powersum(kind, self[pre + "terms"])
            if form == "tabulated":
                return NonlinearityModel.tabulated(kind, self[pre + "table"], self[pre + "tail_exponent"])
            return decaying_ratio_absorption(self["problem.p"])
        except ValueError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(str(exc), key=pre + "form") from None

    def _weight(self, which: str) -> WeightModel:
        pre = f"problem.{which}."
        try:
            return WeightModel(self[pre + "coeff"], self[pre + "exponent"], self[pre + "offset"])
        except ValueError as exc:
            raise ConfigError(str(exc), key=pre + "coeff") from None

    def problem_spec(self) -> ProblemSpec:
        p = self["problem.p"]
        if not p > 1:
            raise ConfigError("problem.p must exceed 1", key="problem.p")
        if self["problem.lambda"] < 0:
            raise ConfigError("problem.lambda must be nonnegative", key="problem.lambda")
        return ProblemSpec(p=p, lam=self["problem.lambda"], geometry=self.geometry(),
                           f=self._nonlinearity("f"), g=self._nonlinearity("g"),
                           a=self._weight("a"), b=self._weight("b"))

    def ladder_config(self) -> LadderConfig:
        try:
            return LadderConfig(L0=self["ladder.L0"], growth=self["ladder.growth"],
                                max_rungs=self["ladder.max_rungs"],
                                interior_margin=self["ladder.interior_margin"],
                                interior_tol=self["ladder.interior_tol"],
                                tol_order=self["ladder.tol_order"])
        except ValueError as exc:
            raise ConfigError(str(exc), key="ladder") from None

    def solve_options(self) -> SolveOptions:
        return SolveOptions(tol=self["solver.tol"], max_iter=self["solver.max_iter"],
                            merit=self["solver.merit"])


def parse(text: str) -> RunConfig:
    values = {k: v for k, (_, v) in SCHEMA.items()}
    seen: dict[str, int] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError("expected 'key = value'", lineno)
        key, raw = (part.strip() for part in body.split("=", 1))
        if key not in SCHEMA:
            raise ConfigError("unknown key", lineno, key)
        if key in seen:
            raise ConfigError(f"duplicate key (first set on line {seen[key]})", lineno, key)
        seen[key] = lineno
        values[key] = _parse_value(SCHEMA[key][0], raw, key, lineno)
    return RunConfig(tuple((k, values[k]) for k in SCHEMA))


def load(path) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    return parse(text)


def dumps(cfg: RunConfig) -> str:
    return "".join(f"{k} = {_format_value(SCHEMA[k][0], v)}\n" for k, v in cfg.values)
