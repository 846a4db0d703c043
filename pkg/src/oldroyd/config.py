"""Run-configuration text format: sectioned key = value with strict validation.

Every parse either yields a complete RunConfig or raises ConfigError carrying
all violations found in one pass, each with its line number and field.
Unknown sections and keys are rejected, not ignored, and random initial data
must name an explicit seed so runs stay reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from . import decay
from .solver import SolverConfig
from .spectral import FluidParams, FourierGrid

MODES = ("decay-character", "linear", "simulate", "fit", "verify-bounds", "plot")
FAMILIES = ("none", "power_gauss", "power_cutoff", "indicator", "lp_like", "random_band")


@dataclass(frozen=True)
class ConfigIssue:
    line: int
    field: str
    message: str

    def __str__(self):
        return f"line {self.line}: {self.field}: {self.message}"


class ConfigError(ValueError):
    """All violations found while parsing a configuration."""

    def __init__(self, issues):
        self.issues = list(issues)
        super().__init__("\n".join(str(i) for i in self.issues))


@dataclass(frozen=True)
class ProfileSpec:
    """Named initial-data family with its parameters."""

    family: str = "none"
    q: float = 0.0
    p: float = 1.5
    cutoff: float = 1.0
    k_lo: float = 0.0625
    k_hi: float = 0.5
    amplitude: float = 1.0
    seed: int | None = None

    def to_profile(self):
        """Continuum radial profile, or None for absent data.

        Random band data has no continuum counterpart and is rejected here.
        """
        if self.family == "none":
            return None
        if self.family == "power_gauss":
            prof = decay.power_gauss(self.q)
        elif self.family == "power_cutoff":
            prof = decay.power_cutoff(self.q, cutoff=self.cutoff)
        elif self.family == "indicator":
            prof = decay.indicator(self.cutoff)
        elif self.family == "lp_like":
            prof = decay.lp_like(self.p)
        else:
            raise ValueError(f"family {self.family!r} defines no continuum profile")
        if self.amplitude != 1.0:
            prof = decay.scaled(prof, self.amplitude)
        return prof

    def decay_character(self) -> float | None:
        """Decay character implied by the family (band data emulates 0)."""
        if self.family == "none":
            return None
        if self.family in ("power_gauss", "power_cutoff"):
            return self.q
        if self.family == "indicator":
            return 0.0
        if self.family == "lp_like":
            return decay.lp_decay_character(self.p, 3)
        return 0.0  # random_band: flat band emulates an indicator spectrum


@dataclass(frozen=True)
class RatesConfig:
    t_lo: float = 5.0
    t_hi: float = 50.0
    tolerance: float | None = None
    r_u: float | None = None
    r_tau: float | None = None


@dataclass(frozen=True)
class RunConfig:
    mode: str
    physics: FluidParams
    grid: FourierGrid
    initial_u: ProfileSpec
    initial_tau: ProfileSpec
    solver: SolverConfig
    rates: RatesConfig
    output_dir: str = "out"

    def decay_characters(self) -> tuple[float | None, float | None]:
        r_u = self.rates.r_u
        if r_u is None:
            r_u = self.initial_u.decay_character()
        r_tau = self.rates.r_tau
        if r_tau is None:
            r_tau = self.initial_tau.decay_character()
        return r_u, r_tau


def _parse_float(text):
    return float(text)


def _parse_int(text):
    value = float(text)
    if value != int(value):
        raise ValueError("not an integer")
    return int(value)


def _parse_str(text):
    return text


# key registry: section -> key -> (converter, validator, description)
_SCHEMA = {
    "": {
        "mode": (_parse_str, lambda v: v in MODES, f"one of {', '.join(MODES)}"),
    },
    "physics": {
        "omega": (_parse_float, lambda v: 0.0 < v < 1.0, "strictly inside (0, 1)"),
        "a": (_parse_float, lambda v: -1.0 <= v <= 1.0, "in [-1, 1]"),
        "reynolds": (_parse_float, lambda v: v > 0, "positive"),
        "weissenberg": (_parse_float, lambda v: v > 0, "positive"),
    },
    "grid": {
        "n": (_parse_int, lambda v: v > 0 and v % 2 == 0, "positive even integer"),
        "box_scale": (_parse_float, lambda v: v > 0, "positive"),
    },
    "initial.u": {
        "family": (_parse_str, lambda v: v in FAMILIES, f"one of {', '.join(FAMILIES)}"),
        "q": (_parse_float, lambda v: v > -1.5, "above -3/2"),
        "p": (_parse_float, lambda v: 1.0 <= v < 2.0, "in [1, 2)"),
        "cutoff": (_parse_float, lambda v: v > 0, "positive"),
        "k_lo": (_parse_float, lambda v: v > 0, "positive"),
        "k_hi": (_parse_float, lambda v: v > 0, "positive"),
        "amplitude": (_parse_float, lambda v: v > 0, "positive"),
        "seed": (_parse_int, lambda v: v >= 0, "nonnegative integer"),
    },
    "solver": {
        "dt": (_parse_float, lambda v: v > 0, "positive"),
        "t_end": (_parse_float, lambda v: v > 0, "positive"),
        "integrator": (_parse_str, lambda v: v in ("etd_heun", "etd_euler"),
                       "etd_heun or etd_euler"),
        "checkpoint_every": (_parse_int, lambda v: v >= 0, "nonnegative integer"),
        "diagnostics_every": (_parse_int, lambda v: v >= 1, "at least 1"),
    },
    "rates": {
        "t_lo": (_parse_float, lambda v: v >= 0, "nonnegative"),
        "t_hi": (_parse_float, lambda v: v > 0, "positive"),
        "tolerance": (_parse_float, lambda v: v > 0, "positive"),
        "r_u": (_parse_float, lambda v: v > -1.5, "above -3/2"),
        "r_tau": (_parse_float, lambda v: v > -1.5, "above -3/2"),
    },
    "output": {
        "directory": (_parse_str, lambda v: len(v) > 0, "nonempty"),
    },
}
_SCHEMA["initial.tau"] = _SCHEMA["initial.u"]

_DEFAULTS = {
    "": {"mode": "simulate"},
    "physics": {"omega": 0.5, "a": 0.0, "reynolds": 1.0, "weissenberg": 1.0},
    "grid": {"n": 64, "box_scale": 16.0},
    "initial.u": {},
    "initial.tau": {},
    "solver": {"dt": 0.1, "t_end": 50.0, "integrator": "etd_heun",
               "checkpoint_every": 0, "diagnostics_every": 1},
    "rates": {"t_lo": 5.0, "t_hi": 50.0},
    "output": {"directory": "out"},
}


def parse_config(text: str) -> RunConfig:
    """Parse and validate configuration text; raises ConfigError with every
    violation found."""
    issues: list[ConfigIssue] = []
    values: dict[str, dict[str, object]] = {s: dict(d) for s, d in _DEFAULTS.items()}
    seen: dict[tuple[str, str], int] = {}
    section = ""
    section_known = True

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                issues.append(ConfigIssue(lineno, "section", "unterminated section header"))
                section_known = False
                continue
            section = line[1:-1].strip()
            section_known = section in _SCHEMA
            if not section_known:
                issues.append(ConfigIssue(lineno, section, "unknown section"))
            continue
        if "=" not in line:
            issues.append(ConfigIssue(lineno, "syntax", "expected key = value"))
            continue
        key, _, rhs = line.partition("=")
        key = key.strip()
        rhs = rhs.strip()
        if not section_known:
            continue  # the section itself was already reported
        schema = _SCHEMA[section]
        label = f"{section}.{key}" if section else key
        if key not in schema:
            issues.append(ConfigIssue(lineno, label, "unknown key"))
            continue
        if (section, key) in seen:
            issues.append(
                ConfigIssue(lineno, label,
                            f"duplicate key (first set on line {seen[(section, key)]})"))
            continue
        seen[(section, key)] = lineno
        converter, validator, expectation = schema[key]
        try:
            value = converter(rhs)
        except ValueError:
            issues.append(ConfigIssue(lineno, label, f"cannot parse {rhs!r}; expected {expectation}"))
            continue
        if not validator(value):
            issues.append(ConfigIssue(lineno, label, f"value {rhs} out of range; expected {expectation}"))
            continue
        values[section][key] = value

    for side in ("initial.u", "initial.tau"):
        spec = values[side]
        family = spec.get("family", "none")
        if family == "random_band":
            if "seed" not in spec:
                line = seen.get((side, "family"), 0)
                issues.append(ConfigIssue(line, f"{side}.seed",
                                          "random initial data requires an explicit seed"))
            k_lo = spec.get("k_lo", _defaults_for(side)["k_lo"])
            k_hi = spec.get("k_hi", _defaults_for(side)["k_hi"])
            if k_lo >= k_hi:
                line = seen.get((side, "k_lo"), seen.get((side, "k_hi"), 0))
                issues.append(ConfigIssue(line, f"{side}.k_lo", "need k_lo < k_hi"))

    rates = values["rates"]
    if rates["t_lo"] >= rates["t_hi"]:
        line = seen.get(("rates", "t_lo"), seen.get(("rates", "t_hi"), 0))
        issues.append(ConfigIssue(line, "rates.t_lo", "need t_lo < t_hi"))

    if issues:
        raise ConfigError(sorted(issues, key=lambda i: i.line))

    def build_profile(side):
        spec = dict(_defaults_for(side))
        spec.update(values[side])
        return ProfileSpec(**spec)

    return RunConfig(
        mode=values[""]["mode"],
        physics=FluidParams(**values["physics"]),
        grid=FourierGrid(n_per_axis=values["grid"]["n"], box_scale=values["grid"]["box_scale"]),
        initial_u=build_profile("initial.u"),
        initial_tau=build_profile("initial.tau"),
        solver=SolverConfig(**values["solver"]),
        rates=RatesConfig(**values["rates"]),
        output_dir=values["output"]["directory"],
    )


def _defaults_for(side) -> dict:
    return {
        "family": "none", "q": 0.0, "p": 1.5, "cutoff": 1.0,
        "k_lo": 0.0625, "k_hi": 0.5, "amplitude": 1.0, "seed": None,
    }
