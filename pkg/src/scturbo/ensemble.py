"""Ensemble descriptions shared by the analysis and simulation paths.

An ensemble is a parallel ("pcc") or serial ("scc") concatenation of two
rate-1/2 recursive systematic components, optionally spatially coupled
over a chain of positions, optionally punctured.  Puncturing is random:
each bit of a stream survives independently with the stream's fraction.

Survival fractions: for "pcc", `rho` applies to both parity streams (the
systematic stream is always sent).  For "scc", `rho0` applies to the
systematic stream, `rho1` to the outer parity and `rho2` to the inner
parity (which carries two bits per information bit).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from fractions import Fraction

from .trellis import GeneratorSpec

FAMILIES = ("pcc", "scc")


@dataclass(frozen=True)
class EnsembleSpec:
    family: str
    generators: tuple[GeneratorSpec, GeneratorSpec]
    coupling_memory: int = 0
    coupling_length: int = 1
    rho: float = 1.0
    rho0: float = 1.0
    rho1: float = 1.0
    rho2: float = 1.0
    name: str = ""

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"family must be one of {FAMILIES}: {self.family!r}")
        if len(self.generators) != 2:
            raise ValueError("exactly two component generator pairs are required")
        if not all(isinstance(g, GeneratorSpec) for g in self.generators):
            raise ValueError("generators must be GeneratorSpec instances")
        if self.coupling_memory < 0:
            raise ValueError("coupling_memory must be >= 0")
        if self.coupling_length < 1:
            raise ValueError("coupling_length must be >= 1")
        for label, value in self._fractions():
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{label} must lie in [0, 1]: {value}")

    def _fractions(self):
        if self.family == "pcc":
            return [("rho", self.rho)]
        return [("rho0", self.rho0), ("rho1", self.rho1), ("rho2", self.rho2)]

    @property
    def coupled(self) -> bool:
        return self.coupling_memory > 0

    @property
    def design_rate(self) -> float:
        if self.family == "pcc":
            return 1.0 / (1.0 + 2.0 * self.rho)
        return 1.0 / (self.rho0 + self.rho1 + 2.0 * self.rho2)

    @property
    def rate_label(self) -> str:
        frac = Fraction(self.design_rate).limit_denominator(64)
        if abs(float(frac) - self.design_rate) < 1e-9:
            return f"{frac.numerator}/{frac.denominator}"
        return f"{self.design_rate:.4f}"

    @property
    def label(self) -> str:
        if self.name:
            return self.name
        base = self.family.upper()
        if self.coupled:
            base = f"SC-{base} m={self.coupling_memory}"
        return f"{base} R={self.rate_label}"

    def uncoupled(self) -> "EnsembleSpec":
        return replace(self, coupling_memory=0, coupling_length=1)

    def with_coupling(self, memory: int, length: int) -> "EnsembleSpec":
        return replace(self, coupling_memory=memory, coupling_length=length)


_ENSEMBLE_KEYS = {"family", "generators", "coupling_memory", "coupling_length",
                  "rho", "rho0", "rho1", "rho2", "name"}


def ensemble_from_config(cfg: dict) -> EnsembleSpec:
    """Build an EnsembleSpec from a plain dict (parsed JSON)."""
    if not isinstance(cfg, dict):
        raise ValueError("ensemble section must be an object")
    unknown = set(cfg) - _ENSEMBLE_KEYS
    if unknown:
        raise ValueError(f"unknown ensemble keys: {sorted(unknown)}")
    if "family" not in cfg or "generators" not in cfg:
        raise ValueError("ensemble needs 'family' and 'generators'")
    gens = cfg["generators"]
    if isinstance(gens, str):
        gens = [gens, gens]
    if not isinstance(gens, (list, tuple)) or len(gens) != 2:
        raise ValueError("generators must be one octal string or a list of two")
    parsed = tuple(GeneratorSpec.parse(g) for g in gens)
    family = cfg["family"]
    kwargs = {}
    for key in ("coupling_memory", "coupling_length"):
        if key in cfg:
            value = cfg[key]
            if not isinstance(value, int) or isinstance(value, bool):
                raise ValueError(f"{key} must be an integer")
            kwargs[key] = value
    fraction_keys = ("rho",) if family == "pcc" else ("rho0", "rho1", "rho2")
    for key in ("rho", "rho0", "rho1", "rho2"):
        if key in cfg:
            if key not in fraction_keys:
                raise ValueError(f"{key} does not apply to family {family!r}")
            kwargs[key] = float(cfg[key])
    if "name" in cfg:
        kwargs["name"] = str(cfg["name"])
    return EnsembleSpec(family=family, generators=parsed, **kwargs)
