"""Run configuration: a strict schema validated before any computation."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Annotated, Literal, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .geometry import Cometric, GaussianBump, NoPerturbation, PowerDecay, RingTrap
from .quantize import GridSpec
from .symbols import CutoffParams

__all__ = ["ConfigError", "RunConfig", "load_config", "parse_config"]


class ConfigError(ValueError):
    """Schema or consistency error; the message names the offending field path."""


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


Amplitude = Union[float, list[float], list[list[float]]]


class NoFamily(_Strict):
    family: Literal["none"] = "none"


class GaussianFamily(_Strict):
    family: Literal["gaussian_bump"]
    amplitude: Amplitude
    center: list[float] | None = None
    width: float = Field(1.0, gt=0)


class PowerFamily(_Strict):
    family: Literal["power_decay"]
    amplitude: Amplitude
    scale: float = Field(1.0, gt=0)


class RingFamily(_Strict):
    family: Literal["ring_trap"]
    radius: float = Field(1.0, gt=0)
    width: float = Field(0.8, gt=0)
    well: float | None = None
    twist: float = 0.6
    twist_width: float = Field(2.0, gt=0)
    height: float = Field(2.0, gt=0)


Family = Annotated[Union[NoFamily, GaussianFamily, PowerFamily, RingFamily], Field(discriminator="family")]


class MetricBlock(_Strict):
    dimension: int = Field(ge=1, le=3)
    signature: Literal["minkowski", "euclidean"] | None = "minkowski"
    flat: list[list[float]] | None = None
    mu: float = Field(gt=0, lt=1)
    perturbation: Family = NoFamily()
    first_order: Family = NoFamily()
    zeroth_order: Family = NoFamily()

    def _family(self, fam, shape):
        if isinstance(fam, NoFamily):
            return NoPerturbation()
        if isinstance(fam, GaussianFamily):
            return GaussianBump(amplitude=np.asarray(fam.amplitude, dtype=float), center=fam.center,
                                width=fam.width)
        if isinstance(fam, PowerFamily):
            return PowerDecay(amplitude=np.asarray(fam.amplitude, dtype=float), mu=self.mu, scale=fam.scale)
        if shape != (self.dimension, self.dimension):
            raise ConfigError("ring_trap is a metric perturbation, not a lower-order family")
        return RingTrap(radius=fam.radius, width=fam.width, well=fam.well, twist=fam.twist,
                        twist_width=fam.twist_width, height=fam.height)

    def build(self) -> Cometric:
        n = self.dimension
        if self.flat is not None:
            g0 = np.asarray(self.flat, dtype=float)
            if g0.shape != (n, n):
                raise ConfigError(f"metric.flat: expected a {n}x{n} matrix")
        elif self.signature == "euclidean":
            g0 = np.eye(n)
        else:
            g0 = np.diag([1.0] * (n - 1) + [-1.0])
        try:
            return Cometric(
                g0,
                perturbation=self._family(self.perturbation, (n, n)),
                first_order=self._family(self.first_order, (n,)),
                zeroth_order=self._family(self.zeroth_order, ()),
            )
        except ValueError as exc:
            raise ConfigError(f"metric: {exc}") from exc


class CutoffBlock(_Strict):
    delta: float
    sigma: float
    sigma_prime: float
    sigma_inf: float
    R: float
    gamma: float
    nu: float
    orientation: Literal["incoming", "outgoing"] = "incoming"

    def params(self) -> CutoffParams:
        return CutoffParams(self.delta, self.sigma, self.sigma_prime, self.sigma_inf, self.R, self.gamma,
                            self.nu, self.orientation)


class CutoffsBlock(_Strict):
    incoming: CutoffBlock | None = None
    outgoing: CutoffBlock | None = None
    search_R0: bool = False
    R_search: tuple[float, float] = (1.0, 256.0)
    safety: float = Field(1.25, ge=1.0)
    count: int = Field(100_000, gt=0)
    support_count: int = Field(10_000, gt=0)


class GridBlock(_Strict):
    n: int = Field(1, ge=1, le=2)
    L: float = Field(7.0, gt=0)
    N: int = 256
    h: list[float] = [0.2, 0.1, 0.05]
    margin: float = Field(0.1, ge=0, lt=1)

    def grids(self) -> list[GridSpec]:
        return [GridSpec(self.n, self.L, self.N, h, self.margin) for h in self.h]


class InitialData(_Strict):
    x: list[float]
    xi: list[float]
    t_span: tuple[float, float] = (0.0, 10.0)
    samples: int = Field(201, ge=2)


class FlowBlock(_Strict):
    R_escape: float = Field(50.0, gt=0)
    T_max: float | None = None
    null_tol: float = Field(1e-8, gt=0)
    count: int = Field(200, ge=0)
    sample_radius: float = Field(5.0, gt=0)
    include_family_orbits: bool = True
    rtol: float = 1e-9
    atol: float = 1e-11
    initial: InitialData | None = None


class CommutatorBlock(_Strict):
    rung: CutoffBlock | None = None
    rung_next: CutoffBlock | None = None
    box: tuple[float, float] = (3.0, 6.2)
    box_next: tuple[float, float] = (3.2, 6.3)
    c0_values: list[float] | None = None
    alpha_values: list[float] | None = None
    use_manifest: bool = True
    energy_states: int = Field(100, ge=0)
    coherent_states: int = Field(20, ge=0)


class CascadeBlock(_Strict):
    rungs: list[CutoffBlock] | None = None
    boxes: list[tuple[float, float]] | None = None
    L: float = 6.0
    N: int = 256
    h: list[float] = [0.2, 0.1, 0.05]
    center_x: list[float] = [3.0]
    center_xi: list[float] = [-1.0]


class ProbeBlock(_Strict):
    n: int = Field(2, ge=1, le=2)
    L: float = 10.0
    N: int = 32
    R_list: list[float] = [1.0, 1.5, 2.0, 3.0, 4.0]
    z: list[tuple[float, float]] = [(0.0, 1.0), (2.0, 0.5), (-1.0, 0.1)]
    tail_power: float = 1.0
    tail_xi: list[float] = [1.0, 0.5]
    states: int = Field(10, ge=1)
    slack: float = 0.15


class OutputBlock(_Strict):
    directory: str = "out"
    formats: list[Literal["json", "csv"]] = ["json"]


class RunConfig(_Strict):
    metric: MetricBlock
    cutoffs: CutoffsBlock = CutoffsBlock()
    grid: GridBlock = GridBlock()
    flow: FlowBlock = FlowBlock()
    commutator: CommutatorBlock = CommutatorBlock()
    cascade: CascadeBlock = CascadeBlock()
    probe: ProbeBlock = ProbeBlock()
    output: OutputBlock = OutputBlock()
    seed: int = 0

    @model_validator(mode="after")
    def _consistent(self):
        if isinstance(self.metric.perturbation, RingFamily) and self.metric.dimension != 3:
            raise ValueError("metric.perturbation: ring_trap needs dimension = 3")
        return self


def _format_error(exc: ValidationError) -> str:
    lines = []
    for err in exc.errors():
        path = ".".join(str(p) for p in err["loc"])
        lines.append(f"{path}: {err['msg']}")
    return "; ".join(lines)


def parse_config(data: dict) -> RunConfig:
    try:
        return RunConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(_format_error(exc)) from None


def load_config(path) -> RunConfig:
    """Read a TOML or JSON config file (chosen by suffix)."""
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    try:
        if path.suffix.lower() == ".json":
            data = json.loads(raw)
        else:
            data = tomllib.loads(raw.decode())
    except (ValueError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return parse_config(data)
