"""Trial summary records shared by the MAP, analysis and simulation modules."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Union

from .conjmix import Family


class Endpoint(str, enum.Enum):
    BINOMIAL = "binomial"
    NORMAL = "normal"
    TTE = "tte"

    @property
    def family(self) -> Family:
        return {
            Endpoint.BINOMIAL: Family.BETA,
            Endpoint.NORMAL: Family.NORMAL,
            Endpoint.TTE: Family.GAMMA,
        }[self]


@dataclass(frozen=True)
class Binomial:
    """Responders out of n."""

    responders: int
    n: int

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"binomial size must be >= 1, got {self.n}")
        if not 0 <= self.responders <= self.n:
            raise ValueError(f"responders {self.responders} outside 0..{self.n}")

    endpoint = Endpoint.BINOMIAL


@dataclass(frozen=True)
class NormalMean:
    """Sample mean of n observations with known sampling SD."""

    mean: float
    n: int
    sd: float

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"sample size must be >= 1, got {self.n}")
        if not (self.sd > 0 and math.isfinite(self.sd)):
            raise ValueError(f"sd must be positive, got {self.sd}")
        if not math.isfinite(self.mean):
            raise ValueError("mean must be finite")

    endpoint = Endpoint.NORMAL

    @property
    def se(self) -> float:
        return self.sd / math.sqrt(self.n)


@dataclass(frozen=True)
class Tte:
    """Event count over a total exposure (years at risk)."""

    events: int
    exposure: float

    def __post_init__(self):
        if self.events < 0:
            raise ValueError(f"events must be >= 0, got {self.events}")
        if not (self.exposure > 0 and math.isfinite(self.exposure)):
            raise ValueError(f"exposure must be positive, got {self.exposure}")

    endpoint = Endpoint.TTE


Payload = Union[Binomial, NormalMean, Tte]


@dataclass(frozen=True)
class TrialRecord:
    study_id: str
    payload: Payload

    @property
    def endpoint(self) -> Endpoint:
        return self.payload.endpoint


@dataclass(frozen=True)
class Design:
    """Current-trial size without an observation: n (and sd) or exposure."""

    endpoint: Endpoint
    n: int | None = None
    sd: float | None = None
    exposure: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "endpoint", Endpoint(self.endpoint))
        if self.endpoint is Endpoint.TTE:
            if not (self.exposure is not None and self.exposure > 0):
                raise ValueError("tte design needs a positive exposure")
        else:
            if not (self.n is not None and self.n >= 1):
                raise ValueError(f"{self.endpoint.value} design needs n >= 1")
            if self.endpoint is Endpoint.NORMAL and not (self.sd is not None and self.sd > 0):
                raise ValueError("normal design needs a positive sd")

    @classmethod
    def of(cls, data: Payload | "Design") -> "Design":
        if isinstance(data, Design):
            return data
        if isinstance(data, Binomial):
            return cls(Endpoint.BINOMIAL, n=data.n)
        if isinstance(data, NormalMean):
            return cls(Endpoint.NORMAL, n=data.n, sd=data.sd)
        return cls(Endpoint.TTE, exposure=data.exposure)

    def observe(self, value) -> Payload:
        """Current data holding ``value`` (count or sample mean) under this design."""
        if self.endpoint is Endpoint.BINOMIAL:
            return Binomial(int(value), self.n)
        if self.endpoint is Endpoint.NORMAL:
            return NormalMean(float(value), self.n, self.sd)
        return Tte(int(value), self.exposure)


def observed_value(data: Payload):
    """The statistic compared against the prior predictive."""
    if isinstance(data, Binomial):
        return data.responders
    if isinstance(data, NormalMean):
        return data.mean
    return data.events
