from __future__ import annotations
import math
from functools import total_ordering
from typing import Any, Union

from pydantic import BaseModel, ConfigDict, model_validator

from divlab.core.exceptions import NumericalError, ParameterError

Number = Union[int, float]


@total_ordering
class ExtendedReal(BaseModel):
    """Real number extended with +inf.

    Sums and non-negative scalings saturate at +inf, and +inf compares greater
    than every finite value. 0 * inf is 0 (the measure-theoretic convention used
    by f-divergence sums). Negative infinity is not representable.
    """

    model_config = ConfigDict(frozen=True)

    value: float = 0.0
    infinite: bool = False

    @model_validator(mode="before")
    @classmethod
    def _normalize(cls, data: Any) -> Any:
        if not isinstance(data, dict):
            return data
        v = data.get("value", 0.0)
        v = float(v)
        if math.isnan(v):
            raise NumericalError("ExtendedReal cannot hold NaN")
        if v == -math.inf:
            raise ParameterError("ExtendedReal cannot hold -inf")
        if data.get("infinite") or v == math.inf:
            return {"value": 0.0, "infinite": True}
        return {"value": v, "infinite": False}

    @classmethod
    def of(cls, x: "ExtendedReal | Number") -> "ExtendedReal":
        if isinstance(x, ExtendedReal):
            return x
        return cls(value=float(x))

    @classmethod
    def inf(cls) -> "ExtendedReal":
        return cls(infinite=True)

    @property
    def is_finite(self) -> bool:
        return not self.infinite

    def __float__(self) -> float:
        return math.inf if self.infinite else self.value

    def __add__(self, other: "ExtendedReal | Number") -> "ExtendedReal":
        o = ExtendedReal.of(other)
        if self.infinite or o.infinite:
            return ExtendedReal.inf()
        return ExtendedReal(value=self.value + o.value)

    __radd__ = __add__

    def __sub__(self, other: "ExtendedReal | Number") -> "ExtendedReal":
        o = ExtendedReal.of(other)
        if o.infinite:
            raise ParameterError("difference with an infinite subtrahend is undefined")
        if self.infinite:
            return self
        return ExtendedReal(value=self.value - o.value)

    def __mul__(self, other: "ExtendedReal | Number") -> "ExtendedReal":
        o = ExtendedReal.of(other)
        if self.infinite or o.infinite:
            finite_part = o.value if self.infinite else self.value
            if (self.infinite and o.infinite) or finite_part > 0:
                return ExtendedReal.inf()
            if finite_part == 0:
                return ExtendedReal(value=0.0)
            raise ParameterError("cannot scale +inf by a negative factor")
        return ExtendedReal(value=self.value * o.value)

    __rmul__ = __mul__

    def __eq__(self, other: object) -> bool:
        if isinstance(other, (int, float)):
            other = ExtendedReal(value=float(other)) if not math.isnan(other) else None
        if not isinstance(other, ExtendedReal):
            return NotImplemented
        if self.infinite or other.infinite:
            return self.infinite and other.infinite
        return self.value == other.value

    def __lt__(self, other: "ExtendedReal | Number") -> bool:
        o = ExtendedReal.of(other)
        if self.infinite:
            return False
        if o.infinite:
            return True
        return self.value < o.value

    def __hash__(self) -> int:
        return hash((self.infinite, 0.0 if self.infinite else self.value))

    def clamp_nonneg(self) -> "ExtendedReal":
        """Round tiny negative finite parts (floating residue) up to zero."""
        if self.infinite or self.value >= 0.0:
            return self
        return ExtendedReal(value=0.0)

    def __str__(self) -> str:
        return "inf" if self.infinite else repr(self.value)


INF = ExtendedReal.inf()
ZERO = ExtendedReal(value=0.0)
