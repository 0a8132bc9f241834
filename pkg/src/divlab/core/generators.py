"""Convex generators f with f(1) = 0 and the named catalog."""
from __future__ import annotations
import math
from functools import lru_cache
from typing import Callable, Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator
from scipy.special import xlogy

from divlab.core.exceptions import GeneratorClassError, NumericalError, ParameterError
from divlab.core.extended import ExtendedReal
from divlab.core.numerics import central_difference

Fn = Callable[[np.ndarray], np.ndarray]
Monotonicity = Literal["increasing", "decreasing", "unknown"]

CATALOG_KINDS = (
    "kl", "kl_reverse", "chi2_pearson", "chi2_neyman", "total_variation",
    "hellinger2", "alpha", "e_gamma", "degroot",
)

_CONVEXITY_GRID = np.logspace(-6, 6, 241)


def _apply(fn: Fn, t):
    scalar = np.ndim(t) == 0
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        out = np.asarray(fn(np.asarray(t, dtype=float)), dtype=float)
    if scalar:
        return float(out.reshape(-1)[0]) if out.size else float("nan")
    return out


class Generator(BaseModel):
    """Convex f on (0, inf) with f(1) = 0, plus its boundary limits.

    `deriv1`/`deriv2` are analytic derivatives when known; otherwise central
    differences are used. `kinks` lists points where f is not differentiable
    (f'' is then a point mass there and is reported as 0 elsewhere).
    """

    model_config = ConfigDict(frozen=True)

    name: str
    fn: Fn
    deriv1: Optional[Fn] = None
    deriv2: Optional[Fn] = None
    f_at_zero: ExtendedReal
    slope_at_infinity: ExtendedReal
    d2_monotonicity: Monotonicity = "unknown"
    t3d2_monotonicity: Monotonicity = "unknown"
    kinks: Tuple[float, ...] = ()

    @model_validator(mode="after")
    def check_generator(self) -> "Generator":
        at_one = self.eval(1.0)
        if at_one != 0.0:
            raise GeneratorClassError(f"{self.name}: f(1) = {at_one!r}; expected exactly 0")
        t = _CONVEXITY_GRID
        d2 = self.d2(t)
        if self.deriv2 is not None:
            tol = 1e-9 * (1.0 + np.abs(d2))
        else:
            tol = 1e-6 * (1.0 + np.abs(self.eval(t)) / np.maximum(1.0, t) ** 2)
        bad = np.isfinite(d2) & (d2 < -tol)
        if bad.any():
            t_bad = float(t[np.argmax(bad)])
            raise GeneratorClassError(
                f"{self.name}: f''({t_bad:g}) = {float(d2[np.argmax(bad)]):g} < 0; f is not convex"
            )
        return self

    # evaluation -----------------------------------------------------------

    def eval(self, t):
        out = _apply(self.fn, t)
        if np.any(np.isnan(out)):
            raise NumericalError(f"generator {self.name} returned NaN")
        return out

    def d1(self, t):
        if self.deriv1 is not None:
            return _apply(self.deriv1, t)
        return _apply(lambda s: central_difference(self.fn, s, order=1), t)

    def d2(self, t):
        if self.deriv2 is not None:
            return _apply(self.deriv2, t)
        return _apply(lambda s: central_difference(self.fn, s, order=2), t)

    def t3d2(self, t):
        t = np.asarray(t, dtype=float) if np.ndim(t) else float(t)
        return t ** 3 * self.d2(t)

    @property
    def smooth(self) -> bool:
        return not self.kinks

    def limits_consistent(self, tol: float = 1e-6, t0: float = 1e-14) -> bool:
        """Whether f(t0) agrees with f_at_zero (or grows large when it is +inf)."""
        v = self.eval(t0)
        if self.f_at_zero.infinite:
            return v > 1.0 / tol ** 0.25
        return abs(v - self.f_at_zero.value) <= tol * max(1.0, abs(self.f_at_zero.value))


def _ext(x: float) -> ExtendedReal:
    return ExtendedReal.inf() if x == math.inf else ExtendedReal(value=x)


# ---------------------------------------------------------------- catalog

@lru_cache(maxsize=None)
def kl() -> Generator:
    return Generator(
        name="kl",
        fn=lambda t: xlogy(t, t) + 1.0 - t,
        deriv1=np.log,
        deriv2=lambda t: 1.0 / t,
        f_at_zero=_ext(1.0),
        slope_at_infinity=_ext(math.inf),
        d2_monotonicity="decreasing",
        t3d2_monotonicity="increasing",
    )


@lru_cache(maxsize=None)
def kl_reverse() -> Generator:
    return Generator(
        name="kl_reverse",
        fn=lambda t: t - 1.0 - np.log(t),
        deriv1=lambda t: 1.0 - 1.0 / t,
        deriv2=lambda t: 1.0 / (t * t),
        f_at_zero=_ext(math.inf),
        slope_at_infinity=_ext(1.0),
        d2_monotonicity="decreasing",
        t3d2_monotonicity="increasing",
    )


@lru_cache(maxsize=None)
def chi2_pearson() -> Generator:
    return Generator(
        name="chi2_pearson",
        fn=lambda t: (t - 1.0) ** 2,
        deriv1=lambda t: 2.0 * (t - 1.0),
        deriv2=lambda t: np.full_like(t, 2.0),
        f_at_zero=_ext(1.0),
        slope_at_infinity=_ext(math.inf),
        d2_monotonicity="increasing",
        t3d2_monotonicity="increasing",
    )


@lru_cache(maxsize=None)
def chi2_neyman() -> Generator:
    return Generator(
        name="chi2_neyman",
        fn=lambda t: (t - 1.0) ** 2 / t,
        deriv1=lambda t: 1.0 - 1.0 / (t * t),
        deriv2=lambda t: 2.0 / t ** 3,
        f_at_zero=_ext(math.inf),
        slope_at_infinity=_ext(1.0),
        d2_monotonicity="decreasing",
        t3d2_monotonicity="increasing",
    )


@lru_cache(maxsize=None)
def total_variation() -> Generator:
    """f(t) = |t - 1|, so D_f(P||Q) = sum |P - Q|."""
    return Generator(
        name="total_variation",
        fn=lambda t: np.abs(t - 1.0),
        deriv1=lambda t: np.sign(t - 1.0),
        deriv2=np.zeros_like,
        f_at_zero=_ext(1.0),
        slope_at_infinity=_ext(1.0),
        d2_monotonicity="increasing",
        t3d2_monotonicity="increasing",
        kinks=(1.0,),
    )


@lru_cache(maxsize=None)
def hellinger2() -> Generator:
    """Squared Hellinger distance, f(t) = (1 - sqrt(t))^2 / 2."""
    return Generator(
        name="hellinger2",
        fn=lambda t: 0.5 * (1.0 - np.sqrt(t)) ** 2,
        deriv1=lambda t: 0.5 * (1.0 - 1.0 / np.sqrt(t)),
        deriv2=lambda t: 0.25 * t ** -1.5,
        f_at_zero=_ext(0.5),
        slope_at_infinity=_ext(0.5),
        d2_monotonicity="decreasing",
        t3d2_monotonicity="increasing",
    )


@lru_cache(maxsize=256)
def alpha_generator(alpha: float) -> Generator:
    """u_alpha(t) = (t^a - a(t - 1) - 1) / (a(a - 1)), extended continuously at a in {0, 1}."""
    a = float(alpha)
    if not math.isfinite(a):
        raise ParameterError(f"alpha must be finite, got {alpha!r}")
    if a == 1.0:
        base = kl()
        return base.model_copy(update={"name": "alpha(1)"})
    if a == 0.0:
        base = kl_reverse()
        return base.model_copy(update={"name": "alpha(0)"})

    def fn(t):
        return (np.expm1(a * np.log(t)) - a * (t - 1.0)) / (a * (a - 1.0))

    f0 = 1.0 / a if a > 0.0 else math.inf
    slope = math.inf if a > 1.0 else 1.0 / (1.0 - a)
    return Generator(
        name=f"alpha({a:g})",
        fn=fn,
        deriv1=lambda t: np.expm1((a - 1.0) * np.log(t)) / (a - 1.0),
        deriv2=lambda t: t ** (a - 2.0),
        f_at_zero=_ext(f0),
        slope_at_infinity=_ext(slope),
        d2_monotonicity="increasing" if a >= 2.0 else "decreasing",
        t3d2_monotonicity="increasing" if a >= -1.0 else "decreasing",
    )


@lru_cache(maxsize=256)
def e_gamma(gamma: float) -> Generator:
    """E_gamma divergence, f(t) = (t - gamma)^+ for gamma >= 1."""
    g = float(gamma)
    if not (math.isfinite(g) and g >= 1.0):
        raise ParameterError(f"E_gamma needs gamma >= 1, got {gamma!r}")
    return Generator(
        name=f"e_gamma({g:g})",
        fn=lambda t: np.maximum(t - g, 0.0),
        deriv1=lambda t: (t > g).astype(float),
        deriv2=np.zeros_like,
        f_at_zero=_ext(0.0),
        slope_at_infinity=_ext(1.0),
        d2_monotonicity="increasing",
        t3d2_monotonicity="increasing",
        kinks=(g,),
    )


@lru_cache(maxsize=256)
def degroot(omega: float) -> Generator:
    """DeGroot statistical information of order omega."""
    w = float(omega)
    if not (0.0 < w < 1.0):
        raise ParameterError(f"DeGroot order needs omega in (0, 1), got {omega!r}")
    m = min(w, 1.0 - w)
    return Generator(
        name=f"degroot({w:g})",
        fn=lambda t: m - np.minimum(w, 1.0 - w * t),
        deriv1=lambda t: w * (t > (1.0 - w) / w),
        deriv2=np.zeros_like,
        f_at_zero=_ext(m - w),
        slope_at_infinity=_ext(w),
        d2_monotonicity="increasing",
        t3d2_monotonicity="increasing",
        kinks=((1.0 - w) / w,),
    )


def catalog(kind: str, param: Optional[float] = None) -> Generator:
    """Catalog lookup; `param` is alpha, gamma or omega for the parametric kinds."""
    simple = {
        "kl": kl,
        "kl_reverse": kl_reverse,
        "chi2_pearson": chi2_pearson,
        "chi2_neyman": chi2_neyman,
        "total_variation": total_variation,
        "hellinger2": hellinger2,
    }
    if kind in simple:
        return simple[kind]()
    parametric = {"alpha": alpha_generator, "e_gamma": e_gamma, "degroot": degroot}
    if kind in parametric:
        if param is None:
            raise ParameterError(f"divergence kind {kind!r} needs a parameter")
        return parametric[kind](float(param))
    raise ParameterError(f"unknown divergence kind {kind!r}. Expected: {list(CATALOG_KINDS)}")


def dual_generator(f: Generator) -> Generator:
    """f*(t) = t f(1/t), so that D_f(P||Q) = D_{f*}(Q||P)."""
    flip = {"increasing": "decreasing", "decreasing": "increasing", "unknown": "unknown"}
    name = f.name[:-1] if f.name.endswith("*") else f.name + "*"
    return Generator(
        name=name,
        fn=lambda t: t * f.eval(1.0 / t),
        deriv1=lambda t: f.eval(1.0 / t) - f.d1(1.0 / t) / t,
        deriv2=lambda t: f.d2(1.0 / t) / t ** 3,
        f_at_zero=f.slope_at_infinity,
        slope_at_infinity=f.f_at_zero,
        d2_monotonicity=flip[f.t3d2_monotonicity],
        t3d2_monotonicity=flip[f.d2_monotonicity],
        kinks=tuple(sorted(1.0 / k for k in f.kinks)),
    )
