from __future__ import annotations
import math
from functools import cached_property
from typing import Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from divlab.core.exceptions import InvalidDistributionError
from divlab.core.extended import ExtendedReal

SUM_TOL = 1e-12


def _as_float_tuple(v) -> Tuple[float, ...]:
    return tuple(float(x) for x in np.asarray(v, dtype=float).ravel())


def _as_matrix(v) -> Tuple[Tuple[float, ...], ...]:
    rows = [np.asarray(r, dtype=float).ravel() for r in v]
    return tuple(tuple(float(x) for x in r) for r in rows)


def _readonly(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


# ---------------------------------------------------------------- distributions

class ProbVec(BaseModel):
    """Probability mass function on the alphabet {0, ..., n-1}."""

    model_config = ConfigDict(frozen=True)

    masses: Tuple[float, ...]

    @field_validator("masses", mode="before")
    @classmethod
    def coerce_masses(cls, v):
        return _as_float_tuple(v)

    @field_validator("masses")
    @classmethod
    def check_masses(cls, v: Tuple[float, ...]) -> Tuple[float, ...]:
        if len(v) < 1:
            raise ValueError("a pmf needs at least one mass")
        bad = [i for i, x in enumerate(v) if not math.isfinite(x)]
        if bad:
            raise ValueError(f"non-finite mass at index {bad[0]}")
        neg = [i for i, x in enumerate(v) if x < 0.0]
        if neg:
            raise ValueError(f"negative mass {v[neg[0]]!r} at index {neg[0]}")
        s = math.fsum(v)
        if abs(s - 1.0) > SUM_TOL:
            raise ValueError(f"masses sum to {s!r}; expected 1 within {SUM_TOL:g}")
        return v

    @classmethod
    def parse(cls, masses, label: str = "pmf") -> "ProbVec":
        """Build a ProbVec, re-raising validation failures as InvalidDistributionError."""
        try:
            return cls(masses=masses)
        except ValidationError as exc:
            msg = exc.errors()[0].get("msg", str(exc))
            raise InvalidDistributionError(f"{label}: {msg}") from exc

    @classmethod
    def uniform(cls, n: int) -> "ProbVec":
        return cls(masses=np.full(int(n), 1.0 / int(n)))

    @classmethod
    def bernoulli(cls, p: float) -> "ProbVec":
        """Bern(p) as (1-p, p): symbol 1 carries mass p."""
        return cls(masses=(1.0 - p, p))

    @property
    def n(self) -> int:
        return len(self.masses)

    @cached_property
    def array(self) -> np.ndarray:
        return _readonly(np.asarray(self.masses, dtype=float))

    @property
    def fully_supported(self) -> bool:
        return bool(np.all(self.array > 0.0))

    @property
    def p_min(self) -> float:
        return float(self.array.min())

    @property
    def p_max(self) -> float:
        return float(self.array.max())

    def sorted_desc(self) -> np.ndarray:
        return np.sort(self.array)[::-1]


class JointPMF(BaseModel):
    """Joint pmf P_XY stored as an M x K matrix (rows x, columns y)."""

    model_config = ConfigDict(frozen=True)

    matrix: Tuple[Tuple[float, ...], ...]

    @field_validator("matrix", mode="before")
    @classmethod
    def coerce_matrix(cls, v):
        return _as_matrix(v)

    @field_validator("matrix")
    @classmethod
    def check_matrix(cls, v):
        if len(v) < 1 or len(v[0]) < 1:
            raise ValueError("joint matrix must be at least 1 x 1")
        width = len(v[0])
        for i, row in enumerate(v):
            if len(row) != width:
                raise ValueError(f"row {i} has {len(row)} entries; expected {width}")
            for j, x in enumerate(row):
                if not math.isfinite(x) or x < 0.0:
                    raise ValueError(f"entry ({i}, {j}) = {x!r} is not a non-negative real")
        s = math.fsum(x for row in v for x in row)
        if abs(s - 1.0) > SUM_TOL:
            raise ValueError(f"joint masses sum to {s!r}; expected 1 within {SUM_TOL:g}")
        return v

    @classmethod
    def parse(cls, matrix, label: str = "joint") -> "JointPMF":
        try:
            return cls(matrix=matrix)
        except ValidationError as exc:
            msg = exc.errors()[0].get("msg", str(exc))
            raise InvalidDistributionError(f"{label}: {msg}") from exc

    @classmethod
    def independent(cls, px: ProbVec, py: ProbVec) -> "JointPMF":
        return cls(matrix=np.outer(px.array, py.array))

    @cached_property
    def array(self) -> np.ndarray:
        return _readonly(np.asarray(self.matrix, dtype=float))

    @property
    def M(self) -> int:
        return self.array.shape[0]

    @property
    def K(self) -> int:
        return self.array.shape[1]

    def marginal_x(self) -> ProbVec:
        return ProbVec(masses=self.array.sum(axis=1))

    def marginal_y(self) -> ProbVec:
        return ProbVec(masses=self.array.sum(axis=0))

    def conditional(self) -> np.ndarray:
        """Columns P_{X|Y}(.|y); columns with P_Y(y) = 0 are left as zeros."""
        py = self.array.sum(axis=0)
        out = np.zeros_like(self.array)
        pos = py > 0.0
        out[:, pos] = self.array[:, pos] / py[pos]
        return out


class Channel(BaseModel):
    """Row-stochastic transition matrix W_{Y|X}."""

    model_config = ConfigDict(frozen=True)

    rows: Tuple[Tuple[float, ...], ...]

    @field_validator("rows", mode="before")
    @classmethod
    def coerce_rows(cls, v):
        return _as_matrix(v)

    @field_validator("rows")
    @classmethod
    def check_rows(cls, v):
        if len(v) < 1 or len(v[0]) < 1:
            raise ValueError("channel must be at least 1 x 1")
        width = len(v[0])
        for i, row in enumerate(v):
            if len(row) != width:
                raise ValueError(f"row {i} has {len(row)} entries; expected {width}")
            if any((not math.isfinite(x)) or x < 0.0 for x in row):
                raise ValueError(f"row {i} has a negative or non-finite entry")
            s = math.fsum(row)
            if abs(s - 1.0) > SUM_TOL:
                raise ValueError(f"row {i} sums to {s!r}; expected 1 within {SUM_TOL:g}")
        for j in range(width):
            if not any(row[j] > 0.0 for row in v):
                raise ValueError(f"output column {j} has no positive entry")
        return v

    @classmethod
    def identity(cls, n: int) -> "Channel":
        return cls(rows=np.eye(int(n)))

    @classmethod
    def bsc(cls, delta: float) -> "Channel":
        return cls(rows=((1.0 - delta, delta), (delta, 1.0 - delta)))

    @cached_property
    def array(self) -> np.ndarray:
        return _readonly(np.asarray(self.rows, dtype=float))

    @property
    def M(self) -> int:
        return self.array.shape[0]

    @property
    def K(self) -> int:
        return self.array.shape[1]


# ---------------------------------------------------------------- numerics

class Interval(BaseModel):
    model_config = ConfigDict(frozen=True)

    lo: float
    hi: float
    open_lo: bool = False
    open_hi: bool = False

    @model_validator(mode="after")
    def check_order(self) -> "Interval":
        if not (math.isfinite(self.lo) and math.isfinite(self.hi)):
            raise ValueError("interval ends must be finite")
        if self.lo > self.hi:
            raise ValueError(f"interval lo={self.lo!r} exceeds hi={self.hi!r}")
        return self


class OptResult(BaseModel):
    model_config = ConfigDict(frozen=True)

    argmax: float
    max: float
    evaluations: int


# ---------------------------------------------------------------- sdpi

class XiRange(BaseModel):
    """Extremes of the likelihood ratio P/Q."""

    model_config = ConfigDict(frozen=True)

    xi1: float = Field(ge=0.0, le=1.0)
    xi2: ExtendedReal

    @model_validator(mode="after")
    def check_order(self) -> "XiRange":
        if self.xi2 < 1.0:
            raise ValueError(f"xi2={self.xi2} must be at least 1")
        return self

    @property
    def degenerate(self) -> bool:
        return self.xi1 == 1.0 and self.xi2 == 1.0


class SdpiCoefficients(BaseModel):
    model_config = ConfigDict(frozen=True)

    c_f: ExtendedReal
    e_f: ExtendedReal
    c_dual: ExtendedReal
    e_dual: ExtendedReal


class GapBounds(BaseModel):
    model_config = ConfigDict(frozen=True)

    lower_primal: ExtendedReal
    lower_dual: ExtendedReal
    upper_primal: ExtendedReal
    upper_dual: ExtendedReal
    exact_gap: ExtendedReal


class ContractionBound(BaseModel):
    model_config = ConfigDict(frozen=True)

    bound_on_ratio: ExtendedReal
    contraction_coeff_bound: ExtendedReal
    kappa: ExtendedReal
    chi2_ratio: float


class MixtureSetup(BaseModel):
    """Per-coordinate sources, channels and the mixing weight lambda."""

    model_config = ConfigDict(frozen=True)

    sources_p: Tuple[ProbVec, ...]
    sources_q: Tuple[ProbVec, ...]
    channels: Tuple[Channel, ...]
    lam: float = Field(ge=0.0, le=1.0)

    @model_validator(mode="after")
    def check_coordinates(self) -> "MixtureSetup":
        n = len(self.sources_p)
        if n < 1 or len(self.sources_q) != n or len(self.channels) != n:
            raise ValueError(
                f"need equal, positive numbers of P, Q and channels; got "
                f"{len(self.sources_p)}, {len(self.sources_q)}, {len(self.channels)}"
            )
        for i, (p, q, w) in enumerate(zip(self.sources_p, self.sources_q, self.channels)):
            if p.n != q.n or w.M != p.n:
                raise ValueError(f"coordinate {i}: alphabet sizes disagree ({p.n}, {q.n}, {w.M})")
            if not (p.fully_supported and q.fully_supported):
                raise ValueError(f"coordinate {i}: P and Q must be fully supported")
        return self

    @property
    def n(self) -> int:
        return len(self.sources_p)

    def with_lambda(self, lam: float) -> "MixtureSetup":
        return MixtureSetup(
            sources_p=self.sources_p, sources_q=self.sources_q, channels=self.channels, lam=lam
        )


class MixtureBounds(BaseModel):
    model_config = ConfigDict(frozen=True)

    lb1: ExtendedReal
    lb2: ExtendedReal
    ub1: ExtendedReal
    xi1_nl: float
    xi2_nl: float
    exact_gap: Optional[float] = None


class ProductGap(BaseModel):
    model_config = ConfigDict(frozen=True)

    exact: float
    linear_lb: float


# ---------------------------------------------------------------- f_alpha

class FAlphaBounds(BaseModel):
    model_config = ConfigDict(frozen=True)

    lb_chi2: float
    lb_kl: ExtendedReal
    ub: ExtendedReal


class DifferenceBounds(BaseModel):
    model_config = ConfigDict(frozen=True)

    lb: float
    ub: float
    ub_candidates: Tuple[float, float]


# ---------------------------------------------------------------- majorization

class RhoSimplexParams(BaseModel):
    """The set P_n(rho): fully supported pmfs on n atoms with max/min <= rho."""

    model_config = ConfigDict(frozen=True)

    n: int = Field(ge=2)
    rho: float = Field(ge=1.0)

    @field_validator("rho")
    @classmethod
    def finite_rho(cls, v: float) -> float:
        if not math.isfinite(v):
            raise ValueError("rho must be finite")
        return v

    @property
    def gamma_interval(self) -> Tuple[float, float]:
        return 1.0 / (1.0 + (self.n - 1) * self.rho), 1.0 / self.n

    def contains(self, p: ProbVec, tol: float = 1e-12) -> bool:
        if p.n != self.n or not p.fully_supported:
            return False
        return p.p_max <= self.rho * p.p_min * (1.0 + tol)


class QBeta(BaseModel):
    model_config = ConfigDict(frozen=True)

    params: RhoSimplexParams
    beta: float
    i_beta: int
    masses: ProbVec


class MajorizationReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    holds: bool
    first_violated_k: Optional[int] = None
    gaps: Tuple[float, ...]


class GapTriple(BaseModel):
    """Lower bound, exact value and upper bound of one difference."""

    model_config = ConfigDict(frozen=True)

    lb: ExtendedReal
    exact: float
    ub: ExtendedReal


class Optimum(BaseModel):
    model_config = ConfigDict(frozen=True)

    value: float
    beta_star: float


class FiniteNBounds(BaseModel):
    model_config = ConfigDict(frozen=True)

    lb: float
    ub: float


class PhiBounds(BaseModel):
    model_config = ConfigDict(frozen=True)

    ub1: float
    ub2: float
    ub3: float


class RhoThresholds(BaseModel):
    model_config = ConfigDict(frozen=True)

    exact: float
    simple: float


class CurvatureExtras(BaseModel):
    model_config = ConfigDict(frozen=True)

    conv_rate_n: float
    k_f_estimated: bool
    rho_inf_limit: ExtendedReal
    conv_rate_rho: ExtendedReal
    m_lower: float
    divergence: float
    m_upper: ExtendedReal
    m_upper_simplex: ExtendedReal
    rho_budget: Optional[float] = None


class TsallisGap(BaseModel):
    model_config = ConfigDict(frozen=True)

    L: float
    U: float
    exact: float


class VariationalCheck(BaseModel):
    model_config = ConfigDict(frozen=True)

    lhs: float
    rhs: ExtendedReal
    holds: bool
    achieving_gap: Optional[float] = None


# ---------------------------------------------------------------- list decoding

class ListDecoder(BaseModel):
    """Per-y lists of guesses; `size` is set for fixed-size decoders."""

    model_config = ConfigDict(frozen=True)

    lists: Tuple[Tuple[int, ...], ...]
    alphabet_size: int = Field(ge=2)
    size: Optional[int] = None

    @model_validator(mode="after")
    def check_lists(self) -> "ListDecoder":
        for y, lst in enumerate(self.lists):
            if len(lst) == 0:
                raise ValueError(f"list for y={y} is empty")
            if len(set(lst)) != len(lst):
                raise ValueError(f"list for y={y} repeats an element")
            if min(lst) < 0 or max(lst) >= self.alphabet_size:
                raise ValueError(f"list for y={y} has an index outside 0..{self.alphabet_size - 1}")
        if self.size is not None:
            if not 1 <= self.size < self.alphabet_size:
                raise ValueError(f"fixed list size {self.size} must be in [1, {self.alphabet_size - 1}]")
            if any(len(lst) != self.size for lst in self.lists):
                raise ValueError(f"fixed-size decoder needs every list of size {self.size}")
        return self

    @property
    def sizes(self) -> Tuple[int, ...]:
        return tuple(len(lst) for lst in self.lists)


class ErrorProbReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    p_error: float = Field(ge=0.0, le=1.0 + SUM_TOL)
    per_y: Tuple[float, ...]


class GeneralizedFano(BaseModel):
    model_config = ConfigDict(frozen=True)

    lhs: ExtendedReal
    rhs: ExtendedReal


class AhlswedeKornerBounds(BaseModel):
    model_config = ConfigDict(frozen=True)

    conditional_entropy: float
    h_bound_general: float
    h_bound_maxN: float
    implied_PL_lower: float
    implied_PL_lower_maxN: float


class VariableListBound(BaseModel):
    model_config = ConfigDict(frozen=True)

    bound: float
    gamma_star: float
    equality_diagnosis: bool


# ---------------------------------------------------------------- tunstall

class SourceModel(BaseModel):
    """Memoryless source over D >= 2 symbols with full support."""

    model_config = ConfigDict(frozen=True)

    pmf: ProbVec

    @field_validator("pmf")
    @classmethod
    def check_source(cls, v: ProbVec) -> ProbVec:
        if v.n < 2:
            raise ValueError("a source needs at least two symbols")
        if not v.fully_supported:
            raise ValueError("source pmf must be fully supported")
        return v

    @property
    def D(self) -> int:
        return self.pmf.n

    @property
    def p_min(self) -> float:
        return self.pmf.p_min

    @property
    def rho(self) -> float:
        return 1.0 / self.pmf.p_min


class TunstallLeaf(BaseModel):
    model_config = ConfigDict(frozen=True)

    word: Tuple[int, ...]
    probability: float

    @property
    def depth(self) -> int:
        return len(self.word)

    def label(self, sep: str = "") -> str:
        return sep.join(str(s) for s in self.word)


class TunstallTree(BaseModel):
    """Complete D-ary parse tree; leaves kept in lexicographic word order."""

    model_config = ConfigDict(frozen=True)

    source: SourceModel
    leaves: Tuple[TunstallLeaf, ...]

    @model_validator(mode="after")
    def check_tree(self) -> "TunstallTree":
        d = self.source.D
        if (len(self.leaves) - 1) % (d - 1) != 0:
            raise ValueError(f"{len(self.leaves)} leaves is not 1 + k*(D-1) for D={d}")
        s = math.fsum(leaf.probability for leaf in self.leaves)
        if abs(s - 1.0) > 1e-9:
            raise ValueError(f"leaf probabilities sum to {s!r}")
        return self

    @property
    def n(self) -> int:
        return len(self.leaves)

    def leaf_pmf(self) -> ProbVec:
        p = np.array([leaf.probability for leaf in self.leaves])
        return ProbVec(masses=p / p.sum())

    def expected_length(self) -> float:
        return math.fsum(leaf.probability * leaf.depth for leaf in self.leaves)


class ClosenessBounds(BaseModel):
    model_config = ConfigDict(frozen=True)

    finite_n_bound: float
    asymptotic_bound: float


class IntegralCheck(BaseModel):
    model_config = ConfigDict(frozen=True)

    direct: ExtendedReal
    integral: Optional[float] = None
    abs_gap: Optional[float] = None
    skipped: bool = False
    note: Optional[str] = None


class RateGuarantee(BaseModel):
    model_config = ConfigDict(frozen=True)

    d: float
    p_min_threshold_exact: float
    p_min_threshold_simple: float
    rate_upper_bound: ExtendedReal
    guarantee_holds: bool


# ---------------------------------------------------------------- cli

class RunConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    command: str
    inputs: Tuple[str, ...] = ()
    out: Optional[str] = None
    log_base: Literal["e", "2"] = "e"
    grid: Optional[Tuple[float, ...]] = None
    seed: int = Field(default=0, ge=0, lt=2**64)
    workers: int = Field(default=1, ge=1)
    audit: Optional[str] = None

    @field_validator("grid")
    @classmethod
    def check_grid(cls, v: Optional[Tuple[float, ...]]) -> Optional[Tuple[float, ...]]:
        if v is None:
            return v
        if len(v) == 0:
            raise ValueError("grid must be non-empty")
        if any(b <= a for a, b in zip(v, v[1:])):
            raise ValueError("grid must be strictly increasing")
        return v

    @property
    def log_scale(self) -> float:
        """Multiplier from nats to the presentation base."""
        return 1.0 if self.log_base == "e" else 1.0 / math.log(2.0)
