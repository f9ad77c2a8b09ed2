"""A small trace-based probabilistic programming runtime.

A model is an ordinary function ``model(rt)`` that makes its random choices
through the runtime handle::

    def collider(rt):
        u = rt.sample("u", Bernoulli(0.5))
        x = rt.sample("x", Delta(u))
        return rt.sample("y", Delta(x ^ u))

The same function is used for forward simulation (``run_model``) and for
inference (``importance_query``, ``enumerate_query``). Interventions replace
a site's distribution with a point mass and contribute nothing to the trace
weight; conditions fix a site's value and add its log-density to the weight.
Sampled sites are drawn from the (post-intervention) prior, which makes the
importance sampler a likelihood-weighting estimator.
"""
from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from types import MappingProxyType
from typing import Any, Callable, Iterable, Mapping, NamedTuple, Sequence, Union

import numpy as np

from .seeding import rng_for

SiteName = tuple  # tuple[str, ...]
NameLike = Union[str, Sequence[str]]

SAMPLED = "sampled"
OBSERVED = "observed"
INTERVENED = "intervened"


class PPLError(Exception):
    pass


class DuplicateSite(PPLError):
    pass


class ConflictingHandler(PPLError):
    pass


class DegenerateWeights(PPLError):
    pass


class NotEnumerable(PPLError):
    pass


class UnusedHandlerWarning(UserWarning):
    pass


def site_name(name: NameLike) -> SiteName:
    """Normalise ``"a/b/c"`` or ``("a", "b", "c")`` to a tuple of segments."""
    if isinstance(name, str):
        parts = tuple(name.split("/"))
    else:
        parts = tuple(str(p) for p in name)
    if not parts or any(p == "" for p in parts):
        raise ValueError(f"invalid site name: {name!r}")
    return parts


def format_site(name: SiteName) -> str:
    return "/".join(name)


# --------------------------------------------------------------------------
# Distributions
# --------------------------------------------------------------------------

_LOG_2PI = math.log(2.0 * math.pi)


class Distribution:
    def sample(self, rng: np.random.Generator) -> Any:
        raise NotImplementedError

    def log_prob(self, value) -> float:
        raise NotImplementedError

    def enumerate_support(self) -> list[tuple[Any, float]]:
        """Finite support as ``(value, log_prob)`` pairs."""
        raise NotEnumerable(f"{type(self).__name__} has continuous support")


def _normal_logpdf(x: float, mean: float, sigma: float) -> float:
    if sigma == 0.0:
        return 0.0 if x == mean else -math.inf
    z = (x - mean) / sigma
    return -0.5 * (z * z + _LOG_2PI) - math.log(sigma)


@dataclass(frozen=True)
class GaussianScalar(Distribution):
    mean: float
    sigma: float

    def __post_init__(self):
        if not self.sigma >= 0.0:
            raise ValueError(f"sigma must be >= 0, got {self.sigma}")

    def sample(self, rng):
        if self.sigma == 0.0:
            return float(self.mean)
        return float(self.mean + self.sigma * rng.standard_normal())

    def log_prob(self, value):
        return _normal_logpdf(float(value), self.mean, self.sigma)


@dataclass(frozen=True)
class GaussianIsotropic3(Distribution):
    mean: tuple[float, float, float]
    sigma: float

    def __post_init__(self):
        if len(self.mean) != 3:
            raise ValueError("GaussianIsotropic3 needs a 3-vector mean")
        if not self.sigma >= 0.0:
            raise ValueError(f"sigma must be >= 0, got {self.sigma}")

    def sample(self, rng):
        mean = np.asarray(self.mean, dtype=float)
        if self.sigma == 0.0:
            return mean.copy()
        return mean + self.sigma * rng.standard_normal(3)

    def log_prob(self, value):
        v = np.asarray(value, dtype=float)
        return sum(_normal_logpdf(v[i], self.mean[i], self.sigma) for i in range(3))


@dataclass(frozen=True)
class Bernoulli(Distribution):
    p: float

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(f"Bernoulli p must lie in [0, 1], got {self.p}")

    def sample(self, rng):
        return int(rng.random() < self.p)

    def log_prob(self, value):
        if value == 1:
            return math.log(self.p) if self.p > 0 else -math.inf
        if value == 0:
            return math.log1p(-self.p) if self.p < 1 else -math.inf
        return -math.inf

    def enumerate_support(self):
        out = []
        if self.p < 1.0:
            out.append((0, math.log1p(-self.p)))
        if self.p > 0.0:
            out.append((1, math.log(self.p)))
        return out


@dataclass(frozen=True)
class Categorical(Distribution):
    weights: tuple[float, ...]

    def __post_init__(self):
        w = tuple(float(x) for x in self.weights)
        if not w or any(x < 0 for x in w) or sum(w) <= 0:
            raise ValueError("Categorical weights must be non-negative with positive sum")
        object.__setattr__(self, "weights", w)

    @property
    def probs(self) -> tuple[float, ...]:
        total = math.fsum(self.weights)
        return tuple(x / total for x in self.weights)

    def sample(self, rng):
        cdf = np.cumsum(self.probs)
        idx = int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"))
        return min(idx, len(self.weights) - 1)

    def log_prob(self, value):
        i = int(value)
        if i != value or not 0 <= i < len(self.weights):
            return -math.inf
        p = self.probs[i]
        return math.log(p) if p > 0 else -math.inf

    def enumerate_support(self):
        return [(i, math.log(p)) for i, p in enumerate(self.probs) if p > 0]


@dataclass(frozen=True)
class UniformContinuous(Distribution):
    lo: float
    hi: float

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValueError(f"need lo < hi, got [{self.lo}, {self.hi}]")

    def sample(self, rng):
        return float(self.lo + (self.hi - self.lo) * rng.random())

    def log_prob(self, value):
        if self.lo <= float(value) <= self.hi:
            return -math.log(self.hi - self.lo)
        return -math.inf


@dataclass(frozen=True, eq=False)
class Delta(Distribution):
    value: Any

    def sample(self, rng):
        return self.value

    def log_prob(self, value):
        if isinstance(self.value, np.ndarray) or isinstance(value, np.ndarray):
            same = np.array_equal(np.asarray(value), np.asarray(self.value))
        else:
            same = value == self.value
        return 0.0 if same else -math.inf

    def enumerate_support(self):
        return [(self.value, 0.0)]


# --------------------------------------------------------------------------
# Traces and the runtime handle
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Site:
    name: SiteName
    dist: Distribution
    value: Any
    role: str
    log_weight: float


@dataclass(frozen=True)
class Trace:
    """One completed execution of a model. Immutable once built."""

    sites: Mapping[SiteName, Site]
    log_weight: float
    return_value: Any
    metadata: Mapping[str, Any]

    def __getitem__(self, name: NameLike) -> Any:
        return self.sites[site_name(name)].value

    def __contains__(self, name: NameLike) -> bool:
        return site_name(name) in self.sites

    def site(self, name: NameLike) -> Site:
        return self.sites[site_name(name)]

    def names(self, role: str | None = None) -> list[SiteName]:
        return [n for n, s in self.sites.items() if role is None or s.role == role]


def _normalize_handlers(assignments: Mapping | None) -> dict[SiteName, Any]:
    if not assignments:
        return {}
    return {site_name(k): v for k, v in assignments.items()}


class Runtime:
    """Handle passed to a model; records every site it visits."""

    def __init__(self, rng: np.random.Generator | None, interventions: Mapping, conditions: Mapping):
        self.rng = rng
        self._interventions = interventions
        self._conditions = conditions
        self._sites: dict[SiteName, Site] = {}
        self._log_weight = 0.0

    def sample(self, name: NameLike, dist: Distribution) -> Any:
        key = site_name(name)
        if key in self._sites:
            raise DuplicateSite(f"site {format_site(key)!r} visited twice in one execution")
        if key in self._interventions:
            value = self._interventions[key]
            site = Site(key, Delta(value), value, INTERVENED, 0.0)
        elif key in self._conditions:
            value = self._conditions[key]
            lw = float(dist.log_prob(value))
            site = Site(key, dist, value, OBSERVED, lw)
            self._log_weight += lw
        else:
            value = self._draw(key, dist)
            site = Site(key, dist, value, SAMPLED, 0.0)
        self._sites[key] = site
        return site.value

    def deterministic(self, name: NameLike, value: Any) -> Any:
        """Record a computed node; an intervention on ``name`` overrides it."""
        return self.sample(name, Delta(value))

    def _draw(self, name: SiteName, dist: Distribution) -> Any:
        return dist.sample(self.rng)

    def finish(self, return_value: Any) -> Trace:
        handled = list(self._interventions) + list(self._conditions)
        unused = sorted(format_site(n) for n in handled if n not in self._sites)
        meta = {"unused_handlers": tuple(unused)} if unused else {}
        return Trace(
            sites=MappingProxyType(dict(self._sites)),
            log_weight=self._log_weight,
            return_value=return_value,
            metadata=MappingProxyType(meta),
        )


Model = Callable[[Runtime], Any]


def _check_handlers(interventions, conditions):
    iv = _normalize_handlers(interventions)
    cd = _normalize_handlers(conditions)
    both = sorted(format_site(n) for n in set(iv) & set(cd))
    if both:
        raise ConflictingHandler(f"sites both intervened and conditioned: {both}")
    return iv, cd


def run_model(
    model: Model,
    interventions: Mapping | None = None,
    conditions: Mapping | None = None,
    rng_seed: int | np.random.Generator = 0,
) -> Trace:
    """Execute ``model`` once under the given handlers and return its trace."""
    iv, cd = _check_handlers(interventions, conditions)
    rng = rng_seed if isinstance(rng_seed, np.random.Generator) else rng_for(rng_seed)
    rt = Runtime(rng, iv, cd)
    return rt.finish(model(rt))


class QueryResult(NamedTuple):
    estimate: float
    effective_sample_size: float


def _weighted_value(model, iv, cd, query, seed, index):
    rt = Runtime(rng_for(seed, index), iv, cd)
    trace = rt.finish(model(rt))
    return trace.log_weight, float(query(trace)), trace.metadata.get("unused_handlers", ())


def importance_query(
    model: Model,
    query: Callable[[Trace], float],
    n_samples: int,
    interventions: Mapping | None = None,
    conditions: Mapping | None = None,
    rng_seed: int = 0,
    workers: int = 1,
) -> QueryResult:
    """Self-normalised likelihood-weighted estimate of ``E[query]``.

    Sample ``i`` runs on its own stream derived from ``(rng_seed, i)``, so the
    result does not depend on ``workers``.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    iv, cd = _check_handlers(interventions, conditions)

    def one(i):
        return _weighted_value(model, iv, cd, query, rng_seed, i)

    if workers > 1 and n_samples > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(one, range(n_samples)))
    else:
        rows = [one(i) for i in range(n_samples)]

    if rows[0][2]:
        warnings.warn(f"handlers never reached a site: {list(rows[0][2])}", UnusedHandlerWarning, stacklevel=2)
    log_w = np.array([r[0] for r in rows], dtype=float)
    values = np.array([r[1] for r in rows], dtype=float)
    return _normalize(log_w, values)


def _normalize(log_w: np.ndarray, values: np.ndarray) -> QueryResult:
    top = log_w.max()
    if not np.isfinite(top):
        raise DegenerateWeights("every sample has zero weight; the conditioning event looks impossible")
    w = np.exp(log_w - top)
    total = w.sum()
    ess = float(total * total / np.dot(w, w))
    if len(w) > 1 and ess < 1.0 + 1e-9:
        raise DegenerateWeights(f"effective sample size {ess:.6g} from {len(w)} samples")
    return QueryResult(float(np.dot(w, values) / total), ess)


class _EnumerationRuntime(Runtime):
    def __init__(self, path: list[int], interventions, conditions):
        super().__init__(None, interventions, conditions)
        self.path = path
        self.cursor = 0
        self.log_prior = 0.0
        self.branches: list[tuple[int, int]] = []

    def _draw(self, name, dist):
        try:
            options = dist.enumerate_support()
        except NotEnumerable as exc:
            raise NotEnumerable(f"site {format_site(name)!r}: {exc}") from None
        k = self.cursor
        self.cursor += 1
        if k < len(self.path):
            choice = self.path[k]
        else:
            choice = 0
            self.path.append(0)
            self.branches.append((k, len(options)))
        value, lp = options[choice]
        self.log_prior += lp
        return value


def enumerate_query(
    model: Model,
    query: Callable[[Trace], float],
    interventions: Mapping | None = None,
    conditions: Mapping | None = None,
) -> float:
    """Exact posterior expectation by walking every execution path."""
    iv, cd = _check_handlers(interventions, conditions)
    numer: list[float] = []
    denom: list[float] = []
    stack: list[list[int]] = [[]]
    while stack:
        path = stack.pop()
        rt = _EnumerationRuntime(path, iv, cd)
        trace = rt.finish(model(rt))
        for k, n_options in rt.branches:
            for alt in range(1, n_options):
                stack.append(path[:k] + [alt])
        w = math.exp(rt.log_prior + trace.log_weight)
        if w > 0.0:
            denom.append(w)
            numer.append(w * float(query(trace)))
    total = math.fsum(denom)
    if total == 0.0:
        raise DegenerateWeights("conditioning event has probability zero")
    return math.fsum(numer) / total


def indicator(predicate: Callable[[Trace], bool]) -> Callable[[Trace], float]:
    return lambda trace: 1.0 if predicate(trace) else 0.0


def site_contributions(trace: Trace) -> Iterable[tuple[SiteName, str, float]]:
    for name, site in trace.sites.items():
        yield name, site.role, site.log_weight
