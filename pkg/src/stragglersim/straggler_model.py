"""Task completion-time distributions and straggler-profile fitting.

Three distribution families are supported: the shifted exponential, finite
mixtures of shifted exponentials, and a degenerate (deterministic) time used
for analytic checks.  Histograms of measured completion times can be combined
into a target profile by fitting convex-combination weights.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from .rng import unit_open_left


class ModelError(ValueError):
    pass


class InvalidDistribution(ModelError):
    pass


class EmptySamples(ModelError):
    pass


class NonMonotonicEdges(ModelError):
    pass


class BinMismatch(ModelError):
    pass


class EmptyBasis(ModelError):
    pass


@dataclass(frozen=True)
class ShiftedExp:
    """Density ``rate * exp(-rate * (x - shift))`` on ``x >= shift``."""

    rate: float
    shift: float = 0.0

    def __post_init__(self):
        if not (self.rate > 0 and math.isfinite(self.rate)):
            raise InvalidDistribution(f"rate must be positive, got {self.rate!r}")
        if not (self.shift >= 0 and math.isfinite(self.shift)):
            raise InvalidDistribution(f"shift must be non-negative, got {self.shift!r}")

    @property
    def mean(self) -> float:
        return self.shift + 1.0 / self.rate

    @property
    def min_support(self) -> float:
        return self.shift


@dataclass(frozen=True)
class Deterministic:
    value: float

    def __post_init__(self):
        if not (self.value >= 0 and math.isfinite(self.value)):
            raise InvalidDistribution(f"value must be non-negative, got {self.value!r}")

    @property
    def mean(self) -> float:
        return self.value

    @property
    def min_support(self) -> float:
        return self.value


@dataclass(frozen=True)
class MixtureModel:
    """Weighted mixture; ``components`` is a tuple of ``(weight, ShiftedExp)``."""

    components: tuple[tuple[float, ShiftedExp], ...]

    def __post_init__(self):
        comps = tuple((float(w), d) for w, d in self.components)
        object.__setattr__(self, "components", comps)
        if not comps:
            raise InvalidDistribution("mixture needs at least one component")
        for w, d in comps:
            if not w >= 0:
                raise InvalidDistribution(f"negative mixture weight {w!r}")
            if not isinstance(d, ShiftedExp):
                raise InvalidDistribution(f"mixture component must be ShiftedExp, got {d!r}")
        total = math.fsum(w for w, _ in comps)
        if abs(total - 1.0) > 1e-9:
            raise InvalidDistribution(f"mixture weights sum to {total!r}, not 1")
        cum, acc = [], 0.0
        for w, _ in comps:
            acc += w
            cum.append(acc)
        object.__setattr__(self, "_cumulative", tuple(cum))

    @classmethod
    def of(cls, *pairs: tuple[float, ShiftedExp]) -> "MixtureModel":
        return cls(tuple(pairs))

    @property
    def mean(self) -> float:
        return mixture_mean(self)

    @property
    def min_support(self) -> float:
        return min(d.shift for w, d in self.components if w > 0)


Distribution = Union[ShiftedExp, MixtureModel, Deterministic]

# Straggler profiles used throughout the simulations: natural (N) and two
# induced profiles (I1), (I2) of increasing variance.
PDF_N = MixtureModel.of((1.0, ShiftedExp(0.3, 5.0)))
PDF_I1 = MixtureModel.of((0.6, ShiftedExp(0.3, 5.0)), (0.4, ShiftedExp(0.1, 11.0)))
PDF_I2 = MixtureModel.of((0.3, ShiftedExp(0.3, 5.0)), (0.7, ShiftedExp(0.04, 19.0)))
NAMED_PROFILES = {"N": PDF_N, "I1": PDF_I1, "I2": PDF_I2}


def shifted_exp_pdf(dist: ShiftedExp, x: float) -> float:
    if x < dist.shift:
        return 0.0
    return dist.rate * math.exp(-dist.rate * (x - dist.shift))


def shifted_exp_cdf(dist: ShiftedExp, x: float) -> float:
    if x < dist.shift:
        return 0.0
    return -math.expm1(-dist.rate * (x - dist.shift))


def mixture_mean(model: Distribution) -> float:
    if isinstance(model, MixtureModel):
        return math.fsum(w * d.mean for w, d in model.components)
    return model.mean


def sample(model: Distribution, rng: random.Random) -> float:
    """Draw one completion time.

    Mixtures always consume two values from ``rng`` (component choice, then
    inverse CDF); a bare shifted exponential consumes one; a deterministic
    time consumes none.
    """
    if isinstance(model, MixtureModel):
        u = rng.random()
        comps = model.components
        dist = comps[-1][1]
        for (_, d), c in zip(comps, model._cumulative):
            if u < c:
                dist = d
                break
        return dist.shift - math.log(unit_open_left(rng)) / dist.rate
    if isinstance(model, ShiftedExp):
        return model.shift - math.log(unit_open_left(rng)) / model.rate
    if isinstance(model, Deterministic):
        return model.value
    raise TypeError(f"unsupported distribution {model!r}")


def distribution_to_dict(model: Distribution) -> dict | list:
    if isinstance(model, Deterministic):
        return {"deterministic": model.value}
    if isinstance(model, ShiftedExp):
        return [{"weight": 1.0, "lambda": model.rate, "shift": model.shift}]
    return [{"weight": w, "lambda": d.rate, "shift": d.shift} for w, d in model.components]


def distribution_from_dict(raw) -> Distribution:
    """Inverse of :func:`distribution_to_dict`; also accepts a profile name."""
    if isinstance(raw, str):
        try:
            return NAMED_PROFILES[raw]
        except KeyError:
            raise InvalidDistribution(f"unknown profile name {raw!r}") from None
    if isinstance(raw, dict):
        if set(raw) != {"deterministic"}:
            raise InvalidDistribution(f"expected {{deterministic: value}}, got keys {sorted(raw)}")
        return Deterministic(float(raw["deterministic"]))
    if isinstance(raw, (list, tuple)):
        comps = []
        for rec in raw:
            if not isinstance(rec, dict) or set(rec) != {"weight", "lambda", "shift"}:
                raise InvalidDistribution(
                    f"mixture records need exactly weight, lambda, shift; got {rec!r}"
                )
            comps.append((float(rec["weight"]), ShiftedExp(float(rec["lambda"]), float(rec["shift"]))))
        return MixtureModel(tuple(comps))
    raise InvalidDistribution(f"cannot parse distribution from {raw!r}")


# --------------------------------------------------------------------------
# Histograms and profile fitting


@dataclass(frozen=True)
class Histogram:
    bin_edges: tuple[float, ...]
    frequencies: tuple[float, ...]

    def __post_init__(self):
        edges = tuple(float(e) for e in self.bin_edges)
        freqs = tuple(float(f) for f in self.frequencies)
        object.__setattr__(self, "bin_edges", edges)
        object.__setattr__(self, "frequencies", freqs)
        _check_edges(edges)
        if len(freqs) != len(edges) - 1:
            raise ModelError(f"{len(freqs)} frequencies for {len(edges) - 1} bins")
        if any(f < 0 for f in freqs):
            raise ModelError("frequencies must be non-negative")
        if abs(math.fsum(freqs) - 1.0) > 1e-9:
            raise ModelError("frequencies must be normalized")

    def to_dict(self) -> dict:
        return {"bin_edges": list(self.bin_edges), "frequencies": list(self.frequencies)}

    @classmethod
    def from_dict(cls, raw: dict) -> "Histogram":
        if not isinstance(raw, dict) or set(raw) != {"bin_edges", "frequencies"}:
            raise ModelError("histogram JSON needs exactly bin_edges and frequencies")
        return cls(tuple(raw["bin_edges"]), tuple(raw["frequencies"]))

    @property
    def vector(self) -> np.ndarray:
        return np.asarray(self.frequencies, dtype=float)


def _check_edges(edges: Sequence[float]) -> None:
    if len(edges) < 2:
        raise NonMonotonicEdges("need at least two bin edges")
    if any(not b > a for a, b in zip(edges, edges[1:])):
        raise NonMonotonicEdges("bin edges must be strictly increasing")


def build_histogram(samples: Sequence[float], bin_edges: Sequence[float]) -> Histogram:
    """Normalized histogram; out-of-range samples are clamped into the end bins."""
    edges = tuple(float(e) for e in bin_edges)
    _check_edges(edges)
    xs = np.asarray(samples, dtype=float)
    if xs.size == 0:
        raise EmptySamples("cannot build a histogram from no samples")
    idx = np.searchsorted(np.asarray(edges), xs, side="right") - 1
    idx = np.clip(idx, 0, len(edges) - 2)
    counts = np.bincount(idx, minlength=len(edges) - 1)
    return Histogram(edges, tuple((counts / xs.size).tolist()))


def project_to_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection onto the probability simplex (sort-based)."""
    n = v.size
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    ind = np.arange(1, n + 1)
    rho = np.nonzero(u - css / ind > 0)[0][-1]
    theta = css[rho] / (rho + 1.0)
    return np.maximum(v - theta, 0.0)


def _stack(target: Histogram, basis: Sequence[Histogram]) -> tuple[np.ndarray, np.ndarray]:
    if len(basis) == 0:
        raise EmptyBasis("need at least one basis histogram")
    for i, h in enumerate(basis):
        if h.bin_edges != target.bin_edges:
            raise BinMismatch(f"basis histogram {i} has different bin edges from the target")
    A = np.column_stack([h.vector for h in basis])
    return A, target.vector


def profile_residual(target: Histogram, basis: Sequence[Histogram], weights) -> float:
    """Euclidean norm of ``target - sum_i weights[i] * basis[i]``."""
    A, y = _stack(target, basis)
    return float(np.linalg.norm(y - A @ np.asarray(weights, dtype=float)))


def fit_profile_weights(
    target: Histogram,
    basis: Sequence[Histogram],
    *,
    max_iter: int = 100_000,
    tol: float = 1e-12,
) -> np.ndarray:
    """Convex weights ``p`` minimizing ``||target - sum_i p_i basis_i||_2``.

    Projected gradient descent on the simplex with step ``1/L`` (``L`` the
    largest eigenvalue of the Gram matrix), stopped when the objective
    improves by less than ``tol``.  The support found that way is then
    polished with an exact equality-constrained least-squares solve, kept only
    if it stays feasible and does not increase the objective.
    """
    A, y = _stack(target, basis)
    n = A.shape[1]
    Q = A.T @ A
    c = A.T @ y
    lip = float(np.linalg.eigvalsh(Q)[-1])
    step = 1.0 / lip if lip > 0 else 1.0

    def objective(p):
        r = y - A @ p
        return 0.5 * float(r @ r)

    p = np.full(n, 1.0 / n)
    f = objective(p)
    for _ in range(max_iter):
        p_new = project_to_simplex(p - step * (Q @ p - c))
        f_new = objective(p_new)
        improvement = f - f_new
        p, f = p_new, f_new
        if improvement < tol:
            break

    for cutoff in (1e-9, 1e-6 * float(p.max())):
        polished = _polish(Q, c, p > cutoff)
        if polished is not None and objective(polished) <= objective(p) + 1e-15:
            p = polished
    return p


def _polish(Q: np.ndarray, c: np.ndarray, mask: np.ndarray) -> np.ndarray | None:
    """Minimizer over the face of the simplex given by ``mask``, if feasible."""
    support = np.flatnonzero(mask)
    if support.size == 0:
        return None
    k = support.size
    kkt = np.zeros((k + 1, k + 1))
    kkt[:k, :k] = Q[np.ix_(support, support)]
    kkt[:k, k] = 1.0
    kkt[k, :k] = 1.0
    rhs = np.concatenate([c[support], [1.0]])
    sol, *_ = np.linalg.lstsq(kkt, rhs, rcond=None)
    q = sol[:k]
    # round-off can leave zero weights slightly negative
    if np.any(q < -1e-10) or abs(q.sum() - 1.0) > 1e-10:
        return None
    out = np.zeros(Q.shape[0])
    out[support] = np.maximum(q, 0.0)
    return out / out.sum()
