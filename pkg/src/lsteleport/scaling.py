"""Finite-size scaling: scaling variables, the collapse objective, fitting,
bootstrap errors, the crossover threshold line and crossing estimates."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Mapping, Sequence

import numpy as np
from scipy.optimize import minimize


class ScalingError(ValueError):
    pass


class FamilyKind(str, Enum):
    THREE_D = "threed"
    TWO_D = "twod"
    FIXED_W = "fixedw"
    QUASI_2D = "quasi2d"


_PARAMS = {
    FamilyKind.THREE_D: ("p_star_3d", "nu3"),
    FamilyKind.TWO_D: ("p_star_2d", "nu2"),
    FamilyKind.FIXED_W: ("p_star_w", "nu2"),
    FamilyKind.QUASI_2D: ("p_star_3d", "z", "nu2", "nu3"),
}

ALL_PARAMS = ("p_star_3d", "p_star_2d", "p_star_w", "nu2", "nu3", "z")

DEFAULT_BOUNDS = {
    "p_star_3d": (0.0, 0.2),
    "p_star_2d": (0.0, 0.2),
    "p_star_w": (0.0, 0.2),
    "nu2": (0.3, 4.0),
    "nu3": (0.3, 4.0),
    "z": (0.0, 0.3),
}


@dataclass(frozen=True)
class ScalingFamily:
    kind: FamilyKind

    @classmethod
    def parse(cls, name: str) -> ScalingFamily:
        try:
            return cls(FamilyKind(name.lower()))
        except ValueError:
            choices = ", ".join(k.value for k in FamilyKind)
            raise ScalingError(f"unknown family {name!r} (choose from {choices})") from None

    @property
    def parameters(self) -> tuple[str, ...]:
        return _PARAMS[self.kind]

    @property
    def needs_width(self) -> bool:
        return self.kind == FamilyKind.QUASI_2D


@dataclass(frozen=True)
class CollapsePoint:
    p: float
    d: int
    p_L: float
    sigma: float
    shots: int | None = None
    w: int | None = None

    def __post_init__(self):
        if not self.sigma > 0:
            raise ScalingError(f"sigma must be positive (point p={self.p}, d={self.d})")
        if not 0 <= self.p_L <= 1:
            raise ScalingError(f"p_L={self.p_L} outside [0, 1]")


def floored_sigma(p_L: float, shots: int) -> float:
    """Wald error with ``p_L`` clipped to ``[0.5/N, 1 - 0.5/N]`` so it never vanishes."""
    lo = 0.5 / shots
    p = min(max(p_L, lo), 1 - lo)
    return math.sqrt(p * (1 - p) / shots)


def point_from_counts(p: float, d: int, failures: int, shots: int, w: int | None = None) -> CollapsePoint:
    p_L = failures / shots
    return CollapsePoint(p, d, p_L, floored_sigma(p_L, shots), shots, w)


@dataclass
class CollapseFit:
    family: ScalingFamily
    params: dict[str, float]
    objective: float
    n_points: int
    errors: dict[str, float] = field(default_factory=dict)
    converged: bool = True
    message: str = ""


def _as_params(family: ScalingFamily, params: Mapping[str, float] | Sequence[float]) -> dict[str, float]:
    if isinstance(params, Mapping):
        missing = [k for k in family.parameters if k not in params]
        if missing:
            raise ScalingError(f"missing parameters for {family.kind.value}: {missing}")
        return {k: float(params[k]) for k in family.parameters}
    vals = list(params)
    if len(vals) != len(family.parameters):
        raise ScalingError(f"{family.kind.value} takes {len(family.parameters)} parameters")
    return dict(zip(family.parameters, map(float, vals)))


def scaling_variable(point: CollapsePoint, family: ScalingFamily, params) -> float:
    prm = _as_params(family, params)
    d = point.d
    if d <= 0:
        raise ScalingError("distance must be positive")
    for k, v in prm.items():
        if k.startswith("nu") and v <= 0:
            raise ScalingError(f"{k} must be positive")
    kind = family.kind
    if kind == FamilyKind.THREE_D:
        return (point.p - prm["p_star_3d"]) * d ** (1 / prm["nu3"])
    if kind == FamilyKind.TWO_D:
        return (point.p - prm["p_star_2d"]) * d ** (1 / prm["nu2"])
    if kind == FamilyKind.FIXED_W:
        return (point.p - prm["p_star_w"]) * d ** (1 / prm["nu2"])
    w = point.w
    if w is None:
        raise ScalingError("the quasi-2D family needs the link width of every point")
    if w <= 0:
        raise ScalingError("width must be positive")
    inner = (point.p - prm["p_star_3d"]) * w ** (1 / prm["nu3"]) - prm["z"]
    return inner * (w / d) ** (-1 / prm["nu2"])


def _objective_arrays(x: np.ndarray, y: np.ndarray, s: np.ndarray) -> float:
    n = len(x)
    order = np.argsort(x, kind="stable")
    x, y, s = x[order], y[order], s[order]
    xl, xm, xr = x[:-2], x[1:-1], x[2:]
    width = xr - xl
    safe = np.where(width > 0, width, 1.0)
    a = np.where(width > 0, (xr - xm) / safe, 0.5)  # weight of the left neighbour
    b = np.where(width > 0, (xm - xl) / safe, 0.5)  # weight of the right neighbour
    ybar = a * y[:-2] + b * y[2:]
    delta = s[1:-1] ** 2 + (a * s[:-2]) ** 2 + (b * s[2:]) ** 2
    return float(np.sum((y[1:-1] - ybar) ** 2 / delta) / (n - 2))


def collapse_objective(points: Sequence[CollapsePoint], family: ScalingFamily, params) -> float:
    """Variance-weighted deviation of each point from the chord of its x-neighbours."""
    if len(points) < 3:
        raise ScalingError("the collapse objective needs at least three points")
    x = np.array([scaling_variable(pt, family, params) for pt in points])
    y = np.array([pt.p_L for pt in points])
    s = np.array([pt.sigma for pt in points])
    return _objective_arrays(x, y, s)


def _vectorized(points: Sequence[CollapsePoint], family: ScalingFamily):
    p = np.array([pt.p for pt in points], dtype=float)
    d = np.array([pt.d for pt in points], dtype=float)
    w = np.array([pt.w if pt.w is not None else np.nan for pt in points], dtype=float)
    if family.needs_width and np.isnan(w).any():
        raise ScalingError("the quasi-2D family needs the link width of every point")
    kind = family.kind

    def xs(v):
        if kind == FamilyKind.QUASI_2D:
            ps, z, nu2, nu3 = v
            return ((p - ps) * w ** (1 / nu3) - z) * (w / d) ** (-1 / nu2)
        ps, nu = v
        return (p - ps) * d ** (1 / nu)

    return xs


def _bounds_for(family: ScalingFamily, bounds: Mapping[str, tuple[float, float]] | None):
    merged = dict(DEFAULT_BOUNDS)
    if bounds:
        merged.update(bounds)
    return [merged[k] for k in family.parameters]


def _minimize(fun, start, bnds):
    budget = 1000 * len(start)
    return minimize(
        fun,
        start,
        method="Nelder-Mead",
        bounds=bnds,
        options={"xatol": 1e-9, "fatol": 1e-10, "maxiter": budget, "maxfev": budget, "adaptive": True},
    )


def fit_collapse(
    points: Sequence[CollapsePoint],
    family: ScalingFamily,
    initial: Mapping[str, float],
    bounds: Mapping[str, tuple[float, float]] | None = None,
    restarts: int = 5,
    seed: int = 0,
    x_max: float | None = None,
) -> CollapseFit:
    """Minimize the collapse objective with bounded Nelder-Mead plus random restarts.

    Restarts jitter every parameter of the best point so far by up to 20%,
    clipped to the bounds, and the winner is polished once more. The
    optional ``x_max`` drops points with ``|x| > x_max`` at every evaluation.
    """
    points = list(points)
    k = len(family.parameters)
    if len(points) < k + 3:
        raise ScalingError(f"need at least {k + 3} points to fit {k} parameters, got {len(points)}")
    start = np.array(list(_as_params(family, initial).values()))
    bnds = _bounds_for(family, bounds)
    lo = np.array([b[0] for b in bnds])
    hi = np.array([b[1] for b in bnds])
    if np.any(start < lo) or np.any(start > hi):
        raise ScalingError("initial parameters lie outside the bounds")
    xs = _vectorized(points, family)
    y = np.array([pt.p_L for pt in points])
    s = np.array([pt.sigma for pt in points])

    def fun(v):
        if any(v[i] <= 0 for i, name in enumerate(family.parameters) if name.startswith("nu")):
            return 1e300
        x = xs(v)
        if x_max is not None:
            keep = np.abs(x) <= x_max
            if keep.sum() < 3:
                return 1e300
            return _objective_arrays(x[keep], y[keep], s[keep])
        return _objective_arrays(x, y, s)

    rng = np.random.default_rng(seed)
    best = _minimize(fun, start, bnds)
    ok = bool(best.success)
    for _ in range(restarts):
        scale = np.where(best.x != 0, np.abs(best.x), 0.05 * (hi - lo))
        guess = np.clip(best.x + rng.uniform(-0.2, 0.2, size=k) * scale, lo, hi)
        res = _minimize(fun, guess, bnds)
        if res.fun < best.fun:
            best = res
        ok = ok or bool(res.success)
    if restarts:
        res = _minimize(fun, best.x, bnds)
        if res.fun <= best.fun:
            best = res
    params = dict(zip(family.parameters, map(float, best.x)))
    msg = "" if ok else f"optimizer did not report convergence: {best.message}"
    return CollapseFit(family, params, float(best.fun), len(points), converged=ok, message=msg)


def bootstrap_uncertainty(
    points: Sequence[CollapsePoint],
    fit: CollapseFit,
    resamples: int = 100,
    seed: int = 0,
    bounds: Mapping[str, tuple[float, float]] | None = None,
    x_max: float | None = None,
) -> dict[str, float]:
    """Three standard deviations of each parameter over binomial resamples.

    Every resample redraws each point's failure count from
    ``Binomial(shots, p_L)`` and refits from the original optimum.
    """
    if any(pt.shots is None or pt.shots <= 0 for pt in points):
        raise ScalingError("bootstrap needs the shot count of every point")
    rng = np.random.default_rng(seed)
    draws = []
    for _ in range(resamples):
        new = []
        for pt in points:
            f = int(rng.binomial(pt.shots, pt.p_L))
            new.append(replace(pt, p_L=f / pt.shots, sigma=floored_sigma(f / pt.shots, pt.shots)))
        refit = fit_collapse(new, fit.family, fit.params, bounds, restarts=0, x_max=x_max)
        draws.append([refit.params[k] for k in fit.family.parameters])
    arr = np.array(draws)
    spread = 3 * arr.std(axis=0, ddof=1) if resamples > 1 else np.zeros(arr.shape[1])
    errors = dict(zip(fit.family.parameters, map(float, spread)))
    fit.errors = errors
    return errors


def threshold_line(w: float, p_star_3d: float, z: float, nu3: float) -> float:
    """Threshold of the crossover regime at link width ``w``."""
    if w < 1:
        raise ScalingError("width must be >= 1")
    if nu3 <= 0:
        raise ScalingError("nu3 must be positive")
    return p_star_3d + z * w ** (-1 / nu3)


# --- crossings -----------------------------------------------------------------


@dataclass
class CrossingEstimate:
    value: float
    pairs: dict[tuple[int, int], float]
    sigma: float | None = None


def _curves(points: Sequence[CollapsePoint]) -> dict[int, tuple[np.ndarray, np.ndarray]]:
    by_d: dict[int, list[CollapsePoint]] = {}
    for pt in points:
        by_d.setdefault(pt.d, []).append(pt)
    out = {}
    for d, pts in by_d.items():
        pts.sort(key=lambda q: q.p)
        p = np.array([q.p for q in pts])
        y = np.array([max(q.p_L, 0.5 / q.shots if q.shots else 1e-12) for q in pts])
        out[d] = (p, np.log(y))
    return out


def pair_crossing(p: np.ndarray, log_small: np.ndarray, log_large: np.ndarray) -> float:
    """Where the larger code stops winning, by linear interpolation of the log gap.

    Several sign changes (noise near the crossing) are averaged; ``nan`` if
    the curves do not cross on the grid.
    """
    gap = log_large - log_small
    roots = []
    for i in range(len(p) - 1):
        a, b = gap[i], gap[i + 1]
        if a == 0:
            roots.append(p[i])
        elif a * b < 0:
            roots.append(p[i] + (p[i + 1] - p[i]) * a / (a - b))
    if gap[-1] == 0:
        roots.append(p[-1])
    return float(np.mean(roots)) if roots else float("nan")


def crossing_estimate(points: Sequence[CollapsePoint]) -> CrossingEstimate:
    """Mean crossing of adjacent-distance curves sampled on a shared grid."""
    curves = _curves(points)
    ds = sorted(curves)
    pairs = {}
    for d1, d2 in zip(ds, ds[1:]):
        p1, y1 = curves[d1]
        p2, y2 = curves[d2]
        if not np.array_equal(p1, p2):
            raise ScalingError(f"d={d1} and d={d2} are not sampled on the same grid")
        pairs[(d1, d2)] = pair_crossing(p1, y1, y2)
    found = [v for v in pairs.values() if not math.isnan(v)]
    return CrossingEstimate(float(np.mean(found)) if found else float("nan"), pairs)


def bootstrap_crossing(points: Sequence[CollapsePoint], resamples: int = 100, seed: int = 0) -> CrossingEstimate:
    """Crossing estimate plus the standard deviation over binomial resamples."""
    est = crossing_estimate(points)
    rng = np.random.default_rng(seed)
    vals = []
    for _ in range(resamples):
        new = []
        for pt in points:
            f = int(rng.binomial(pt.shots, pt.p_L))
            new.append(replace(pt, p_L=f / pt.shots, sigma=floored_sigma(f / pt.shots, pt.shots)))
        v = crossing_estimate(new).value
        if not math.isnan(v):
            vals.append(v)
    est.sigma = float(np.std(vals, ddof=1)) if len(vals) > 1 else float("nan")
    return est
