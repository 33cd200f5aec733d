"""Monte Carlo estimation of flow distances under synchronous coupling.

Both starting points of a pair ride the same Brownian path, so the sample
distance is exactly the coupled difference the theory speaks about and the
common noise cancels out of the variance. Determinism contract: results are
a pure function of (model, inputs, master_seed); thread count and chunking
cannot change a single bit because every path's randomness is derived from
its global index alone and the mean/stderr reduction happens once, in index
order, over a preallocated array.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import stats as scipy_stats

from . import bounds as bounds_mod, bumps
from .model import AxisAlignedModel, GeneralModel
from .paths import TimeGrid, brownian_values_batch
from .reports import CheckReport
from .solvers import _first_bad_steps, solve_cascade_batch, solve_em_batch

_CHUNK = 1024  # performance knob only; results are chunk-size independent


class EstimationFailedError(RuntimeError):
    """Every sampled path aborted; no estimate exists."""


class FitError(ValueError):
    """Exponent fit impossible (degenerate window or nonpositive means)."""


@dataclass(frozen=True, eq=False)
class DistanceEstimate:
    """Sample mean of ||X^x(t) - X^y(t)|| under synchronous coupling.

    t is the realized grid time (the requested time snapped to the grid);
    distances keeps the per-path samples (nan where aborted) so that paired
    statistics across estimates sharing a seed remain possible.
    """

    x: np.ndarray = field(repr=False)
    y: np.ndarray = field(repr=False)
    t: float
    n_paths: int
    mean: float
    std_error: float
    aborted: int
    distances: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        if self.mean < 0.0 or self.std_error < 0.0 or self.aborted > self.n_paths:
            raise ValueError("inconsistent distance estimate")


@dataclass(frozen=True, eq=False)
class SweepResult:
    """Distance estimates along a strictly decreasing epsilon grid.

    local_slopes[i] = (ln mean_{i+1} - ln mean_i) / (ln eps_{i+1} - ln eps_i);
    lower_bound_curve is exp(-c |ln eps|^(2/n)) with c the closed-form
    constant at kappa_t; upper_bound_curve is |ln eps|^(-q). constants also
    records the prefactor K = ||delta|| used by domination checks.
    """

    eps_grid: np.ndarray
    estimates: list
    local_slopes: np.ndarray
    lower_bound_curve: np.ndarray
    upper_bound_curve: np.ndarray
    constants: dict
    regime: str
    master_seed: int


def _default_steps(T: float) -> int:
    return max(1, round(T * 2048))


def _distance_chunk_cascade(gm, grid, k_obs, seed, lo, hi, y0x, y0y, out):
    w = brownian_values_batch(grid, gm.params.m, seed, lo, hi - lo)[:, :, 0]
    sx = solve_cascade_batch(gm.base, grid, w, y0x[:5])
    sy = solve_cascade_batch(gm.base, grid, w, y0y[:5])
    bad = (_first_bad_steps(sx) >= 0) | (_first_bad_steps(sy) >= 0)
    diff5 = sx[:, k_obs, :] - sy[:, k_obs, :]
    tail_sq = float(np.sum((y0x[5:] - y0y[5:]) ** 2))  # untouched coordinates
    dnorm = float(np.linalg.norm(gm.params.delta))
    dist = dnorm * np.sqrt(np.sum(diff5**2, axis=1) + tail_sq)
    out[lo:hi] = np.where(bad, np.nan, dist)


def _distance_chunk_em(gm, grid, k_obs, seed, lo, hi, x, y, taming, out):
    w = brownian_values_batch(grid, gm.params.m, seed, lo, hi - lo)
    sx = solve_em_batch(gm, grid, w, x, taming=taming)
    sy = solve_em_batch(gm, grid, w, y, taming=taming)
    bad = (_first_bad_steps(sx) >= 0) | (_first_bad_steps(sy) >= 0)
    dist = np.linalg.norm(sx[:, k_obs, :] - sy[:, k_obs, :], axis=1)
    out[lo:hi] = np.where(bad, np.nan, dist)


def estimate_distance(
    model: GeneralModel,
    x,
    y,
    t: float,
    n_paths: int,
    master_seed: int,
    *,
    steps: int | None = None,
    solver: str = "cascade",
    taming: bool = True,
    n_threads: int = 1,
) -> DistanceEstimate:
    """Estimate E||X^x(t) - X^y(t)|| with one shared Brownian path per index.

    solver="cascade" transports the exact affine conjugation and solves the
    5-d cascade in transformed coordinates (the remaining coordinates are
    constants of the motion); solver="em" runs the generic Euler scheme on
    both starting points. Deterministic given master_seed regardless of
    n_threads.
    """
    params = model.params
    if not 0.0 < t <= params.T:
        raise ValueError(f"need t in (0, T], got {t}")
    if n_paths < 2:
        raise ValueError(f"need at least 2 paths, got {n_paths}")
    if solver not in ("cascade", "em"):
        raise ValueError(f"unknown solver {solver!r}")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    grid = TimeGrid(T=params.T, steps=_default_steps(params.T) if steps is None else steps)
    k_obs = grid.nearest_index(t)

    dist = np.full(n_paths, np.nan)
    chunks = [(lo, min(lo + _CHUNK, n_paths)) for lo in range(0, n_paths, _CHUNK)]
    if solver == "cascade":
        y0x = model.Binv @ (x - params.v)
        y0y = model.Binv @ (y - params.v)
        task = lambda c: _distance_chunk_cascade(
            model, grid, k_obs, master_seed, c[0], c[1], y0x, y0y, dist
        )
    else:
        task = lambda c: _distance_chunk_em(
            model, grid, k_obs, master_seed, c[0], c[1], x, y, taming, dist
        )

    if n_threads > 1:
        with ThreadPoolExecutor(max_workers=n_threads) as pool:
            list(pool.map(task, chunks))
    else:
        for c in chunks:
            task(c)

    clean = np.isfinite(dist)
    n_clean = int(np.count_nonzero(clean))
    if n_clean == 0:
        raise EstimationFailedError(f"all {n_paths} paths aborted")
    sample = dist[clean]
    mean = float(np.mean(sample))
    std_error = float(np.std(sample, ddof=1) / math.sqrt(n_clean)) if n_clean > 1 else 0.0
    return DistanceEstimate(
        x=x,
        y=y,
        t=float(grid.times[k_obs]),
        n_paths=n_paths,
        mean=mean,
        std_error=std_error,
        aborted=n_paths - n_clean,
        distances=dist,
    )


def sweep_epsilon(
    model: GeneralModel,
    t: float,
    eps_grid,
    n_paths: int,
    master_seed: int,
    *,
    q: float | None = None,
    steps: int | None = None,
    solver: str = "cascade",
    taming: bool = True,
    n_threads: int = 1,
) -> SweepResult:
    """Distance sweep along w = v + eps delta for a decreasing epsilon grid.

    All epsilons share the same paths (same master_seed), so adjacent
    estimates are positively correlated and slope estimates benefit from the
    common-noise cancellation.
    """
    params = model.params
    eps = np.asarray(eps_grid, dtype=float)
    if eps.ndim != 1 or len(eps) < 2:
        raise ValueError("need at least two epsilons")
    if np.any(eps <= 0.0) or np.any(eps > 1.0 / math.e + 1e-15):
        raise ValueError("epsilon grid must lie in (0, 1/e]")
    if np.any(np.diff(eps) >= 0.0):
        raise ValueError("epsilon grid must be strictly decreasing")
    if not params.tau < t < params.T:
        raise ValueError(f"need t in (tau, T), got {t}")

    estimates = [
        estimate_distance(
            model,
            params.v,
            params.v + e * params.delta,
            t,
            n_paths,
            master_seed,
            steps=steps,
            solver=solver,
            taming=taming,
            n_threads=n_threads,
        )
        for e in eps
    ]
    means = np.array([est.mean for est in estimates])
    with np.errstate(divide="ignore"):
        log_means = np.log(means)
    log_eps = np.log(eps)
    local_slopes = np.diff(log_means) / np.diff(log_eps)

    t_grid = estimates[0].t
    kap_t = bounds_mod.kappa_t(model.base.f, params.tau, t_grid)
    c = bounds_mod.lemma21_c(
        bounds_mod.Lemma21Params(p=float(params.n), kappa=kap_t, eps=eps[0])
    )
    lower = np.exp(-c * np.abs(log_eps) ** (2.0 / params.n))
    q_used = float(params.q if q is None else q)
    upper = np.abs(log_eps) ** (-q_used)

    constants = {
        "C": model.base.C,
        "varkappa": model.base.varkappa,
        "kappa_general_log": model.log_kappa,
        "kappa_t": kap_t,
        "c": c,
        "K": float(np.linalg.norm(params.delta)),
        "q": q_used,
        "t_grid": t_grid,
    }
    regime = "non-hoelder" if params.n >= 3 else "hoelder-consistent"
    return SweepResult(
        eps_grid=eps,
        estimates=estimates,
        local_slopes=local_slopes,
        lower_bound_curve=lower,
        upper_bound_curve=upper,
        constants=constants,
        regime=regime,
        master_seed=master_seed,
    )


def fit_exponent(result: SweepResult, window: int = 2) -> np.ndarray:
    """Least-squares slope of ln mean against ln eps per sliding window.

    window=2 reduces to the pairwise local slopes. Raises FitError when the
    window does not fit or some mean is nonpositive.
    """
    if window < 2:
        raise FitError(f"window must be >= 2, got {window}")
    means = np.array([est.mean for est in result.estimates])
    if np.any(means <= 0.0):
        raise FitError("nonpositive mean in sweep; exponent undefined")
    lx = np.log(result.eps_grid)
    ly = np.log(means)
    n = len(lx)
    if window > n:
        raise FitError(f"window {window} exceeds grid size {n}")
    slopes = np.empty(n - window + 1)
    for i in range(len(slopes)):
        xs = lx[i : i + window]
        ys = ly[i : i + window]
        xc = xs - xs.mean()
        slopes[i] = float(np.dot(xc, ys - ys.mean()) / np.dot(xc, xc))
    return slopes


def _x3_at_tau_chunk(grid, gp, k_tau, seed, lo, hi, out):
    # trapezoidal X3(tau) = int_0^tau g'(s) W(s) ds from the origin; matches
    # the cascade solver's quadrature bit for bit
    w = brownian_values_batch(grid, 1, seed, lo, hi - lo)[:, :, 0]
    integrand = gp[None, :] * w
    out[lo:hi] = 0.5 * grid.dt * np.sum(
        integrand[:, :k_tau] + integrand[:, 1 : k_tau + 1], axis=1
    )


def stdnormality_test(
    model: AxisAlignedModel, n_paths: int, master_seed: int, *, steps: int | None = None
) -> CheckReport:
    """Check that the frozen third coordinate at tau is standard normal.

    Simulates X3(tau) from the origin (a trapezoidal functional of W), then
    tests mean within 4/sqrt(N), variance within 1 +- 8/sqrt(N), and the
    Kolmogorov-Smirnov statistic below the 1% critical value 1.63/sqrt(N).
    """
    params = model.params
    grid = TimeGrid(T=params.T, steps=_default_steps(params.T) if steps is None else steps)
    k_tau = grid.nearest_index(params.tau)
    gp = bumps.eval(model.g, grid.times, 1)
    samples = np.empty(n_paths)
    for lo in range(0, n_paths, _CHUNK):
        hi = min(lo + _CHUNK, n_paths)
        _x3_at_tau_chunk(grid, gp, k_tau, master_seed, lo, hi, samples)
    mean = float(np.mean(samples))
    var = float(np.var(samples, ddof=1))
    ks = float(scipy_stats.kstest(samples, "norm").statistic)
    rn = math.sqrt(n_paths)
    mean_tol = 4.0 / rn
    var_tol = 8.0 / rn
    ks_crit = 1.63 / rn
    excess = max(
        abs(mean) - mean_tol,
        abs(var - 1.0) - var_tol,
        ks - ks_crit,
    )
    return CheckReport(
        check="stdnormality",
        params={
            "n_paths": n_paths,
            "mean": mean,
            "var": var,
            "ks": ks,
            "mean_tol": mean_tol,
            "var_tol": var_tol,
            "ks_critical_1pct": ks_crit,
            "violation_scale": "absolute_excess",
        },
        max_violation=float(excess),
        grid_size=n_paths,
        passed=excess <= 0.0,
    )


def sweep_to_csv(result: SweepResult, fileobj) -> None:
    """CSV rows eps,mean,stderr,aborted,lower_bound,upper_bound,local_slope.

    The slope on row i belongs to the pair (eps_i, eps_{i+1}); the final row
    carries nan.
    """
    fileobj.write("eps,mean,stderr,aborted,lower_bound,upper_bound,local_slope\n")
    slopes = np.append(result.local_slopes, np.nan)
    for i, est in enumerate(result.estimates):
        fileobj.write(
            f"{result.eps_grid[i]:.17g},{est.mean:.17g},{est.std_error:.17g},"
            f"{est.aborted},{result.lower_bound_curve[i]:.17g},"
            f"{result.upper_bound_curve[i]:.17g},{slopes[i]:.17g}\n"
        )


def sweep_summary(result: SweepResult) -> dict:
    """JSON-ready summary with the constants and per-epsilon statistics."""
    return {
        "regime": result.regime,
        "master_seed": result.master_seed,
        "constants": result.constants,
        "eps": result.eps_grid.tolist(),
        "mean": [est.mean for est in result.estimates],
        "std_error": [est.std_error for est in result.estimates],
        "aborted": [est.aborted for est in result.estimates],
        "n_paths": result.estimates[0].n_paths,
        "local_slopes": result.local_slopes.tolist(),
        "lower_bound": result.lower_bound_curve.tolist(),
        "upper_bound": result.upper_bound_curve.tolist(),
    }
