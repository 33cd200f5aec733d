"""Path solvers: structure-exploiting cascade, generic (tamed) Euler scheme,
first-variation integrator, and the affine transport of solutions.

The cascade solver mirrors the triangular structure of the drift: the first
two coordinates are exact, the third is a quadrature of the second, and the
last two form a nonautonomous ODE driven by the (frozen after tau) third
coordinate, integrated by RK4. The Euler scheme knows nothing about the
structure and serves as the independent cross-check.

All computational cores are batched over paths (leading axis); the public
single-path operations are thin wrappers around a batch of one, so both
entry points produce bit-identical numbers.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import bumps, model as model_mod
from .model import AxisAlignedModel, GeneralModel
from .paths import BrownianPath, TimeGrid


class SolverExplosionError(RuntimeError):
    """A state became non-finite; carries the first offending step index."""

    def __init__(self, step_index: int):
        super().__init__(f"non-finite state first reached at step {step_index}")
        self.step_index = step_index


@dataclass(frozen=True, eq=False)
class SolutionPath:
    """States on the grid, shape (steps+1, d), with states[0] = initial."""

    grid: TimeGrid
    states: np.ndarray = field(repr=False)
    initial: np.ndarray = field(repr=False)

    def __post_init__(self):
        s = self.states
        if s.ndim != 2 or s.shape[0] != self.grid.steps + 1:
            raise ValueError(f"states shape {s.shape} does not match grid")
        if not np.array_equal(s[0], np.asarray(self.initial, dtype=float)):
            raise ValueError("states[0] must equal the initial value")
        if not np.all(np.isfinite(s)):
            raise SolverExplosionError(_first_bad_steps(s[None, ...])[0])

    @property
    def d(self) -> int:
        return self.states.shape[1]


def _first_bad_steps(states: np.ndarray) -> np.ndarray:
    """Per path, index of the first non-finite step; -1 for clean paths."""
    bad = ~np.all(np.isfinite(states), axis=-1)  # (P, K+1)
    any_bad = bad.any(axis=-1)
    first = np.argmax(bad, axis=-1)
    return np.where(any_bad, first, -1)


def _expand_x0(x0, n_paths: int, dim: int) -> np.ndarray:
    x0 = np.asarray(x0, dtype=float)
    if x0.ndim == 1:
        x0 = np.broadcast_to(x0, (n_paths, dim))
    if x0.shape != (n_paths, dim):
        raise ValueError(f"initial value shape {x0.shape}, expected ({n_paths},{dim})")
    return x0


def solve_cascade_batch(
    axis: AxisAlignedModel, grid: TimeGrid, w: np.ndarray, x0
) -> np.ndarray:
    """Cascade states for a batch of scalar Brownian paths.

    w has shape (P, steps+1); x0 is one vector in R^5 or a (P, 5) array.
    Returns (P, steps+1, 5); non-finite values are left in place for the
    caller to classify (see _first_bad_steps).
    """
    P, K1 = w.shape
    K = K1 - 1
    dt = grid.dt
    times = grid.times
    x0 = _expand_x0(x0, P, 5)
    n = axis.params.n

    out = np.empty((P, K1, 5))
    out[:, :, 0] = x0[:, 0, None] + times[None, :]
    out[:, :, 1] = x0[:, 1, None] + w

    shared_start = bool(np.all(x0[:, 0] == x0[0, 0]))
    if shared_start:
        # bump profiles along the path depend on x0_1 only; evaluate once
        gp = bumps.eval(axis.g, x0[0, 0] + times, 1)[None, :]
        fv = bumps.eval(axis.f, x0[0, 0] + times, 0)[None, :]
        fm = bumps.eval(axis.f, x0[0, 0] + times[:-1] + 0.5 * dt, 0)[None, :]
    else:
        gp = bumps.eval(axis.g, out[:, :, 0], 1)
        fv = bumps.eval(axis.f, out[:, :, 0], 0)
        fm = bumps.eval(axis.f, out[:, :-1, 0] + 0.5 * dt, 0)

    # X3: trapezoidal cumulative of g'(X1) X2
    integrand = gp * out[:, :, 1]
    out[:, 0, 2] = x0[:, 2]
    np.cumsum(
        0.5 * dt * (integrand[:, :-1] + integrand[:, 1:]), axis=1, out=out[:, 1:, 2]
    )
    out[:, 1:, 2] += x0[:, 2, None]

    # (X4, X5): RK4 on X4' = f X4 X5, X5' = f ((X3)^n - X4^2), X3 interpolated
    x3n = out[:, :, 2] ** n
    x3n_mid = (0.5 * (out[:, :-1, 2] + out[:, 1:, 2])) ** n
    fva = np.broadcast_to(fv, (P, K1))
    fma = np.broadcast_to(fm, (P, K))
    x4 = x0[:, 3].copy()
    x5 = x0[:, 4].copy()
    out[:, 0, 3] = x4
    out[:, 0, 4] = x5
    half = 0.5 * dt
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(K):
            f0, f1, fmid = fva[:, k], fva[:, k + 1], fma[:, k]
            z0, z1, zmid = x3n[:, k], x3n[:, k + 1], x3n_mid[:, k]
            k1a = f0 * x4 * x5
            k1b = f0 * (z0 - x4 * x4)
            a4 = x4 + half * k1a
            a5 = x5 + half * k1b
            k2a = fmid * a4 * a5
            k2b = fmid * (zmid - a4 * a4)
            a4 = x4 + half * k2a
            a5 = x5 + half * k2b
            k3a = fmid * a4 * a5
            k3b = fmid * (zmid - a4 * a4)
            a4 = x4 + dt * k3a
            a5 = x5 + dt * k3b
            k4a = f1 * a4 * a5
            k4b = f1 * (z1 - a4 * a4)
            x4 = x4 + dt / 6.0 * (k1a + 2.0 * (k2a + k3a) + k4a)
            x5 = x5 + dt / 6.0 * (k1b + 2.0 * (k2b + k3b) + k4b)
            out[:, k + 1, 3] = x4
            out[:, k + 1, 4] = x5
    return out


def solve_cascade(axis: AxisAlignedModel, W: BrownianPath, x0) -> SolutionPath:
    """Solve the 5-d cascade along one scalar Brownian path."""
    if W.m != 1:
        raise ValueError(f"cascade solver needs a scalar path, got m={W.m}")
    x0 = np.asarray(x0, dtype=float)
    states = solve_cascade_batch(axis, W.grid, W.values[:, 0][None, :], x0)[0]
    bad = _first_bad_steps(states[None, ...])[0]
    if bad >= 0:
        raise SolverExplosionError(int(bad))
    return SolutionPath(grid=W.grid, states=states, initial=x0)


def solve_em_batch(
    gm: GeneralModel,
    grid: TimeGrid,
    w: np.ndarray,
    x0,
    taming: bool = True,
    drift_override=None,
) -> np.ndarray:
    """Euler(-tamed) states for a batch of m-dimensional Brownian paths.

    w has shape (P, steps+1, m). The tamed step scales the drift increment by
    1/(1 + dt ||mu||) per path; with taming off this is the plain scheme.
    """
    P, K1, m = w.shape
    K = K1 - 1
    dt = grid.dt
    d = gm.params.d
    x0 = _expand_x0(x0, P, d)
    drift = drift_override if drift_override is not None else (
        lambda y: model_mod.eval_mu(gm, y)
    )
    sigmaT = gm.sigma.T  # (m, d)

    out = np.empty((P, K1, d))
    cur = x0.copy()
    out[:, 0] = cur
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(K):
            mu = drift(cur)
            if taming:
                denom = 1.0 + dt * np.linalg.norm(mu, axis=-1, keepdims=True)
                step = mu * (dt / denom)
            else:
                step = mu * dt
            cur = cur + step + (w[:, k + 1] - w[:, k]) @ sigmaT
            out[:, k + 1] = cur
    return out


def solve_em(
    gm: GeneralModel, W: BrownianPath, x0, taming: bool = True, drift_override=None
) -> SolutionPath:
    """Euler(-tamed) solution along one Brownian path."""
    if W.m != gm.params.m:
        raise ValueError(f"path has m={W.m}, model expects {gm.params.m}")
    x0 = np.asarray(x0, dtype=float)
    states = solve_em_batch(
        gm, W.grid, W.values[None, ...], x0, taming=taming, drift_override=drift_override
    )[0]
    bad = _first_bad_steps(states[None, ...])[0]
    if bad >= 0:
        raise SolverExplosionError(int(bad))
    return SolutionPath(grid=W.grid, states=states, initial=x0)


def solve_variation_batch(
    gm: GeneralModel, grid: TimeGrid, states: np.ndarray, h
) -> np.ndarray:
    """First-variation J' = mu'(X(t)) J, J(0)=h, by RK4 along given states.

    states has shape (P, steps+1, d); h is one direction in R^d or (P, d).
    X is interpolated linearly for the midpoint stage.
    """
    P, K1, d = states.shape
    K = K1 - 1
    dt = grid.dt
    half = 0.5 * dt
    J = _expand_x0(h, P, d).copy()
    out = np.empty((P, K1, d))
    out[:, 0] = J

    def apply(jac, vec):
        return np.einsum("pij,pj->pi", jac, vec)

    jac_next = model_mod.eval_mu_jacobian(gm, states[:, 0])
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(K):
            jac0 = jac_next
            jac_mid = model_mod.eval_mu_jacobian(
                gm, 0.5 * (states[:, k] + states[:, k + 1])
            )
            jac_next = model_mod.eval_mu_jacobian(gm, states[:, k + 1])
            k1 = apply(jac0, J)
            k2 = apply(jac_mid, J + half * k1)
            k3 = apply(jac_mid, J + half * k2)
            k4 = apply(jac_next, J + dt * k3)
            J = J + dt / 6.0 * (k1 + 2.0 * (k2 + k3) + k4)
            out[:, k + 1] = J
    return out


def solve_variation(gm: GeneralModel, X: SolutionPath, h) -> SolutionPath:
    """First-variation path along one solution path."""
    h = np.asarray(h, dtype=float)
    states = solve_variation_batch(gm, X.grid, X.states[None, ...], h)[0]
    bad = _first_bad_steps(states[None, ...])[0]
    if bad >= 0:
        raise SolverExplosionError(int(bad))
    return SolutionPath(grid=X.grid, states=states, initial=h)


def transform_solution(Y: SolutionPath, B: np.ndarray, v: np.ndarray) -> SolutionPath:
    """Affine transport X(t) = B Y(t) + v of a whole path."""
    B = np.asarray(B, dtype=float)
    v = np.asarray(v, dtype=float)
    states = Y.states @ B.T + v
    return SolutionPath(grid=Y.grid, states=states, initial=states[0].copy())


def write_solution_csv(path: SolutionPath, fileobj) -> None:
    """Dump a path as CSV with header t,x1,...,xd."""
    header = "t," + ",".join(f"x{j+1}" for j in range(path.d))
    data = np.column_stack([path.grid.times, path.states])
    np.savetxt(fileobj, data, fmt="%.17g", delimiter=",", header=header, comments="")
