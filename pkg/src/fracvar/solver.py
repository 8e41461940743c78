"""Direct minimization of the discretized functional over interior nodal values.

The unknowns are ``y`` at the nodes strictly inside ``(a, b)``; the history
and ``y(b)`` stay pinned. Gradients are central finite differences of the
discrete J, evaluated as one batch of perturbed trajectories.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from fracvar import expr as ex
from fracvar.eulerlagrange import ELReport, classical_residual, el_report
from fracvar.functional import evaluate_J_batch
from fracvar.problem import (
    ProblemSpec,
    Trajectory,
    extract_interior,
    linear_interpolant,
    make_trajectory,
)

__all__ = ["SolverConfig", "SolverError", "SolverResult", "gradient_fd", "minimize"]

log = logging.getLogger(__name__)

METHODS = ("fd-gradient-descent-with-backtracking", "coordinate-nelder-mead")
INITS = ("linear-interpolant", "zero")


class SolverError(RuntimeError):
    """J could not be evaluated; ``trajectory`` holds the offending nodal values."""

    def __init__(self, message: str, trajectory: np.ndarray) -> None:
        super().__init__(message)
        self.trajectory = trajectory


@dataclass(frozen=True)
class SolverConfig:
    method: str = "fd-gradient-descent-with-backtracking"
    max_iters: int = 5000
    #: finite-difference step, scaled by max(1, max|y|)
    grad_step: float = 1.0e-6
    #: stop once J decreased by less than this (relative) over 5 iterations
    tol_J: float = 1.0e-10
    armijo_c: float = 1.0e-4
    #: "linear-interpolant", "zero", a Trajectory, or an array of interior values
    init: object = "linear-interpolant"
    #: use Barzilai-Borwein lengths as the first trial step of each line search
    bb_steps: bool = True

    def __post_init__(self) -> None:
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}, got {self.method!r}")
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")
        for name in ("grad_step", "tol_J", "armijo_c"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not self.armijo_c < 1:
            raise ValueError("armijo_c must be below 1")


@dataclass
class SolverResult:
    trajectory: Trajectory
    J_final: float
    J_history: list[float]
    el: ELReport
    iterations: int
    converged: bool
    J_init: float = field(default=float("nan"))

    def history_csv(self) -> str:
        lines = ["iteration,J"] + [f"{i},{J:.17g}" for i, J in enumerate(self.J_history)]
        return "\n".join(lines) + "\n"


class _Objective:
    def __init__(self, spec: ProblemSpec) -> None:
        self.spec = spec
        g = spec.grid
        self.base = make_trajectory(spec, np.zeros(g.i_b - g.i_a - 1)).values
        self.sl = slice(g.i_a + 1, g.i_b)

    def full(self, u: np.ndarray) -> np.ndarray:
        Y = np.array(np.broadcast_to(self.base, u.shape[:-1] + self.base.shape))
        Y[..., self.sl] = u
        return Y

    def __call__(self, u: np.ndarray) -> float:
        return float(self.batch(u[None, :])[0])

    def batch(self, U: np.ndarray) -> np.ndarray:
        Y = self.full(U)
        try:
            J = evaluate_J_batch(Y, self.spec)
        except ex.EvalError as err:
            raise SolverError(f"cannot evaluate J: {err}", Y[0]) from err
        J = np.broadcast_to(J, U.shape[:-1])
        if not np.all(np.isfinite(J)):
            bad = int(np.argmin(np.isfinite(J)))
            raise SolverError("J is not finite", Y[bad])
        return J

    def gradient(self, u: np.ndarray, step: float) -> np.ndarray:
        k = u.size
        idx = np.arange(k)
        U = np.tile(u, (2 * k, 1))
        U[idx, idx] += step
        U[k + idx, idx] -= step
        J = self.batch(U)
        return (J[:k] - J[k:]) / (2.0 * step)


def _step_size(config: SolverConfig, u: np.ndarray) -> float:
    return config.grad_step * max(1.0, float(np.max(np.abs(u), initial=0.0)))


def gradient_fd(spec: ProblemSpec, traj: Trajectory, step: float) -> np.ndarray:
    """Central-difference gradient of the discrete J in the interior nodal values."""
    if not step > 0:
        raise ValueError("step must be positive")
    return _Objective(spec).gradient(extract_interior(traj), step)


def _initial(spec: ProblemSpec, init) -> np.ndarray:
    if isinstance(init, Trajectory):
        return extract_interior(init)
    if isinstance(init, str):
        if init == "linear-interpolant":
            return extract_interior(linear_interpolant(spec))
        if init == "zero":
            g = spec.grid
            return np.zeros(g.i_b - g.i_a - 1)
        raise ValueError(f"init must be one of {INITS}, a Trajectory or an array; got {init!r}")
    return extract_interior(make_trajectory(spec, init))


def _stalled(history: list[float], tol: float) -> bool:
    if len(history) < 6:
        return False
    old, new = history[-6], history[-1]
    return old - new <= tol * max(abs(old), np.finfo(float).tiny)


def _descent(obj: _Objective, u: np.ndarray, config: SolverConfig):
    f = obj(u)
    history = [f]
    prev = None
    trial = 1.0
    converged = False
    it = 0
    for it in range(1, config.max_iters + 1):
        grad = obj.gradient(u, _step_size(config, u))
        gg = float(grad @ grad)
        if gg == 0.0 or np.sqrt(gg) <= 1e-14 * max(1.0, abs(f)):
            converged = True
            it -= 1
            break
        if config.bb_steps and prev is not None:
            s, y = u - prev[0], grad - prev[1]
            sy = float(s @ y)
            trial = float(s @ s) / sy if sy > 0 else 2.0 * trial

        step = trial
        while True:
            cand = u - step * grad
            fc = obj(cand)
            if fc <= f - config.armijo_c * step * gg:
                break
            step *= 0.5
            if step * np.sqrt(gg) < 1e-16 * max(1.0, float(np.max(np.abs(u)))):
                # no representable decrease along the gradient
                log.debug("line search exhausted at iteration %d", it)
                return u, history, it, True
        if not config.bb_steps:
            trial = 2.0 * step
        prev = (u, grad)
        u, f = cand, fc
        history.append(f)
        if _stalled(history, config.tol_J):
            converged = True
            break
    return u, history, it, converged


def _nelder_mead(obj: _Objective, u: np.ndarray, config: SolverConfig):
    history = [obj(u)]
    # coordinate simplex: one vertex per interior node
    scale = 0.05 * max(1.0, float(np.max(np.abs(u), initial=0.0)))
    simplex = np.vstack([u, u + scale * np.eye(u.size)])

    def record(xk):
        history.append(min(history[-1], obj(xk)))

    res = optimize.minimize(
        obj,
        u,
        method="Nelder-Mead",
        callback=record,
        options={
            "maxiter": config.max_iters,
            "initial_simplex": simplex,
            "fatol": config.tol_J,
            "xatol": 1e-10,
        },
    )
    return res.x, history, int(res.nit), bool(res.success)


def minimize(spec: ProblemSpec, config: SolverConfig | None = None) -> SolverResult:
    """Search for a minimizer of the discrete J with pinned history and end value."""
    config = config or SolverConfig()
    obj = _Objective(spec)
    u0 = _initial(spec, config.init)
    if config.method == METHODS[0]:
        u, history, iters, converged = _descent(obj, u0, config)
    else:
        u, history, iters, converged = _nelder_mead(obj, u0, config)

    traj = make_trajectory(spec, u)
    report = classical_residual(traj, spec) if spec.mode == "classical" else el_report(traj, spec)
    log.info("minimize: %d iterations, J %.3e -> %.3e", iters, history[0], history[-1])
    return SolverResult(
        trajectory=traj,
        J_final=history[-1],
        J_history=history,
        el=report,
        iterations=iters,
        converged=converged,
        J_init=history[0],
    )
