"""Evaluation of the running integral z(x) and the cost functional J.

All heavy lifting happens on plain arrays whose last axis runs over grid
nodes, so a stack of trajectories (shape ``(k, grid.size)``) is evaluated in
one pass. The solver relies on this for its finite-difference gradients.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from fracvar import expr as ex
from fracvar.fracops import (
    SampledPath,
    caputo_array,
    cumtrapz,
    left_integral_array,
    trapz,
)
from fracvar.problem import ProblemSpec, Trajectory

__all__ = [
    "EvaluatedFields",
    "compute_z",
    "evaluate_J",
    "evaluate_J_batch",
    "evaluate_fields",
    "field_arrays",
]


@dataclass(frozen=True)
class EvaluatedFields:
    """The argument vector of L along a trajectory, sampled on ``[a, b]``."""

    y: SampledPath
    v: SampledPath
    w: SampledPath
    z: SampledPath
    y_del: SampledPath
    v_del: SampledPath
    #: derivative of y on the whole grid ``[a - tau, b]``
    yprime: SampledPath

    def env(self, spec: ProblemSpec) -> dict:
        return {
            **spec.params,
            "x": self.y.x,
            "y": self.y.values,
            "v": self.v.values,
            "w": self.w.values,
            "z": self.z.values,
            "y_tau": self.y_del.values,
            "v_tau": self.v_del.values,
        }

    def to_csv(self) -> str:
        cols = ("y", "v", "w", "z", "y_del", "v_del")
        lines = ["node," + ",".join(cols)]
        for i, x in enumerate(self.y.x):
            row = ",".join(f"{getattr(self, c).values[i]:.17g}" for c in cols)
            lines.append(f"{x:.17g},{row}")
        return "\n".join(lines) + "\n"


def _evaluate_on(e: ex.Expr, env: dict, shape) -> np.ndarray:
    return np.broadcast_to(np.asarray(ex.evaluate(e, env), dtype=np.float64), shape)


def _derivative(Y: np.ndarray, spec: ProblemSpec) -> np.ndarray:
    """``y'`` on the whole grid: ``phi'`` on the history, differences on [a, b]."""
    g = spec.grid
    out = np.empty(Y.shape)
    xh = g.nodes[: g.i_a]
    out[..., : g.i_a] = _evaluate_on(spec.dphi, {**spec.params, "x": xh}, xh.shape)
    out[..., g.i_a :] = np.gradient(Y[..., g.i_a :], g.h, axis=-1, edge_order=2)
    return out


def field_arrays(
    Y: np.ndarray, spec: ProblemSpec, derivative: np.ndarray | None = None
) -> dict[str, np.ndarray]:
    """Arrays of ``y, v, w, z, y_tau, v_tau`` on ``[a, b]`` plus ``yprime``.

    ``Y`` holds nodal values on the full grid in its last axis; leading axes
    are carried along.
    """
    g = spec.grid
    Y = np.asarray(Y, dtype=np.float64)
    yab = Y[..., g.i_a :]
    yprime = _derivative(Y, spec) if derivative is None else np.broadcast_to(derivative, Y.shape)

    if spec.mode == "classical":
        v = yprime[..., g.i_a :]
        w = np.zeros(yab.shape)
    else:
        v = caputo_array(yab, spec.alpha, g.h)
        w = left_integral_array(yab, spec.beta, g.h)

    fields = {
        "y": yab,
        "v": v,
        "w": w,
        "y_tau": Y[..., : g.n + 1],
        "v_tau": yprime[..., : g.n + 1],
        "yprime": yprime,
    }
    fields["z"] = _z_array(fields, spec)
    return fields


def _env(fields: dict, spec: ProblemSpec) -> dict:
    g = spec.grid
    env = {k: fields[k] for k in ("y", "v", "w", "z", "y_tau", "v_tau") if k in fields}
    return {**spec.params, "x": g.nodes[g.i_a :], **env}


def _z_array(fields: dict, spec: ProblemSpec) -> np.ndarray:
    y = fields["y"]
    if spec.l == ex.Num(0.0):
        return np.zeros(y.shape)
    integrand = _evaluate_on(spec.l, _env(fields, spec), y.shape)
    return cumtrapz(integrand, spec.grid.h)


def compute_z(y: SampledPath, v: SampledPath, w: SampledPath, spec: ProblemSpec) -> SampledPath:
    """``z(x) = int_a^x l(t, y, v, w) dt`` by the running trapezoid rule."""
    z = _z_array({"y": y.values, "v": v.values, "w": w.values}, spec)
    return y.with_values(z)


def evaluate_fields(traj: Trajectory, spec: ProblemSpec) -> EvaluatedFields:
    g = spec.grid
    if traj.grid != g:
        raise ValueError("trajectory and problem live on different grids")
    f = field_arrays(traj.values, spec, traj.derivative)

    def on_ab(values):
        return SampledPath(g, values, g.i_a, g.i_b)

    return EvaluatedFields(
        y=on_ab(f["y"]),
        v=on_ab(f["v"]),
        w=on_ab(f["w"]),
        z=on_ab(f["z"]),
        y_del=on_ab(f["y_tau"]),
        v_del=on_ab(f["v_tau"]),
        yprime=SampledPath(g, f["yprime"], 0, g.i_b),
    )


def evaluate_J_batch(Y: np.ndarray, spec: ProblemSpec) -> np.ndarray:
    """J for each row of ``Y`` (nodal values on the full grid)."""
    f = field_arrays(Y, spec)
    L = _evaluate_on(spec.L, _env(f, spec), f["y"].shape)
    return trapz(L, spec.grid.h)


def evaluate_J(traj: Trajectory, spec: ProblemSpec) -> float:
    """The cost functional by the composite trapezoid rule on ``[a, b]``."""
    f = field_arrays(traj.values, spec, traj.derivative)
    L = _evaluate_on(spec.L, _env(f, spec), f["y"].shape)
    return float(trapz(L, spec.grid.h))
