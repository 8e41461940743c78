"""Numerical residuals of the first-order optimality system.

For a trajectory ``y`` the system has three parts:

* a terminal (transversality) condition ``dL/dv_tau [y](b) = 0``;
* an equation on ``[a, b - tau]`` mixing right-sided fractional operators
  truncated at ``b - tau``, tail corrections reaching up to ``b`` and the
  delayed partials read at ``x + tau``;
* an equation on ``[b - tau, b]`` with right-sided operators up to ``b``.

``Z(x) = int_x^b dL/dz dt`` multiplies the partials of the inner Lagrangian
``l``; products such as ``Z * dl/dv`` are formed pointwise before any
right-sided operator is applied.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from fracvar import expr as ex
from fracvar.fracops import (
    SampledPath,
    ddx,
    rev_cumtrapz,
    right_frac_integral,
    rl_right_derivative,
    tail_derivative_correction,
    tail_integral_correction,
    trapz,
)
from fracvar.functional import _env, field_arrays
from fracvar.problem import ProblemSpec, Trajectory

__all__ = [
    "ELReport",
    "ModeError",
    "classical_residual",
    "el_report",
    "residual_inner",
    "residual_outer",
    "residual_terminal",
    "variation_pairing",
]

#: nodes dropped from each end of a residual path before taking norms
MASK = 2


class ModeError(ValueError):
    pass


@dataclass(frozen=True)
class ELReport:
    terminal_residual: float
    inner_residual: SampledPath
    outer_residual: SampledPath
    inner_norm: float
    outer_norm: float
    grid_h: float
    #: global node indices excluded from the norms
    masked: tuple[int, ...] = ()
    #: inner minus outer residual at the shared node ``b - tau``
    junction_mismatch: float = 0.0
    inner_terms: dict[str, np.ndarray] = field(default_factory=dict, repr=False)
    outer_terms: dict[str, np.ndarray] = field(default_factory=dict, repr=False)

    def to_csv(self) -> str:
        lines = ["part,node,residual"]
        for part, path in (("inner", self.inner_residual), ("outer", self.outer_residual)):
            lines.extend(f"{part},{x:.17g},{r:.17g}" for x, r in zip(path.x, path.values))
        return "\n".join(lines) + "\n"

    def summary(self) -> dict:
        return {
            "terminal_residual": self.terminal_residual,
            "inner_norm": self.inner_norm,
            "outer_norm": self.outer_norm,
            "junction_mismatch": self.junction_mismatch,
            "grid_h": self.grid_h,
        }


class _Context:
    """Trajectory fields and partial derivatives evaluated along them."""

    def __init__(self, traj: Trajectory, spec: ProblemSpec) -> None:
        if traj.grid != spec.grid:
            raise ValueError("trajectory and problem live on different grids")
        self.spec = spec
        self.g = spec.grid
        self.fields = field_arrays(traj.values, spec, traj.derivative)
        self.env = _env(self.fields, spec)
        self.shape = self.fields["y"].shape
        self._cache: dict[str, np.ndarray | None] = {}

    def partial(self, which: str, var: str) -> np.ndarray | None:
        """``dL/dvar`` (which='L') or ``dl/dvar`` on [a, b]; None if symbolically 0."""
        key = which + var
        if key not in self._cache:
            e = (self.spec.dL if which == "L" else self.spec.dl)[var]
            if e == ex.Num(0.0):
                self._cache[key] = None
            else:
                val = ex.evaluate(e, self.env)
                self._cache[key] = np.broadcast_to(np.asarray(val, float), self.shape).copy()
        return self._cache[key]

    def path(self, values: np.ndarray) -> SampledPath:
        return SampledPath(self.g, values, self.g.i_a, self.g.i_b)

    def Z(self) -> np.ndarray | None:
        if "Z" not in self._cache:
            Lz = self.partial("L", "z")
            self._cache["Z"] = None if Lz is None else rev_cumtrapz(Lz, self.g.h)
        return self._cache["Z"]

    def zprod(self, var: str) -> np.ndarray | None:
        """``Z * dl/dvar``, or None when either factor vanishes identically."""
        Z, lp = self.Z(), self.partial("l", var)
        if Z is None or lp is None:
            return None
        return Z * lp


def _check_fractional(spec: ProblemSpec) -> None:
    if spec.mode != "fractional":
        raise ModeError("fractional residuals need a fractional-mode problem")


def residual_terminal(traj: Trajectory, spec: ProblemSpec) -> float:
    """``dL/dv_tau`` evaluated on the argument vector at ``x = b``."""
    ctx = _Context(traj, spec)
    d = ctx.partial("L", "v_tau")
    return 0.0 if d is None else float(d[-1])


def _inner(ctx: _Context) -> dict[str, np.ndarray]:
    spec, g = ctx.spec, ctx.g
    alpha, beta = spec.alpha, spec.beta
    a, r, b = g.i_a, g.i_r, g.i_b
    rows = r - a + 1
    terms: dict[str, np.ndarray] = {}

    def add(name, value):
        if value is not None:
            terms[name] = np.broadcast_to(value, (rows,))

    def derivative_pair(gvals, tag):
        if gvals is None:
            return
        gp = ctx.path(gvals)
        add(f"rl_{tag}", rl_right_derivative(gp, alpha, upper=r).values)
        add(f"tailD_{tag}", -tail_derivative_correction(gp, alpha, r, upper=b, lower=a).values)

    def integral_pair(gvals, tag):
        if gvals is None:
            return
        gp = ctx.path(gvals)
        add(f"int_{tag}", right_frac_integral(gp, beta, upper=r).values)
        add(f"tailI_{tag}", tail_integral_correction(gp, beta, r, upper=b, lower=a).values)

    Ly = ctx.partial("L", "y")
    add("Ly", None if Ly is None else Ly[: rows])
    derivative_pair(ctx.partial("L", "v"), "Lv")
    integral_pair(ctx.partial("L", "w"), "Lw")
    zy = ctx.zprod("y")
    add("Z_ly", None if zy is None else zy[:rows])
    derivative_pair(ctx.zprod("v"), "Z_lv")
    integral_pair(ctx.zprod("w"), "Z_lw")
    _add_delay_terms(ctx, add)
    return terms


def _add_delay_terms(ctx: _Context, add) -> None:
    # [y](x + tau) for x in [a, b - tau] is the slice [m, n] of the [a, b] arrays
    g = ctx.g
    shifted = slice(g.m, g.n + 1)
    Lyt = ctx.partial("L", "y_tau")
    if Lyt is not None:
        add("Lytau_shift", Lyt[shifted])
    Lvt = ctx.partial("L", "v_tau")
    if Lvt is not None:
        add("dLvtau_shift", -ddx(Lvt[shifted], g.h))


def _outer(ctx: _Context) -> dict[str, np.ndarray]:
    spec, g = ctx.spec, ctx.g
    r, b = g.i_r, g.i_b
    lo = r - g.i_a
    rows = b - r + 1
    terms: dict[str, np.ndarray] = {}

    def add(name, value):
        if value is not None:
            terms[name] = np.broadcast_to(value, (rows,))

    def seg(vals):
        return None if vals is None else SampledPath(g, vals[lo:], r, b)

    Ly = ctx.partial("L", "y")
    add("Ly", None if Ly is None else Ly[lo:])
    for tag, gvals in (("Lv", ctx.partial("L", "v")), ("Z_lv", ctx.zprod("v"))):
        if gvals is not None:
            add(f"rl_{tag}", rl_right_derivative(seg(gvals), spec.alpha).values)
    for tag, gvals in (("Lw", ctx.partial("L", "w")), ("Z_lw", ctx.zprod("w"))):
        if gvals is not None:
            add(f"int_{tag}", right_frac_integral(seg(gvals), spec.beta).values)
    zy = ctx.zprod("y")
    add("Z_ly", None if zy is None else zy[lo:])
    return terms


def _sum(terms: dict[str, np.ndarray], rows: int) -> np.ndarray:
    total = np.zeros(rows)
    for value in terms.values():
        total = total + value
    return total


def residual_inner(traj: Trajectory, spec: ProblemSpec) -> SampledPath:
    """Residual of the interval condition on ``[a, b - tau]``."""
    _check_fractional(spec)
    ctx = _Context(traj, spec)
    g = ctx.g
    return SampledPath(g, _sum(_inner(ctx), g.i_r - g.i_a + 1), g.i_a, g.i_r)


def residual_outer(traj: Trajectory, spec: ProblemSpec) -> SampledPath:
    """Residual of the interval condition on ``[b - tau, b]``."""
    _check_fractional(spec)
    ctx = _Context(traj, spec)
    g = ctx.g
    return SampledPath(g, _sum(_outer(ctx), g.i_b - g.i_r + 1), g.i_r, g.i_b)


def _masked_norm(values: np.ndarray) -> float:
    core = values[MASK : values.size - MASK]
    return float(np.max(np.abs(core))) if core.size else 0.0


def _report(ctx: _Context, inner_terms: dict, outer_terms: dict) -> ELReport:
    g = ctx.g
    inner = SampledPath(g, _sum(inner_terms, g.i_r - g.i_a + 1), g.i_a, g.i_r)
    outer = SampledPath(g, _sum(outer_terms, g.i_b - g.i_r + 1), g.i_r, g.i_b)
    masked = sorted(
        {
            *range(g.i_a, g.i_a + MASK),
            *range(g.i_r - MASK + 1, g.i_r + MASK),
            *range(g.i_b - MASK + 1, g.i_b + 1),
        }
    )
    Lvt = ctx.partial("L", "v_tau")
    return ELReport(
        terminal_residual=0.0 if Lvt is None else float(Lvt[-1]),
        inner_residual=inner,
        outer_residual=outer,
        inner_norm=_masked_norm(inner.values),
        outer_norm=_masked_norm(outer.values),
        grid_h=g.h,
        masked=tuple(masked),
        junction_mismatch=float(inner.values[-1] - outer.values[0]),
        inner_terms={k: np.array(v) for k, v in inner_terms.items()},
        outer_terms={k: np.array(v) for k, v in outer_terms.items()},
    )


def el_report(traj: Trajectory, spec: ProblemSpec) -> ELReport:
    """All three optimality conditions evaluated along ``traj``.

    Norms are max-abs values with :data:`MASK` nodes dropped at each end of
    both interval residuals, where the right-sided operators are singular.
    """
    _check_fractional(spec)
    ctx = _Context(traj, spec)
    return _report(ctx, _inner(ctx), _outer(ctx))


def classical_residual(traj: Trajectory, spec: ProblemSpec) -> ELReport:
    """Optimality system of the integer-order problem (``v`` means ``y'``)."""
    if spec.mode != "classical":
        raise ModeError("classical residuals need a classical-mode problem")
    ctx = _Context(traj, spec)
    g = ctx.g
    h = g.h
    split = g.i_r - g.i_a

    full: dict[str, np.ndarray] = {}
    Ly = ctx.partial("L", "y")
    if Ly is not None:
        full["Ly"] = Ly
    Lv = ctx.partial("L", "v")
    if Lv is not None:
        full["dLv"] = -ddx(Lv, h)
    zy = ctx.zprod("y")
    if zy is not None:
        full["Z_ly"] = zy
    zv = ctx.zprod("v")
    if zv is not None:
        full["dZ_lv"] = -ddx(zv, h)

    inner_terms = {k: v[: split + 1] for k, v in full.items()}
    outer_terms = {k: v[split:] for k, v in full.items()}

    def add(name, value):
        inner_terms[name] = value

    _add_delay_terms(ctx, add)
    return _report(ctx, inner_terms, outer_terms)


def variation_pairing(report: ELReport, direction: np.ndarray) -> float:
    """First variation of J predicted by the residuals, for a nodal direction.

    ``direction`` holds nodal values on the full grid and must vanish on the
    history and at ``b``. The pairing is the trapezoid integral of each
    interval residual against the direction plus the terminal residual times
    ``direction(b - tau)``.
    """
    inner, outer = report.inner_residual, report.outer_residual
    d = np.asarray(direction, dtype=np.float64)
    h = report.grid_h
    return float(
        trapz(inner.values * d[inner.lo : inner.hi + 1], h)
        + trapz(outer.values * d[outer.lo : outer.hi + 1], h)
        + report.terminal_residual * d[inner.hi]
    )
