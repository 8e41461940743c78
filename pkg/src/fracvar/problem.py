"""Problem definitions, the ``.fvp`` file format and the built-in catalog.

A problem file is flat ``key = value`` text::

    # delayed fractional problem
    label = example
    a = 0
    b = 2
    tau = 1
    alpha = 0.5
    beta = 1
    n = 256
    y_b = 2^(alpha+1)
    L = (v - gamma(alpha+2)*x)^2 + z + (v_tau - (alpha+1)*pospart(x-1)^alpha)^2
    l = (y - x^(alpha+1))^2
    phi = 0

Required keys: ``a b tau n y_b L`` (and ``alpha`` in fractional mode).
Optional: ``beta`` (1), ``l`` (0), ``phi`` (0), ``label`` (empty),
``mode`` (``fractional`` or ``classical``) and ``assume_positive_base``
(``false``; must be ``true`` for powers whose exponent depends on a variable).
``y_b`` may be a constant expression in the parameters.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from fracvar import expr as ex
from fracvar.fracops import Grid, SampledPath, make_grid

__all__ = [
    "ProblemError",
    "ProblemSpec",
    "Trajectory",
    "UnsupportedError",
    "builtin_example",
    "extract_interior",
    "linear_interpolant",
    "load_problem",
    "make_reference",
    "make_spec",
    "make_trajectory",
    "pretty_print",
]

_REQUIRED = ("a", "b", "tau", "n", "y_b", "L")
_KEYS = frozenset(
    _REQUIRED
    + ("alpha", "beta", "l", "phi", "label", "mode", "assume_positive_base")
)
_MODES = ("fractional", "classical")

#: variables that each Lagrangian may use, by mode
_VARSETS = {
    "fractional": (ex.L_VARS, ex.l_VARS),
    "classical": (ex.L_VARS - {"w"}, ex.l_VARS - {"w"}),
}

#: partial derivatives used by the optimality conditions
L_PARTIALS = ("y", "v", "w", "z", "y_tau", "v_tau")
l_PARTIALS = ("y", "v", "w")


class ProblemError(ValueError):
    """Invalid problem definition; ``field`` names the offending key."""

    def __init__(self, field: str, message: str) -> None:
        self.field = field
        super().__init__(f"{field}: {message}")


class UnsupportedError(ValueError):
    pass


@dataclass(frozen=True)
class ProblemSpec:
    """A delayed fractional variational problem with fixed end and history."""

    a: float
    b: float
    tau: float
    alpha: float
    beta: float
    L: ex.Expr
    l: ex.Expr  # noqa: E741
    phi: ex.Expr
    y_b: float
    n: int
    label: str = ""
    mode: str = "fractional"
    assume_positive_base: bool = False

    def __post_init__(self) -> None:
        _validate(self)

    @property
    def params(self) -> dict[str, float]:
        return {"alpha": self.alpha, "beta": self.beta, "tau": self.tau, "pi": math.pi}

    @cached_property
    def grid(self) -> Grid:
        return make_grid(self.a, self.b, self.tau, self.n)

    @cached_property
    def dL(self) -> dict[str, ex.Expr]:
        """Symbolic partials of L with respect to its non-``x`` arguments."""
        return {k: ex.differentiate(self.L, k) for k in L_PARTIALS}

    @cached_property
    def dl(self) -> dict[str, ex.Expr]:
        return {k: ex.differentiate(self.l, k) for k in l_PARTIALS}

    @cached_property
    def dphi(self) -> ex.Expr:
        return ex.differentiate(self.phi, "x")

    def with_n(self, n: int) -> ProblemSpec:
        return dataclasses.replace(self, n=int(n))

    def as_classical(self) -> ProblemSpec:
        return dataclasses.replace(self, mode="classical")

    def as_fractional(self, alpha: float) -> ProblemSpec:
        return dataclasses.replace(self, mode="fractional", alpha=float(alpha))


def _check_powers(e: ex.Expr, field: str, allowed: bool) -> None:
    if isinstance(e, ex.Pow) and not ex.is_constant(e.exponent) and not allowed:
        raise ProblemError(
            field,
            f"power '{e}' has a variable exponent; "
            "set assume_positive_base = true if the base stays positive",
        )
    for c in e.children():
        _check_powers(c, field, allowed)


def _validate(spec: ProblemSpec) -> None:
    if spec.mode not in _MODES:
        raise ProblemError("mode", f"must be one of {_MODES}, got {spec.mode!r}")
    for name in ("a", "b", "tau", "alpha", "beta", "y_b"):
        if not math.isfinite(getattr(spec, name)):
            raise ProblemError(name, "must be a finite number")
    if not spec.b > spec.a:
        raise ProblemError("b", f"need b > a, got a={spec.a}, b={spec.b}")
    if not 0.0 < spec.tau < spec.b - spec.a:
        raise ProblemError("tau", f"need 0 < tau < b - a = {spec.b - spec.a}")
    if spec.mode == "fractional" and not 0.0 < spec.alpha < 1.0:
        raise ProblemError("alpha", f"need 0 < alpha < 1, got {spec.alpha}")
    if not spec.beta > 0.0:
        raise ProblemError("beta", f"need beta > 0, got {spec.beta}")
    if int(spec.n) != spec.n or spec.n < 2:
        raise ProblemError("n", f"need an integer n >= 2, got {spec.n}")

    Lvars, lvars = _VARSETS[spec.mode]
    for field, e, allowed in (
        ("L", spec.L, Lvars),
        ("l", spec.l, lvars),
        ("phi", spec.phi, ex.PHI_VARS),
    ):
        extra = ex.free_vars(e) - allowed
        if extra:
            raise ProblemError(field, f"unknown variables {sorted(extra)} in {spec.mode} mode")
        _check_powers(e, field, spec.assume_positive_base)

    try:
        phi_a = ex.evaluate(spec.phi, {**spec.params, "x": spec.a})
    except ex.EvalError as err:
        raise ProblemError("phi", f"cannot evaluate at a: {err}") from err
    if not math.isfinite(phi_a):
        raise ProblemError("phi", "phi(a) is not finite")
    try:
        spec.grid  # noqa: B018
    except ValueError as err:
        raise ProblemError("n", str(err)) from err


def make_spec(
    L: str,
    *,
    a: float = 0.0,
    b: float = 2.0,
    tau: float = 1.0,
    alpha: float = 0.5,
    beta: float = 1.0,
    l: str = "0",  # noqa: E741
    phi: str = "0",
    y_b: float = 0.0,
    n: int = 64,
    label: str = "",
    mode: str = "fractional",
    assume_positive_base: bool = False,
) -> ProblemSpec:
    """Build a spec from expression strings (keyword defaults for the rest)."""
    Lvars, lvars = _VARSETS.get(mode, _VARSETS["fractional"])
    fields = {}
    for key, text, allowed in (("L", L, Lvars), ("l", l, lvars), ("phi", phi, ex.PHI_VARS)):
        try:
            fields[key] = ex.parse(text, allowed)
        except ex.ParseError as err:
            raise ProblemError(key, str(err)) from err
    return ProblemSpec(
        a=float(a),
        b=float(b),
        tau=float(tau),
        alpha=float(alpha),
        beta=float(beta),
        y_b=float(y_b),
        n=int(n),
        label=label,
        mode=mode,
        assume_positive_base=assume_positive_base,
        **fields,
    )


# {{{ file format


def _parse_bool(field: str, text: str) -> bool:
    low = text.strip().lower()
    if low in ("true", "yes", "1"):
        return True
    if low in ("false", "no", "0"):
        return False
    raise ProblemError(field, f"expected true or false, got {text!r}")


def _parse_float(field: str, text: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise ProblemError(field, f"expected a number, got {text!r}") from None


def load_problem(contents: str) -> ProblemSpec:
    """Parse and validate the contents of a ``.fvp`` problem file."""
    raw: dict[str, str] = {}
    for lineno, line in enumerate(contents.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ProblemError(f"line {lineno}", "expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in _KEYS:
            raise ProblemError(key, f"unknown key on line {lineno}")
        if key in raw:
            raise ProblemError(key, f"duplicate key on line {lineno}")
        raw[key] = value

    mode = raw.get("mode", "fractional")
    required = _REQUIRED + (("alpha",) if mode == "fractional" else ())
    for key in required:
        if key not in raw:
            raise ProblemError(key, "missing required field")

    num = {k: _parse_float(k, raw[k]) for k in ("a", "b", "tau")}
    alpha = _parse_float("alpha", raw["alpha"]) if "alpha" in raw else 0.5
    beta = _parse_float("beta", raw["beta"]) if "beta" in raw else 1.0
    try:
        n = int(raw["n"])
    except ValueError:
        raise ProblemError("n", f"expected an integer, got {raw['n']!r}") from None

    params = {"alpha": alpha, "beta": beta, "tau": num["tau"], "pi": math.pi}
    try:
        y_b = float(ex.evaluate(ex.parse(raw["y_b"], frozenset()), params))
    except ex.ExprError as err:
        raise ProblemError("y_b", str(err)) from err

    return make_spec(
        raw["L"],
        l=raw.get("l", "0"),
        phi=raw.get("phi", "0"),
        alpha=alpha,
        beta=beta,
        y_b=y_b,
        n=n,
        label=raw.get("label", ""),
        mode=mode,
        assume_positive_base=_parse_bool(
            "assume_positive_base", raw.get("assume_positive_base", "false")
        ),
        **num,
    )


def pretty_print(spec: ProblemSpec) -> str:
    """Serialize ``spec`` in the ``.fvp`` format (inverse of :func:`load_problem`)."""
    lines = [
        f"label = {spec.label}",
        f"mode = {spec.mode}",
        f"a = {spec.a!r}",
        f"b = {spec.b!r}",
        f"tau = {spec.tau!r}",
        f"alpha = {spec.alpha!r}",
        f"beta = {spec.beta!r}",
        f"n = {spec.n}",
        f"y_b = {spec.y_b!r}",
        f"L = {spec.L}",
        f"l = {spec.l}",
        f"phi = {spec.phi}",
        f"assume_positive_base = {str(spec.assume_positive_base).lower()}",
    ]
    return "\n".join(lines) + "\n"


# }}}


# {{{ catalog

EXAMPLE_L = "(v - gamma(alpha+2)*x)^2 + z + (v_tau - (alpha+1)*pospart(x-1)^alpha)^2"
EXAMPLE_l = "(y - x^(alpha+1))^2"


def builtin_example(alpha: float = 0.5, n: int = 256) -> ProblemSpec:
    """The delayed example on ``[0, 2]`` with ``tau = 1`` and minimizer ``x^(alpha+1)``.

    The cost is zero exactly at ``y(x) = x^(alpha+1)`` (zero history), so that
    function is the minimizer and 0 the minimum value.
    """
    if not 0.0 < alpha < 1.0:
        raise ProblemError("alpha", f"need 0 < alpha < 1, got {alpha}")
    return make_spec(
        EXAMPLE_L,
        l=EXAMPLE_l,
        phi="0",
        a=0.0,
        b=2.0,
        tau=1.0,
        alpha=alpha,
        beta=1.0,
        y_b=2.0 ** (alpha + 1.0),
        n=n,
        label="example",
    )


def _is_example(spec: ProblemSpec) -> bool:
    if spec.mode != "fractional" or not 0.0 < spec.alpha < 1.0:
        return False
    ref = builtin_example(spec.alpha, spec.n)
    return all(
        getattr(spec, k) == getattr(ref, k) for k in ("a", "b", "tau", "L", "l", "phi", "y_b")
    )


# }}}


# {{{ trajectories


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Nodal values on the whole grid ``[a - tau, b]``.

    ``derivative`` optionally carries exact nodal values of ``y'``; when it
    is present they replace finite differences. Only analytic references
    carry it, and :meth:`with_values` drops it.
    """

    grid: Grid
    values: np.ndarray
    derivative: np.ndarray | None = None

    def __post_init__(self) -> None:
        values = np.array(self.values, dtype=np.float64)
        if values.shape != (self.grid.size,):
            raise ValueError(f"expected {self.grid.size} values, got {values.shape}")
        values.flags.writeable = False
        object.__setattr__(self, "values", values)
        if self.derivative is not None:
            d = np.array(self.derivative, dtype=np.float64)
            d.flags.writeable = False
            object.__setattr__(self, "derivative", d)

    @property
    def path(self) -> SampledPath:
        return SampledPath(self.grid, self.values, 0, self.grid.size - 1)

    @property
    def x(self) -> np.ndarray:
        return self.grid.nodes

    def with_values(self, values) -> Trajectory:
        return Trajectory(self.grid, values)


def _history(spec: ProblemSpec) -> np.ndarray:
    g = spec.grid
    x = g.nodes[: g.i_a + 1]
    return np.broadcast_to(ex.evaluate(spec.phi, {**spec.params, "x": x}), x.shape)


def make_trajectory(spec: ProblemSpec, interior_values) -> Trajectory:
    """Assemble a trajectory: history from phi, given interior, ``y(b) = y_b``."""
    g = spec.grid
    interior = np.asarray(interior_values, dtype=np.float64)
    expected = g.i_b - g.i_a - 1
    if interior.shape != (expected,):
        raise ValueError(f"expected {expected} interior values, got {interior.shape}")
    return Trajectory(g, np.concatenate([_history(spec), interior, [spec.y_b]]))


def extract_interior(traj: Trajectory) -> np.ndarray:
    g = traj.grid
    return traj.values[g.i_a + 1 : g.i_b].copy()


def linear_interpolant(spec: ProblemSpec) -> Trajectory:
    """Straight line from ``phi(a)`` to ``y_b`` on ``[a, b]``."""
    g = spec.grid
    ya = float(_history(spec)[-1])
    x = g.nodes[g.i_a + 1 : g.i_b]
    return make_trajectory(spec, ya + (spec.y_b - ya) * (x - spec.a) / (spec.b - spec.a))


def make_reference(spec: ProblemSpec) -> Trajectory:
    """Analytic minimizer of the built-in example, with its exact derivative."""
    if not _is_example(spec):
        raise UnsupportedError("a reference solution is only known for the built-in example")
    x = spec.grid.nodes
    p = spec.alpha + 1.0
    xp = np.maximum(x, 0.0)
    return Trajectory(spec.grid, xp**p, derivative=p * xp**spec.alpha)


# }}}
