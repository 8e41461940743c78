"""Grids, sampled paths and quadrature-based fractional operators.

Every operator works on a :class:`SampledPath` living on a uniform
:class:`Grid`. Fractional integrals use the product trapezoidal rule: the
kernel is integrated exactly against the piecewise-linear interpolant of the
data. The Caputo derivative uses the L1 scheme. Right-sided operators are
obtained from left-sided ones by reflection.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import special

__all__ = [
    "AlignmentError",
    "DomainError",
    "FracOrder",
    "Grid",
    "ResolutionError",
    "SampledPath",
    "caputo_left",
    "gamma",
    "left_frac_integral",
    "make_grid",
    "read_path_csv",
    "right_frac_integral",
    "rl_left_derivative",
    "rl_right_derivative",
    "tail_derivative_correction",
    "tail_integral_correction",
    "tail_potential",
]


class DomainError(ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class AlignmentError(DomainError):
    """The delay is not an integer multiple of the grid step."""


class ResolutionError(ValueError):
    """Too few nodes for the requested finite-difference stencil."""


def gamma(x):
    """Euler's gamma function (scalar or array)."""
    out = special.gamma(x)
    return float(out) if np.ndim(out) == 0 else out


# {{{ grid and paths


@dataclass(frozen=True)
class Grid:
    """Uniform grid over ``[a - tau, b]`` with ``tau`` aligned to the step.

    Node ``i`` sits at ``a - tau + i * h``. The variational interval
    ``[a, b]`` starts at index :attr:`i_a`; the splitting point ``b - tau``
    is :attr:`i_r` and ``b`` is :attr:`i_b`.
    """

    a: float
    b: float
    tau: float
    n: int
    #: number of steps spanned by the delay
    m: int = field(default=0)

    @property
    def h(self) -> float:
        return (self.b - self.a) / self.n

    @property
    def i_a(self) -> int:
        return self.m

    @property
    def i_r(self) -> int:
        return self.n

    @property
    def i_b(self) -> int:
        return self.n + self.m

    @property
    def size(self) -> int:
        return self.n + self.m + 1

    @property
    def nodes(self) -> np.ndarray:
        return self.a + self.h * (np.arange(self.size) - self.m)

    def node(self, i: int) -> float:
        return self.a + self.h * (i - self.m)

    def index_of(self, x: float) -> int:
        """Index of the node at ``x`` (must be a node up to round-off)."""
        k = (x - self.a) / self.h + self.m
        i = round(k)
        if abs(k - i) > 1.0e-9 or not 0 <= i < self.size:
            raise DomainError(f"{x!r} is not a node of the grid")
        return i

    @classmethod
    def interval(cls, a: float, b: float, n: int) -> Grid:
        """Delay-free grid on ``[a, b]``, used by the identity checks."""
        if not b > a:
            raise DomainError(f"need b > a, got a={a}, b={b}")
        if n < 2:
            raise DomainError(f"need n >= 2, got {n}")
        return cls(float(a), float(b), 0.0, int(n), 0)


def _nearest_aligned_n(ratio: float, n: int) -> int:
    for k in range(1, 10 * n + 10):
        for cand in (n - k, n + k):
            if cand >= 2 and abs(cand * ratio - round(cand * ratio)) < 1.0e-12 * max(
                1.0, cand * ratio
            ):
                return cand
    raise AlignmentError("no admissible grid size near the requested one")


def make_grid(a: float, b: float, tau: float, n: int) -> Grid:
    """Build a grid on ``[a - tau, b]`` with ``n`` subintervals on ``[a, b]``.

    :raises DomainError: if ``b <= a``, ``tau`` is outside ``(0, b - a)`` or
        ``n < 2``.
    :raises AlignmentError: if ``tau / h`` is not an integer; the message
        names the closest admissible ``n``.
    """
    a, b, tau = float(a), float(b), float(tau)
    if not (math.isfinite(a) and math.isfinite(b) and b > a):
        raise DomainError(f"need finite b > a, got a={a}, b={b}")
    if not 0.0 < tau < b - a:
        raise DomainError(f"delay must satisfy 0 < tau < b - a = {b - a}, got {tau}")
    if int(n) != n or n < 2:
        raise DomainError(f"need an integer n >= 2, got {n}")
    n = int(n)

    ratio = tau / (b - a)
    steps = ratio * n
    m = round(steps)
    if m < 1 or abs(steps - m) > 1.0e-12 * max(1.0, steps):
        raise AlignmentError(
            f"tau/h = {steps:.6g} is not an integer for n={n}; "
            f"nearest admissible n is {_nearest_aligned_n(ratio, n)}"
        )
    return Grid(a, b, tau, n, m)


@dataclass(frozen=True, eq=False)
class SampledPath:
    """Values of a function at the grid nodes ``lo..hi`` (inclusive)."""

    grid: Grid
    values: np.ndarray
    lo: int
    hi: int

    def __post_init__(self) -> None:
        values = np.array(self.values, dtype=np.float64)
        if values.ndim != 1 or values.size != self.hi - self.lo + 1:
            raise ValueError(
                f"expected {self.hi - self.lo + 1} values for nodes "
                f"[{self.lo}, {self.hi}], got shape {values.shape}"
            )
        if not 0 <= self.lo <= self.hi < self.grid.size:
            raise ValueError(f"index range [{self.lo}, {self.hi}] outside the grid")
        if not np.all(np.isfinite(values)):
            raise ValueError("sampled path contains non-finite values")
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    @classmethod
    def sample(
        cls, grid: Grid, func, lo: int | None = None, hi: int | None = None
    ) -> SampledPath:
        lo = 0 if lo is None else lo
        hi = grid.size - 1 if hi is None else hi
        x = grid.nodes[lo : hi + 1]
        return cls(grid, np.broadcast_to(func(x), x.shape), lo, hi)

    @property
    def x(self) -> np.ndarray:
        return self.grid.nodes[self.lo : self.hi + 1]

    def __len__(self) -> int:
        return self.values.size

    def at(self, i: int) -> float:
        """Value at the global node index ``i``."""
        if not self.lo <= i <= self.hi:
            raise IndexError(f"node {i} outside [{self.lo}, {self.hi}]")
        return float(self.values[i - self.lo])

    def restrict(self, lo: int, hi: int) -> SampledPath:
        if not self.lo <= lo <= hi <= self.hi:
            raise DomainError(f"[{lo}, {hi}] is not inside [{self.lo}, {self.hi}]")
        return SampledPath(
            self.grid, self.values[lo - self.lo : hi - self.lo + 1], lo, hi
        )

    def with_values(self, values) -> SampledPath:
        return SampledPath(self.grid, values, self.lo, self.hi)

    def to_csv(self) -> str:
        lines = ["node,value"]
        lines.extend(f"{x:.17g},{v:.17g}" for x, v in zip(self.x, self.values))
        return "\n".join(lines) + "\n"


def read_path_csv(text: str, grid: Grid) -> SampledPath:
    """Parse ``node,value`` CSV (as written by :meth:`SampledPath.to_csv`)."""
    rows = [r for r in text.strip().splitlines() if r.strip()]
    if rows and rows[0].strip().lower().startswith("node"):
        rows = rows[1:]
    if not rows:
        raise ValueError("no data rows")
    xs, vs = zip(*((float(c) for c in r.split(",")[:2]) for r in rows))
    lo, hi = grid.index_of(xs[0]), grid.index_of(xs[-1])
    if hi - lo + 1 != len(xs):
        raise ValueError("CSV nodes are not consecutive grid nodes")
    return SampledPath(grid, np.array(vs), lo, hi)


@dataclass(frozen=True)
class FracOrder:
    alpha: float = 0.5
    beta: float = 1.0

    def __post_init__(self) -> None:
        _check_alpha(self.alpha)
        _check_beta(self.beta)


def _check_alpha(alpha: float) -> None:
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"derivative order must lie in (0, 1), got {alpha}")


def _check_beta(beta: float) -> None:
    if not beta > 0.0:
        raise DomainError(f"integral order must be positive, got {beta}")


# }}}


# {{{ weights


def _moments(s0: np.ndarray, s1: np.ndarray, p: float) -> tuple[np.ndarray, np.ndarray]:
    """Exact integrals of ``s^(p-1)`` against the two hat functions on [s0, s1].

    Returns ``(int s^(p-1) (s1 - s) ds, int s^(p-1) (s - s0) ds)`` for
    ``0 <= s0 < s1 = s0 + 1`` (unit spacing, so the hats need no scaling).
    """
    m0 = (s1**p - s0**p) / p
    m1 = (s1 ** (p + 1) - s0 ** (p + 1)) / (p + 1)
    return s1 * m0 - m1, m1 - s0 * m0


@lru_cache(maxsize=64)
def _integral_matrix(size: int, p: float) -> np.ndarray:
    """Product-trapezoid matrix for ``int_0^{x_j} (x_j - t)^(p-1) f(t) dt``.

    Unit step and no ``1/Gamma`` factor; row ``j`` holds the weights of
    ``f_0..f_j``.
    """
    W = np.zeros((size, size))
    for j in range(1, size):
        k = np.arange(j)
        # distance from x_j to the subinterval [t_k, t_{k+1}], in steps
        near, far = (j - k - 1).astype(float), (j - k).astype(float)
        # hat at t_k is (s - near) in reflected variable, hat at t_{k+1} is (far - s)
        w_right, w_left = _moments(near, far, p)
        W[j, :j] += w_left
        W[j, 1 : j + 1] += w_right
    W.flags.writeable = False
    return W


@lru_cache(maxsize=64)
def _l1_matrix(size: int, alpha: float) -> np.ndarray:
    """L1 weights acting on forward differences ``f_{k+1} - f_k`` (unit step)."""
    j = np.arange(size)
    diff = j[:, None] - j[None, : size - 1] - 1
    b = np.where(
        diff >= 0,
        (np.maximum(diff, 0) + 1.0) ** (1 - alpha) - np.maximum(diff, 0) ** (1 - alpha),
        0.0,
    )
    b.flags.writeable = False
    return b


def _tail_matrix(rows: int, span: int, p: float) -> np.ndarray:
    """Weights for ``int_r^U (t - x_i)^(p-1) g(t) dt`` at ``x_i = r - i`` steps.

    ``rows`` target nodes (``i = rows-1 .. 0`` counted back from ``r``) and
    ``span`` subintervals on ``[r, U]``. Row order is by increasing ``x``.
    """
    i = np.arange(rows)[::-1][:, None].astype(float)
    k = np.arange(span)[None, :].astype(float)
    s0, s1 = i + k, i + k + 1.0
    w_lo, w_hi = _moments(s0, s1, p)
    W = np.zeros((rows, span + 1))
    W[:, :span] += w_lo
    W[:, 1:] += w_hi
    return W


def ddx(values: np.ndarray, h: float) -> np.ndarray:
    """Centred differences with first-order one-sided ends (last axis).

    The first-order ends make the trapezoid rule telescope exactly:
    ``trapz(ddx(F)) == F[-1] - F[0]``, which keeps integrals of
    differentiated potentials consistent near weak singularities.
    """
    values = np.asarray(values, dtype=np.float64)
    if values.shape[-1] < 2:
        raise ResolutionError("need at least 2 nodes to differentiate")
    return np.gradient(values, h, axis=-1, edge_order=1)


def trapz(values: np.ndarray, h: float) -> np.ndarray:
    """Composite trapezoid over the last axis."""
    values = np.asarray(values, dtype=np.float64)
    if values.shape[-1] < 2:
        return np.zeros(values.shape[:-1])
    return h * (values.sum(axis=-1) - 0.5 * (values[..., 0] + values[..., -1]))


def cumtrapz(values: np.ndarray, h: float) -> np.ndarray:
    """Running trapezoid from the first node, starting at 0 (last axis)."""
    values = np.asarray(values, dtype=np.float64)
    inc = 0.5 * h * (values[..., 1:] + values[..., :-1])
    out = np.zeros(values.shape)
    out[..., 1:] = np.cumsum(inc, axis=-1)
    return out


def rev_cumtrapz(values: np.ndarray, h: float) -> np.ndarray:
    """``int_x^end`` by reverse running trapezoid (last axis)."""
    return cumtrapz(values[..., ::-1], h)[..., ::-1]


# }}}


# {{{ array kernels (last axis = nodes, leading axes broadcast)


def left_integral_array(f: np.ndarray, beta: float, h: float) -> np.ndarray:
    W = _integral_matrix(f.shape[-1], float(beta))
    return f @ W.T * (h**beta / gamma(beta))


def right_integral_array(g: np.ndarray, beta: float, h: float) -> np.ndarray:
    return left_integral_array(g[..., ::-1], beta, h)[..., ::-1]


def caputo_array(f: np.ndarray, alpha: float, h: float) -> np.ndarray:
    B = _l1_matrix(f.shape[-1], float(alpha))
    return np.diff(f, axis=-1) @ B.T * (h ** (-alpha) / gamma(2.0 - alpha))


def rl_right_array(g: np.ndarray, alpha: float, h: float) -> np.ndarray:
    return -ddx(right_integral_array(g, 1.0 - alpha, h), h)


def tail_potential_array(
    g: np.ndarray, p: float, rows: int, h: float
) -> np.ndarray:
    """``(1/Gamma(p)) int_r^U (t - x)^(p-1) g(t) dt`` for the ``rows`` nodes ending at r."""
    W = _tail_matrix(rows, g.shape[-1] - 1, float(p))
    return g @ W.T * (h**p / gamma(p))


# }}}


# {{{ operators on sampled paths


def _lower(f: SampledPath, lower: int | None) -> SampledPath:
    lower = f.lo if lower is None else lower
    return f.restrict(lower, f.hi)


def _upper(g: SampledPath, upper: int | None) -> SampledPath:
    upper = g.hi if upper is None else upper
    return g.restrict(g.lo, upper)


def left_frac_integral(
    f: SampledPath, beta: float, lower: int | None = None
) -> SampledPath:
    r"""Left fractional integral :math:`{}_aI_x^\beta f` with base point ``lower``.

    The output lives on ``[lower, f.hi]`` and vanishes at ``lower``.
    """
    _check_beta(beta)
    f = _lower(f, lower)
    return f.with_values(left_integral_array(f.values, beta, f.grid.h))


def right_frac_integral(
    g: SampledPath, beta: float, upper: int | None = None
) -> SampledPath:
    r"""Right fractional integral :math:`{}_xI_b^\beta g` with end point ``upper``."""
    _check_beta(beta)
    g = _upper(g, upper)
    return g.with_values(right_integral_array(g.values, beta, g.grid.h))


def caputo_left(f: SampledPath, alpha: float, lower: int | None = None) -> SampledPath:
    """Left Caputo derivative by the L1 scheme; zero at ``lower`` by convention."""
    _check_alpha(alpha)
    f = _lower(f, lower)
    return f.with_values(caputo_array(f.values, alpha, f.grid.h))


def rl_left_derivative(
    f: SampledPath, alpha: float, lower: int | None = None
) -> SampledPath:
    """Left Riemann-Liouville derivative, ``d/dx`` of the left (1-alpha)-integral."""
    _check_alpha(alpha)
    f = _lower(f, lower)
    if len(f) < 3:
        raise ResolutionError("need at least 3 nodes for the Riemann-Liouville derivative")
    h = f.grid.h
    return f.with_values(ddx(left_integral_array(f.values, 1.0 - alpha, h), h))


def rl_right_derivative(
    g: SampledPath, alpha: float, upper: int | None = None
) -> SampledPath:
    """Right Riemann-Liouville derivative, ``-d/dx`` of the right (1-alpha)-integral.

    The value at ``upper`` is a one-sided difference; the exact operator is
    generally singular there.
    """
    _check_alpha(alpha)
    g = _upper(g, upper)
    if len(g) < 3:
        raise ResolutionError("need at least 3 nodes for the Riemann-Liouville derivative")
    return g.with_values(rl_right_array(g.values, alpha, g.grid.h))


def _tail_setup(g: SampledPath, r: int, upper: int | None, lower: int | None):
    upper = g.hi if upper is None else upper
    lower = g.lo if lower is None else lower
    if not r < upper:
        raise DomainError(f"need r < upper, got r={r}, upper={upper}")
    if not (g.lo <= r and upper <= g.hi):
        raise DomainError(f"g must cover [{r}, {upper}], it covers [{g.lo}, {g.hi}]")
    if not 0 <= lower <= r:
        raise DomainError(f"need lower <= r, got lower={lower}, r={r}")
    return g.restrict(r, upper), lower


def tail_potential(
    g: SampledPath,
    alpha: float,
    r: int,
    upper: int | None = None,
    lower: int | None = None,
) -> SampledPath:
    """``(1/Gamma(1-alpha)) int_r^upper (t - x)^(-alpha) g(t) dt`` for x in [lower, r]."""
    _check_alpha(alpha)
    seg, lower = _tail_setup(g, r, upper, lower)
    vals = tail_potential_array(seg.values, 1.0 - alpha, r - lower + 1, g.grid.h)
    return SampledPath(g.grid, vals, lower, r)


def tail_derivative_correction(
    g: SampledPath,
    alpha: float,
    r: int,
    upper: int | None = None,
    lower: int | None = None,
) -> SampledPath:
    """``d/dx`` of :func:`tail_potential` on ``[lower, r]``.

    This is the extra term that appears when the integration range and the
    base point of a Caputo derivative differ. It is singular at ``x = r``
    whenever ``g(r) != 0``; the value there is a one-sided difference.
    """
    F = tail_potential(g, alpha, r, upper, lower)
    if len(F) < 2:
        raise ResolutionError("need at least 2 nodes in [lower, r]")
    return F.with_values(ddx(F.values, g.grid.h))


def tail_integral_correction(
    g: SampledPath,
    beta: float,
    r: int,
    upper: int | None = None,
    lower: int | None = None,
) -> SampledPath:
    """``(1/Gamma(beta)) int_r^upper (t - x)^(beta-1) g(t) dt`` for x in [lower, r]."""
    _check_beta(beta)
    seg, lower = _tail_setup(g, r, upper, lower)
    vals = tail_potential_array(seg.values, beta, r - lower + 1, g.grid.h)
    return SampledPath(g.grid, vals, lower, r)


# }}}
