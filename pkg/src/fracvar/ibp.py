"""Numerical checks of the fractional integration-by-parts identities.

Three identities are checked on sampled paths, with every outer integral
taken by the trapezoid rule on the same grid as the operator outputs:

* integrals:  int_a^b g I_a^beta f  =  int_a^b f I_b^beta g
* Caputo:     int_a^b g C_a^alpha f  =  int_a^b f D_b^alpha g
                                        + [f I_b^(1-alpha) g]_a^b
* split:      int_r^b g C_a^alpha f  =  int_r^b f D_b^alpha g
                                        - int_a^r f F'
                                        - f(a) F(a)

where ``F(x) = (1/Gamma(1-alpha)) int_r^b (t - x)^(-alpha) g(t) dt`` is the
tail potential. The residuals are pure discretization error and must shrink
under refinement.
"""

from __future__ import annotations

from collections.abc import Callable, Iterable
from dataclasses import dataclass, field

import numpy as np

from fracvar.fracops import (
    DomainError,
    Grid,
    SampledPath,
    _check_alpha,
    _check_beta,
    caputo_left,
    left_frac_integral,
    right_frac_integral,
    rl_right_derivative,
    tail_derivative_correction,
    tail_potential,
    trapz,
)

__all__ = [
    "CATALOG",
    "IDENTITIES",
    "IbpResidual",
    "ibp_sweep",
    "sweep_csv",
    "verify_ibp_caputo",
    "verify_ibp_integral",
    "verify_ibp_split",
]


@dataclass(frozen=True)
class IbpResidual:
    lhs: float
    rhs: float
    residual: float
    rel_residual: float
    grid_h: float
    #: individual right-hand side contributions
    terms: dict[str, float] = field(default_factory=dict)


def _result(lhs: float, terms: dict[str, float], h: float) -> IbpResidual:
    rhs = float(sum(terms.values()))
    res = abs(lhs - rhs)
    return IbpResidual(lhs, rhs, res, res / max(1.0, abs(lhs), abs(rhs)), h, terms)


def _common(f: SampledPath, g: SampledPath) -> None:
    if f.grid != g.grid or (f.lo, f.hi) != (g.lo, g.hi):
        raise DomainError(
            f"f and g must share a range: [{f.lo}, {f.hi}] vs [{g.lo}, {g.hi}]"
        )


def verify_ibp_integral(f: SampledPath, g: SampledPath, beta: float) -> IbpResidual:
    _common(f, g)
    _check_beta(beta)
    h = f.grid.h
    lhs = float(trapz(g.values * left_frac_integral(f, beta).values, h))
    rhs = float(trapz(f.values * right_frac_integral(g, beta).values, h))
    return _result(lhs, {"integral": rhs}, h)


def verify_ibp_caputo(f: SampledPath, g: SampledPath, alpha: float) -> IbpResidual:
    _common(f, g)
    _check_alpha(alpha)
    h = f.grid.h
    lhs = float(trapz(g.values * caputo_left(f, alpha).values, h))
    integral = float(trapz(f.values * rl_right_derivative(g, alpha).values, h))
    # the right integral vanishes at b, so only the lower end contributes
    boundary = -f.values[0] * float(right_frac_integral(g, 1.0 - alpha).values[0])
    return _result(lhs, {"integral": integral, "boundary": boundary}, h)


def verify_ibp_split(f: SampledPath, g: SampledPath, alpha: float, r: int) -> IbpResidual:
    _common(f, g)
    _check_alpha(alpha)
    if not f.lo < r < f.hi:
        raise DomainError(f"r={r} must be strictly inside [{f.lo}, {f.hi}]")
    h = f.grid.h
    k = r - f.lo
    lhs = float(trapz(g.values[k:] * caputo_left(f, alpha).values[k:], h))
    main = float(trapz(f.values[k:] * rl_right_derivative(g.restrict(r, g.hi), alpha).values, h))
    dF = tail_derivative_correction(g, alpha, r)
    F_a = tail_potential(g, alpha, r).values[0]
    terms = {
        "integral": main,
        "tail": -float(trapz(f.values[: k + 1] * dF.values, h)),
        "boundary": -float(f.values[0] * F_a),
    }
    return _result(lhs, terms, h)


# {{{ catalog and sweeps

Func = Callable[[np.ndarray], np.ndarray]

#: C^1 test pairs (f, g) on [0, 2]
CATALOG: dict[str, tuple[Func, Func]] = {
    "poly": (lambda x: 1.0 + x - 0.5 * x**2, lambda x: 2.0 - x + 0.25 * x**3),
    "cubic": (lambda x: x**3 - x, lambda x: 1.0 + x**2),
    "exp": (np.exp, lambda x: np.exp(-0.5 * x) + x),
    "sin": (np.sin, lambda x: 1.0 + np.sin(x)),
    "mixed": (lambda x: np.exp(0.5 * x) * np.sin(x), lambda x: 1.0 + x),
}

IDENTITIES = ("integral", "caputo", "split")
SWEEP_NS = (64, 128, 256, 512)


def _pair(name: str, n: int, a: float = 0.0, b: float = 2.0):
    grid = Grid.interval(a, b, n)
    f, g = CATALOG[name]
    return SampledPath.sample(grid, f), SampledPath.sample(grid, g)


def run_identity(
    identity: str, f: SampledPath, g: SampledPath, alpha: float, beta: float, r_frac: float = 0.5
) -> IbpResidual:
    if identity == "integral":
        return verify_ibp_integral(f, g, beta)
    if identity == "caputo":
        return verify_ibp_caputo(f, g, alpha)
    if identity == "split":
        r = f.lo + int(round(r_frac * (f.hi - f.lo)))
        return verify_ibp_split(f, g, alpha, r)
    raise ValueError(f"unknown identity {identity!r}; expected one of {IDENTITIES}")


def ibp_sweep(
    ns: Iterable[int] = SWEEP_NS,
    alpha: float = 0.5,
    beta: float = 0.5,
    pairs: Iterable[str] | None = None,
    identities: Iterable[str] = IDENTITIES,
) -> list[dict]:
    """Rows ``(identity, pair, n, lhs, rhs, residual, rel_residual)`` for each case."""
    rows = []
    for identity in identities:
        for name in pairs or CATALOG:
            for n in ns:
                f, g = _pair(name, n)
                res = run_identity(identity, f, g, alpha, beta)
                rows.append(
                    {
                        "identity": identity,
                        "pair": name,
                        "n": int(n),
                        "lhs": res.lhs,
                        "rhs": res.rhs,
                        "residual": res.residual,
                        "rel_residual": res.rel_residual,
                    }
                )
    return rows


def sweep_csv(rows: list[dict]) -> str:
    cols = ("identity", "pair", "n", "lhs", "rhs", "residual", "rel_residual")
    out = [",".join(cols)]
    for row in rows:
        out.append(
            ",".join(
                f"{row[c]:.17g}" if isinstance(row[c], float) else str(row[c]) for c in cols
            )
        )
    return "\n".join(out) + "\n"


# }}}
