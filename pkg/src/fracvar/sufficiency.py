"""Sampled convexity checks and the sufficiency certificate.

A trajectory satisfying the Euler-Lagrange conditions is a minimizer when L
is jointly convex in ``(y, v, w, z, y_tau, v_tau)`` and either l is convex in
``(y, v, w)`` with ``dL/dz >= 0`` or l is concave with ``dL/dz <= 0``. The
convexity hypotheses are tested on random point pairs through the gradient
inequality

    f(p + c) - f(p) >= <grad f(p), c>      (convex; reversed for concave)

so every status is "likely": a passed test is evidence, a failed one comes
with a witness that can be re-checked by hand. ``sufficient-minimizer``
means exactly "the hypotheses passed sampling".
"""

from __future__ import annotations

import json
import math
from collections.abc import Mapping, Sequence
from dataclasses import asdict, dataclass

import numpy as np

from fracvar import expr as ex
from fracvar.functional import evaluate_fields
from fracvar.problem import L_PARTIALS, ProblemSpec, Trajectory, l_PARTIALS

__all__ = [
    "ConvexityVerdict",
    "SamplingError",
    "SufficiencyCertificate",
    "certify",
    "check_convexity",
    "gradient_margin",
]

TOL = 1e-10
STATUSES = ("likely-convex", "likely-concave", "indefinite", "counterexample")


class SamplingError(RuntimeError):
    """Too many sampled points could not be evaluated."""


@dataclass(frozen=True)
class ConvexityVerdict:
    status: str
    #: (point, point + c) as variable -> value maps, for failed tests
    witness: tuple[dict, dict] | None
    samples_tested: int
    #: worst slack of the tested inequality (min for convex, max for concave)
    margin: float
    linear: bool = False
    #: decided from a constant Hessian rather than by sampling alone
    exact: bool = False
    skipped: int = 0

    def as_dict(self) -> dict:
        d = asdict(self)
        d["witness"] = None if self.witness is None else list(self.witness)
        return d


@dataclass(frozen=True)
class SufficiencyCertificate:
    L_verdict: ConvexityVerdict
    l_verdict: ConvexityVerdict
    dLdz_sign: str
    dLdz_min: float
    dLdz_max: float
    conclusion: str

    def as_dict(self) -> dict:
        return {
            "L_verdict": self.L_verdict.as_dict(),
            "l_verdict": self.l_verdict.as_dict(),
            "dLdz_sign": self.dLdz_sign,
            "dLdz_min": self.dLdz_min,
            "dLdz_max": self.dLdz_max,
            "conclusion": self.conclusion,
        }

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), sort_keys=True, indent=2) + "\n"


def gradient_margin(e: ex.Expr, p: Mapping, q: Mapping, vars: Sequence[str], params=None):
    """``f(q) - f(p) - <grad f(p), q - p>`` and a magnitude scale for it.

    ``p`` and ``q`` must agree on every name outside ``vars``.
    """
    params = dict(params or {})
    grads = [ex.differentiate(e, v) for v in vars]
    return _margins(e, grads, vars, {**params, **p}, {**params, **q})


def _margins(e, grads, vars, env_p, env_q):
    fp = np.asarray(ex.evaluate(e, env_p), dtype=np.float64)
    fq = np.asarray(ex.evaluate(e, env_q), dtype=np.float64)
    lin = np.zeros(np.broadcast(fp, fq).shape)
    for v, g in zip(vars, grads):
        lin = lin + np.asarray(ex.evaluate(g, env_p), dtype=np.float64) * (env_q[v] - env_p[v])
    margin = (fq - fp) - lin
    parts = np.broadcast_arrays(np.ones_like(margin), np.abs(fp), np.abs(fq), np.abs(lin))
    scale = np.maximum.reduce(parts)
    return margin, scale


def _is_polynomial(e: ex.Expr, block: frozenset[str]) -> bool:
    """Polynomial in the block variables, coefficients free of them."""
    if not (ex.free_vars(e) & block):
        return True
    if isinstance(e, ex.Var):
        return True
    if isinstance(e, ex.Neg):
        return _is_polynomial(e.operand, block)
    if isinstance(e, ex.BinOp):
        if e.op == "/":
            return not (ex.free_vars(e.right) & block) and _is_polynomial(e.left, block)
        return _is_polynomial(e.left, block) and _is_polynomial(e.right, block)
    if isinstance(e, ex.Pow):
        if not isinstance(e.exponent, ex.Num):
            return False
        k = e.exponent.value
        return k >= 0 and k == int(k) and _is_polynomial(e.base, block)
    return False


def _constant_hessian(e, vars, params):
    """The Hessian in ``vars`` when ``e`` is a polynomial of degree <= 2, else None."""
    if not _is_polynomial(e, frozenset(vars)):
        return None
    H = np.empty((len(vars), len(vars)))
    for i, u in enumerate(vars):
        du = ex.differentiate(e, u)
        for j, w in enumerate(vars):
            h = ex.differentiate(du, w)
            if not ex.is_constant(h):
                return None
            H[i, j] = float(ex.evaluate(h, params))
    return H


def _pair(names, P, Q, k) -> tuple[dict, dict]:
    return (
        {v: float(P[v][k]) for v in names},
        {v: float(Q[v][k]) for v in names},
    )


def _sample_margins(e, vars, fixed, box, trials, rng, params):
    names = list(vars) + list(fixed)
    P = {v: rng.uniform(*box[v], size=trials) for v in names}
    Q = dict(P)
    for v in vars:
        Q[v] = rng.uniform(*box[v], size=trials)
    grads = [ex.differentiate(e, v) for v in vars]
    try:
        with np.errstate(all="ignore"):
            margin, scale = _margins(e, grads, vars, {**params, **P}, {**params, **Q})
    except ex.EvalError:
        # fall back to point-by-point evaluation so bad points can be skipped
        margin, scale = np.full(trials, np.nan), np.ones(trials)
        for k in range(trials):
            p, q = _pair(names, P, Q, k)
            try:
                with np.errstate(all="ignore"):
                    m, s = _margins(e, grads, vars, {**params, **p}, {**params, **q})
            except ex.EvalError:
                continue
            margin[k], scale[k] = float(m), float(s)
    margin = np.broadcast_to(margin, (trials,))
    scale = np.broadcast_to(scale, (trials,))
    return names, P, Q, margin, scale


def _eigen_witness(e, vars, fixed, box, H, sign, params):
    """A pair along the worst Hessian eigenvector, centred in the box."""
    vals, vecs = np.linalg.eigh(sign * H)
    u = vecs[:, 0]
    names = list(vars) + list(fixed)
    centre = {v: 0.5 * (box[v][0] + box[v][1]) for v in names}
    half = min(0.5 * (box[v][1] - box[v][0]) for v in vars)
    p = dict(centre)
    q = dict(centre)
    for v, c in zip(vars, u):
        p[v] = centre[v] - 0.5 * half * c
        q[v] = centre[v] + 0.5 * half * c
    m, _ = gradient_margin(e, p, q, vars, params)
    return (p, q), float(m)


def check_convexity(
    e: ex.Expr,
    vars: Sequence[str],
    box: Mapping[str, tuple[float, float]],
    trials: int = 10_000,
    seed: int = 0,
    expect: str | None = None,
    params: Mapping[str, float] | None = None,
) -> ConvexityVerdict:
    """Test the gradient inequality jointly in ``vars`` on random pairs.

    Every other free variable of ``e`` must have an interval in ``box``; it
    is sampled once per pair and held fixed between the two points.
    ``expect`` ("convex" or "concave") turns a failure of that property into
    a ``counterexample``; without it a failure of both is ``indefinite``.
    """
    if trials < 1:
        raise ValueError("trials must be at least 1")
    if expect not in (None, "convex", "concave"):
        raise ValueError(f"expect must be 'convex', 'concave' or None, got {expect!r}")
    vars = tuple(vars)
    if not vars:
        raise ValueError("no variables to test")
    fixed = tuple(sorted(ex.free_vars(e) - set(vars)))
    for v in vars + fixed:
        if v not in box:
            raise ValueError(f"no sampling interval for {v!r}")
        lo, hi = map(float, box[v])
        if not (math.isfinite(lo) and math.isfinite(hi)):
            raise ValueError(f"interval for {v!r} is not finite")
        if not hi > lo and v in vars:
            raise ValueError(f"degenerate interval for {v!r}: [{lo}, {hi}]")
    box = {v: (float(box[v][0]), float(box[v][1])) for v in vars + fixed}
    params = {"pi": math.pi, **(params or {})}

    rng = np.random.default_rng(seed)
    names, P, Q, margin, scale = _sample_margins(e, vars, fixed, box, trials, rng, params)
    ok = np.isfinite(margin)
    skipped = int(trials - ok.sum())
    if skipped > trials // 2:
        raise SamplingError(f"{skipped} of {trials} samples could not be evaluated")

    m = np.where(ok, margin, np.nan)
    rel = m / scale
    convex_ok = not np.any(rel[ok] < -TOL)
    concave_ok = not np.any(rel[ok] > TOL)
    lo_k = int(np.nanargmin(m))
    hi_k = int(np.nanargmax(m))
    mn, mx = float(m[lo_k]), float(m[hi_k])

    H = _constant_hessian(e, vars, params)
    exact = H is not None
    if exact:
        eig = np.linalg.eigvalsh(H)
        tol = TOL * max(1.0, float(np.max(np.abs(eig))))
        convex_ok = bool(eig.min() >= -tol)
        concave_ok = bool(eig.max() <= tol)

    def verdict(status, witness=None, margin=mn, linear=False):
        return ConvexityVerdict(
            status, witness, int(ok.sum()), margin, linear=linear, exact=exact, skipped=skipped
        )

    def witness_for(prop):
        k, worst = (lo_k, mn) if prop == "convex" else (hi_k, mx)
        bad = rel[k] < -TOL if prop == "convex" else rel[k] > TOL
        if bad:
            return _pair(names, P, Q, k), worst
        # only the Hessian saw it; build a pair along the offending direction
        return _eigen_witness(e, vars, fixed, box, H, 1.0 if prop == "convex" else -1.0, params)

    if convex_ok and concave_ok:
        return verdict("likely-convex", margin=mn, linear=True)
    if convex_ok and expect != "concave":
        return verdict("likely-convex", margin=mn)
    if concave_ok and expect != "convex":
        return verdict("likely-concave", margin=mx)
    if expect is not None:
        w, worst = witness_for(expect)
        return verdict("counterexample", w, margin=worst)
    w, _ = witness_for("convex")
    return verdict("indefinite", w, margin=mn)


def _box_from(values: np.ndarray, inflation: float) -> tuple[float, float]:
    lo, hi = float(np.min(values)), float(np.max(values))
    pad = inflation * max(hi - lo, 1.0)
    return lo - pad, hi + pad


def certify(
    spec: ProblemSpec,
    traj: Trajectory,
    inflation: float = 0.5,
    trials: int = 10_000,
    seed: int = 0,
) -> SufficiencyCertificate:
    """Check the convexity hypotheses around the range visited by ``traj``.

    Each variable's box is its observed range along the trajectory, padded
    on both sides by ``inflation * max(range, 1)``; ``x`` ranges over
    ``[a, b]`` unpadded.
    """
    if not inflation >= 0:
        raise ValueError("inflation must be non-negative")
    fields = evaluate_fields(traj, spec)
    env = fields.env(spec)
    box = {"x": (spec.a, spec.b)}
    for v in L_PARTIALS:
        box[v] = _box_from(np.asarray(env[v]), inflation)

    L_v = check_convexity(spec.L, L_PARTIALS, box, trials, seed, "convex", spec.params)
    l_v = check_convexity(spec.l, l_PARTIALS, box, trials, seed + 1, None, spec.params)

    dz = np.broadcast_to(np.asarray(ex.evaluate(spec.dL["z"], env), dtype=np.float64), env["y"].shape)
    dmin, dmax = float(dz.min()), float(dz.max())
    if dmin >= 0:
        sign = "nonnegative"
    elif dmax <= 0:
        sign = "nonpositive"
    else:
        sign = "mixed"

    l_convex = l_v.status == "likely-convex"
    l_concave = l_v.status == "likely-concave" or l_v.linear
    ok = L_v.status == "likely-convex" and (
        (l_convex and dmin >= 0) or (l_concave and dmax <= 0)
    )
    return SufficiencyCertificate(
        L_verdict=L_v,
        l_verdict=l_v,
        dLdz_sign=sign,
        dLdz_min=dmin,
        dLdz_max=dmax,
        conclusion="sufficient-minimizer" if ok else "inconclusive",
    )
