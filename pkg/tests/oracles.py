"""Independent reference computations shared by the unit and acceptance tests."""

import numpy as np

from fracvar.eulerlagrange import el_report, variation_pairing
from fracvar.functional import evaluate_J_batch
from fracvar.problem import Trajectory, builtin_example, make_reference, make_spec

KITCHEN_L = (
    "(v-x)^2/2 + y^2*w/4 + w^2 + sin(y)*z + 0.5*z^2 + (y_tau*y)/3"
    " + v_tau^2 + v_tau*y + exp(-z)*v"
)
KITCHEN_l = "y^2 + v*w/2 + sin(v) + y*w"


def bump(x, center, width):
    """C^1 bump (1 - u^2)^2 on |u| < 1."""
    u = (x - center) / width
    return np.where(np.abs(u) < 1, (1 - u**2) ** 2, 0.0)


def example_base(n=128):
    """A non-optimal admissible trajectory for the built-in example."""
    spec = builtin_example(0.5, n)
    x = spec.grid.nodes
    p = np.where(x > 0, 0.3 * np.sin(np.pi * x / 2) + 0.2 * np.sin(np.pi * x) * x, 0.0)
    return spec, Trajectory(spec.grid, make_reference(spec).values + p)


def kitchen_base(n=128):
    """Every partial of L and l non-zero, smooth history, alpha and beta generic."""
    spec = make_spec(
        KITCHEN_L, l=KITCHEN_l, phi="0.1*x^2", alpha=0.4, beta=0.7, n=n, y_b=1.0
    )
    x = spec.grid.nodes
    vals = np.where(x > 0, 0.1 * x**2 + np.sin(1.3 * x) + 0.5 * np.abs(x) ** 1.5, 0.1 * x**2)
    vals[-1] = 1.0
    return spec, Trajectory(spec.grid, vals)


def directional_checks(spec, base, count=10, seed=0, eps=1e-5):
    """(fd, pairing, rel_err) for random bump directions vanishing on the history and at b."""
    rng = np.random.default_rng(seed)
    x = spec.grid.nodes
    report = el_report(base, spec)
    out = []
    for _ in range(count):
        c = rng.uniform(spec.a + 0.3, spec.b - 0.3)
        w = rng.uniform(0.15, min(c - spec.a, spec.b - c) - 0.01)
        d = bump(x, c, w) * rng.uniform(0.5, 2.0)
        Jp, Jm = evaluate_J_batch(np.stack([base.values + eps * d, base.values - eps * d]), spec)
        fd = (Jp - Jm) / (2 * eps)
        pr = variation_pairing(report, d)
        out.append((fd, pr, abs(fd - pr) / max(abs(fd), abs(pr))))
    return out


# non-convex in (y, v, w, z, y_tau, v_tau) somewhere on [-2, 2]^6, some only slightly
ADVERSARIAL = [
    "sin(y)",
    "cos(v) + v^2/4",
    "y*v",
    "y^4 - y^2",
    "exp(-y^2)",
    "-abs(z)",
    "y_tau*v_tau",
    "-(1 + y^2)^0.5",
    "y^3",
    "ln(1 + y^2)",
    "x*y*v",
    "(y^2 - 1)^2",
    "v^2 + 3*y*v + y^2",
    "pospart(y)^2 - pospart(v)",
    "exp(y)*cos(v)",
    "1/(1 + w^2)",
    "w^2*y",
    "y^2 + v^2 - 1e-3*w^2",
    "y^2 + v^2 + 0.3*sin(3*y)",
    "(v - x)^2 - 0.05*y_tau^2 + z^2",
]
ADVERSARIAL_BOX = {v: (-2.0, 2.0) for v in ("y", "v", "w", "z", "y_tau", "v_tau")} | {"x": (0.0, 2.0)}


def fd_gradient_margin(e, p, q, vars, step=1e-6):
    """f(q) - f(p) - <grad f(p), q - p> with a central-difference gradient."""
    from fracvar.expr import evaluate

    f = lambda env: float(evaluate(e, env))
    lin = 0.0
    for v in vars:
        up, dn = dict(p), dict(p)
        up[v] += step
        dn[v] -= step
        lin += (f(up) - f(dn)) / (2 * step) * (q[v] - p[v])
    return f(q) - f(p) - lin
