import numpy as np
import pytest

import fracvar.eulerlagrange as el
from fracvar.eulerlagrange import (
    MASK,
    ModeError,
    classical_residual,
    el_report,
    residual_inner,
    residual_outer,
    residual_terminal,
)
from fracvar.problem import (
    Trajectory,
    builtin_example,
    linear_interpolant,
    make_reference,
    make_spec,
    make_trajectory,
)
from oracles import directional_checks, example_base, kitchen_base


def smooth_traj(spec, func):
    g = spec.grid
    return make_trajectory(spec, func(g.nodes[g.i_a + 1 : g.i_b]))


def test_terminal_residual_cases():
    spec = make_spec("v^2", n=16)
    traj = linear_interpolant(spec)
    assert residual_terminal(traj, spec) == 0.0
    spec = make_spec("v_tau", n=16)
    assert residual_terminal(linear_interpolant(spec), spec) == 1.0


def test_terminal_residual_example():
    spec = builtin_example(0.5, 128)
    assert abs(residual_terminal(make_reference(spec), spec)) <= 1e-8


def test_L_equals_y():
    spec = make_spec("y", n=32, y_b=1.0)
    traj = linear_interpolant(spec)
    assert np.all(residual_inner(traj, spec).values == 1.0)
    assert np.all(residual_outer(traj, spec).values == 1.0)


def test_x_only_lagrangians_give_exact_zero():
    spec = make_spec("sin(x)", l="x^2", n=32, y_b=1.0)
    rep = el_report(linear_interpolant(spec), spec)
    assert np.all(rep.inner_residual.values == 0.0)
    assert np.all(rep.outer_residual.values == 0.0)
    assert rep.terminal_residual == 0.0
    spec0 = make_spec("0", n=32)
    rep0 = el_report(linear_interpolant(spec0), spec0)
    assert rep0.inner_norm == rep0.outer_norm == rep0.terminal_residual == 0.0


def test_outer_reduces_to_Ly_without_z_v_w():
    spec = make_spec("y^3 + x*y", n=32, y_b=1.0)
    traj = smooth_traj(spec, np.sin)
    out = residual_outer(traj, spec)
    y = traj.values[spec.grid.i_r : spec.grid.i_b + 1]
    assert np.allclose(out.values, 3 * y**2 + out.x)


@pytest.mark.parametrize("alpha", [0.25, 0.5, 0.75])
def test_reference_residuals_decrease(alpha):
    reps = [el_report(make_reference(builtin_example(alpha, n)), builtin_example(alpha, n)) for n in (128, 256, 512)]
    inner = [r.inner_norm for r in reps]
    outer = [r.outer_norm for r in reps]
    assert inner[0] > inner[1] > inner[2]
    assert outer[0] > outer[1] > outer[2]


def test_perturbed_trajectory_has_larger_residual():
    spec, base = example_base(128)
    ref = el_report(make_reference(spec), spec)
    assert el_report(base, spec).inner_norm > ref.inner_norm


def test_term_linearity():
    l = "y^2 + v*w"
    s1 = make_spec("v^2 + z*y", l=l, phi="x", n=32, y_b=1.0)
    s2 = make_spec("w*y + v_tau^2 + y_tau*y", l=l, phi="x", n=32, y_b=1.0)
    s12 = make_spec("v^2 + z*y + w*y + v_tau^2 + y_tau*y", l=l, phi="x", n=32, y_b=1.0)
    traj = smooth_traj(s1, lambda x: np.cos(x) + x)
    r1, r2, r12 = (el_report(traj, s) for s in (s1, s2, s12))
    assert np.allclose(r12.inner_residual.values, r1.inner_residual.values + r2.inner_residual.values, atol=1e-10)
    assert np.allclose(r12.outer_residual.values, r1.outer_residual.values + r2.outer_residual.values, atol=1e-10)


def test_masking_metadata():
    spec = builtin_example(0.5, 32)
    rep = el_report(make_reference(spec), spec)
    g = spec.grid
    assert g.i_a in rep.masked and g.i_r in rep.masked and g.i_b in rep.masked
    core = rep.inner_residual.values[MASK:-MASK]
    assert rep.inner_norm == pytest.approx(np.max(np.abs(core)))
    assert np.isfinite(rep.junction_mismatch)


def test_report_csv():
    spec = builtin_example(0.5, 16)
    text = el_report(make_reference(spec), spec).to_csv()
    lines = text.splitlines()
    assert lines[0] == "part,node,residual"
    assert len(lines) == 1 + (spec.grid.i_r - spec.grid.i_a + 1) + (spec.grid.i_b - spec.grid.i_r + 1)


@pytest.mark.parametrize("make", [example_base, kitchen_base])
def test_directional_derivative_oracle(make):
    spec, base = make(128)
    tol = max(1e-3, 10 * spec.grid.h)
    for fd, pr, rel in directional_checks(spec, base):
        assert rel <= tol, (fd, pr)


def test_kitchen_oracle_converges():
    errs = [max(r for *_, r in directional_checks(*kitchen_base(n))) for n in (64, 128, 256)]
    assert errs[0] > errs[1] > errs[2]
    assert errs[2] < 1e-4


@pytest.mark.parametrize("target", ["tail_derivative_correction", "tail_integral_correction"])
def test_flipped_tail_sign_is_detected(monkeypatch, target):
    original = getattr(el, target)

    def flipped(*args, **kwargs):
        out = original(*args, **kwargs)
        return out.with_values(-out.values)

    monkeypatch.setattr(el, target, flipped)
    spec, base = kitchen_base(128)
    # the correct operator agrees to ~2e-4 here
    worst = max(rel for _, _, rel in directional_checks(spec, base))
    assert worst > 1e-2


# {{{ classical mode


def test_classical_needs_classical_spec():
    spec = builtin_example(0.5, 16)
    with pytest.raises(ModeError):
        classical_residual(make_reference(spec), spec)
    with pytest.raises(ModeError):
        el_report(linear_interpolant(spec.as_classical()), spec.as_classical())


def test_classical_minus_second_derivative():
    spec = make_spec("v^2/2", mode="classical", n=128, y_b=4.0, phi="x")
    traj = smooth_traj(spec, lambda x: x**2)
    rep = classical_residual(traj, spec)
    assert np.allclose(rep.inner_residual.values[MASK:-MASK], -2.0, atol=1e-10)
    aff = classical_residual(linear_interpolant(spec), spec)
    assert aff.inner_norm < 1e-12 and aff.outer_norm < 1e-12


def test_classical_delay_terms():
    spec = make_spec("y_tau*y + v_tau^2/2", mode="classical", n=64, y_b=1.0)
    g = spec.grid
    traj = smooth_traj(spec, np.sin)
    rep = classical_residual(traj, spec)
    x = rep.inner_residual.x
    # y_tau(x) vanishes on [a, b - tau]; shifted dL/dy_tau is y(x + tau); -y''(x) = sin(x)
    exact = np.sin(x + 1) + np.sin(x)
    assert np.max(np.abs(rep.inner_residual.values - exact)[MASK:-MASK]) < 5e-3
    assert g.i_r - g.i_a + 1 == x.size


# }}}
