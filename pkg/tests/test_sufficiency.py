import json

import numpy as np
import pytest

from fracvar import expr as ex
from fracvar.problem import L_PARTIALS, builtin_example, make_reference, make_spec, linear_interpolant
from fracvar.sufficiency import SamplingError, certify, check_convexity, gradient_margin
from oracles import ADVERSARIAL, ADVERSARIAL_BOX, fd_gradient_margin

BOX = {"x": (0.0, 2.0), "y": (-2.0, 2.0), "v": (-2.0, 2.0)}


def test_square_is_convex():
    v = check_convexity(ex.parse("y^2"), ["y"], BOX, trials=500)
    assert v.status == "likely-convex" and not v.linear and v.exact
    assert v.margin >= 0 and v.witness is None


def test_linear_is_both():
    v = check_convexity(ex.parse("3*y - x"), ["y"], BOX, trials=500)
    assert v.status == "likely-convex" and v.linear
    assert abs(v.margin) < 1e-12


def test_concave_reported():
    v = check_convexity(ex.parse("-y^2 + sin(x)"), ["y"], BOX, trials=500)
    assert v.status == "likely-concave"
    w = check_convexity(ex.parse("-y^2"), ["y"], BOX, trials=500, expect="convex")
    assert w.status == "counterexample"


def test_indefinite_without_expectation():
    v = check_convexity(ex.parse("y*v"), ["y", "v"], BOX, trials=500)
    assert v.status == "indefinite" and v.witness is not None


def test_non_block_variables_held_fixed():
    # convex in y for each fixed x although x*y is not jointly convex
    v = check_convexity(ex.parse("y^2 + x*y"), ["y"], BOX, trials=2000)
    assert v.status == "likely-convex"
    p, q = v.witness or ({"x": 0}, {"x": 0})
    assert p["x"] == q["x"]


def test_nonsmooth_sampled():
    v = check_convexity(ex.parse("abs(y) + pospart(v - 1)"), ["y", "v"], BOX, trials=2000)
    assert v.status == "likely-convex" and not v.exact


def test_gradient_margin_direct():
    e = ex.parse("y^2")
    m, scale = gradient_margin(e, {"y": 1.0}, {"y": 3.0}, ["y"])
    assert m == pytest.approx(4.0) and scale >= 1.0


def test_sampling_error():
    with pytest.raises(SamplingError):
        check_convexity(ex.parse("ln(y)"), ["y"], {"y": (-2.0, 2.0)}, trials=200)


def test_argument_validation():
    with pytest.raises(ValueError):
        check_convexity(ex.parse("y^2"), ["y"], {}, trials=10)
    with pytest.raises(ValueError):
        check_convexity(ex.parse("y^2"), ["y"], {"y": (1.0, 1.0)}, trials=10)
    with pytest.raises(ValueError):
        check_convexity(ex.parse("y^2"), ["y"], BOX, trials=0)


@pytest.mark.parametrize("text", ADVERSARIAL)
def test_counterexamples_are_sound(text):
    e = ex.parse(text)
    v = check_convexity(e, L_PARTIALS, ADVERSARIAL_BOX, trials=10_000, seed=3, expect="convex")
    assert v.status == "counterexample", text
    p, q = v.witness
    assert all(p[k] == q[k] for k in p if k not in L_PARTIALS)
    assert fd_gradient_margin(e, p, q, L_PARTIALS) < -1e-10
    assert v.margin < -1e-10


def test_example_certificate():
    spec = builtin_example(0.5, 128)
    cert = certify(spec, make_reference(spec))
    assert cert.conclusion == "sufficient-minimizer"
    assert cert.L_verdict.status == "likely-convex"
    assert cert.l_verdict.status == "likely-convex"
    assert cert.dLdz_sign == "nonnegative" and cert.dLdz_min == cert.dLdz_max == 1.0


def test_certificate_reproducible():
    spec = builtin_example(0.5, 64)
    ref = make_reference(spec)
    a = certify(spec, ref, trials=2000, seed=5).to_json()
    assert a == certify(spec, ref, trials=2000, seed=5).to_json()
    assert json.loads(a)["conclusion"] == "sufficient-minimizer"


def test_concave_L_inconclusive():
    spec = make_spec("-y^2", n=16, y_b=1.0)
    cert = certify(spec, linear_interpolant(spec), trials=1000)
    assert cert.L_verdict.status == "counterexample"
    assert cert.conclusion == "inconclusive"


def test_wrong_z_sign_inconclusive():
    spec = make_spec("v^2 - z", l="y^2", n=16, y_b=1.0)
    cert = certify(spec, linear_interpolant(spec), trials=1000)
    assert cert.L_verdict.status == "likely-convex"
    assert cert.dLdz_sign == "nonpositive"
    assert cert.conclusion == "inconclusive"


def test_concave_l_with_nonpositive_z():
    spec = make_spec("v^2 - z", l="-y^2", n=16, y_b=1.0)
    cert = certify(spec, linear_interpolant(spec), trials=1000)
    assert cert.conclusion == "sufficient-minimizer"


def test_inflation_validated():
    spec = builtin_example(0.5, 16)
    with pytest.raises(ValueError):
        certify(spec, make_reference(spec), inflation=-1.0)
