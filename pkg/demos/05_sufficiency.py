"""When is a stationary point a minimizer?

The certificate tests convexity of L and l by sampling the gradient
inequality, and looks at the sign of dL/dz. A concave L is caught with a
concrete pair of points.
"""

from fracvar import builtin_example, certify, check_convexity, make_reference, parse

spec = builtin_example(alpha=0.5, n=128)
cert = certify(spec, make_reference(spec), trials=10_000, seed=0)
print(f"example: {cert.conclusion}")
print(f"    L {cert.L_verdict.status}, l {cert.l_verdict.status}, dL/dz in [{cert.dLdz_min}, {cert.dLdz_max}]")

box = {"x": (0.0, 2.0), "y": (-2.0, 2.0), "v": (-2.0, 2.0)}
for text in ("v^2 + y^2", "v^2 + 0.3*sin(3*y)", "y*v"):
    verdict = check_convexity(parse(text), ["y", "v"], box, trials=5000, expect="convex")
    print(f"\n{text}: {verdict.status} (margin {verdict.margin:.3g})")
    if verdict.witness:
        p, q = verdict.witness
        print(f"    p = ({p['y']:.3f}, {p['v']:.3f})  q = ({q['y']:.3f}, {q['v']:.3f})")
