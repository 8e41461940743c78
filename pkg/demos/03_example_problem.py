"""The analytic example: a delayed fractional problem with a known minimizer.

y(x) = x_+^(alpha+1) makes every square in L vanish, so J = 0 there.
On the grid, J and the optimality residuals go to zero as h -> 0.
"""

from fracvar import builtin_example, el_report, evaluate_J, make_reference

print(f"{'n':>5} {'J':>11} {'inner':>10} {'outer':>10} {'terminal':>9}")
for n in (64, 128, 256, 512):
    spec = builtin_example(alpha=0.5, n=n)
    ref = make_reference(spec)
    rep = el_report(ref, spec)
    print(
        f"{n:5d} {evaluate_J(ref, spec):11.3e} {rep.inner_norm:10.3e} "
        f"{rep.outer_norm:10.3e} {rep.terminal_residual:9.1e}"
    )

spec = builtin_example(alpha=0.5, n=64)
rep = el_report(make_reference(spec), spec)
print("\nlargest inner terms at the midpoint of [a, b - tau]:")
mid = len(rep.inner_residual.values) // 2
for name, path in sorted(rep.inner_terms.items(), key=lambda kv: -abs(kv[1][mid]))[:5]:
    print(f"    {name:>12}: {path[mid]: .4f}")
