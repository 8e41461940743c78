"""Integration by parts, checked numerically.

The three identities behind the optimality conditions are verified on a
small catalog of smooth pairs. Residuals are pure discretization error.
"""

from fracvar.ibp import ibp_sweep

rows = ibp_sweep((64, 128, 256, 512), alpha=0.5, beta=0.5)
current = None
for row in rows:
    key = (row["identity"], row["pair"])
    if key != current:
        current = key
        print(f"\n{row['identity']:>8} / {row['pair']}")
    print(f"    n={row['n']:4d}  lhs={row['lhs']: .6f}  rel residual={row['rel_residual']:.2e}")
