# %% [markdown]
# # Self-convergence on nested grids

# %%
from balans.convergence import self_convergence
from balans.problem import catalog

for name in ("burgers-smooth", "burgers-riemann"):
    print(name)
    for r in self_convergence(catalog(name), [50, 100, 200, 400]):
        order = "" if r.order is None else f"{r.order:.3f}"
        print(f"  {r.N:4d} -> {r.N_fine:4d}  L1 {r.error:.3e}  order {order}")
