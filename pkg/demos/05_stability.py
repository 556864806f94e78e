# %% [markdown]
# # Stability with respect to flux, source and data

# %%
from balans.problem import CATALOG, catalog, make_problem
from balans.stability import run_data_pair, run_pair

p = catalog("burgers-riemann")
q = make_problem(**{**CATALOG["burgers-riemann"], "f": "u^2/2 + 0.01*sin(pi*x)"})
rep = run_pair(p, q, 100)
for c in rep.checkpoints:
    print(f"t={c['t']:.3f}  ||u1-u2||_1 = {c['measured']:.3e}  bound {c['bound']:.3e}")

# %%
r = make_problem(**{**CATALOG["burgers-riemann"], "u_o": "if(0.5 - x, 1, 0) + 0.01"})
for c in run_data_pair(p, r, 100).checkpoints:
    print(f"t={c['t']:.3f}  measured {c['measured']:.3e}  bound {c['bound']:.3e}")
