# %% [markdown]
# # Expressions and derivative jets
# Parse a flux, evaluate it on arrays and read off exact partial derivatives.

# %%
import numpy as np

from balans.expr import eval_jet, parse, sup_abs_on_box

f = parse("sin(x)*u^2/2 + exp(-t)")
print(f, sorted(f.variables))

# %%
x = np.linspace(0, 1, 5)
print(f(0.0, x, 1.0))

# %%
jet = eval_jet(f, 0.3, 0.7, 0.5)
print("f_u  =", jet.d_u, " expected", np.sin(0.7) * 0.5)
print("f_xu =", jet.d_xu, " expected", np.cos(0.7) * 0.5)

# %%
# sup of |f_u| over a box, used to pick the dissipation constant
print(sup_abs_on_box(f, "d_u", [(0, 1), (0, 1), (-2, 2)], 65))
