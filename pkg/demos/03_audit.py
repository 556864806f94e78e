# %% [markdown]
# # Auditing a-priori envelopes and entropy inequalities

# %%
from balans.analysis import bln_residuals, bounds_report, entropy_residuals
from balans.problem import build_grid, catalog, discretize
from balans.scheme import run

p = catalog("decay")
grid = build_grid(p, 100)
sol = run(p, grid, discretize(p, grid), keep_intermediate=True)

# %%
rep = bounds_report(p, sol, levels=[grid.NT // 4, grid.NT // 2, grid.NT])
for c in rep.checkpoints:
    print(f"t={c['t']:.3f}  linf {c['observed_linf']:.4f} <= {c['bound_U']:.4f}"
          f"  tv {c['observed_tv']:.4f} <= {c['bound_Cx']:.4f}")
print("envelopes hold:", rep.ok)

# %%
ent = entropy_residuals(sol, p)
print("worst entropy residuals:", ent.worst_plus_residual, ent.worst_minus_residual)

# %%
# a step above the CFL limit breaks the discrete entropy inequalities
q = catalog("burgers-riemann")
bad = build_grid(q, 100, cfl_fraction=3.5, unsafe=True)
broken = run(q, bad, discretize(q, bad), keep_intermediate=True, truncate_on_breakdown=True, ceiling=1e6)
print("broken CFL residual:", entropy_residuals(broken, q).worst_plus_residual)

# %%
left, right = bln_residuals(sol, p)
print("boundary entropy residuals (positive means violated):", left.max(), right.max())
