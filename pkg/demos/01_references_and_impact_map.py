# %% [markdown]
# # References and the impact map
#
# The arm approaches a hinged plank so that both corners of its flat face
# touch the plank at the same instant, `t_imp`. This script builds the
# ante-impact reference (approach) and the post-impact reference (push the
# plank down to rest). It then shows how the two overlap around `t_imp`.

# %%
import numpy as np

from refspread import ModelParams, Scenario, State, scenario_reference
from refspread.contact import contact_geometry, impact_map
from refspread.mechanics import mass_matrix

params = ModelParams()
refs = scenario_reference(params, Scenario())
np.set_printoptions(precision=4, suppress=True)

print("impact configuration q- :", refs.q_minus)
print("ante joint velocity      :", refs.qdot_minus)
print("post joint velocity      :", refs.qdot_plus)

# %% [markdown]
# At the impact pose the face is flush with the plank: both gaps are zero and
# both corners approach at the same normal speed.

# %%
geo = contact_geometry(params, State(refs.q_minus, refs.qdot_minus))
print("gaps       :", geo.gaps)
print("gap rates  :", geo.JN @ refs.qdot_minus)

# %% [markdown]
# The inelastic impact map projects the velocity onto the set where both
# contacts stay closed. Kinetic energy can only drop.

# %%
res = impact_map(params, State(refs.q_minus, refs.qdot_minus), (0, 1))
print("impulses [N s]       :", res.impulse)
print("post gap rates       :", geo.JN @ res.qdot_post)
print("energy lost [J]      :", res.energy_loss)

# %% [markdown]
# Note the sign of the second impulse. Holding both corners on the plank
# after a perfectly simultaneous impact needs a small pull at corner 2. A
# unilateral contact law would let that corner bounce off instead.

# %% [markdown]
# The Delassus matrix `J M^-1 J^T` couples the two corners. Its large
# off-diagonal entry explains why a single-corner impact lifts the other one.

# %%
W = geo.JN @ np.linalg.solve(mass_matrix(params, refs.q_minus), geo.JN.T)
print("Delassus matrix:\n", W)
print("an impulse at corner 1 changes corner 2's speed", W[1, 0] / W[0, 0], "times as much")

# %% [markdown]
# Extended references: the ante reference keeps moving into the plank after
# `t_imp`, and the post reference already exists before it. Whichever corner
# hits first, a valid target is available.

# %%
for t in (0.95, 0.99, 1.0, 1.01, 1.05):
    pa, va, _ = refs.ante(t)
    pp, vp, _ = refs.post(t)
    print(f"t={t:.2f}  ante p={pa} v={va}   post p={pp} v={vp}")
