# %% [markdown]
# # Flexible joints and compliant contact
#
# Each motor drives its link through a spring-damper transmission. A
# low-level law shapes the motor torque so that the transmission torque
# follows the QP command. Contact is a stiff Hunt-Crossley force, so the
# integrator drops to 1 us steps near the plank. Expect about a minute of
# runtime.

# %%
import numpy as np

from refspread import ModelParams, Scenario, SimConfig, run_flex, scenario_reference
from refspread import metrics

params = ModelParams()
refs = scenario_reference(params, Scenario())
log = run_flex(params, SimConfig(strategy="rs_intermediate"), refs)
print("fine / coarse steps:", log.meta["fine_steps"], "/", log.meta["coarse_steps"])

# %% [markdown]
# Contact events. After the first corner hits, the stiff contact pushes the
# other corner away, so the corners touch and separate several times.

# %%
for e in log.events[:12]:
    print(f"{e.t:.5f}  {e.kind:8s} corner {e.contacts[0] + 1}")
print("modes:", {k: round(v, 4) for k, v in metrics.mode_times(log).items()})

# %% [markdown]
# The transmission torque lags the command by a few milliseconds and rings
# after the impact.

# %%
t = log["t"]
m = (t > 0.98) & (t < 1.05)
cmd = log.cols("tau1", "tau2", "tau3")[m]
flex = log.cols("tau_flex1", "tau_flex2", "tau_flex3")[m]
print("max |tau_flex - tau*| around impact:", np.abs(flex - cmd).max(axis=0))
print("peak contact forces [N]:", log.cols("lambda1", "lambda2").max(axis=0))
