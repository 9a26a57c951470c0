"""Single-machine scheduling with release dates: one instance, five schedules.

Generates a 12-job instance and walks through the solver ladder: plain SPT
(ignores releases), the preemptive relaxation (a lower bound), local search,
and the perturbed pipeline decoder.
"""

import numpy as np

from co_pipeline import model, scheduling

x = scheduling.generate_sched_instance(n=12, rho=1.0, seed=3)
print("processing times:", x.p.astype(int))
print("release dates:   ", x.r.astype(int))

# SPT on raw processing times is optimal without releases but myopic here.
spt = scheduling.spt_layer(x.p)
total_spt, _ = scheduling.evaluate_schedule(x, spt)
print("\nSPT order:", spt, "total completion", total_spt)

# Allowing preemption gives a relaxation: its total is a lower bound.
srpt = scheduling.srpt_preemptive(x)
print("SRPT (preemptive) total:", srpt.completion.sum(),
      "  preemptions:", int(srpt.preemptions.sum()))

# Local search (adjacent swaps, then single-job reinsertions) repairs SPT.
ls = scheduling.local_search(x, spt)
total_ls, _ = scheduling.evaluate_schedule(x, ls)
print("after local search:", ls, "total", total_ls)

# The pipeline scores jobs with a linear model over 11 features; with a
# hand-set weight on the SRPT-completion feature it mimics a smarter rule.
w = np.zeros(scheduling.SCHED_FEATURE_DIM)
w[6] = 1.0  # mean SRPT completion, normalized
order = scheduling.pipeline_order(x, w, post="ls")
total_pipe, _ = scheduling.evaluate_schedule(x, order)
print("pipeline (SRPT-completion feature) + LS:", total_pipe)

# Perturbing the weights and keeping the best of 80 decodes rarely hurts.
pert = scheduling.perturbed_decode(x, w, sigma=1.0, nsamples=80, seed=0)
total_pert, _ = scheduling.evaluate_schedule(x, pert)
print("best of 80 perturbed decodes:", total_pert)

print("\nlower bound (SRPT) ", srpt.completion.sum())
for name, v in [("spt", total_spt), ("spt+ls", total_ls),
                ("pipeline+ls", total_pipe), ("perturbed", total_pert)]:
    print(f"  {name:12s} {v:8.0f}")
