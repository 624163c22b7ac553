# Cumulative API cost of answering every message, dual process vs full context.

import numpy as np

from dualmem.evaluation import CostAssumptions, DEFAULT_PRICING, crossover_point, project_costs

a = CostAssumptions()
for line in a.lines():
    print("-", line)

proj = project_costs(1000, a)
print(f"\nT=1000  DP ${proj.dp_total:.2f}   FC ${proj.fc_total:.2f}   ratio {proj.fc_total / proj.dp_total:.1f}x")
print("crossover at T =", crossover_point(proj.dp_per_message, proj.fc_per_message))

# %% per-message cost at a few points
for t in (1, 10, 25, 50, 100, 500, 1000):
    print(f"{t:5d}  dp {proj.dp_per_message[t - 1] * 100:7.3f}c   fc {proj.fc_per_message[t - 1] * 100:7.3f}c")

# %% the price table itself
for model, (pin, pout) in DEFAULT_PRICING.prices.items():
    print(model, pin, pout)

# beyond 3,200 messages the uncapped history would not fit the model at all
big = project_costs(10_000, a)
print("first crashed call:", int(np.argmax(big.fc_crashed)) + 1)
