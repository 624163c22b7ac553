# Profile growth under a steady stream of new facts: one 30-token fact every
# 10 messages should give a slope of 3 tokens per message.

from dualmem import DualProcessMemory, fit_growth_law
from dualmem.profile import profile_growth_series
from dualmem.simulation import generate_fact_stream

msgs = generate_fact_stream(15_000, seed=0, every=10, fact_tokens=30)
memory = DualProcessMemory()
for m in msgs:
    memory.observe(m)
memory.flush()

series = profile_growth_series(memory.log)
print(len(series), "consolidations; last point:", series[-1])

fit = fit_growth_law(series)
print(fit.label())

# %% a coarse picture
for n, tok in series[:: len(series) // 12]:
    print(f"{n:6d} {'#' * (tok // 1000)} {tok}")
