# Where does the 120k-token sliding window start losing a fact placed in the
# first message?  With fillers of exactly 100 tokens the answer is 1,200.

from dualmem.harness import CAPACITY_FACTS, Backends, ingest, make_memory, probe
from dualmem.architectures import Architecture
from dualmem.simulation import FactSpec, Placement, capacity_probe, generate_capacity_run

backends = Backends()
key, value = CAPACITY_FACTS[0]

rows = []
for total in (1000, 1150, 1199, 1200, 1201, 1250, 1300):
    fact = FactSpec(key, value, Placement.BEGINNING)
    msgs = generate_capacity_run(total, fact, seed=0, filler="exact")
    case = capacity_probe(fact, msgs)
    row = [total]
    for arch in (Architecture.FULL_CONTEXT, Architecture.DUAL_PROCESS):
        mem = make_memory(arch, backends)
        ingest(mem, msgs)
        rec = probe(mem, backends.inference, case, scale=total, seed=0)
        row += [rec.matched, rec.input_tokens]
    rows.append(row)

print("  T     FC ok  FC tokens   DP ok  DP tokens")
for t, fc_ok, fc_tok, dp_ok, dp_tok in rows:
    print(f"{t:5d}   {fc_ok!s:5}  {fc_tok:9,d}   {dp_ok!s:5}  {dp_tok:9,d}")

# %% the arithmetic behind it
print("messages that fit in 120,000 tokens at 100 each:", 120_000 // 100)
print("first retained index at T=1300:", 1300 - 120_000 // 100)
