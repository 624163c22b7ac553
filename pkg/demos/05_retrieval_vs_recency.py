# A key that changes three times.  Retrieval finds every chunk mentioning it,
# but nothing in cosine similarity says which one is newest.

from dualmem.harness import run_honest120
from dualmem.architectures import Architecture
from dualmem.simulation import QueryType

res = run_honest120(seed=0, total=1500)

by_type = {}
for r in res.records:
    if r.call_kind == "inference":
        by_type.setdefault((r.architecture, r.query_type), []).append(r.matched)
for (arch, qt), hits in sorted(by_type.items()):
    print(f"{arch:14s} {qt:22s} {sum(hits):2d}/{len(hits)}")

print("\nsame-key cases where both first and last value were retrieved:",
      sum(f and l for _, f, l in res.retrieval_checks), "of", len(res.retrieval_checks))

# %% one contradiction case in detail
rag = [r for r in res.records if r.architecture == "rag" and r.query_type == QueryType.CONTRADICTORY.value]
for r in rag[:5]:
    print(r.question, "| expected", r.expected, "| got", r.actual, "| chunks", r.retrieved_ids)
