# Walk a 114-message research conversation through the dual-process memory
# and look at what the model would actually be shown.

from dualmem import DualProcessMemory, count_tokens
from dualmem.simulation import baseline_scenario

messages = baseline_scenario()
print(len(messages), "messages,", sum(m.token_count for m in messages), "tokens in total")

memory = DualProcessMemory()
for m in messages:
    memory.observe(m)
memory.flush()

# %% the consolidated profile holds one line per fact, latest value wins
print(memory.profile.text)
print("profile tokens:", memory.profile.token_count, " versions:", len(memory.log.versions))

# %% the episodic window is the last 10 messages, verbatim
for m in memory.buffer.window():
    print(m.index, m.line()[:90])

# %% assembled context for a question about the current state
ctx = memory.context_for("What is the current p_threshold?")
print(ctx.render())
print("context tokens:", ctx.total_tokens, "vs full history:",
      count_tokens("\n".join(m.line() for m in messages)))
