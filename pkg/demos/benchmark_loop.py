# %% [markdown]
# # Benchmark loop with a noisy stand-in model
#
# Generate a seeded corpus, build S3 conversations, answer them with a model
# that jitters pin centers, and print the report table.

# %%
import numpy as np

from icfoot.evaluation import aggregate, report_table, score_sample
from icfoot.qa import answers_to_geometry, build_conversation, canonical_answers, parse_prediction
from icfoot.synth import CorpusSpec, sample_corpus

corpus = sample_corpus(CorpusSpec(count=50, seed=3))
rng = np.random.default_rng(0)


def fake_model(geometry, task):
    a = canonical_answers(geometry)
    if task == 2:
        a["centers"] = [[x + rng.normal(0, 0.1), y + rng.normal(0, 0.1)] for x, y in a["centers"]]
    key = {1: "count", 2: "centers", 3: "dims"}[task]
    return f"Sure, here you go: {a[key]}"


# %%
reports = []
for g in corpus:
    samples = build_conversation(g, f"images/{g.source_id}.svg", "S3")
    parsed = {t.task: parse_prediction(fake_model(g, t.task), t.task) for s in samples for t in s.turns}
    pred = answers_to_geometry(parsed[2].value, parsed[3].value, g)
    reports.append(score_sample(pred, g, sample_id=g.source_id, count_pred=parsed[1].value or 0))

# %%
print(report_table(aggregate(reports, seed=0)))
