# %% [markdown]
# # A footprint, end to end
#
# Build a small gull-wing package, look at the labels the renderer picks,
# rebuild the pads from those labels, and score a shifted guess against it.

# %%
from pathlib import Path

from icfoot.evaluation import score_sample
from icfoot.geometry import layout_iou, translate
from icfoot.qa import answer_text, canonical_answers
from icfoot.render import plan_annotations, reconstruct_geometry, render_overlay, render_svg
from icfoot.synth import build_dual_row, describe_topology

out = Path("demo-out")
out.mkdir(exist_ok=True)

soic = build_dual_row("SOIC", 8, 1.27, 0.6, 1.5, 5.4)
for p in soic.by_ordinal():
    print(p.designator, p.cx, p.cy, p.w, p.h)

# %% [markdown]
# Only four numbers are printed on the drawing: pitch, pad width, pad height
# and row span. Together with the topology they pin down every pad.

# %%
plan = plan_annotations(soic)
print(plan.labels())
rebuilt = reconstruct_geometry(plan, describe_topology(soic))
print("rebuilt matches:", rebuilt == soic)
(out / "soic8.svg").write_text(render_svg(soic))

# %% [markdown]
# The question/answer text a model would be trained on.

# %%
answers = canonical_answers(soic)
for task in (1, 2, 3):
    print(answer_text(answers, task))

# %% [markdown]
# Shift the guess 0.3 mm in x: layout IoU drops hard while the pin distance stays small.

# %%
guess = translate(soic, 0.3, 0)
report = score_sample(guess, soic)
print(f"IoU_IC={report.iou_ic:.3f} d_pin={report.d_pin:.3f} IoU_pin={report.iou_pin:.3f}")
print("layout_iou agrees:", abs(layout_iou(guess, soic) - report.iou_ic) < 1e-12)
(out / "soic8_overlay.svg").write_text(render_overlay(guess, soic))
