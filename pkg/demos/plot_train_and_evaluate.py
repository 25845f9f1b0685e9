"""
Training and evaluation
=======================

Train a small radial regressor on synthetic data, score it against the
original outlines and draw an overlay.
"""

import tempfile
from pathlib import Path

from chainseg.dataset import SynthSpec, preprocess, synth_generate
from chainseg.trainer import (
    TrainConfig, chains_from_radii, evaluate, render_overlay, train, write_evaluation,
)

samples = [preprocess(r, 32, 16) for r in synth_generate(SynthSpec(count=40, size=32, n_v=16))]

# A narrow network keeps this quick. Validation runs every 5 epochs.
config = TrainConfig(n_v=16, epochs=20, batch=8, channels=(8, 16), hidden=64, eval_every=5)
out = Path(tempfile.mkdtemp())
result = train(config, samples, out / "run")
for rec in result.log:
    if "val" in rec:
        v = rec["val"]
        print(f"epoch {rec['epoch']:3d} loss {rec['train_loss']:.3f} val JM {v['jm_lumen']:.3f}/{v['jm_media']:.3f}")

# Metrics, Hausdorff distances and the radial error histogram.
ev = evaluate(result.state, result.val, resolution=512)
summary = ev.summary()
print({k: round(summary[k], 3) for k in ("jm_lumen", "jm_media", "hd_lumen", "hd_media")})
print("radial error mean/std:", round(ev.histogram.mean, 3), round(ev.histogram.std, 3))
write_evaluation(ev, out / "eval")

# Ground truth in blue/cyan, prediction in magenta/white.
s = result.val[0]
pred = chains_from_radii(ev.predictions[0], s.size)
render_overlay(s.image, pred, (s.lumen_gt, s.media_gt), out / "overlay.png", scale=8)
print("wrote", sorted(p.name for p in (out / "eval").iterdir()), "and overlay.png")
