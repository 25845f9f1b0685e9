"""
Command-line pipeline
=====================

The same steps through the ``chainseg`` command. Calling ``main`` with an
argument list is equivalent to running the installed script.
"""

import json
import tempfile
from pathlib import Path

from chainseg.cli import main

work = Path(tempfile.mkdtemp())

# Synthesize, train briefly, then evaluate on the held-out split.
main(["synth", "--count", "20", "--size", "32", "--nv", "16", "--out", str(work / "data")])
main(["train", "--synth-dir", str(work / "data"), "--size", "32", "--nv", "16", "--epochs", "3",
      "--batch", "8", "--out", str(work / "run")])
main(["eval", "--model", str(work / "run" / "model.pcsg"), "--manifest", str(work / "run" / "val_manifest.json"),
      "--resolution", "256"])

# Score one chain against another with the closed-form backend.
pred = {"center": [16, 16], "radii": [5.0] * 16}
gt = {"center": [16, 16], "radii": [6.0] * 16}
(work / "pred.json").write_text(json.dumps(pred))
(work / "gt.json").write_text(json.dumps(gt))
main(["loss", "--pred", str(work / "pred.json"), "--gt", str(work / "gt.json"), "--backend", "paper"])

# Finite-difference check of the exact backend.
main(["gradcheck", "--backend", "exact", "--trials", "200", "--tol", "1e-4"])
