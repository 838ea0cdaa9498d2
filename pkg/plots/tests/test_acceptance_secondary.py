"""Secondary acceptance criterion: every CSV kind renders to a non-empty PNG
with the expected axes and legends; the beampattern figure carries dual axes."""

import json
import os
import sys
import time

sys.path.insert(0, os.path.join(os.path.dirname(__file__), ".."))

import render  # noqa: E402

from test_render import BEAM_CSV, CONV_CSV, SWEEP_CSV, PROB_JSON  # noqa: E402


def test_criterion_11_all_kinds_render(tmp_path):
    t0 = time.time()
    inputs = {
        "beampattern": tmp_path / "beam.csv",
        "convergence": tmp_path / "conv.csv",
        "sweep": tmp_path / "sweep.csv",
        "probability": tmp_path / "lemma1.json",
    }
    inputs["beampattern"].write_text(BEAM_CSV)
    inputs["convergence"].write_text(CONV_CSV)
    inputs["sweep"].write_text(SWEEP_CSV)
    inputs["probability"].write_text(json.dumps(PROB_JSON))

    ok = True
    details = []
    for kind, path in inputs.items():
        out = tmp_path / f"{kind}.png"
        fig = render.render(kind, str(path), str(out))
        size = os.path.getsize(out)
        ok &= size > 1000
        axes = fig.get_axes()
        if kind == "beampattern":
            ok &= len(axes) == 2  # Fig.-2 layout: left/right axes
            ok &= "private" in axes[0].get_ylabel() and "common" in axes[1].get_ylabel()
        else:
            ok &= len(axes[0].get_xlabel()) > 0 and len(axes[0].get_ylabel()) > 0
        if kind in ("convergence", "sweep"):
            ok &= axes[0].get_legend() is not None
        details.append(f"{kind}: {size}B")
    dt = time.time() - t0
    print(f"[{'PASS' if ok and dt < 30 else 'FAIL'}] criterion 11: "
          + ", ".join(details) + f", {dt:.1f}s")
    assert ok and dt < 30.0
