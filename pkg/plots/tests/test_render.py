import json
import os
import sys

import pytest

sys.path.insert(0, os.path.join(os.path.dirname(__file__), ".."))

import render  # noqa: E402


BEAM_CSV = """theta_deg,sinr_common_db,sinr_private_k1_db,sinr_private_k2_db
-90.0,1.0,-50.0,-60.0
-35.0,14.0,8.2,-40.0
0.0,5.0,-20.0,-22.0
15.0,14.5,-44.0,8.1
90.0,0.5,-55.0,-58.0
"""

CONV_CSV = """algorithm,iter,objective,residual
algorithm1,1,9.1,1e-7
algorithm1,2,9.5,1e-8
algorithm2,1,9.6,1e-4
"""

SWEEP_CSV = """sweep_var,value,algorithm,ssr_mean,ssr_se,n_fail
n_antennas,4,two_stage,4.2,0.05,0
n_antennas,8,two_stage,6.3,0.04,0
n_antennas,4,mrt,2.0,0.06,0
n_antennas,8,mrt,3.1,0.05,0
"""

PROB_JSON = {
    "draws": 1000,
    "gamma_e": 0.5,
    "empirical_prob": [0.999, 0.997],
    "binomial_se": [0.001, 0.0017],
    "kappa": 0.95,
    "pass_3sigma": True,
}


@pytest.fixture
def files(tmp_path):
    paths = {}
    for name, text in (("beam.csv", BEAM_CSV), ("conv.csv", CONV_CSV),
                       ("sweep.csv", SWEEP_CSV)):
        p = tmp_path / name
        p.write_text(text)
        paths[name] = str(p)
    p = tmp_path / "lemma1.json"
    p.write_text(json.dumps(PROB_JSON))
    paths["lemma1.json"] = str(p)
    return paths


def test_beampattern_dual_axes_and_legend(files, tmp_path):
    out = str(tmp_path / "beam.png")
    fig = render.render_beampattern(files["beam.csv"], out)
    assert os.path.getsize(out) > 1000
    axes = fig.get_axes()
    assert len(axes) == 2  # left private axis plus right common axis
    assert "private" in axes[0].get_ylabel()
    assert "common" in axes[1].get_ylabel()
    legend = axes[0].get_legend()
    labels = [t.get_text() for t in legend.get_texts()]
    assert any("common" in t for t in labels)
    assert sum("private" in t for t in labels) == 2


def test_convergence_single_row_no_crash(tmp_path):
    p = tmp_path / "one.csv"
    p.write_text("algorithm,iter,objective,residual\nalgorithm1,1,9.1,1e-7\n")
    out = str(tmp_path / "one.png")
    render.render_convergence(str(p), out)
    assert os.path.getsize(out) > 1000


def test_sweep_legend_lists_algorithms(files, tmp_path):
    out = str(tmp_path / "sweep.png")
    fig = render.render_sweep(files["sweep.csv"], out)
    labels = [t.get_text() for t in fig.get_axes()[0].get_legend().get_texts()]
    assert set(labels) == {"two_stage", "mrt"}
    assert os.path.getsize(out) > 1000


def test_probability_plot(files, tmp_path):
    out = str(tmp_path / "prob.png")
    fig = render.render_probability(files["lemma1.json"], out)
    assert os.path.getsize(out) > 1000
    assert "Pr" in fig.get_axes()[0].get_ylabel()


def test_missing_column_named_error(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("theta_deg,foo\n0,1\n")
    with pytest.raises(render.RenderError, match="sinr_common_db"):
        render.render_beampattern(str(p), str(tmp_path / "x.png"))


def test_empty_csv_rejected(tmp_path):
    p = tmp_path / "empty.csv"
    p.write_text("")
    with pytest.raises(render.RenderError, match="empty"):
        render.render_convergence(str(p), str(tmp_path / "x.png"))


def test_rendering_is_idempotent(files, tmp_path):
    out1 = str(tmp_path / "a.png")
    out2 = str(tmp_path / "b.png")
    render.render_sweep(files["sweep.csv"], out1)
    render.render_sweep(files["sweep.csv"], out2)
    assert open(out1, "rb").read() == open(out2, "rb").read()


def test_cli_spec_file(files, tmp_path):
    spec = [
        {"kind": "beampattern", "csv": files["beam.csv"], "out": str(tmp_path / "f2.png")},
        {"kind": "sweep", "csv": files["sweep.csv"], "out": str(tmp_path / "f6.png"),
         "title": "system SSR vs antennas"},
    ]
    spec_path = tmp_path / "figs.json"
    spec_path.write_text(json.dumps(spec))
    assert render.main(["--spec", str(spec_path)]) == 0
    assert os.path.getsize(tmp_path / "f2.png") > 1000
    assert os.path.getsize(tmp_path / "f6.png") > 1000


def test_cli_flags_and_errors(files, tmp_path):
    assert render.main(["--kind", "convergence", "--csv", files["conv.csv"],
                        "--out", str(tmp_path / "c.png")]) == 0
    assert render.main(["--kind", "sweep", "--csv", files["beam.csv"],
                        "--out", str(tmp_path / "x.png")]) == 1
