import numpy as np

from posbridge.plotting import gap_plot, marginal_plot, ratio_plot, sandwich_plot
from posbridge.report import DiagnosticReport
from posbridge.stone import RefinementTrace


def test_figures_are_written(tmp_path):
    rep = DiagnosticReport("llt")
    for n, r in ((10, 1.1), (100, 1.01)):
        rep.add("gnedenko", n, r, 1.0)
    assert ratio_plot(rep, tmp_path / "a.png").stat().st_size > 0
    tr = RefinementTrace(6, 2, 0.5, 0.5, [0.25, 0.125], [0.05, 0.055], [0.06, 0.058])
    assert sandwich_plot(tr, tmp_path / "b.png", (0.056, 0.001)).stat().st_size > 0
    rng = np.random.default_rng(0)
    s = np.abs(rng.integers(0, 40, 1000)) / 20.0
    assert marginal_plot(s, 0.5, tmp_path / "c.png", s - 1, a_N=20.0).stat().st_size > 0
    assert gap_plot([(256, 0.8), (1024, 0.4)], tmp_path / "d.png").stat().st_size > 0


def test_png_is_deterministic(tmp_path):
    rep = DiagnosticReport("llt")
    rep.add("gnedenko", 10, 1.1, 1.0)
    ratio_plot(rep, tmp_path / "a.png")
    ratio_plot(rep, tmp_path / "b.png")
    assert (tmp_path / "a.png").read_bytes() == (tmp_path / "b.png").read_bytes()
