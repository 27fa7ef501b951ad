import re

import pytest

from cbleak.numerics import InvalidParameterError
from cbleak.plotting import emit_svg_lineplot, nice_ticks, plot_results


def polylines(svg):
    return re.findall(r'<polyline class="series" data-name="([^"]*)" points="([^"]*)"', svg)


class TestEmitSvg:
    def test_single_series(self):
        svg = emit_svg_lineplot({"gbt": [(1, 0.2, 0.1, 0.3), (2, 0.1, 0.0, 0.2),
                                         (3, 0.0, -0.1, 0.1)]}, "t")
        lines = polylines(svg)
        assert len(lines) == 1
        assert len(lines[0][1].split()) == 3
        assert svg.startswith("<?xml") and svg.rstrip().endswith("</svg>")

    def test_deterministic(self):
        series = {"a": [(1, 1.0, 0.5, 1.5)], "b": [(1, 2.0, 2.0, 2.0), (4, 0.0, 0.0, 0.0)]}
        assert emit_svg_lineplot(series, "x") == emit_svg_lineplot(series, "x")

    def test_empty(self):
        with pytest.raises(InvalidParameterError):
            emit_svg_lineplot({}, "x")
        with pytest.raises(InvalidParameterError):
            emit_svg_lineplot({"a": []}, "x")

    def test_escapes_title(self):
        assert "a &lt; b" in emit_svg_lineplot({"s": [(0, 0, 0, 0)]}, "a < b")

    def test_log_axis_needs_positive_x(self):
        with pytest.raises(InvalidParameterError):
            emit_svg_lineplot({"s": [(0, 0, 0, 0)]}, "x", log_x=True)


def test_nice_ticks():
    assert nice_ticks(0, 1) == [0, 0.2, 0.4, 0.6, 0.8, 1.0]
    assert nice_ticks(-0.3, 0.3)[0] <= 0 <= nice_ticks(-0.3, 0.3)[-1]


def test_lambda_panel_descends(tmp_path):
    rows = [{"lambda": lam, "k": 8.0, "n": 100.0, "d": 20.0, "b": 5.0, "classifier": "gbt",
             "leakage": 1.0 / lam} for lam in (0.1, 1.0, 10.0)]
    (path,) = plot_results(rows, tmp_path)
    (_, points), = polylines(path.read_text())
    ys = [float(p.split(",")[1]) for p in points.split()]
    xs = [float(p.split(",")[0]) for p in points.split()]
    # SVG y grows downwards, so a falling curve has rising pixel y
    assert xs == sorted(xs) and ys == sorted(ys)


def test_sweep_panels(tmp_path):
    rows = [{"config_id": "c", "n": 100.0, "d": 20.0, "k": 3.0, "noise": noise, "b": b,
             "classifier": clf, "leakage": 0.1 * b} for noise in (0.5, 2.0)
            for clf in ("mlp", "rf", "gbt") for b in (4.0, 9.0)]
    paths = plot_results(rows, tmp_path)
    assert len(paths) == 2
    for p in paths:
        assert len(polylines(p.read_text())) == 3
