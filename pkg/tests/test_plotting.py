import re
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from qmc_metrology.errors import InvalidValue, IoFailure
from qmc_metrology.plotting import KINDS, emit_plot, render_plot

NS = {"s": "http://www.w3.org/2000/svg"}


def _tree(svg):
    return ET.fromstring(svg)


def _polylines(root):
    out = []
    for pl in root.iter("{http://www.w3.org/2000/svg}polyline"):
        pts = [tuple(map(float, p.split(","))) for p in pl.get("points").split()]
        out.append((pl, np.array(pts)))
    return out


SAMPLE = {
    "spectrum": {"x": np.linspace(600, 660, 50), "y": np.linspace(0, 1, 50) ** 2, "markers": [630.0]},
    "map": {"x": [1, 5, 9], "y": [2, 2, 8], "c": [630.0, 635.0, 640.0]},
    "histogram": {"values": [1.0, 2.0, 2.5, 3.0]},
    "variogram": {"lags": [1.0, 2.0, 3.0], "gammas": [0.5, 2.0, 4.5]},
    "trajectory": {"x": [0, 1, 2, 3], "y": [630.0, 630.5, 631.0, 631.2]},
}


@pytest.mark.parametrize("kind", KINDS)
def test_each_kind_is_valid_deterministic_svg(kind):
    a = render_plot(SAMPLE[kind], kind, "qmc test | seed=1", "t")
    b = render_plot(SAMPLE[kind], kind, "qmc test | seed=1", "t")
    assert a == b
    root = _tree(a)
    assert root.tag.endswith("svg")
    texts = [t.text or "" for t in root.iter("{http://www.w3.org/2000/svg}text")]
    assert "qmc test | seed=1" in texts
    # axis labels carry units
    assert any(re.search(r"\(.+\)", t) for t in texts) or kind == "histogram"


def test_single_point_histogram_one_bar():
    root = _tree(render_plot({"values": [633.2]}, "histogram"))
    bars = [r for r in root.iter("{http://www.w3.org/2000/svg}rect") if r.get("class") == "bar"]
    assert len(bars) == 1


def test_histogram_bar_count_matches_numpy():
    v = np.random.default_rng(0).normal(0, 1, 500)
    root = _tree(render_plot({"values": v, "bins": 12}, "histogram"))
    bars = [r for r in root.iter("{http://www.w3.org/2000/svg}rect") if r.get("class") == "bar"]
    counts, _ = np.histogram(v, bins=12)
    assert len(bars) == int(np.count_nonzero(counts))
    heights = [float(b.get("height")) for b in bars]
    tallest = int(np.argmax(counts[counts > 0]))
    assert int(np.argmax(heights)) == tallest


def test_variogram_overlay_matches_linear_trend():
    m = 0.3
    h = np.arange(1, 20) * 10.0
    g = m * m * h * h / 2
    root = _tree(render_plot({"lags": h, "gammas": g, "overlay": m * m * h * h / 2}, "variogram"))
    (_, data), (_, over) = _polylines(root)
    # svg y grows downward
    assert np.all(np.diff(data[:, 1]) < 0)
    assert np.array_equal(data, over)


def test_map_marker_per_record_coloured_by_value():
    d = {"x": np.arange(10), "y": np.zeros(10), "c": np.linspace(620, 650, 10)}
    root = _tree(render_plot(d, "map"))
    circles = list(root.iter("{http://www.w3.org/2000/svg}circle"))
    assert len(circles) == 10
    fills = [c.get("fill") for c in circles]
    assert fills[0] != fills[-1]
    assert fills[0] == "#313695" and fills[-1] == "#a50026"


def test_bad_inputs():
    with pytest.raises(InvalidValue):
        render_plot({}, "spectrum")
    with pytest.raises(InvalidValue):
        render_plot({"x": [1, 2], "y": [1]}, "spectrum")
    with pytest.raises(InvalidValue):
        render_plot({"x": [1.0], "y": [np.nan]}, "trajectory")
    with pytest.raises(InvalidValue):
        render_plot(SAMPLE["map"], "pie")


def test_emit_writes_and_fails_cleanly(tmp_path):
    p = tmp_path / "h.svg"
    emit_plot(SAMPLE["histogram"], "histogram", p, "prov")
    assert p.read_bytes() == render_plot(SAMPLE["histogram"], "histogram", "prov").encode()
    with pytest.raises(IoFailure):
        emit_plot(SAMPLE["histogram"], "histogram", tmp_path / "missing" / "h.svg")
