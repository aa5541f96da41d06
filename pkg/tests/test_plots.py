"""Tests for the SVG writers."""

import numpy as np
import pytest
from lxml import etree

from tdse_response_lab.plots import SERIES_GID, heatmap, line_plot

SVG = "{http://www.w3.org/2000/svg}"


def element_ids(path):
    root = etree.parse(str(path)).getroot()
    assert root.tag == f"{SVG}svg"
    return {node.get("id") for node in root.iter() if node.get("id")}


class TestLinePlot:
    """Test line plots."""

    def test_one_element_per_series(self, tmp_path):
        x = np.linspace(0.0, 1.0, 11)
        path = line_plot(tmp_path / "curves.svg", x, {"a": x, "b": x**2}, "curves")
        ids = element_ids(path)
        assert {f"{SERIES_GID}a", f"{SERIES_GID}b"} <= ids

    def test_constant_series(self, tmp_path):
        x = np.linspace(0.0, 1.0, 5)
        path = line_plot(tmp_path / "flat.svg", x, {"flat": np.ones(5)}, "flat")
        assert f"{SERIES_GID}flat" in element_ids(path)

    def test_rendering_is_reproducible(self, tmp_path):
        x = np.linspace(0.0, 2.0, 21)
        first = line_plot(tmp_path / "a.svg", x, {"sin": np.sin(x)}, "sin")
        second = line_plot(tmp_path / "b.svg", x, {"sin": np.sin(x)}, "sin")
        assert first.read_bytes() == second.read_bytes()


class TestHeatmap:
    """Test heatmaps."""

    def test_writes_the_image(self, tmp_path):
        matrix = np.outer(np.linspace(-1, 1, 300), np.linspace(-1, 1, 300))
        path = heatmap(tmp_path / "big.svg", matrix, "big")
        assert "heatmap" in element_ids(path)

    def test_zero_matrix(self, tmp_path):
        path = heatmap(tmp_path / "zero.svg", np.zeros((4, 4)), "zero")
        assert path.exists()

    def test_rejects_vectors(self, tmp_path):
        with pytest.raises(ValueError):
            heatmap(tmp_path / "bad.svg", np.ones(4), "bad")
