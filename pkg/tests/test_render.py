import math
import re
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from fairpart.geometry import Leaf, Node, UnsupportedDimensionError, polygon_area
from fairpart.measures import Measure, MeasureSet
from fairpart.render import RenderSpec, cell_polygons, render_svg, save_partition_figure, save_probe_figure

from conftest import random_measures, random_tree

SVG = "{http://www.w3.org/2000/svg}"
LINE = Leaf([[1.0, 0.0, 0.0], [-1.0, 0.0, 0.0]])


def polygons(doc):
    root = ET.fromstring(doc)
    return root.findall(f".//{SVG}polygon")


def shoelace_px(points_attr):
    pts = [tuple(map(float, p.split(","))) for p in points_attr.split()]
    return polygon_area(pts)


class TestRenderSvg:
    def test_single_cut_two_polygons(self):
        doc = render_svg(LINE, None, RenderSpec())
        polys = polygons(doc)
        assert len(polys) == 2
        assert len({p.get("fill") for p in polys}) == 2

    def test_plus_infinity_hides_left(self):
        left = Leaf([[0.0, 1.0, 0.0], [0.0, -1.0, 0.0]])
        tree = Node([1, 0], math.inf, left, LINE)
        doc = render_svg(tree, None, RenderSpec())
        polys = polygons(doc)
        assert len(polys) == 2
        assert {p.get("data-leaf") for p in polys} == {"2"}

    def test_areas_fill_canvas(self, rng):
        for _ in range(10):
            tree = random_tree(rng, 4, 2, 2, inf_prob=0.1)
            doc = render_svg(tree, None, RenderSpec(bbox=(0, 0, 1, 1), width=400, height=400))
            total = sum(shoelace_px(p.get("points")) for p in polygons(doc))
            # three-decimal pixel coordinates: allow rounding on every edge
            assert total == pytest.approx(400 * 400, rel=1e-4)
            exact = sum(polygon_area(p) for _, p in cell_polygons(tree, (0, 0, 1, 1)))
            assert exact == pytest.approx(1.0, abs=1e-6)

    def test_points_drawn(self, rng):
        ms = random_measures(rng, 2, 2, 7)
        doc = render_svg(LINE, ms, RenderSpec(bbox=(-3, -3, 3, 3)))
        root = ET.fromstring(doc)
        assert len(root.findall(f".//{SVG}circle")) == 14
        assert root.get("version") == "1.1"

    def test_deterministic(self, rng):
        tree = random_tree(rng, 3, 3, 2)
        ms = random_measures(rng, 2, 2, 5)
        assert render_svg(tree, ms) == render_svg(tree, ms)

    def test_weight_sizes_points(self):
        ms = MeasureSet.of([Measure("m", [[0.0, 0.0], [0.5, 0.5]], [1.0, 4.0])])
        doc = render_svg(LINE, ms)
        radii = [float(c.get("r")) for c in ET.fromstring(doc).findall(f".//{SVG}circle")]
        assert radii[1] == pytest.approx(2 * radii[0], rel=1e-3)

    def test_unsupported_dimension(self):
        with pytest.raises(UnsupportedDimensionError):
            render_svg(Leaf([[1.0, 0.0], [-1.0, 0.0]]), None)

    def test_spec_validation(self):
        with pytest.raises(ValueError):
            RenderSpec(width=10)
        with pytest.raises(ValueError):
            RenderSpec(bbox=(0, 0, 0, 1))

    def test_name_escaped(self):
        ms = MeasureSet.of([Measure.uniform('a<"b>', [[0.0, 0.0]])])
        ET.fromstring(render_svg(LINE, ms))


class TestFigures:
    def test_partition_png(self, tmp_path, rng):
        path = tmp_path / "p.png"
        save_partition_figure(path, random_tree(rng, 2, 2, 2), random_measures(rng, 2, 2, 5), title="x")
        assert path.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"

    def test_probe_png(self, tmp_path):
        report = {"best_discrepancy": 0.5,
                  "attempts": [{"template": 0, "method": "search", "discrepancy": 0.5}]}
        path = tmp_path / "q.png"
        save_probe_figure(path, report, LINE, None)
        assert path.stat().st_size > 0
