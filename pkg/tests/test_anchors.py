import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from anchoropt.anchors import (
    Box,
    FrcnnAnchorConfig,
    SsdAnchorConfig,
    anchor_table_csv,
    anchor_wh,
    constant_box_scale,
    corner_box,
    frcnn_anchor_set,
    frcnn_grid,
    iou,
    ssd_anchor_shapes,
    ssd_default_config,
    ssd_layer_boxes,
    ssd_scale_schedule,
)

positive = st.floats(0.01, 10.0, allow_nan=False, allow_infinity=False)


class TestScaleSchedule:
    def test_reference_values(self):
        got = ssd_scale_schedule(0.2, 0.9, 6)
        np.testing.assert_allclose(got, [0.2, 0.34, 0.48, 0.62, 0.76, 0.9], atol=1e-12)

    def test_degenerate_range(self):
        assert ssd_scale_schedule(0.3, 0.3, 4) == [0.3] * 4

    def test_endpoints_exact(self):
        sched = ssd_scale_schedule(0.11, 0.97, 9)
        assert sched[0] == 0.11
        assert sched[-1] == 0.97

    def test_second_differences_vanish(self):
        sched = np.array(ssd_scale_schedule(0.05, 1.0, 12))
        np.testing.assert_allclose(np.diff(sched, n=2), 0.0, atol=1e-12)

    def test_too_few_maps(self):
        with pytest.raises(ValueError):
            ssd_scale_schedule(0.2, 0.9, 1)


class TestDefaultConfig:
    def test_scales(self):
        cfg = ssd_default_config()
        assert cfg.scales == (0.1, 0.2, 0.37, 0.54, 0.71, 0.88, 1.05)
        assert cfg.scales[0] == 0.1
        assert len(cfg.scales) == 7

    def test_layer_box_counts(self):
        cfg = ssd_default_config()
        # reduced ratio sets on the first and last two layers
        assert [len(ssd_layer_boxes(cfg, i)) for i in range(6)] == [4, 6, 6, 6, 4, 4]

    def test_ratio_sets_contain_one(self):
        cfg = ssd_default_config()
        for ratios in cfg.ratios_per_layer:
            assert 1.0 in ratios

    def test_scale_out_of_range_rejected(self):
        with pytest.raises(ValueError, match="1.06"):
            ssd_default_config(scales=(0.1, 0.2, 0.37, 0.54, 0.71, 0.88, 1.07))


class TestAnchorWh:
    def test_square(self):
        assert anchor_wh(0.2, 1.0) == (0.2, 0.2)

    def test_ratio_four(self):
        w, h = anchor_wh(0.2, 4.0)
        assert (w, h) == pytest.approx((0.4, 0.1), abs=1e-15)

    @given(positive, positive)
    def test_area_preserved(self, s, a_r):
        w, h = anchor_wh(s, a_r)
        assert w * h == pytest.approx(s * s, rel=1e-12)

    @given(positive, positive)
    def test_inverse_ratio_swaps_extents(self, s, a_r):
        w, h = anchor_wh(s, a_r)
        w_inv, h_inv = anchor_wh(s, 1.0 / a_r)
        assert (w_inv, h_inv) == pytest.approx((h, w), rel=1e-9)


class TestConstantBox:
    def test_reference_value(self):
        assert constant_box_scale(0.2, 0.37) == pytest.approx(0.27203, abs=1e-5)

    @given(positive)
    def test_fixpoint(self, s):
        assert constant_box_scale(s, s) == pytest.approx(s, rel=1e-12)

    @given(positive, positive)
    def test_between_inputs(self, a, b):
        if a == b:
            return
        s = constant_box_scale(a, b)
        assert min(a, b) < s < max(a, b)


class TestLayerBoxes:
    def test_constant_box_is_last_and_square(self):
        cfg = ssd_default_config()
        boxes = ssd_layer_boxes(cfg, 1)
        w, h = boxes[-1]
        assert w == h == pytest.approx(constant_box_scale(0.2, 0.37))

    def test_all_extents_positive(self):
        cfg = ssd_default_config()
        for i in range(cfg.n_layers):
            for w, h in ssd_layer_boxes(cfg, i):
                assert w > 0 and h > 0

    def test_missing_next_scale_rejected(self):
        cfg = SsdAnchorConfig(
            scales=(0.2, 0.4),
            ratios_per_layer=((1.0,), (1.0,)),
            include_constant_box=(True, True),
        )
        ssd_layer_boxes(cfg, 0)
        with pytest.raises(ValueError, match="next-layer"):
            ssd_layer_boxes(cfg, 1)

    def test_default_boxes_match_handwritten_fixture(self):
        # Independent arithmetic: conv7 layer, scale 0.2, full ratio set.
        r2, r3 = math.sqrt(2.0), math.sqrt(3.0)
        expected = [
            (0.2, 0.2),
            (0.2 * r2, 0.2 / r2),
            (0.2 * r3, 0.2 / r3),
            (0.2 / r2, 0.2 * r2),
            (0.2 / r3, 0.2 * r3),
            (math.sqrt(0.2 * 0.37),) * 2,
        ]
        got = ssd_layer_boxes(ssd_default_config(), 1)
        np.testing.assert_allclose(got, expected, rtol=1e-12)

    def test_all_shapes_union(self):
        shapes = ssd_anchor_shapes(ssd_default_config())
        assert shapes.shape == (4 + 6 + 6 + 6 + 4 + 4, 2)


class TestFrcnnAnchors:
    def test_default_set_has_square_128(self):
        anchors = frcnn_anchor_set(FrcnnAnchorConfig())
        assert len(anchors) == 9
        assert (128.0, 128.0) in anchors

    def test_ratio_two_at_128(self):
        anchors = frcnn_anchor_set(FrcnnAnchorConfig())
        w, h = anchors[2]  # scale 128, ratio 2
        assert (w, h) == pytest.approx((181.019336, 90.509668), abs=1e-4)
        assert w * h == pytest.approx(128.0**2, rel=1e-6)

    def test_grid_count(self):
        cfg = FrcnnAnchorConfig(feat_w=5, feat_h=4)
        grid = frcnn_grid(cfg)
        assert len(grid) == 5 * 4 * 9

    def test_grid_centers_stride_spaced(self):
        cfg = FrcnnAnchorConfig(feat_w=2, feat_h=1, stride=16.0)
        centers = {(b.cx, b.cy) for b in frcnn_grid(cfg)}
        assert centers == {(8.0, 8.0), (24.0, 8.0)}


class TestIou:
    def test_identical(self):
        b = Box(1, 1, 2, 3)
        assert iou(b, b) == 1.0

    def test_disjoint(self):
        assert iou(Box(0, 0, 1, 1), Box(5, 5, 1, 1)) == 0.0

    def test_corner_example(self):
        a = corner_box(0, 0, 2, 2)
        b = corner_box(1, 1, 3, 3)
        assert iou(a, b) == pytest.approx(1.0 / 7.0, rel=1e-12)

    @given(positive, positive, positive, positive,
           st.floats(-3, 3, allow_nan=False), st.floats(-3, 3, allow_nan=False))
    def test_symmetric(self, w1, h1, w2, h2, cx, cy):
        a, b = Box(0, 0, w1, h1), Box(cx, cy, w2, h2)
        assert iou(a, b) == pytest.approx(iou(b, a), rel=1e-12)
        assert 0.0 <= iou(a, b) <= 1.0

    @given(positive, positive, positive, positive, st.floats(0.1, 50, allow_nan=False))
    def test_scale_invariant(self, w1, h1, w2, h2, factor):
        a, b = Box(0, 0, w1, h1), Box(0.5, 0.2, w2, h2)
        a2 = Box(0, 0, w1 * factor, h1 * factor)
        b2 = Box(0.5 * factor, 0.2 * factor, w2 * factor, h2 * factor)
        assert iou(a, b) == pytest.approx(iou(a2, b2), abs=1e-12, rel=1e-9)

    def test_nonpositive_extent_rejected(self):
        with pytest.raises(ValueError):
            Box(0, 0, 0.0, 1.0)


class TestAnchorTableCsv:
    def test_ssd_table_rows(self):
        text = anchor_table_csv("ssd", ssd_default_config())
        lines = text.strip().splitlines()
        assert lines[0] == "layer,scale,ratio,w,h"
        assert len(lines) == 1 + 4 + 6 + 6 + 6 + 4 + 4
        assert lines[1].startswith("conv4_3,0.1,1,")

    def test_frcnn_table_rows(self):
        text = anchor_table_csv("frcnn", FrcnnAnchorConfig())
        assert len(text.strip().splitlines()) == 1 + 9
