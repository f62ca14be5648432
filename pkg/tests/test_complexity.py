"""MAC/parameter accounting against formula arithmetic and hand summation."""

import numpy as np

from blindiq import complexity as cx
from blindiq.encoder import ConvOp, LinearOp, SEOp, make_encoder_spec, MOBILENET_V3_LARGE, TINY
from blindiq.kan import KanLayer, KanStack
from blindiq.mlp import MlpStack
from blindiq.model import build_model, model_tensors


class TestCountLayer:
    def test_stem_conv_formula_value(self):
        op = ConvOp("stem", 3, 16, 3, 2, 1, 1, "hard_swish")
        macs, params = cx.count_layer(op, (224, 224))
        assert macs == 5_419_008  # 3*3*3*16*112*112
        assert params == 3 * 3 * 3 * 16 + 16

    def test_linear_formula(self):
        macs, params = cx.count_layer(LinearOp("fc", 128, 1, "none"))
        assert macs == 128 and params == 129

    def test_kan_layer_formula(self):
        macs, params = cx.count_layer(KanLayer(1000, 128))
        assert params == 1000 * 128 * 8 + 2 * 1000 * 128 == 1_280_000
        assert macs == 1000 * 128 * (5 + 3 + 2)

    def test_depthwise_group_reduction(self):
        op = ConvOp("dw", 32, 32, 3, 1, 1, 32, "relu")
        macs, params = cx.count_layer(op, (10, 10))
        assert macs == 3 * 3 * 1 * 32 * 10 * 10
        assert params == 3 * 3 * 32 + 32

    def test_se_params_counted_macs_headline_zero(self):
        op = SEOp("se", 72, 24)
        macs, params = cx.count_layer(op, (28, 28))
        assert macs == 0
        assert params == 72 * 24 + 24 + 24 * 72 + 72
        strict_macs, _ = cx.count_layer(op, (28, 28), mode=cx.STRICT)
        assert strict_macs == 72 * 24 * 2 + 72 + 72 * 28 * 28


class TestEncoderCounts:
    def test_tiny_hand_summed(self):
        spec = make_encoder_spec(TINY)
        rows = cx.count_encoder(spec, (64, 64))
        by_name = {r.name: r for r in rows}
        # stage1: 3->16, 64 -> 32 spatial
        assert by_name["stage1"].macs == 9 * 3 * 16 * 32 * 32
        assert by_name["stage2"].macs == 9 * 16 * 32 * 16 * 16
        assert by_name["stage3"].macs == 9 * 32 * 64 * 8 * 8
        assert by_name["stage4"].macs == 9 * 64 * 128 * 4 * 4
        assert by_name["fc"].macs == 128 * 1000
        want_total = (9 * 3 * 16 * 1024 + 9 * 16 * 32 * 256 + 9 * 32 * 64 * 64
                      + 9 * 64 * 128 * 16 + 128 * 1000)
        assert sum(r.macs for r in rows) == want_total

    def test_trunk_macs_scale_with_pixels(self):
        spec = make_encoder_spec(MOBILENET_V3_LARGE)
        small = {r.name: r.macs for r in cx.count_encoder(spec, (64, 64)) if r.kind == "conv"}
        big = {r.name: r.macs for r in cx.count_encoder(spec, (128, 128)) if r.kind == "conv"}
        for name, macs in small.items():
            assert big[name] == 4 * macs, name

    def test_strict_mode_only_adds(self):
        spec = make_encoder_spec(MOBILENET_V3_LARGE)
        headline = sum(r.macs for r in cx.count_encoder(spec, (224, 224)))
        strict = sum(r.macs for r in cx.count_encoder(spec, (224, 224), cx.STRICT))
        assert strict > headline


class TestModelCounts:
    def test_dual_large_model_within_headline_bound(self):
        model = build_model(MOBILENET_V3_LARGE, MOBILENET_V3_LARGE, d=512,
                            rng=np.random.default_rng(0))
        report = cx.count_model(model, (384, 384), (1280, 1280))
        assert report.total_macs <= 37_000_000_000
        # Both branches dominate; sanity-check the published magnitude.
        assert report.total_macs > 5_000_000_000

    def test_params_match_serialized_scalars_exactly(self):
        model = build_model("tiny", "tiny", d=16, rng=np.random.default_rng(1),
                            auth_resize=(48, 48), synth_crop=(64, 64))
        report = cx.count_model(model, (48, 48), (64, 64))
        serialized = sum(int(np.prod(t.shape)) for t in model_tensors(model).values())
        assert report.total_params == serialized

    def test_dual_large_params_near_published_figure(self):
        model = build_model(MOBILENET_V3_LARGE, MOBILENET_V3_LARGE, d=512,
                            rng=np.random.default_rng(2))
        report = cx.count_model(model, (384, 384), (1280, 1280))
        # 2 encoders + 2 down-samplers (1000->512) + fusion (1024->1)
        assert report.total_params == 2 * 5_470_832 + 2 * 5_120_000 + 10_240
        delta = report.total_params - 21_100_000
        assert abs(delta) < 200_000

    def test_totals_equal_row_sums(self):
        model = build_model("tiny", "tiny", d=8, rng=np.random.default_rng(3),
                            auth_resize=(32, 32), synth_crop=(32, 32))
        report = cx.count_model(model, (32, 32), (32, 32))
        assert report.total_macs == sum(r.macs for r in report.rows)
        assert report.total_params == sum(r.params for r in report.rows)


class TestRendering:
    def make_report(self):
        model = build_model("tiny", "tiny", d=8, rng=np.random.default_rng(4),
                            auth_resize=(32, 32), synth_crop=(32, 32))
        return cx.count_model(model, (32, 32), (32, 32))

    def test_header_states_mac_convention(self):
        report = self.make_report()
        assert "1 MAC = 1 multiply-accumulate" in report.header()
        assert report.header() in report.to_text()

    def test_csv_shape(self):
        report = self.make_report()
        lines = report.to_csv().strip().splitlines()
        assert lines[0] == "layer,kind,macs,params"
        assert lines[-1].startswith("TOTAL,")
        assert len(lines) == len(report.rows) + 2

    def test_head_counting_mlp(self):
        stack = MlpStack.build([1000, 1125, 128, 1])
        rows = cx.count_head(stack)
        assert sum(r.macs for r in rows) == 1000 * 1125 + 1125 * 128 + 128
        assert sum(r.params for r in rows) == 1_270_382

    def test_head_counting_kan_stack(self):
        stack = KanStack.build([1000, 128, 1])
        rows = cx.count_head(stack)
        assert sum(r.macs for r in rows) == 1000 * 128 * 10 + 128 * 10
