"""Dual-branch assembly: scoring semantics, concatenation layout, and the
on-disk round trip."""

import numpy as np
import pytest

from blindiq import colorspace as cs
from blindiq.errors import ModelConfigError, ShapeError
from blindiq.kan import KanStack
from blindiq.model import (
    build_model,
    load_weights,
    model_tensors,
    save_weights,
)


def fixed_image(h=80, w=80) -> cs.Image:
    yy, xx = np.mgrid[0:h, 0:w]
    return cs.Image(np.stack([
        xx / (w - 1), yy / (h - 1), ((xx // 5 + yy // 5) % 2).astype(float)
    ], axis=-1).astype(np.float32))


def small_model(seed=77, d=16, fusion="kan"):
    return build_model("tiny", "tiny", d=d, fusion_kind=fusion,
                       rng=np.random.default_rng(seed),
                       auth_resize=(48, 48), synth_crop=(64, 64))


class TestPredict:
    def test_deterministic(self):
        model = small_model()
        img = fixed_image()
        assert model.predict(img) == model.predict(img)

    def test_golden_scores(self):
        model = small_model()
        img = fixed_image()
        assert model.predict(img, cs.RGB) == 0.06035230681300163
        assert model.predict(img, cs.YUV) == 0.0406326949596405
        assert model.predict(img, cs.LAB) == 0.03018246404826641

    def test_batch_order_invariance(self):
        model = small_model(seed=5)
        rng = np.random.default_rng(0)
        imgs = [cs.Image(rng.uniform(0, 1, (70, 70, 3)).astype(np.float32))
                for _ in range(4)]
        forward = [model.predict(im) for im in imgs]
        backward = [model.predict(im) for im in reversed(imgs)]
        assert forward == backward[::-1]

    def test_fusion_zeroed_synthetic_half_reduces_to_authentic(self):
        model = small_model(seed=11)
        d = model.d
        layer = model.fusion.layers[0]
        layer.base_weight[:, d:] = 0.0
        layer.base_scale[:, d:] = 0.0
        layer.spline_coeff[:, d:, :] = 0.0
        img = fixed_image()
        got = model.predict(img)

        # Authentic-only composition: same fusion on [auth || zeros].
        a = model.down_auth(model.authentic.embed(img, cs.RGB))
        fused_in = np.concatenate([a, np.zeros(d, dtype=a.dtype)])
        want = float(model.fusion(fused_in)[0])
        assert got == want

    def test_zero_weighted_synthetic_encoder_drops_out(self):
        model = small_model(seed=13)
        for name in model.synthetic.encoder.store:
            model.synthetic.encoder.store[name][...] = 0.0
        # Synthetic embedding becomes exactly zero, so scores depend only on
        # the authentic pathway.
        img = fixed_image()
        emb = model.synthetic.embed(img, cs.RGB)
        np.testing.assert_array_equal(emb, 0.0)

    def test_concatenation_order_is_authentic_first(self):
        model = small_model(seed=17)
        img = fixed_image()
        feats = model.branch_features(img)
        np.testing.assert_array_equal(feats[:1000], model.authentic.embed(img, cs.RGB))
        np.testing.assert_array_equal(feats[1000:], model.synthetic.embed(img, cs.RGB))


class TestRoundTrip:
    @pytest.mark.parametrize("d", [16, 128])
    def test_save_load_save_bit_identical(self, tmp_path, d):
        model = small_model(seed=23, d=d)
        p1 = tmp_path / "m1.larw"
        p2 = tmp_path / "m2.larw"
        save_weights(model, p1)
        save_weights(load_weights(p1), p2)
        assert p1.read_bytes() == p2.read_bytes()
        assert (tmp_path / "m1.cfg").read_text() == (tmp_path / "m2.cfg").read_text()

    def test_head_width_configurations(self, tmp_path):
        # d=128 -> fusion input 256; d=512 -> fusion input 1024.
        for d in (128, 512):
            model = small_model(seed=3, d=d)
            assert model.fusion.in_dim == 2 * d
            path = tmp_path / f"m{d}.larw"
            save_weights(model, path)
            loaded = load_weights(path)
            assert loaded.d == d
            assert loaded.fusion.in_dim == 2 * d

    def test_loaded_model_scores_identically(self, tmp_path):
        model = small_model(seed=29)
        path = tmp_path / "m.larw"
        save_weights(model, path)
        loaded = load_weights(path)
        img = fixed_image()
        assert loaded.predict(img) == model.predict(img)

    def test_mlp_fusion_round_trip(self, tmp_path):
        model = small_model(seed=31, fusion="mlp")
        path = tmp_path / "m.larw"
        save_weights(model, path)
        loaded = load_weights(path)
        img = fixed_image()
        assert loaded.predict(img) == model.predict(img)

    def test_missing_config_sidecar(self, tmp_path):
        model = small_model()
        path = tmp_path / "m.larw"
        save_weights(model, path)
        (tmp_path / "m.cfg").unlink()
        with pytest.raises(ModelConfigError):
            load_weights(path)

    def test_config_d_mismatch_detected(self, tmp_path):
        model = small_model()
        path = tmp_path / "m.larw"
        save_weights(model, path)
        cfg = (tmp_path / "m.cfg").read_text().replace("d=16", "d=32")
        (tmp_path / "m.cfg").write_text(cfg)
        with pytest.raises(ModelConfigError):
            load_weights(path)


class TestConstruction:
    def test_fusion_width_must_match(self):
        model = small_model()
        with pytest.raises(ShapeError):
            type(model)(model.authentic, model.synthetic, model.down_auth,
                        model.down_synth, KanStack.build([3 * model.d, 1]))

    def test_tensor_names_unique_and_prefixed(self):
        tensors = model_tensors(small_model())
        assert len(tensors) == len(set(tensors))
        prefixes = {name.split(".")[0] for name in tensors}
        assert prefixes == {"authentic", "synthetic", "fusion"}
