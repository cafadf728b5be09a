import numpy as np
import pytest

from mlcl.augment import (
    TRANSFORM_KINDS,
    TransformSpec,
    apply,
    apply_raster,
    make_views,
    sample_transform,
)
from mlcl.generator import generate_instance, instance_seed


@pytest.fixture(scope="module")
def instance():
    return generate_instance("grid2x2", instance_seed(7, 0), panel_size=28)


class TestSampleTransform:
    def test_reproducible(self):
        a = sample_transform(np.random.default_rng(3), 28)
        b = sample_transform(np.random.default_rng(3), 28)
        assert a == b

    def test_never_empty(self):
        rng = np.random.default_rng(4)
        for _ in range(500):
            assert sample_transform(rng, 28).kinds()

    def test_every_kind_appears(self):
        rng = np.random.default_rng(5)
        seen = set()
        for _ in range(2000):
            seen.update(sample_transform(rng, 28).kinds())
            if len(seen) == len(TRANSFORM_KINDS):
                break
        assert seen == set(TRANSFORM_KINDS)

    def test_right_angle_mode(self):
        rng = np.random.default_rng(6)
        for _ in range(200):
            spec = sample_transform(rng, 28, right_angles_only=True)
            if spec.rotate_deg is not None:
                assert spec.rotate_deg in (0.0, 90.0, 180.0, 270.0)

    def test_bad_grid_permutation_rejected(self):
        with pytest.raises(ValueError, match="permutation"):
            TransformSpec(grid=(2, (0, 1, 2, 2)))


class TestInvolutions:
    @pytest.mark.parametrize("field", ["hflip", "vflip", "transpose"])
    def test_twice_is_identity(self, instance, field):
        spec = TransformSpec(**{field: True})
        once = apply(instance, spec)
        twice = apply(once, spec)
        for a, b in zip(twice.rasters(), instance.rasters()):
            assert np.array_equal(a, b)

    def test_identity_grid_shuffle(self, instance):
        spec = TransformSpec(grid=(2, tuple(range(4))))
        out = apply(instance, spec)
        for a, b in zip(out.rasters(), instance.rasters()):
            assert np.array_equal(a, b)

    def test_full_period_roll_is_identity(self, instance):
        spec = TransformSpec(roll=(28, 0))
        out = apply(instance, spec)
        for a, b in zip(out.rasters(), instance.rasters()):
            assert np.array_equal(a, b)

    def test_grid3_shuffle_with_indivisible_panel(self, instance):
        # 28 is not divisible by 3: the 27x27 region is permuted, the last
        # row/column strip must stay put
        perm = tuple(np.random.default_rng(0).permutation(9).tolist())
        out = apply_raster(instance.rasters()[0], TransformSpec(grid=(3, perm)))
        assert np.array_equal(out[27:, :], instance.rasters()[0][27:, :])
        assert np.array_equal(out[:, 27:], instance.rasters()[0][:, 27:])


class TestApply:
    def test_metadata_unchanged(self, instance):
        rng = np.random.default_rng(8)
        for _ in range(50):
            spec = sample_transform(rng, 28)
            out = apply(instance, spec)
            assert out.structure == instance.structure
            assert out.correct_index == instance.correct_index
            assert out.context == instance.context
            assert out.choices == instance.choices

    def test_same_transform_for_every_panel(self, instance):
        rng = np.random.default_rng(9)
        spec = sample_transform(rng, 28)
        out = apply(instance, spec)
        for before, after in zip(instance.rasters(), out.rasters()):
            assert np.array_equal(after, apply_raster(before, spec))

    def test_rotation_keeps_value_set_closed(self, instance):
        out = apply_raster(instance.rasters()[0], TransformSpec(rotate_deg=37.5))
        allowed = set(np.unique(instance.rasters()[0])) | {255}
        assert set(np.unique(out)) <= allowed


class TestMakeViews:
    def test_views_share_labels(self, instance):
        rng = np.random.default_rng(10)
        a, b = make_views(instance, rng)
        assert a.structure == b.structure == instance.structure
        assert a.correct_index == b.correct_index == instance.correct_index

    def test_views_differ_visually(self, instance):
        rng = np.random.default_rng(11)
        differing = 0
        for _ in range(40):
            a, b = make_views(instance, rng)
            if any(not np.array_equal(x, y) for x, y in zip(a.rasters(), b.rasters())):
                differing += 1
        assert differing >= 38

    def test_views_are_deterministic(self, instance):
        a1, b1 = make_views(instance, np.random.default_rng(12))
        a2, b2 = make_views(instance, np.random.default_rng(12))
        for x, y in zip(a1.rasters() + b1.rasters(), a2.rasters() + b2.rasters()):
            assert np.array_equal(x, y)


def test_spec_serializes_for_logs():
    import json

    spec = TransformSpec(hflip=True, rotate_deg=12.25, grid=(2, (1, 0, 3, 2)), roll=(3, 4))
    text = json.dumps(spec.to_dict())
    assert "12.25" in text
