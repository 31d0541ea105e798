import numpy as np
import pytest

from flexconn.targets import (
    PatchSet,
    concat_patchsets,
    extract_patches,
    make_membership_target,
    split_train_validation,
)
from flexconn.volume import Volume


def vol(a):
    return Volume(np.asarray(a, dtype=np.float32))


class TestMembershipTarget:
    def test_isolated_voxel(self):
        m = np.zeros((7, 7, 3))
        m[3, 3, 1] = 1
        t = make_membership_target(vol(m)).data
        assert abs(t[3, 3, 1] - 0.14777) < 1e-3
        # neighbouring slices untouched: smoothing is in-plane only
        assert not t[:, :, 0].any() and not t[:, :, 2].any()
        assert t[3, 3, 1] == t.max()

    def test_straight_edge(self):
        m = np.zeros((9, 9, 1))
        m[:4] = 1
        t = make_membership_target(vol(m)).data
        assert abs(t[4, 4, 0] - 0.30779) < 1e-3
        assert t[2, 4, 0] == pytest.approx(1.0)
        # the exterior edge value just clears the default threshold
        assert 0.30 < t[4, 4, 0] < 0.31

    def test_all_lesion_and_empty(self):
        full = make_membership_target(vol(np.ones((5, 5, 2)))).data
        assert full[2, 2, 0] == pytest.approx(1.0)
        assert not make_membership_target(vol(np.zeros((5, 5, 2)))).data.any()

    def test_range_and_dtype(self):
        rng = np.random.default_rng(0)
        t = make_membership_target(vol(rng.random((10, 10, 4)) > 0.5)).data
        assert t.dtype == np.float32
        assert t.min() >= 0 and t.max() <= 1

    def test_slice_axis(self):
        m = np.zeros((3, 7, 7))
        m[1, 3, 3] = 1
        t = make_membership_target(vol(m), slice_axis=0).data
        assert abs(t[1, 3, 3] - 0.14777) < 1e-3
        assert not t[0].any()

    def test_non_binary_rejected(self):
        with pytest.raises(ValueError, match="binary"):
            make_membership_target(vol(np.full((3, 3, 1), 0.5)))


class TestPatches:
    def setup_method(self):
        rng = np.random.default_rng(1)
        self.shape = (20, 24, 4)
        self.a = vol(rng.random(self.shape))
        self.b = vol(rng.random(self.shape))
        m = np.zeros(self.shape)
        m[5:9, 6:8, 1] = 1
        m[0, 0, 3] = 1
        self.mask = vol(m)

    def test_one_patch_per_lesion_voxel(self):
        ps = extract_patches([self.a, self.b], self.mask, (7, 9))
        assert len(ps) == int(self.mask.data.sum())
        assert ps.patch_shape == (7, 9)
        assert ps.contrasts[0].shape == (len(ps), 1, 7, 9)

    def test_patch_content(self):
        ps = extract_patches([self.a, self.b], self.mask, (5, 5))
        i = int(np.nonzero((ps.coords == [6, 7, 1]).all(axis=1))[0][0])
        np.testing.assert_array_equal(ps.contrasts[0][i, 0], self.a.data[4:9, 5:10, 1])
        np.testing.assert_array_equal(ps.contrasts[1][i, 0], self.b.data[4:9, 5:10, 1])
        target = make_membership_target(self.mask).data
        np.testing.assert_array_equal(ps.target[i, 0], target[4:9, 5:10, 1])

    def test_corner_zero_padding(self):
        ps = extract_patches([self.a, self.b], self.mask, (5, 5))
        i = int(np.nonzero((ps.coords == [0, 0, 3]).all(axis=1))[0][0])
        p = ps.contrasts[0][i, 0]
        assert not p[:2].any() and not p[:, :2].any()
        np.testing.assert_array_equal(p[2:, 2:], self.a.data[:3, :3, 3])

    def test_empty_mask(self):
        with pytest.raises(ValueError, match="no lesion voxels"):
            extract_patches([self.a], vol(np.zeros(self.shape)))

    def test_even_patch_rejected(self):
        with pytest.raises(ValueError, match="odd"):
            extract_patches([self.a], self.mask, (4, 5))

    def test_shape_mismatch(self):
        with pytest.raises(ValueError, match="shape"):
            extract_patches([vol(np.zeros((3, 3, 3)))], self.mask)

    def test_slice_axis_coords(self):
        data = np.moveaxis(self.a.data, 2, 0)
        mask = np.moveaxis(self.mask.data, 2, 0)
        ps = extract_patches([vol(data)], vol(mask), (5, 5), slice_axis=0)
        assert all(mask[tuple(c)] == 1 for c in ps.coords)
        ref = extract_patches([self.a], self.mask, (5, 5))
        np.testing.assert_array_equal(ps.contrasts[0], ref.contrasts[0])


class TestSplit:
    def make(self, n):
        z = np.zeros((n, 1, 3, 3), np.float32)
        z[:, 0, 0, 0] = np.arange(n)
        return PatchSet([z], z.copy(), np.zeros((n, 3), int))

    def test_sizes_and_disjoint(self):
        tr, va = split_train_validation(self.make(103), 0.2, seed=0)
        assert len(va) == 21 and len(tr) == 82
        ids = np.concatenate([tr.target[:, 0, 0, 0], va.target[:, 0, 0, 0]])
        assert sorted(ids) == list(range(103))

    def test_seeded(self):
        a = split_train_validation(self.make(50), 0.2, seed=3)[1]
        b = split_train_validation(self.make(50), 0.2, seed=3)[1]
        c = split_train_validation(self.make(50), 0.2, seed=4)[1]
        np.testing.assert_array_equal(a.target, b.target)
        assert not np.array_equal(a.target, c.target)

    def test_too_few(self):
        with pytest.raises(ValueError, match="at least 5"):
            split_train_validation(self.make(4))

    def test_concat(self):
        s = concat_patchsets([self.make(3), self.make(4)])
        assert len(s) == 7
        with pytest.raises(ValueError):
            concat_patchsets([])
