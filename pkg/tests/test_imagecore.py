import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.testing import assert_allclose, assert_array_equal

from kernelboost.imagecore import (
    BadMagicError,
    Dataset,
    DatasetError,
    GrayImage,
    MissingDimensionsError,
    PgmError,
    PixelCountError,
    ValueRangeError,
    ingest_directory,
    load_pgm,
    resize_bilinear,
    write_pgm,
)


class TestGrayImage:
    def test_rejects_out_of_range(self):
        with pytest.raises(ValueError):
            GrayImage(np.array([[0.0, 1.5]]))
        with pytest.raises(ValueError):
            GrayImage(np.array([[-0.1]]))

    def test_rejects_non_2d(self):
        with pytest.raises(ValueError):
            GrayImage(np.zeros(4))

    def test_pixels_are_read_only_copies(self):
        src = np.full((2, 3), 0.5)
        img = GrayImage(src)
        src[0, 0] = 0.0
        assert img.pixels[0, 0] == 0.5
        assert (img.width, img.height) == (3, 2)
        with pytest.raises(ValueError):
            img.pixels[0, 0] = 1.0


class TestLoadPgm:
    def test_ascii_scaling(self):
        img = load_pgm(b"P2 2 2 255\n0 255 128 64\n")
        assert_array_equal(img.pixels, [[0.0, 1.0], [128 / 255, 64 / 255]])

    def test_binary_matches_ascii(self):
        ascii_img = load_pgm(b"P2 2 2 255\n0 255 128 64\n")
        binary_img = load_pgm(b"P5 2 2 255\n" + bytes([0, 255, 128, 64]))
        assert ascii_img == binary_img

    def test_sixteen_bit_binary(self):
        raw = np.array([0, 1000, 65535, 3], dtype=">u2").tobytes()
        img = load_pgm(b"P5\n2 2\n65535\n" + raw)
        assert_array_equal(img.pixels.ravel(), np.array([0, 1000, 65535, 3]) / 65535.0)

    def test_header_comments(self):
        img = load_pgm(b"P2\n# made by hand\n2 1 # trailing\n# more\n10\n5 10\n")
        assert_array_equal(img.pixels, [[0.5, 1.0]])

    def test_short_ascii_raster(self):
        with pytest.raises(PixelCountError, match="pixel count mismatch") as exc:
            load_pgm(b"P2 2 2 255\n0 255 128\n")
        assert exc.value.offset == len(b"P2 2 2 255\n0 255 128\n")

    def test_short_binary_raster(self):
        with pytest.raises(PixelCountError):
            load_pgm(b"P5 2 2 255\n" + bytes([1, 2, 3]))

    def test_bad_magic(self):
        with pytest.raises(BadMagicError) as exc:
            load_pgm(b"P6 1 1 255\n0")
        assert exc.value.offset == 0

    def test_missing_dimensions(self):
        with pytest.raises(MissingDimensionsError):
            load_pgm(b"P2\n")
        with pytest.raises(MissingDimensionsError):
            load_pgm(b"P2 4\n")

    def test_value_above_maxval(self):
        with pytest.raises(ValueRangeError) as exc:
            load_pgm(b"P2 2 1 100\n50 101\n")
        assert exc.value.offset == len(b"P2 2 1 100\n50 ")

    def test_binary_value_above_maxval(self):
        with pytest.raises(ValueRangeError) as exc:
            load_pgm(b"P5 2 1 100\n" + bytes([7, 200]))
        assert exc.value.offset == len(b"P5 2 1 100\n") + 1

    def test_error_kinds_are_distinct(self):
        kinds = {BadMagicError, MissingDimensionsError, PixelCountError, ValueRangeError}
        assert len(kinds) == 4
        assert all(issubclass(k, PgmError) for k in kinds)

    @settings(max_examples=200, deadline=None)
    @given(
        st.integers(1, 6),
        st.integers(1, 6),
        st.data(),
        st.booleans(),
    )
    def test_round_trip_at_format_precision(self, w, h, data, binary):
        q = data.draw(st.lists(st.integers(0, 255), min_size=w * h, max_size=w * h))
        img = GrayImage(np.array(q, dtype=np.float64).reshape(h, w) / 255.0)
        assert load_pgm(write_pgm(img, binary=binary)) == img


class TestResize:
    def test_identity(self):
        rng = np.random.default_rng(0)
        img = GrayImage(rng.random((5, 7)))
        assert resize_bilinear(img, 7, 5) == img

    def test_constant(self):
        img = GrayImage(np.full((4, 6), 0.5))
        out = resize_bilinear(img, 11, 3)
        assert_array_equal(out.pixels, np.full((3, 11), 0.5))

    def test_two_to_three(self):
        # centers map to source x = -1/6, 1/2, 7/6 -> clamped 0, 0.5, 1
        out = resize_bilinear(GrayImage(np.array([[0.0, 1.0]])), 3, 1)
        assert_allclose(out.pixels, [[0.0, 0.5, 1.0]], atol=1e-15)

    def test_rejects_tiny_targets(self):
        img = GrayImage(np.zeros((4, 4)))
        with pytest.raises(ValueError):
            resize_bilinear(img, 1, 4)
        with pytest.raises(ValueError):
            resize_bilinear(img, 4, 0)

    @settings(max_examples=200, deadline=None)
    @given(
        st.integers(1, 9),
        st.integers(1, 9),
        st.integers(2, 12),
        st.integers(2, 12),
        st.integers(0, 2**32 - 1),
    )
    def test_range_preserved(self, w, h, tw, th, seed):
        px = np.random.default_rng(seed).random((h, w))
        out = resize_bilinear(GrayImage(px), tw, th).pixels
        assert out.shape == (th, tw)
        assert out.min() >= px.min() and out.max() <= px.max()


def _tree(root, spec):
    for cls, files in spec.items():
        (root / cls).mkdir(parents=True)
        for name, value in files:
            (root / cls / name).write_bytes(write_pgm(GrayImage(np.full((4, 4), value))))


class TestIngest:
    def test_sorted_classes_and_files(self, tmp_path):
        _tree(tmp_path, {"dog": [("b.pgm", 0.2), ("a.pgm", 0.4)], "cat": [("z.pgm", 0.6), ("y.pgm", 0.8)]})
        ds = ingest_directory(tmp_path, size=8)
        assert ds.classes == ["cat", "dog"]
        assert ds.labels == [0, 0, 1, 1]
        assert ds.names == ["cat/y.pgm", "cat/z.pgm", "dog/a.pgm", "dog/b.pgm"]
        assert all((im.width, im.height) == (8, 8) for im in ds.images)
        assert_allclose(ds.images[0].pixels, np.rint(0.8 * 255) / 255)

    def test_deterministic(self, tmp_path):
        _tree(tmp_path, {"b": [("1.pgm", 0.1)], "a": [("2.pgm", 0.3), ("1.pgm", 0.5)]})
        one, two = ingest_directory(tmp_path, 4), ingest_directory(tmp_path, 4)
        assert one.names == two.names and one.labels == two.labels
        assert all(x == y for x, y in zip(one.images, two.images))

    def test_single_class_ingests_but_is_not_trainable(self, tmp_path):
        _tree(tmp_path, {"only": [("a.pgm", 0.5)]})
        ds = ingest_directory(tmp_path, 4)
        assert ds.classes == ["only"]
        with pytest.raises(DatasetError):
            ds.check_trainable()

    def test_corrupt_file_named(self, tmp_path):
        _tree(tmp_path, {"a": [("ok.pgm", 0.5)]})
        (tmp_path / "a" / "bad.pgm").write_bytes(b"P2 2 2 255\n1 2\n")
        with pytest.raises(DatasetError, match="bad.pgm"):
            ingest_directory(tmp_path, 4)

    def test_empty_root_and_empty_class(self, tmp_path):
        with pytest.raises(DatasetError):
            ingest_directory(tmp_path, 4)
        (tmp_path / "a").mkdir()
        with pytest.raises(DatasetError, match="no .pgm"):
            ingest_directory(tmp_path, 4)


class TestDataset:
    def test_label_range(self):
        with pytest.raises(ValueError):
            Dataset(["a", "b"], [GrayImage(np.zeros((2, 2)))], [2])

    def test_subset_and_trainable(self):
        img = GrayImage(np.zeros((2, 2)))
        ds = Dataset(["a", "b"], [img, img, img], [0, 1, 1])
        ds.check_trainable()
        sub = ds.subset([1, 2])
        assert sub.labels == [1, 1] and sub.names == ["sample1", "sample2"]
        with pytest.raises(DatasetError, match="a"):
            sub.check_trainable()
