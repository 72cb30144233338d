import numpy as np
import pytest
from PIL import Image

from grnparse.data import (
    AugmentConfig,
    Capsule,
    CorpusSpec,
    HiddenLabels,
    NoiseConfig,
    Sample,
    augment,
    corrupt,
    flip_sample,
    generate,
    inject_global_error,
    inject_local_error,
    read_corpus,
    read_image,
    render_figure,
    scale_crop,
    write_corpus,
    write_image,
)
from grnparse.data.netpbm import (
    decode_pgm,
    decode_ppm,
    encode_pgm,
    encode_ppm,
    quantize,
    read_pgm,
    write_pgm,
)
from grnparse.data.noise import disc_footprint
from grnparse.errors import ConfigError, DataError, FormatError
from grnparse.parts import PART, PART_COLOR, get_category_table

SMALL = dict(n_labeled=3, n_unlabeled=4, n_test=2, size=16, c=8, seed=5)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(0)


@pytest.fixture(scope="module")
def corpus():
    return generate(CorpusSpec(**SMALL))


def test_category_table_c8() -> None:
    table = get_category_table(8)
    assert table.c == 8
    assert table.names[:3] == ["background", "head", "torso"]
    assert table.pairs == [(3, 4), (5, 6)]
    assert table.palette()[4] == PART_COLOR[PART.RIGHT_ARM]
    np.testing.assert_array_equal(table.flip_lookup(), [0, 1, 2, 4, 3, 6, 5, 7])


@pytest.mark.parametrize("c", [4, 5, 6, 7, 8])
def test_category_tables_cover_all_parts(c: int) -> None:
    table = get_category_table(c)
    lookup = table.part_lookup()
    assert lookup[PART.BACKGROUND] == 0
    assert set(lookup) == set(range(c))
    flip = table.flip_lookup()
    np.testing.assert_array_equal(flip[flip], np.arange(c))
    confusion = table.confusion_map()
    assert set(confusion) == set(range(1, c))
    assert all(confusion[i] != i for i in confusion)


def test_category_table_merges_parts() -> None:
    table = get_category_table(4)
    parts = np.array([[PART.HEAD, PART.CLOTHES], [PART.LEFT_LEG, PART.RIGHT_ARM]])
    np.testing.assert_array_equal(table.labels_from_parts(parts), [[1, 1], [2, 3]])
    assert table.pairs == [(2, 3)]
    with pytest.raises(ValueError):
        table["nose"]


@pytest.mark.parametrize("c", [3, 9])
def test_category_table_range(c: int) -> None:
    with pytest.raises(ConfigError):
        get_category_table(c)


def test_ppm_layout() -> None:
    rgb = np.arange(18, dtype=np.uint8).reshape(2, 3, 3)
    blob = encode_ppm(rgb)
    assert blob == b"P6\n3 2\n255\n" + bytes(range(18))
    np.testing.assert_array_equal(decode_ppm(blob), rgb)


def test_pgm_header_comments() -> None:
    blob = b"P5 # gray\n2 # width\n 1\n255\n\x07\x09"
    np.testing.assert_array_equal(decode_pgm(blob), [[7, 9]])


@pytest.mark.parametrize(
    "blob",
    [
        b"P6\n1 1\n255\n\x00\x00\x00",
        b"P5\n1 1\n65535\n\x00\x00",
        b"P5\n2 2\n255\n\x00",
        b"P5\n2 2\n255\n\x00\x00\x00\x00\x00",
        b"P5\n2",
    ],
)
def test_pgm_rejects_malformed(blob: bytes) -> None:
    with pytest.raises(FormatError):
        decode_pgm(blob)


def test_ppm_rejects_wide_maxval() -> None:
    with pytest.raises(FormatError, match="maxval"):
        decode_ppm(b"P6\n1 1\n65535\n" + bytes(6))


def test_pgm_opens_in_pillow(tmp_path) -> None:
    gray = np.array([[0, 7, 255], [1, 2, 3]], dtype=np.uint8)
    path = write_pgm(tmp_path / "labels.pgm", gray)
    with Image.open(path) as img:
        assert img.mode == "L"
        np.testing.assert_array_equal(np.asarray(img), gray)
    np.testing.assert_array_equal(read_pgm(path), gray)


def test_pgm_value_range() -> None:
    with pytest.raises(FormatError):
        encode_pgm(np.array([[256]]))


def test_image_file_round_trip(tmp_path, rng: np.random.Generator) -> None:
    image = quantize(rng.uniform(size=(3, 4, 5)))
    restored = read_image(write_image(tmp_path / "x.ppm", image))
    np.testing.assert_array_equal(restored, image)


def test_capsule_disc() -> None:
    mask = Capsule(PART.HEAD, (2.0, 2.0), (2.0, 2.0), 1.0).mask(5, 5)
    expected = np.zeros((5, 5), dtype=bool)
    expected[1:3, 1:3] = True
    np.testing.assert_array_equal(mask, expected)


def test_capsule_segment() -> None:
    mask = Capsule(PART.LEFT_ARM, (2.0, 1.0), (2.0, 4.0), 0.6).mask(5, 6)
    expected = np.zeros((5, 6), dtype=bool)
    expected[1:3, 1:4] = True
    np.testing.assert_array_equal(mask, expected)


def test_render_figure() -> None:
    a = render_figure(np.random.default_rng(4), 32)
    b = render_figure(np.random.default_rng(4), 32)
    np.testing.assert_array_equal(a.image, b.image)
    np.testing.assert_array_equal(a.parts, b.parts)
    assert a.image.shape == (3, 32, 32)
    np.testing.assert_array_equal(quantize(a.image), a.image)
    assert a.parts.max() < len(PART)
    assert (a.parts == PART.TORSO).any() or (a.parts == PART.CLOTHES).any()


@pytest.mark.parametrize("seed", range(5))
def test_labeled_pixels_lie_inside_capsules(seed: int) -> None:
    figure = render_figure(np.random.default_rng(seed), 32)
    covered = np.zeros(figure.parts.shape, dtype=bool)
    for capsule in figure.capsules:
        mask = capsule.mask(32, 32)
        covered |= mask
        assert (figure.parts[mask] != 0).all()
    np.testing.assert_array_equal(figure.parts != 0, covered)


def test_render_back_view() -> None:
    figure = render_figure(np.random.default_rng(1), 32, p_back_view=1.0)
    assert figure.back_view


def test_render_drops_every_limb() -> None:
    figure = render_figure(np.random.default_rng(2), 32, p_missing=1.0)
    limbs = {PART.LEFT_ARM, PART.RIGHT_ARM, PART.LEFT_LEG, PART.RIGHT_LEG}
    assert not limbs & {c.part for c in figure.capsules}


def test_generate_splits(corpus) -> None:
    assert [s.id for s in corpus] == [f"{i:05d}" for i in range(9)]
    assert [len(corpus.labeled), len(corpus.unlabeled), len(corpus.test)] == [3, 4, 2]
    assert all(s.label is None for s in corpus.unlabeled)
    assert all(s.label is not None for s in corpus.labeled + corpus.test)
    assert corpus.hidden.ids == [s.id for s in corpus.unlabeled]
    assert corpus.hidden.reads == []


def test_generate_is_deterministic(corpus) -> None:
    again = generate(CorpusSpec(**SMALL), threads=3)
    for a, b in zip(corpus, again):
        np.testing.assert_array_equal(a.image, b.image)
        if a.label is not None:
            np.testing.assert_array_equal(a.label, b.label)
    other = generate(CorpusSpec(**{**SMALL, "seed": 6}))
    assert not np.array_equal(corpus.samples[0].image, other.samples[0].image)


def test_generate_rejects_bad_specs() -> None:
    with pytest.raises(ConfigError):
        generate(CorpusSpec(n_labeled=0, n_unlabeled=0, n_test=0))
    with pytest.raises(ConfigError):
        generate(CorpusSpec(n_labeled=1, n_unlabeled=0, n_test=0, size=18))
    with pytest.raises(ConfigError):
        generate(CorpusSpec(n_labeled=1, n_unlabeled=0, n_test=0, c=9))


def test_sample_label_visibility(rng: np.random.Generator) -> None:
    image = np.zeros((3, 4, 4))
    with pytest.raises(DataError):
        Sample("a", image, np.zeros((4, 4), dtype=np.uint8), "unlabeled")
    with pytest.raises(DataError):
        Sample("a", image, None, "labeled")
    with pytest.raises(DataError):
        Sample("a", image, None, "unlabeled").need("pseudo_label")


def test_hidden_labels_record_reads() -> None:
    hidden = HiddenLabels({"x": np.ones((2, 2), dtype=np.uint8)})
    label = hidden.reveal("x", "evaluation")
    label[0, 0] = 7
    assert hidden.reveal("x", "export")[0, 0] == 1
    assert hidden.reads == [("x", "evaluation"), ("x", "export")]
    assert hidden.purposes == {"evaluation", "export"}
    with pytest.raises(DataError):
        hidden.reveal("y", "evaluation")


def test_corpus_round_trip(tmp_path) -> None:
    original = generate(CorpusSpec(**SMALL))
    manifest = write_corpus(original, tmp_path / "data")
    assert manifest.name == "manifest.tsv"
    assert len(manifest.read_text().splitlines()) == 7
    assert len((tmp_path / "data" / "test.tsv").read_text().splitlines()) == 2
    assert original.hidden.purposes == {"export"}

    restored = read_corpus(tmp_path / "data")
    assert restored.spec == original.spec
    assert [(s.id, s.split) for s in restored] == [(s.id, s.split) for s in original]
    for a, b in zip(original, restored):
        np.testing.assert_array_equal(a.image, b.image)
        assert (a.label is None) == (b.label is None)
        if a.label is not None:
            np.testing.assert_array_equal(a.label, b.label)
    assert restored.hidden.ids == original.hidden.ids
    assert restored.hidden.reads == []


def test_read_corpus_errors(tmp_path) -> None:
    with pytest.raises(DataError):
        read_corpus(tmp_path / "missing")
    root = tmp_path / "data"
    write_corpus(generate(CorpusSpec(**SMALL)), root)
    manifest = root / "manifest.tsv"
    manifest.write_text(manifest.read_text().replace("\tlabeled\n", "\tunknown\n", 1))
    with pytest.raises(FormatError):
        read_corpus(root)
    manifest.write_text("00000\timages/00000.ppm\n")
    with pytest.raises(FormatError):
        read_corpus(root)


def test_global_error_swaps_pairs(rng: np.random.Generator) -> None:
    label = np.array([[0, 3, 4], [5, 6, 7]], dtype=np.uint8)
    pairs = [(3, 4), (5, 6)]
    swapped = inject_global_error(label, pairs, 1.0, rng)
    np.testing.assert_array_equal(swapped, [[0, 4, 3], [6, 5, 7]])
    np.testing.assert_array_equal(inject_global_error(label, pairs, 0.0, rng), label)
    with pytest.raises(ConfigError):
        inject_global_error(label, [(3, 3)], 0.5, rng)
    with pytest.raises(ConfigError):
        inject_global_error(label, pairs, 1.5, rng)


def test_global_error_draws_once_per_pair() -> None:
    a, b = np.random.default_rng(7), np.random.default_rng(7)
    label = np.zeros((2, 2), dtype=np.uint8)
    inject_global_error(label, [(3, 4), (5, 6)], 0.1, a)
    inject_global_error(label, [(3, 4), (5, 6)], 0.9, b)
    assert a.random() == b.random()


def test_disc_footprint() -> None:
    np.testing.assert_array_equal(
        disc_footprint(1.0), [[False, True, False], [True, True, True], [False, True, False]]
    )
    assert disc_footprint(0.0).tolist() == [[True]]


def test_local_error_relabels_discs_inside_parts(rng: np.random.Generator) -> None:
    label = np.zeros((20, 20), dtype=np.uint8)
    label[2:18, 2:18] = 3
    noisy = inject_local_error(label, 2, 2.0, {3: 1}, rng)
    changed = noisy != label
    assert changed.any()
    assert set(np.unique(noisy[changed])) == {1}
    assert (label[changed] == 3).all()
    np.testing.assert_array_equal(inject_local_error(label, 0, 2.0, {3: 1}, rng), label)


def test_local_error_needs_room_and_mapping(rng: np.random.Generator) -> None:
    label = np.zeros((6, 6), dtype=np.uint8)
    label[2:4, 2:4] = 3
    np.testing.assert_array_equal(inject_local_error(label, 3, 2.0, {3: 1}, rng), label)
    with pytest.raises(ConfigError):
        inject_local_error(label, 1, 1.0, {}, rng)


def test_corrupt_is_seeded(corpus) -> None:
    table = get_category_table(8)
    label = corpus.labeled[0].label
    config = NoiseConfig(p_swap=1.0, k_spots=2, radius=1.5)
    a = corrupt(label, table, config, np.random.default_rng(3))
    b = corrupt(label, table, config, np.random.default_rng(3))
    np.testing.assert_array_equal(a, b)
    assert a.dtype == np.uint8
    assert a.max() < 8


def test_flip_sample_is_an_involution(corpus) -> None:
    lookup = get_category_table(8).flip_lookup()
    sample = corpus.labeled[0]
    image, label = flip_sample(sample.image, sample.label, lookup)
    np.testing.assert_array_equal(image, sample.image[:, :, ::-1])
    np.testing.assert_array_equal(label, lookup[sample.label[:, ::-1]])
    back_image, back_label = flip_sample(image, label, lookup)
    np.testing.assert_array_equal(back_image, sample.image)
    np.testing.assert_array_equal(back_label, sample.label)


def test_scale_crop(rng: np.random.Generator) -> None:
    image = rng.uniform(size=(3, 16, 16))
    label = np.ones((16, 16), dtype=np.uint8)
    same_image, same_label = scale_crop(image, label, 1.0, rng)
    np.testing.assert_allclose(same_image, image, atol=1e-12)
    np.testing.assert_array_equal(same_label, label)

    small_image, small_label = scale_crop(image, label, 0.5, rng)
    assert small_image.shape == image.shape
    assert small_label.sum() == 64

    big_image, big_label = scale_crop(image, label, 1.5, rng)
    assert big_image.shape == image.shape
    assert (big_label == 1).all()
    with pytest.raises(ConfigError):
        scale_crop(image, label, 0.0, rng)


def test_augment_keeps_shapes(corpus) -> None:
    lookup = get_category_table(8).flip_lookup()
    sample = corpus.labeled[1]
    rng = np.random.default_rng(0)
    for _ in range(4):
        image, label = augment(sample.image, sample.label, AugmentConfig(), lookup, rng)
        assert image.shape == sample.image.shape
        assert label.shape == sample.label.shape
        assert image.min() >= 0 and image.max() <= 1
    off = AugmentConfig(flip=False, scale=False)
    assert not off.enabled
    image, label = augment(sample.image, sample.label, off, lookup, rng)
    assert image is sample.image and label is sample.label
