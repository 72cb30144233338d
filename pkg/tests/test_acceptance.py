"""Desk-scale end-to-end runs; deselected by default, run with ``-m slow``."""

import numpy as np
import pytest

from grnparse import recipes
from grnparse.autodiff import SgdConfig
from grnparse.data import CorpusSpec, generate, inject_global_error, inject_local_error
from grnparse.nets import RectNetConfig, init_rectnet, one_hot, rectify_mask, train_rectifier
from grnparse.pipeline import run_pipeline

pytestmark = pytest.mark.slow


@pytest.fixture(scope="module")
def corpus():
    return generate(CorpusSpec(n_labeled=256, n_unlabeled=0, n_test=32, seed=0))


def _error_rate(masks, labels) -> float:
    return float(np.mean([(m != y).mean() for m, y in zip(masks, labels)]))


@pytest.mark.parametrize("error", ["global", "local"])
def test_rectifier_halves_injected_errors(corpus, error: str) -> None:
    table = corpus.table
    rng = np.random.default_rng(0)

    def noisy(label):
        if error == "global":
            return inject_global_error(label, table.pairs, 0.5, rng)
        return inject_local_error(label, 3, 3.0, table.confusion_map(), rng)

    def triples(samples):
        return [(s.image, one_hot(noisy(s.label), table.c), s.label) for s in samples]

    train, test = triples(corpus.labeled), triples(corpus.test)
    rnet = init_rectnet(RectNetConfig(), rng=0)
    train_rectifier(train, rnet, SgdConfig(), epochs=20)

    labels = [y for _, _, y in test]
    before = _error_rate([mask.argmax(axis=0) for _, mask, _ in test], labels)
    after = _error_rate([rectify_mask(x, mask, rnet)[0] for x, mask, _ in test], labels)
    assert after < before
    assert after <= 0.5 * before


def test_rectified_retrain_beats_raw_retrain(tmp_path) -> None:
    run = run_pipeline(
        recipes.desk_pipeline(), generate(recipes.eighth_labeled()), tmp_path
    )
    assert run.miou("rectified-retrain") >= run.miou("raw-retrain") + 0.01
    assert run.miou("raw-retrain") >= run.miou("baseline") - 0.005


def test_single_sample_overfits() -> None:
    sample = generate(recipes.tiny_corpus(seed=0)).labeled[0]
    config = RectNetConfig(size=16, c_prime=4, d=6, n_high=2)
    rnet = init_rectnet(config, rng=0)
    guess = np.full((config.c, 16, 16), 1 / config.c)
    log = train_rectifier(
        [(sample.image, guess, sample.label)], rnet, SgdConfig(), epochs=300, batch_size=1
    )
    assert log.final <= 0.5 * log.initial


def test_desk_pipeline_is_deterministic(tmp_path) -> None:
    corpus = generate(recipes.eighth_labeled(pool=64, n_test=16))
    config = recipes.desk_pipeline(epochs=4)
    run_pipeline(config, corpus, tmp_path / "a")
    run_pipeline(config, corpus, tmp_path / "b")
    for name in ("metrics.tsv", "s_prime.grn", "r_prime.grn", "s_double_prime.grn"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
