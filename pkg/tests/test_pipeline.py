import numpy as np
import pytest

from grnparse.data import generate
from grnparse.errors import ConfigError, DataError, StageError
from grnparse.nets import RectNetConfig, init_rectnet
from grnparse.pipeline import (
    PipelineConfig,
    pseudo_label,
    rectify_unlabeled,
    run_pipeline,
    stage,
    stage_rng,
    write_diagnostics_tsv,
)
from grnparse.recipes import pipeline_config, tiny_corpus, tiny_pipeline


@pytest.fixture(scope="module")
def corpus():
    return generate(tiny_corpus(seed=1))


@pytest.fixture(scope="module")
def finished(corpus, tmp_path_factory):
    run_dir = tmp_path_factory.mktemp("run")
    return run_pipeline(tiny_pipeline(seed=2), corpus, run_dir), run_dir


def test_outputs(finished) -> None:
    run, run_dir = finished
    for name in ("s_prime.grn", "r_prime.grn", "s_double_prime.grn", "metrics.tsv"):
        assert (run_dir / name).is_file()
    assert len(list((run_dir / "pseudo").glob("*.pgm"))) == 8
    assert len(list((run_dir / "rectified").glob("*.pgm"))) == 4
    assert "stage baseline: done" in (run_dir / "run.log").read_text()
    assert set(run.segmenters) == {"baseline", "rectified-retrain"}
    assert set(run.rectifiers) == {"train-rect"}
    assert run.s_prime is run.segmenters["baseline"]


def test_retrain_uses_labeled_and_rectified(finished, corpus) -> None:
    run, _ = finished
    assert run.retrain_sizes == {"rectified-retrain": 8}
    assert set(run.rectified_labels) == {s.id for s in corpus.unlabeled}
    assert set(run.pseudo_labels) == {s.id for s in corpus.labeled + corpus.unlabeled}


def test_metrics_rows(finished) -> None:
    run, run_dir = finished
    assert set(run.metrics) == {"baseline", "rectified-retrain"}
    assert set(run.label_quality) == {"pseudo-labels", "rectified-labels"}
    stages = {row[0] for row in run.rows}
    assert {"baseline", "rectified-retrain", "pseudo-labels"} <= stages
    increase = [row for row in run.rows if row[1] == "iou_increase"]
    assert increase == [
        (
            "rectified-retrain",
            "iou_increase",
            "all",
            pytest.approx(run.miou("rectified-retrain") - run.miou("baseline")),
        )
    ]
    lines = (run_dir / "metrics.tsv").read_text().splitlines()
    assert lines[0] == "stage\tmetric\tcategory\tvalue"
    assert len(lines) == len(run.rows) + 1
    assert all(0 <= m.mean_iou <= 1 for m in run.metrics.values())


def test_label_quality_rows(finished) -> None:
    run, _ = finished
    for name in ("pseudo-labels", "rectified-labels"):
        rows = {(row[1], row[2]): row[3] for row in run.rows if row[0] == name}
        assert rows[("mean_iou", "all")] == pytest.approx(
            run.label_quality[name].mean_iou, abs=1e-6
        )
        assert ("iou_increase", "all") not in rows


def test_hidden_labels_only_read_for_evaluation(finished, corpus) -> None:
    assert corpus.hidden.purposes <= {"evaluation"}


def test_deterministic(corpus, finished, tmp_path) -> None:
    _, first = finished
    run_pipeline(tiny_pipeline(seed=2), corpus, tmp_path)
    for name in ("s_prime.grn", "r_prime.grn", "s_double_prime.grn", "metrics.tsv"):
        assert (tmp_path / name).read_bytes() == (first / name).read_bytes()


def test_threads_do_not_change_results(corpus, finished) -> None:
    run, _ = finished
    threaded = run_pipeline(tiny_pipeline(seed=2, threads=3), corpus)
    assert threaded.rows == run.rows


def test_resume_skips_training(corpus, finished) -> None:
    run, run_dir = finished
    resumed = run_pipeline(tiny_pipeline(seed=2, resume=True), corpus, run_dir)
    assert resumed.logs == {}
    assert resumed.rows == run.rows


def test_ablations_and_upper_bound(tmp_path) -> None:
    corpus = generate(tiny_corpus(seed=4))
    config = tiny_pipeline(
        seed=3, ablate_raw=True, ablate_modules=True, with_upper_bound=True
    )
    run = run_pipeline(config, corpus, tmp_path)
    retrains = {
        "raw-retrain",
        "rectified-retrain",
        "rectified-retrain-global",
        "rectified-retrain-local",
        "upper-bound",
    }
    assert set(run.metrics) == retrains | {"baseline"}
    assert set(run.retrain_sizes.values()) == {8}
    assert run.rectifiers["train-rect-global"].lcm is None
    assert run.rectifiers["train-rect-local"].gsm is None
    assert (tmp_path / "r_prime_global.grn").is_file()
    assert (tmp_path / "s_double_prime_raw.grn").is_file()
    gaps = {row[0] for row in run.rows if row[1] == "iou_gap"}
    assert gaps == (retrains - {"upper-bound"}) | {"baseline"}
    assert corpus.hidden.purposes == {"evaluation", "upper_bound"}


def test_rounds_keep_intermediate_checkpoints(tmp_path) -> None:
    corpus = generate(tiny_corpus(seed=5))
    run = run_pipeline(tiny_pipeline(rounds=2, warm_start=True), corpus, tmp_path)
    assert (tmp_path / "r_prime.round1.grn").is_file()
    assert (tmp_path / "s_double_prime.round1.grn").is_file()
    assert (tmp_path / "s_double_prime.grn").is_file()
    assert "rectified-retrain" in run.metrics


def test_category_mismatch(corpus) -> None:
    with pytest.raises(StageError) as info:
        run_pipeline(pipeline_config(c=4, size=16), corpus)
    assert info.value.stage == "baseline"


def test_config_checks_network_agreement() -> None:
    base = tiny_pipeline()
    with pytest.raises(ValueError):
        PipelineConfig(segnet=base.segnet, rectnet=base.rectnet.model_copy(update={"c": 4}))


def test_stage_wraps_errors() -> None:
    with pytest.raises(StageError, match="stage 'rectify' failed: boom"):
        with stage("rectify"):
            raise ValueError("boom")


def test_stage_passes_config_errors_through() -> None:
    with pytest.raises(ConfigError, match="^bad lift$"):
        with stage("train-rect"):
            raise ConfigError("bad lift")


def test_stage_rng_depends_on_name() -> None:
    assert stage_rng(0, "baseline").random() == stage_rng(0, "baseline").random()
    assert stage_rng(0, "baseline").random() != stage_rng(0, "train-rect").random()
    assert stage_rng(0, "baseline").random() != stage_rng(1, "baseline").random()


def test_rectify_hard_pseudo_labels(corpus, tmp_path) -> None:
    config = RectNetConfig(c=8, size=16, c_prime=4, d=6, n_high=2)
    rnet = init_rectnet(config)
    samples = [
        s.with_labels(pseudo_label=np.zeros((16, 16), dtype=np.uint8))
        for s in corpus.unlabeled
    ]
    diagnostics = {}
    rectified = rectify_unlabeled(samples, rnet, threads=2, diagnostics=diagnostics)
    assert [s.id for s in rectified] == [s.id for s in samples]
    assert all(s.rectified_label.shape == (16, 16) for s in rectified)
    path = write_diagnostics_tsv(tmp_path / "diagnostics.tsv", diagnostics)
    lines = path.read_text().splitlines()
    assert lines[0] == "id\tmodule\tweights"
    assert len(lines) == 1 + 2 * len(samples)
    assert len(lines[1].split("\t")[2].split(",")) == 8
    with pytest.raises(DataError):
        rectify_unlabeled(corpus.unlabeled, rnet)


def test_pseudo_label_keeps_order(corpus, finished) -> None:
    run, _ = finished
    labeled = pseudo_label(corpus.labeled, run.s_prime, threads=2)
    assert [s.id for s in labeled] == [s.id for s in corpus.labeled]
    for s in labeled:
        np.testing.assert_allclose(s.pseudo_probs.sum(axis=0), 1.0, atol=1e-12)
        np.testing.assert_array_equal(s.pseudo_label, run.pseudo_labels[s.id])
