"""Self-learning pipeline.

Stages, in order:

1. ``baseline``: train S' on the labeled split.
2. ``pseudo-label``: predict class distributions for labeled and unlabeled images.
3. ``train-rect``: train R' on (image, S' prediction, ground truth) of labeled samples.
4. ``rectify``: rectify the pseudo-labels of unlabeled samples with R'.
5. ``rectified-retrain``: retrain S'' on labeled ground truth plus rectified labels.
6. evaluation of every segmenter on the test split.

Optional stages retrain on the raw pseudo-labels (``raw-retrain``), on labels
rectified by a global-only or local-only R-Net (``rectified-retrain-global``,
``rectified-retrain-local``) and on full ground truth (``upper-bound``).
"""

from __future__ import annotations

import pathlib
import zlib
from collections.abc import Callable, Iterator, Sequence
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import TypeVar

import numpy as np
import numpy.typing as nty
from pydantic import BaseModel, Field, model_validator

from grnparse.autodiff.optim import SgdConfig
from grnparse.config import logger
from grnparse.data.augment import AugmentConfig
from grnparse.data.corpus import Corpus, Sample
from grnparse.data.netpbm import write_pgm
from grnparse.errors import ConfigError, DataError, StageError
from grnparse.metrics import MetricRow, MetricsReport, Protocol, confusion_of, report
from grnparse.metrics import write_metrics_tsv
from grnparse.nets.rectnet import (
    RectNetConfig,
    RectNetParams,
    RectifyOutput,
    init_rectnet,
    one_hot,
    rectify_mask,
)
from grnparse.nets.segnet import SegNetConfig, SegNetParams, init_segnet, predict_mask
from grnparse.nets.train import TrainingLog, train_rectifier, train_segmenter
from grnparse.tech import PRESETS

__all__ = [
    "PipelineConfig",
    "PipelineRun",
    "evaluate_segmenter",
    "pseudo_label",
    "rectify_unlabeled",
    "run_pipeline",
    "stage",
    "stage_rng",
    "write_diagnostics_tsv",
]

T = TypeVar("T")
R = TypeVar("R")
U8 = nty.NDArray[np.uint8]
LabeledImage = tuple[nty.NDArray[np.float64], U8]

RETRAIN_STAGES = (
    "raw-retrain",
    "rectified-retrain",
    "rectified-retrain-global",
    "rectified-retrain-local",
)


class PipelineConfig(BaseModel):
    """Settings of one pipeline run.

    Parameters:
        seed: root of every stage seed.
        seg_epochs: epochs of every S-Net training stage.
        rect_epochs: epochs of every R-Net training stage.
        batch_size: samples per optimizer step.
        sgd: optimizer settings shared by all stages.
        segnet: S-Net shape.
        rectnet: R-Net shape and module switches.
        augment: S-Net augmentation.
        protocol: metric protocol of the report.
        ablate_raw: also retrain on unrectified pseudo-labels.
        ablate_modules: also train global-only and local-only rectifiers.
        with_upper_bound: also train on full ground truth of all training data.
        rounds: rectify-retrain cycles; each round labels with the last S''.
        warm_start: S'' starts from the weights of S'.
        resume: load stage checkpoints that already exist instead of training.
        threads: workers for pseudo-labelling, rectification and evaluation.
    """

    seed: int = 0
    seg_epochs: int = Field(default=PRESETS.desk_epochs, ge=0)
    rect_epochs: int = Field(default=PRESETS.desk_epochs, ge=0)
    batch_size: int = Field(default=PRESETS.desk_batch_size, ge=1)
    sgd: SgdConfig = Field(default_factory=SgdConfig)
    segnet: SegNetConfig = Field(default_factory=SegNetConfig)
    rectnet: RectNetConfig = Field(default_factory=RectNetConfig)
    augment: AugmentConfig = Field(default_factory=AugmentConfig)
    protocol: Protocol = "lip"
    ablate_raw: bool = False
    ablate_modules: bool = False
    with_upper_bound: bool = False
    rounds: int = Field(default=1, ge=1)
    warm_start: bool = False
    resume: bool = False
    threads: int = Field(default=1, ge=1)

    @model_validator(mode="after")
    def _check(self) -> PipelineConfig:
        if self.segnet.c != self.rectnet.c:
            raise ValueError(f"S-Net c={self.segnet.c} differs from R-Net c={self.rectnet.c}")
        if self.segnet.size != self.rectnet.size:
            raise ValueError(
                f"S-Net size {self.segnet.size} differs from R-Net size {self.rectnet.size}"
            )
        return self


@dataclass
class PipelineRun:
    """Artifacts and metrics of a finished run.

    Attributes:
        config: the settings used.
        segmenters: S-Nets by stage name (``baseline`` is S', ``rectified-retrain`` S'').
        rectifiers: R-Nets by stage name.
        pseudo_labels: argmax pseudo-labels of every training sample, by id.
        rectified_labels: rectified labels of unlabeled samples, by id.
        retrain_sizes: size of the training set of every retrain stage.
        metrics: test-split report of every segmenter.
        label_quality: reports of pseudo and rectified labels against hidden truth.
        logs: training logs by stage.
        rows: ``metrics.tsv`` rows.
    """

    config: PipelineConfig
    segmenters: dict[str, SegNetParams] = field(default_factory=dict)
    rectifiers: dict[str, RectNetParams] = field(default_factory=dict)
    pseudo_labels: dict[str, U8] = field(default_factory=dict)
    rectified_labels: dict[str, U8] = field(default_factory=dict)
    retrain_sizes: dict[str, int] = field(default_factory=dict)
    metrics: dict[str, MetricsReport] = field(default_factory=dict)
    label_quality: dict[str, MetricsReport] = field(default_factory=dict)
    logs: dict[str, TrainingLog] = field(default_factory=dict)
    rows: list[MetricRow] = field(default_factory=list)

    @property
    def s_prime(self) -> SegNetParams:
        return self.segmenters["baseline"]

    @property
    def s_double_prime(self) -> SegNetParams:
        return self.segmenters["rectified-retrain"]

    @property
    def r_prime(self) -> RectNetParams:
        return self.rectifiers["train-rect"]

    def miou(self, stage: str) -> float:
        return self.metrics[stage].mean_iou


def stage_rng(seed: int, name: str) -> np.random.Generator:
    """Generator of one stage, independent of the order stages run in."""
    return np.random.default_rng([seed, zlib.crc32(name.encode())])


@contextmanager
def stage(name: str) -> Iterator[None]:
    """Logs stage boundaries and tags failures with the stage name.

    Configuration errors pass through untagged.
    """
    logger.info(f"stage {name}: start")
    try:
        yield
    except (StageError, ConfigError):
        raise
    except Exception as e:
        raise StageError(name, str(e)) from e
    logger.info(f"stage {name}: done")


def _map(fn: Callable[[T], R], items: Sequence[T], threads: int) -> list[R]:
    if threads == 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def pseudo_label(
    samples: Sequence[Sample], snet: SegNetParams, threads: int = 1
) -> list[Sample]:
    """Attaches S-Net class distributions and argmax labels, in input order."""

    def _one(s: Sample) -> Sample:
        probs, labels = predict_mask(s.image, snet)
        return s.with_labels(pseudo_probs=probs, pseudo_label=labels)

    return _map(_one, samples, threads)


def rectify_unlabeled(
    samples: Sequence[Sample],
    rnet: RectNetParams,
    threads: int = 1,
    diagnostics: dict[str, RectifyOutput] | None = None,
) -> list[Sample]:
    """Rectified label of every sample from its image and pseudo-label.

    Samples carrying only a hard pseudo-label are fed as one-hot masks.

    Args:
        samples: samples with ``pseudo_probs`` or ``pseudo_label``.
        rnet: trained rectifier, read only.
        threads: worker cap; output keeps input order.
        diagnostics: filled with the rectifier output of every sample by id.
    """
    for s in samples:
        if s.pseudo_probs is None and s.pseudo_label is None:
            raise DataError(f"sample {s.id!r} has no pseudo-label to rectify")

    def _one(s: Sample) -> tuple[Sample, RectifyOutput]:
        mask = s.pseudo_probs
        if mask is None:
            mask = one_hot(s.pseudo_label, rnet.config.c)
        labels, out = rectify_mask(s.image, mask, rnet)
        return s.with_labels(rectified_label=labels), out

    results = _map(_one, samples, threads)
    if diagnostics is not None:
        diagnostics.update({s.id: out for s, out in results})
    return [s for s, _ in results]


def evaluate_segmenter(
    snet: SegNetParams,
    samples: Sequence[Sample],
    protocol: Protocol = "lip",
    threads: int = 1,
) -> MetricsReport:
    """Report of ``snet`` predictions against the labels of ``samples``."""
    preds = _map(lambda s: predict_mask(s.image, snet)[1], samples, threads)
    cm = confusion_of(preds, [s.label for s in samples], snet.config.c)
    return report(cm, protocol)


def write_diagnostics_tsv(
    path: str | pathlib.Path, diagnostics: dict[str, RectifyOutput]
) -> pathlib.Path:
    """``id<TAB>module<TAB>weights`` with θ_l and θ_g of every sample."""
    lines = ["id\tmodule\tweights\n"]
    for sample_id, out in diagnostics.items():
        for module, theta in (("lcm", out.theta_l), ("gsm", out.theta_g)):
            if theta is not None:
                values = ",".join(f"{v:.6f}" for v in theta.data)
                lines.append(f"{sample_id}\t{module}\t{values}\n")
    path = pathlib.Path(path)
    path.write_text("".join(lines))
    return path


class _Runner:
    def __init__(
        self, config: PipelineConfig, corpus: Corpus, run_dir: pathlib.Path | None
    ) -> None:
        self.config = config
        self.corpus = corpus
        self.run_dir = run_dir
        self.run = PipelineRun(config)
        self.flip_lookup = corpus.table.flip_lookup()

    def _checkpoint(self, name: str) -> pathlib.Path | None:
        return None if self.run_dir is None else self.run_dir / name

    def _resume_from(self, name: str) -> pathlib.Path | None:
        path = self._checkpoint(name)
        if self.config.resume and path is not None and path.exists():
            return path
        return None

    def train_segmenter(
        self,
        name: str,
        checkpoint: str,
        examples: Sequence[LabeledImage],
        init_from: SegNetParams | None = None,
    ) -> SegNetParams:
        config = self.config
        with stage(name):
            snet = init_segnet(config.segnet, stage_rng(config.seed, "segnet-init"))
            if init_from is not None:
                snet.load_state_dict(init_from.state_dict())
            resume = self._resume_from(checkpoint)
            if resume is not None:
                logger.info(f"stage {name}: resuming from {resume}")
                snet.load(resume)
            else:
                self.run.logs[name] = train_segmenter(
                    examples,
                    snet,
                    config.sgd,
                    config.seg_epochs,
                    config.augment,
                    self.flip_lookup,
                    config.batch_size,
                    stage_rng(config.seed, name),
                    stage=name,
                )
                path = self._checkpoint(checkpoint)
                if path is not None:
                    snet.save(path)
        self.run.segmenters[name] = snet
        return snet

    def train_rectifier(
        self,
        name: str,
        checkpoint: str,
        rectnet: RectNetConfig,
        labeled: Sequence[Sample],
    ) -> RectNetParams:
        config = self.config
        with stage(name):
            rnet = init_rectnet(rectnet, stage_rng(config.seed, "rectnet-init"))
            resume = self._resume_from(checkpoint)
            if resume is not None:
                logger.info(f"stage {name}: resuming from {resume}")
                rnet.load(resume)
            else:
                triples = [
                    (s.image, s.need("pseudo_probs"), s.need("label")) for s in labeled
                ]
                self.run.logs[name] = train_rectifier(
                    triples,
                    rnet,
                    config.sgd,
                    config.rect_epochs,
                    config.batch_size,
                    stage_rng(config.seed, name),
                    stage=name,
                )
                path = self._checkpoint(checkpoint)
                if path is not None:
                    rnet.save(path)
        self.run.rectifiers[name] = rnet
        return rnet

    def write_labels(self, folder: str, labels: dict[str, U8]) -> None:
        if self.run_dir is None:
            return
        root = self.run_dir / folder
        root.mkdir(parents=True, exist_ok=True)
        for sample_id, y in labels.items():
            write_pgm(root / f"{sample_id}.pgm", y)

    def label_quality(self, name: str, labels: dict[str, U8]) -> None:
        """Scores training labels against the hidden truth of unlabeled samples."""
        hidden = self.corpus.hidden
        ids = [i for i in labels if i in hidden]
        if not ids:
            return
        truth = [hidden.reveal(i, "evaluation") for i in ids]
        cm = confusion_of([labels[i] for i in ids], truth, self.corpus.c)
        self.run.label_quality[name] = report(cm, self.config.protocol)

    def retrain(
        self,
        name: str,
        checkpoint: str,
        labeled: Sequence[Sample],
        extra: Sequence[LabeledImage],
        init_from: SegNetParams | None,
    ) -> SegNetParams:
        examples = [(s.image, s.need("label")) for s in labeled] + list(extra)
        self.run.retrain_sizes[name] = len(examples)
        return self.train_segmenter(name, checkpoint, examples, init_from)

    def rectify_and_retrain(
        self,
        suffix: str,
        rectnet: RectNetConfig,
        labeled: Sequence[Sample],
        unlabeled: Sequence[Sample],
        init_from: SegNetParams | None,
        tag: str = "",
    ) -> None:
        """Trains a rectifier, rectifies ``unlabeled`` and retrains S-Net.

        ``suffix`` names the variant (empty for the full rectifier, ``-global``
        or ``-local`` for the ablations); ``tag`` marks intermediate rounds.
        """
        ckpt = suffix.replace("-", "_")
        rnet = self.train_rectifier(
            f"train-rect{suffix}", f"r_prime{ckpt}{tag}.grn", rectnet, labeled
        )
        with stage(f"rectify{suffix}"):
            rectified = rectify_unlabeled(unlabeled, rnet, self.config.threads)
        labels = {s.id: s.need("rectified_label") for s in rectified}
        if not suffix:
            self.run.rectified_labels = labels
            self.write_labels("rectified", labels)
            self.label_quality("rectified-labels", labels)
        extra = [(s.image, labels[s.id]) for s in rectified]
        self.retrain(
            f"rectified-retrain{suffix}",
            f"s_double_prime{ckpt}{tag}.grn",
            labeled,
            extra,
            init_from,
        )

    def execute(self) -> PipelineRun:
        config, corpus = self.config, self.corpus
        labeled, unlabeled = corpus.labeled, corpus.unlabeled
        overlap = {s.id for s in labeled} & {s.id for s in unlabeled}
        if overlap:
            raise StageError("baseline", f"labeled and unlabeled overlap: {sorted(overlap)}")
        s_prime = self.train_segmenter(
            "baseline", "s_prime.grn", [(s.image, s.need("label")) for s in labeled]
        )
        init_from = s_prime if config.warm_start else None
        current = s_prime
        for r in range(1, config.rounds + 1):
            final = r == config.rounds
            tag = "" if final else f".round{r}"
            with stage("pseudo-label"):
                labeled_p = pseudo_label(labeled, current, config.threads)
                unlabeled_p = pseudo_label(unlabeled, current, config.threads)
            pseudo = {s.id: s.need("pseudo_label") for s in labeled_p + unlabeled_p}
            if final:
                self.run.pseudo_labels = pseudo
                self.write_labels("pseudo", pseudo)
                hidden = {s.id: pseudo[s.id] for s in unlabeled}
                self.label_quality("pseudo-labels", hidden)
            self.rectify_and_retrain(
                "", config.rectnet, labeled_p, unlabeled_p, init_from, tag
            )
            current = self.run.segmenters["rectified-retrain"]
        if config.ablate_raw:
            raw = [(s.image, pseudo[s.id]) for s in unlabeled]
            self.retrain(
                "raw-retrain", "s_double_prime_raw.grn", labeled, raw, init_from
            )
        if config.ablate_modules:
            for suffix, switches in (
                ("-global", {"use_lcm": False}),
                ("-local", {"use_gsm": False}),
            ):
                self.rectify_and_retrain(
                    suffix,
                    config.rectnet.model_copy(update=switches),
                    labeled_p,
                    unlabeled_p,
                    init_from,
                )
        if config.with_upper_bound:
            reveal = corpus.hidden.reveal
            truth = [(s.image, reveal(s.id, "upper_bound")) for s in unlabeled]
            self.retrain("upper-bound", "s_upper.grn", labeled, truth, None)
        self.evaluate()
        return self.run

    def evaluate(self) -> None:
        run, config = self.run, self.config
        test = self.corpus.test
        if not test:
            logger.warning("test split is empty, no metrics reported")
            return
        names = self.corpus.table.names
        for name, snet in run.segmenters.items():
            with stage(f"eval {name}"):
                run.metrics[name] = evaluate_segmenter(
                    snet, test, config.protocol, config.threads
                )
            run.rows += run.metrics[name].rows(name, names)
            logger.info(f"{name}: mIoU {run.metrics[name].mean_iou:.4f}")
        for name, quality in run.label_quality.items():
            run.rows += quality.rows(name, names)
        baseline = run.miou("baseline")
        for name in RETRAIN_STAGES:
            if name in run.metrics:
                gain = run.miou(name) - baseline
                run.rows.append((name, "iou_increase", "all", gain))
        if "upper-bound" in run.metrics:
            upper = run.miou("upper-bound")
            for name in ("baseline", *RETRAIN_STAGES):
                if name in run.metrics:
                    run.rows.append((name, "iou_gap", "all", upper - run.miou(name)))
        if self.run_dir is not None:
            write_metrics_tsv(self.run_dir / "metrics.tsv", run.rows)


def run_pipeline(
    config: PipelineConfig,
    corpus: Corpus,
    run_dir: str | pathlib.Path | None = None,
) -> PipelineRun:
    """Runs every stage on ``corpus``.

    Args:
        config: pipeline settings.
        corpus: labeled, unlabeled and test samples; unlabeled ground truth
            is only read for evaluation and the upper-bound stage.
        run_dir: where checkpoints, labels, ``metrics.tsv`` and ``run.log`` go;
            nothing is written when omitted.
    """
    if corpus.c != config.segnet.c:
        raise StageError("baseline", f"corpus has c={corpus.c}, S-Net c={config.segnet.c}")
    root = None if run_dir is None else pathlib.Path(run_dir)
    sink = None
    if root is not None:
        root.mkdir(parents=True, exist_ok=True)
        sink = logger.add(
            root / "run.log",
            level="INFO",
            format="{time:YYYY-MM-DD HH:mm:ss.SSS} | {level: <8} | {message}",
        )
    try:
        return _Runner(config, corpus, root).execute()
    finally:
        if sink is not None:
            logger.remove(sink)
