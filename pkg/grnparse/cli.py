"""Command-line interface: ``grn <subcommand> [options]``.

Every subcommand resolves one flat :class:`RunConfig` from model defaults, an
optional ``--config`` file and the flags given, and echoes it into the output
directory as ``config.txt``. Exit codes: 0 on success, 1 on usage or
configuration errors, 2 on data, contract, numeric and stage errors.
"""

from __future__ import annotations

import pathlib
import sys
from collections.abc import Callable, Iterable, Mapping, Sequence
from typing import Any, TypeVar

import click
import numpy as np
import numpy.typing as nty
from pydantic import BaseModel, ConfigDict, Field, ValidationError
from scipy.special import softmax

from grnparse.autodiff import ops
from grnparse.autodiff.gradcheck import GradCheckReport, grad_check
from grnparse.autodiff.optim import SgdConfig
from grnparse.autodiff.tensor import Tensor
from grnparse.config import PATH, logger, parse_text, settings, to_text
from grnparse.data.augment import AugmentConfig
from grnparse.data.corpus import (
    Corpus,
    CorpusSpec,
    Sample,
    generate,
    read_corpus,
    write_corpus,
)
from grnparse.data.netpbm import encode_ppm, read_pgm, write_pgm
from grnparse.data.noise import NoiseConfig, corrupt
from grnparse.errors import CheckError, ConfigError, DataError, GrnError
from grnparse.metrics import Protocol, write_metrics_tsv
from grnparse.nets.rectnet import (
    RectNetConfig,
    RectNetParams,
    RectifyOutput,
    assemble_input,
    init_rectnet,
    one_hot,
    rectify_forward,
)
from grnparse.nets.segnet import SegNetConfig, SegNetParams, init_segnet, seg_forward
from grnparse.nets.train import train_rectifier, train_segmenter
from grnparse.parts import get_category_table
from grnparse.pipeline import (
    PipelineConfig,
    evaluate_segmenter,
    pseudo_label,
    rectify_unlabeled,
    run_pipeline,
    stage,
    stage_rng,
    write_diagnostics_tsv,
)
from grnparse.tech import PRESETS

__all__ = ["RunConfig", "cli", "export_masks", "main", "run"]

M = TypeVar("M", bound=BaseModel)
U8 = nty.NDArray[np.uint8]
Palette = Mapping[int, tuple[int, int, int]]


def _build(model: type[M], **values: Any) -> M:
    try:
        return model(**values)
    except ValidationError as e:
        raise ConfigError(f"invalid {model.__name__}: {e}") from e


class RunConfig(BaseModel):
    """Resolved settings of one CLI invocation.

    Parameters:
        subcommand: the subcommand that ran.
        data: dataset directory.
        out: output directory; ``runs/<subcommand>`` when empty.
        segnet: S-Net checkpoint to load.
        rectnet: R-Net checkpoint to load.
        labels: directory of ``<id>.pgm`` label maps.
        init: S-Net checkpoint a retrain starts from.
        seed: root seed; ``GRN_SEED`` when not given.
        c: number of categories.
        size: image side length.
        c_prime: feature channels.
        d: graph node feature size.
        n_high: high-level node count.
        alpha: weight of the global features in the local module.
        lr: base learning rate.
        momentum: SGD momentum.
        weight_decay: L2 coefficient.
        epochs: epochs of every training stage.
        batch_size: samples per optimizer step.
        labeled_fraction: share of training samples that are labeled; 0 uses
            ``n_labeled`` and ``n_unlabeled`` as given.
        n_labeled: labeled samples.
        n_unlabeled: unlabeled samples.
        n_test: test samples.
        p_swap: left/right swap probability of corrupted masks.
        k_spots: local error spots per corrupted mask.
        radius: spot radius.
        with_lcm: local module inside S-Net.
        with_gsm: global module inside S-Net.
        use_lcm: local module inside R-Net.
        use_gsm: global module inside R-Net.
        two_pass_assist: recompute local weights with global features.
        hard_mask: feed one-hot masks to R-Net.
        augment: flip and rescale S-Net training samples.
        corrupt: train R-Net on corrupted ground truth instead of S-Net masks.
        diagnostics: write per-sample module weights when rectifying.
        ablate_raw: also retrain on raw pseudo-labels.
        ablate_modules: also run global-only and local-only rectifiers.
        with_upper_bound: also train on full ground truth.
        rounds: rectify-retrain cycles.
        warm_start: retrains start from the baseline weights.
        resume: reuse checkpoints found in the output directory.
        threads: worker cap.
        protocol: metric protocol.
        grad_entries: entries checked per parameter by grad-check.
    """

    model_config = ConfigDict(extra="forbid")

    subcommand: str = ""
    data: str = ""
    out: str = ""
    segnet: str = ""
    rectnet: str = ""
    labels: str = ""
    init: str = ""
    seed: int = Field(default_factory=lambda: settings.seed)
    c: int = PRESETS.desk_c
    size: int = PRESETS.desk_size
    c_prime: int = PRESETS.desk_c_prime
    d: int = PRESETS.desk_d
    n_high: int = PRESETS.desk_n_high
    alpha: float = PRESETS.alpha
    lr: float = PRESETS.lr
    momentum: float = PRESETS.momentum
    weight_decay: float = PRESETS.weight_decay
    epochs: int = PRESETS.desk_epochs
    batch_size: int = PRESETS.desk_batch_size
    labeled_fraction: float = Field(default=0.0, ge=0, le=1)
    n_labeled: int = 64
    n_unlabeled: int = 448
    n_test: int = 64
    p_swap: float = 0.5
    k_spots: int = 3
    radius: float = 3.0
    with_lcm: bool = False
    with_gsm: bool = False
    use_lcm: bool = True
    use_gsm: bool = True
    two_pass_assist: bool = True
    hard_mask: bool = False
    augment: bool = True
    corrupt: bool = False
    diagnostics: bool = False
    ablate_raw: bool = False
    ablate_modules: bool = False
    with_upper_bound: bool = False
    rounds: int = 1
    warm_start: bool = False
    resume: bool = False
    threads: int = Field(default_factory=lambda: settings.threads, ge=1)
    protocol: Protocol = "lip"
    grad_entries: int = Field(default=6, ge=1)

    def to_text(self) -> str:
        return to_text(self.model_dump())

    @classmethod
    def from_text(cls, text: str) -> RunConfig:
        try:
            return cls.model_validate(parse_text(text))
        except ValidationError as e:
            raise ConfigError(f"invalid run config: {e}") from e

    @property
    def out_dir(self) -> pathlib.Path:
        return pathlib.Path(self.out) if self.out else PATH.runs / self.subcommand

    def corpus_spec(self) -> CorpusSpec:
        n_labeled, n_unlabeled = self.n_labeled, self.n_unlabeled
        if self.labeled_fraction > 0:
            pool = n_labeled + n_unlabeled
            n_labeled = round(self.labeled_fraction * pool)
            n_unlabeled = pool - n_labeled
        return _build(
            CorpusSpec,
            n_labeled=n_labeled,
            n_unlabeled=n_unlabeled,
            n_test=self.n_test,
            size=self.size,
            c=self.c,
            seed=self.seed,
        )

    def noise_config(self) -> NoiseConfig:
        return _build(
            NoiseConfig, p_swap=self.p_swap, k_spots=self.k_spots, radius=self.radius
        )

    def sgd_config(self) -> SgdConfig:
        return _build(
            SgdConfig,
            base_lr=self.lr,
            momentum=self.momentum,
            weight_decay=self.weight_decay,
        )

    def augment_config(self) -> AugmentConfig:
        return _build(AugmentConfig, flip=self.augment, scale=self.augment)

    def segnet_config(self) -> SegNetConfig:
        return _build(
            SegNetConfig,
            c=self.c,
            c_prime=self.c_prime,
            size=self.size,
            with_lcm=self.with_lcm,
            with_gsm=self.with_gsm,
            d=self.d,
            n_high=self.n_high,
            alpha=self.alpha,
        )

    def rectnet_config(self) -> RectNetConfig:
        return _build(
            RectNetConfig,
            c=self.c,
            c_prime=self.c_prime,
            d=self.d,
            n_high=self.n_high,
            alpha=self.alpha,
            size=self.size,
            use_lcm=self.use_lcm,
            use_gsm=self.use_gsm,
            two_pass_assist=self.two_pass_assist,
            hard_mask=self.hard_mask,
        )

    def pipeline_config(self) -> PipelineConfig:
        return _build(
            PipelineConfig,
            seed=self.seed,
            seg_epochs=self.epochs,
            rect_epochs=self.epochs,
            batch_size=self.batch_size,
            sgd=self.sgd_config(),
            segnet=self.segnet_config(),
            rectnet=self.rectnet_config(),
            augment=self.augment_config(),
            protocol=self.protocol,
            ablate_raw=self.ablate_raw,
            ablate_modules=self.ablate_modules,
            with_upper_bound=self.with_upper_bound,
            rounds=self.rounds,
            warm_start=self.warm_start,
            resume=self.resume,
            threads=self.threads,
        )


def colorize(labels: nty.ArrayLike, palette: Palette) -> U8:
    """RGB image [H×W×3] with one palette colour per id."""
    y = np.asarray(labels)
    if y.ndim != 2:
        raise DataError(f"label map must be [H×W], got {y.shape}")
    missing = sorted({int(i) for i in np.unique(y)} - set(palette))
    if missing:
        raise ConfigError(f"palette has no colour for ids {missing}")
    lookup = np.zeros((256, 3), dtype=np.uint8)
    for i, color in palette.items():
        lookup[i] = color
    return lookup[y.astype(np.uint8)]


def export_masks(
    labels: nty.ArrayLike, palette: Palette, path: str | pathlib.Path
) -> pathlib.Path:
    """Writes ``labels`` as a P6 PPM coloured by ``palette``."""
    path = pathlib.Path(path)
    path.write_bytes(encode_ppm(colorize(labels, palette)))
    return path


# options


def _option(*decls: str, **attrs: Any) -> Callable[[Callable[..., Any]], Any]:
    return click.option(*decls, default=None, show_default=False, **attrs)


OPTIONS: dict[str, list[Callable[[Callable[..., Any]], Any]]] = {
    "data": [_option("--data", type=str, help="Dataset directory.")],
    "out": [_option("--out", type=str, help="Output directory.")],
    "segnet": [_option("--segnet", type=str, help="S-Net checkpoint.")],
    "rectnet": [_option("--rectnet", type=str, help="R-Net checkpoint.")],
    "labels": [_option("--labels", type=str, help="Directory of <id>.pgm labels.")],
    "init": [_option("--init", type=str, help="S-Net checkpoint to start from.")],
    "classes": [_option("--c", type=int, help="Number of categories (4 to 8).")],
    "corpus": [
        _option("--size", type=int, help="Image side length."),
        _option("--labeled-fraction", type=float, help="Labeled share, 0 = counts."),
        _option("--n-labeled", type=int),
        _option("--n-unlabeled", type=int),
        _option("--n-test", type=int),
    ],
    "model": [
        _option("--c-prime", type=int, help="Feature channels."),
        _option("--d", type=int, help="Graph node feature size."),
        _option("--n-high", type=int, help="High-level graph nodes."),
        _option("--alpha", type=float, help="Global features in the local module."),
    ],
    "seg": [
        _option("--with-lcm/--without-lcm", help="Local module in S-Net."),
        _option("--with-gsm/--without-gsm", help="Global module in S-Net."),
    ],
    "rect": [
        _option("--use-lcm/--no-lcm", help="Local module in R-Net."),
        _option("--use-gsm/--no-gsm", help="Global module in R-Net."),
        _option("--two-pass-assist/--no-two-pass-assist"),
        _option("--hard-mask/--soft-mask"),
    ],
    "train": [
        _option("--lr", type=float),
        _option("--momentum", type=float),
        _option("--weight-decay", type=float),
        _option("--epochs", type=int),
        _option("--batch-size", type=int),
    ],
    "augment": [_option("--augment/--no-augment")],
    "noise": [
        _option("--corrupt/--no-corrupt", help="Train on corrupted ground truth."),
        _option("--p-swap", type=float),
        _option("--k-spots", type=int),
        _option("--radius", type=float),
    ],
    "pipeline": [
        _option("--ablate-raw/--no-ablate-raw"),
        _option("--ablate-modules/--no-ablate-modules"),
        _option("--with-upper-bound/--no-upper-bound"),
        _option("--rounds", type=int),
        _option("--warm-start/--cold-start"),
        _option("--resume/--no-resume"),
    ],
    "protocol": [_option("--protocol", type=click.Choice(["lip", "atr"]))],
    "diagnostics": [_option("--diagnostics/--no-diagnostics")],
    "grad": [_option("--grad-entries", type=int)],
}


def options(*groups: str) -> Callable[[Callable[..., Any]], Any]:
    """Attaches ``--config``, ``--seed``, ``--threads`` and the named groups."""

    def decorator(f: Callable[..., Any]) -> Any:
        for group in reversed(groups):
            for opt in reversed(OPTIONS[group]):
                f = opt(f)
        f = _option("--threads", type=int, help="Worker cap.")(f)
        f = _option("--seed", type=int, help="Root seed (default GRN_SEED).")(f)
        f = _option(
            "--config",
            "config_file",
            type=click.Path(exists=True, dir_okay=False),
            help="key=value file; flags override its values.",
        )(f)
        return f

    return decorator


def resolve(subcommand: str, flags: Mapping[str, Any]) -> RunConfig:
    """Defaults, then the ``--config`` file, then explicit flags."""
    values: dict[str, Any] = {}
    config_file = flags.get("config_file")
    if config_file:
        values.update(parse_text(pathlib.Path(config_file).read_text()))
    values.update(
        {k: v for k, v in flags.items() if v is not None and k != "config_file"}
    )
    values["subcommand"] = subcommand
    return _build(RunConfig, **values)


def _echo_config(cfg: RunConfig) -> pathlib.Path:
    out = cfg.out_dir
    out.mkdir(parents=True, exist_ok=True)
    path = out / "config.txt"
    path.write_text(cfg.to_text())
    return path


def _load_corpus(cfg: RunConfig) -> tuple[RunConfig, Corpus]:
    """Reads ``--data``; category count and size follow the corpus."""
    if not cfg.data:
        raise ConfigError(f"{cfg.subcommand} needs --data")
    corpus = read_corpus(cfg.data)
    cfg = cfg.model_copy(update={"c": corpus.c, "size": corpus.spec.size})
    _echo_config(cfg)
    return cfg, corpus


def _checkpoint(cfg: RunConfig, given: str, default: str) -> pathlib.Path:
    path = pathlib.Path(given) if given else cfg.out_dir / default
    if not path.exists():
        raise DataError(f"missing checkpoint {path}")
    return path


def _load_segnet(cfg: RunConfig) -> SegNetParams:
    """``--segnet``, or ``s_prime.grn`` in the output directory."""
    snet = init_segnet(cfg.segnet_config(), stage_rng(cfg.seed, "segnet-init"))
    snet.load(_checkpoint(cfg, cfg.segnet, "s_prime.grn"))
    return snet


def _load_rectnet(cfg: RunConfig) -> RectNetParams:
    """``--rectnet``, or ``r_prime.grn`` in the output directory."""
    rnet = init_rectnet(cfg.rectnet_config(), stage_rng(cfg.seed, "rectnet-init"))
    rnet.load(_checkpoint(cfg, cfg.rectnet, "r_prime.grn"))
    return rnet


def _write_labels(root: pathlib.Path, labels: Iterable[tuple[str, U8]]) -> None:
    root.mkdir(parents=True, exist_ok=True)
    for sample_id, y in labels:
        write_pgm(root / f"{sample_id}.pgm", y)


def _read_labels(root: str, samples: Sequence[Sample]) -> dict[str, U8]:
    folder = pathlib.Path(root)
    labels = {}
    for s in samples:
        path = folder / f"{s.id}.pgm"
        if not path.exists():
            raise DataError(f"missing label {path}")
        labels[s.id] = read_pgm(path)
    return labels


# commands


@click.group(name="grn")
@click.version_option(package_name="grnparse")
def cli() -> None:
    """Graph-reasoning pseudo-label rectification for human parsing."""


@cli.command("gen-data")
@options("out", "classes", "corpus")
def gen_data(**flags: Any) -> None:
    """Render a synthetic corpus into --out."""
    cfg = resolve("gen-data", flags)
    corpus = generate(cfg.corpus_spec(), cfg.threads)
    manifest = write_corpus(corpus, cfg.out_dir)
    _echo_config(cfg)
    click.echo(f"{manifest}\t{len(corpus.labeled) + len(corpus.unlabeled)} rows")


@cli.command("train-seg")
@options("data", "out", "model", "seg", "train", "augment")
def train_seg(**flags: Any) -> None:
    """Train S-Net on the labeled split."""
    cfg, corpus = _load_corpus(resolve("train-seg", flags))
    with stage("train-seg"):
        snet = init_segnet(cfg.segnet_config(), stage_rng(cfg.seed, "segnet-init"))
        log = train_segmenter(
            [(s.image, s.need("label")) for s in corpus.labeled],
            snet,
            cfg.sgd_config(),
            cfg.epochs,
            cfg.augment_config(),
            corpus.table.flip_lookup(),
            cfg.batch_size,
            stage_rng(cfg.seed, "baseline"),
            stage="train-seg",
        )
    snet.save(cfg.out_dir / "s_prime.grn")
    if log.epoch_losses:
        click.echo(f"loss\t{log.initial:.6f}\t{log.final:.6f}")


@cli.command("pseudo-label")
@options("data", "out", "segnet", "model", "seg")
def pseudo_label_cmd(**flags: Any) -> None:
    """Write S-Net labels of the labeled and unlabeled splits to pseudo/."""
    cfg, corpus = _load_corpus(resolve("pseudo-label", flags))
    snet = _load_segnet(cfg)
    with stage("pseudo-label"):
        samples = pseudo_label(corpus.labeled + corpus.unlabeled, snet, cfg.threads)
    _write_labels(
        cfg.out_dir / "pseudo", [(s.id, s.need("pseudo_label")) for s in samples]
    )
    click.echo(f"pseudo\t{len(samples)}")


@cli.command("train-rect")
@options("data", "out", "segnet", "model", "seg", "rect", "train", "noise")
def train_rect(**flags: Any) -> None:
    """Train R-Net on labeled samples.

    Masks are S-Net predictions or, with ``--corrupt``, one-hot ground truth
    carrying injected global and local errors.
    """
    cfg, corpus = _load_corpus(resolve("train-rect", flags))
    labeled = corpus.labeled
    if cfg.corrupt:
        noise, table = cfg.noise_config(), corpus.table
        rng = stage_rng(cfg.seed, "corrupt")
        masks = [
            one_hot(corrupt(s.need("label"), table, noise, rng), cfg.c)
            for s in labeled
        ]
    else:
        predicted = pseudo_label(labeled, _load_segnet(cfg), cfg.threads)
        masks = [s.need("pseudo_probs") for s in predicted]
    triples = [(s.image, m, s.need("label")) for s, m in zip(labeled, masks)]
    with stage("train-rect"):
        rnet = init_rectnet(cfg.rectnet_config(), stage_rng(cfg.seed, "rectnet-init"))
        log = train_rectifier(
            triples,
            rnet,
            cfg.sgd_config(),
            cfg.epochs,
            cfg.batch_size,
            stage_rng(cfg.seed, "train-rect"),
            stage="train-rect",
        )
    rnet.save(cfg.out_dir / "r_prime.grn")
    if log.epoch_losses:
        click.echo(f"loss\t{log.initial:.6f}\t{log.final:.6f}")


@cli.command("rectify")
@options(
    "data", "out", "segnet", "rectnet", "labels", "model", "seg", "rect", "diagnostics"
)
def rectify_cmd(**flags: Any) -> None:
    """Rectify pseudo-labels of the unlabeled split into rectified/.

    Masks are S-Net probabilities, or one-hot maps of the hard labels in
    ``--labels`` when given.
    """
    cfg, corpus = _load_corpus(resolve("rectify", flags))
    unlabeled = corpus.unlabeled
    if cfg.labels:
        hard = _read_labels(cfg.labels, unlabeled)
        samples = [s.with_labels(pseudo_label=hard[s.id]) for s in unlabeled]
    else:
        samples = pseudo_label(unlabeled, _load_segnet(cfg), cfg.threads)
    rnet = _load_rectnet(cfg)
    diagnostics: dict[str, RectifyOutput] | None = {} if cfg.diagnostics else None
    with stage("rectify"):
        rectified = rectify_unlabeled(samples, rnet, cfg.threads, diagnostics)
    _write_labels(
        cfg.out_dir / "rectified",
        [(s.id, s.need("rectified_label")) for s in rectified],
    )
    if diagnostics is not None:
        write_diagnostics_tsv(cfg.out_dir / "diagnostics.tsv", diagnostics)
    click.echo(f"rectified\t{len(rectified)}")


@cli.command("retrain")
@options("data", "out", "labels", "init", "model", "seg", "train", "augment")
def retrain(**flags: Any) -> None:
    """Train S-Net on labeled ground truth plus --labels for unlabeled samples."""
    cfg, corpus = _load_corpus(resolve("retrain", flags))
    if not cfg.labels:
        raise ConfigError("retrain needs --labels")
    extra = _read_labels(cfg.labels, corpus.unlabeled)
    examples = [(s.image, s.need("label")) for s in corpus.labeled]
    examples += [(s.image, extra[s.id]) for s in corpus.unlabeled]
    with stage("retrain"):
        snet = init_segnet(cfg.segnet_config(), stage_rng(cfg.seed, "segnet-init"))
        if cfg.init:
            snet.load(cfg.init)
        train_segmenter(
            examples,
            snet,
            cfg.sgd_config(),
            cfg.epochs,
            cfg.augment_config(),
            corpus.table.flip_lookup(),
            cfg.batch_size,
            stage_rng(cfg.seed, "rectified-retrain"),
            stage="retrain",
        )
    snet.save(cfg.out_dir / "s_double_prime.grn")
    click.echo(f"retrain\t{len(examples)}")


@cli.command("pipeline")
@options(
    "data", "out", "model", "seg", "rect", "train", "augment", "pipeline", "protocol"
)
def pipeline_cmd(**flags: Any) -> None:
    """Run every stage and write checkpoints, labels and metrics.tsv."""
    cfg, corpus = _load_corpus(resolve("pipeline", flags))
    run = run_pipeline(cfg.pipeline_config(), corpus, cfg.out_dir)
    for name, metrics in run.metrics.items():
        click.echo(f"{name}\tmean_iou\t{metrics.mean_iou:.6f}")


@cli.command("eval")
@options("data", "out", "segnet", "model", "seg", "protocol")
def eval_cmd(**flags: Any) -> None:
    """Score an S-Net checkpoint on the test split."""
    cfg, corpus = _load_corpus(resolve("eval", flags))
    if not corpus.test:
        raise DataError(f"{cfg.data} has no test split")
    snet = _load_segnet(cfg)
    result = evaluate_segmenter(snet, corpus.test, cfg.protocol, cfg.threads)
    write_metrics_tsv(
        cfg.out_dir / "metrics.tsv", result.rows("eval", corpus.table.names)
    )
    for name, value in result.aggregates().items():
        click.echo(f"{name}\t{value:.6f}")


GRAD_CHECK_C = 4
GRAD_CHECK_SIZE = 16
GRAD_CHECK_D = 6
# central differences through the full networks carry about 1e-11 absolute
# noise, so entries with |a| + |n| below 1e-6 are compared against 1e-6
GRAD_CHECK_FLOOR = 1e-6


def grad_check_networks(seed: int, max_entries: int | None) -> GradCheckReport:
    """Checks every S-Net and R-Net parameter, both graph modules enabled."""
    rng = np.random.default_rng(seed)
    c, size, d = GRAD_CHECK_C, GRAD_CHECK_SIZE, GRAD_CHECK_D
    image = rng.uniform(size=(3, size, size))
    target = rng.integers(0, c, size=(size, size))
    probs = softmax(rng.normal(size=(c, size, size)), axis=0)
    seg = SegNetConfig(
        c=c, c_prime=4, size=size, d=d, n_high=2, with_lcm=True, with_gsm=True
    )
    snet = init_segnet(seg, rng)
    rnet = init_rectnet(RectNetConfig(c=c, c_prime=4, size=size, d=d, n_high=2), rng)
    x = assemble_input(image, probs)

    def seg_loss() -> Tensor:
        return ops.cross_entropy_pixelwise(seg_forward(Tensor(image), snet), target)

    def rect_loss() -> Tensor:
        return ops.cross_entropy_pixelwise(rectify_forward(x, rnet).logits, target)

    merged = GradCheckReport()
    for prefix, f, params in (
        ("segnet", seg_loss, snet.parameters()),
        ("rectnet", rect_loss, rnet.parameters()),
    ):
        result = grad_check(
            f, params, max_entries=max_entries, seed=seed, floor=GRAD_CHECK_FLOOR
        )
        for name in result.errors:
            key = f"{prefix}.{name}"
            merged.errors[key] = result.errors[name]
            merged.checked[key] = result.checked[name]
            merged.kinks[key] = result.kinks[name]
    return merged


@cli.command("grad-check")
@options("out", "grad")
def grad_check_cmd(**flags: Any) -> None:
    """Compare S-Net and R-Net gradients with central differences."""
    cfg = resolve("grad-check", flags)
    _echo_config(cfg)
    result = grad_check_networks(cfg.seed, cfg.grad_entries)
    for line in result.lines():
        click.echo(line)
    if not result.passed():
        raise CheckError(f"max relative error {result.max_error:.3e} exceeds 1e-4")


@cli.command("export-masks")
@options("labels", "out", "classes")
def export_masks_cmd(**flags: Any) -> None:
    """Colour every <id>.pgm in --labels into <id>.ppm under --out."""
    cfg = resolve("export-masks", flags)
    folder = pathlib.Path(cfg.labels)
    if not cfg.labels or not folder.is_dir():
        raise ConfigError(
            f"export-masks needs a --labels directory, got {cfg.labels!r}"
        )
    palette = get_category_table(cfg.c).palette()
    _echo_config(cfg)
    paths = sorted(folder.glob("*.pgm"))
    for path in paths:
        export_masks(read_pgm(path), palette, cfg.out_dir / f"{path.stem}.ppm")
    click.echo(f"exported\t{len(paths)}")


def main(argv: Sequence[str] | None = None) -> int:
    """Runs the CLI and returns its exit code."""
    args = None if argv is None else list(argv)
    try:
        rv = cli.main(args=args, prog_name="grn", standalone_mode=False)
    except click.ClickException as e:
        e.show()
        return 1
    except click.exceptions.Abort:
        return 1
    except ConfigError as e:
        logger.error(str(e))
        return 1
    except GrnError as e:
        logger.error(str(e))
        return 2
    return rv if isinstance(rv, int) else 0


def run() -> None:
    sys.exit(main())


if __name__ == "__main__":
    run()
