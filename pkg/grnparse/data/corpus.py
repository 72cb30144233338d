"""Synthetic parsing corpus, its on-disk layout and the hidden-label split.

A dataset directory holds::

    corpus.txt     generation settings, key=value
    manifest.tsv   id<TAB>image.ppm<TAB>label.pgm|-<TAB>split   (labeled, unlabeled)
    test.tsv       same columns, split = test
    heldout.tsv    id<TAB>label.pgm   ground truth of unlabeled samples
    images/ labels/ heldout/

Ground truth of unlabeled samples never appears on a :class:`Sample`; it is
only reachable through :meth:`HiddenLabels.reveal`, which records why it was
read.
"""

from __future__ import annotations

import pathlib
from collections.abc import Callable, Iterator, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Any, Literal, TypeVar

import numpy as np
import numpy.typing as nty
from pydantic import BaseModel, Field, ValidationError

from grnparse.config import logger, parse_text, to_text
from grnparse.data.netpbm import read_image, read_pgm, write_image, write_pgm
from grnparse.data.render import render_figure
from grnparse.errors import ConfigError, DataError, FormatError
from grnparse.parts import CategoryTable, get_category_table
from grnparse.tech import PRESETS

__all__ = [
    "Corpus",
    "CorpusSpec",
    "HiddenLabels",
    "Sample",
    "Split",
    "generate",
    "read_corpus",
    "write_corpus",
]

Split = Literal["labeled", "unlabeled", "test"]
U8 = nty.NDArray[np.uint8]
T = TypeVar("T")


@dataclass
class Sample:
    """One image with whatever labels the current stage may see.

    Attributes:
        id: unique sample id.
        image: colours [3×H×W] in [0, 1].
        label: ground truth [H×W]; ``None`` for unlabeled samples.
        split: labeled, unlabeled or test.
        pseudo_label: S-Net prediction [H×W].
        pseudo_probs: S-Net class distribution [c×H×W].
        rectified_label: R-Net output [H×W].
    """

    id: str
    image: nty.NDArray[np.float64]
    label: U8 | None
    split: Split
    pseudo_label: U8 | None = None
    pseudo_probs: nty.NDArray[np.float64] | None = None
    rectified_label: U8 | None = None

    def __post_init__(self) -> None:
        if self.split == "unlabeled" and self.label is not None:
            raise DataError(f"unlabeled sample {self.id!r} must not carry a label")
        if self.split != "unlabeled" and self.label is None:
            raise DataError(f"{self.split} sample {self.id!r} needs a label")

    def with_labels(self, **labels: object) -> Sample:
        return replace(self, **labels)

    def need(self, name: str) -> Any:
        """Returns the array attribute ``name``, raising when it is missing."""
        value = getattr(self, name)
        if value is None:
            raise DataError(f"sample {self.id!r} has no {name}")
        return value


class HiddenLabels:
    """Ground truth of unlabeled samples, readable only with a stated purpose.

    Every read is appended to :attr:`reads` as ``(id, purpose)``.
    """

    def __init__(self, labels: dict[str, U8] | None = None) -> None:
        self._labels = dict(labels or {})
        self.reads: list[tuple[str, str]] = []

    def __contains__(self, sample_id: object) -> bool:
        return sample_id in self._labels

    def __len__(self) -> int:
        return len(self._labels)

    @property
    def ids(self) -> list[str]:
        return list(self._labels)

    @property
    def purposes(self) -> set[str]:
        return {purpose for _, purpose in self.reads}

    def reveal(self, sample_id: str, purpose: str) -> U8:
        if sample_id not in self._labels:
            raise DataError(f"no hidden label for sample {sample_id!r}")
        self.reads.append((sample_id, purpose))
        return self._labels[sample_id].copy()


class CorpusSpec(BaseModel):
    """Generation settings.

    Parameters:
        n_labeled: samples with visible ground truth.
        n_unlabeled: samples whose ground truth is hidden.
        n_test: held-out labeled samples for evaluation.
        size: image side length.
        c: number of categories, 4 to 8.
        seed: root seed; sample ``i`` uses the ``i``-th spawned child.
        p_missing: probability that a limb is left out.
        p_back_view: probability of a back view.
    """

    n_labeled: int = Field(default=64, ge=0)
    n_unlabeled: int = Field(default=448, ge=0)
    n_test: int = Field(default=64, ge=0)
    size: int = Field(default=PRESETS.desk_size, ge=16)
    c: int = PRESETS.desk_c
    seed: int = 0
    p_missing: float = Field(default=0.1, ge=0, le=1)
    p_back_view: float = Field(default=0.3, ge=0, le=1)

    @property
    def n_total(self) -> int:
        return self.n_labeled + self.n_unlabeled + self.n_test


@dataclass
class Corpus:
    """Samples in manifest order plus the hidden ground truth."""

    spec: CorpusSpec
    samples: list[Sample]
    hidden: HiddenLabels = field(default_factory=HiddenLabels)

    @property
    def c(self) -> int:
        return self.spec.c

    @property
    def table(self) -> CategoryTable:
        return get_category_table(self.spec.c)

    def __len__(self) -> int:
        return len(self.samples)

    def __iter__(self) -> Iterator[Sample]:
        return iter(self.samples)

    def split(self, name: Split) -> list[Sample]:
        return [s for s in self.samples if s.split == name]

    @property
    def labeled(self) -> list[Sample]:
        return self.split("labeled")

    @property
    def unlabeled(self) -> list[Sample]:
        return self.split("unlabeled")

    @property
    def test(self) -> list[Sample]:
        return self.split("test")


def _split_of(index: int, spec: CorpusSpec) -> Split:
    if index < spec.n_labeled:
        return "labeled"
    if index < spec.n_labeled + spec.n_unlabeled:
        return "unlabeled"
    return "test"


def _render(
    index: int, seed: np.random.SeedSequence, spec: CorpusSpec, table: CategoryTable
) -> tuple[Sample, U8]:
    figure = render_figure(
        np.random.default_rng(seed), spec.size, spec.p_missing, spec.p_back_view
    )
    label = table.labels_from_parts(figure.parts)
    split = _split_of(index, spec)
    sample = Sample(
        f"{index:05d}", figure.image, None if split == "unlabeled" else label, split
    )
    return sample, label


def generate(spec: CorpusSpec, threads: int = 1) -> Corpus:
    """Renders a corpus; a pure function of ``spec``.

    Args:
        spec: sizes, categories and seed.
        threads: worker cap; results keep manifest order.
    """
    table = get_category_table(spec.c)
    if spec.n_total < 1:
        raise ConfigError("corpus needs at least one sample")
    if spec.size % 4:
        raise ConfigError(f"size must be divisible by 4, got {spec.size}")
    seeds = np.random.SeedSequence(spec.seed).spawn(spec.n_total)

    def _one(index: int) -> tuple[Sample, U8]:
        return _render(index, seeds[index], spec, table)

    with ThreadPoolExecutor(max_workers=threads) as pool:
        rendered = list(pool.map(_one, range(spec.n_total)))
    samples = [sample for sample, _ in rendered]
    hidden = HiddenLabels(
        {s.id: label for s, label in rendered if s.split == "unlabeled"}
    )
    logger.info(
        f"generated {spec.n_labeled} labeled, {spec.n_unlabeled} unlabeled, "
        f"{spec.n_test} test samples (c={spec.c}, size={spec.size}, seed={spec.seed})"
    )
    return Corpus(spec, samples, hidden)


def _manifest_lines(samples: Sequence[Sample]) -> str:
    lines = []
    for s in samples:
        label = f"labels/{s.id}.pgm" if s.label is not None else "-"
        lines.append(f"{s.id}\timages/{s.id}.ppm\t{label}\t{s.split}\n")
    return "".join(lines)


def write_corpus(corpus: Corpus, path: str | pathlib.Path) -> pathlib.Path:
    """Writes the dataset directory and returns the manifest path."""
    root = pathlib.Path(path)
    for sub in ("images", "labels", "heldout"):
        (root / sub).mkdir(parents=True, exist_ok=True)
    for s in corpus:
        write_image(root / "images" / f"{s.id}.ppm", s.image)
        if s.label is not None:
            write_pgm(root / "labels" / f"{s.id}.pgm", s.label)
    heldout = []
    for sample_id in corpus.hidden.ids:
        label = corpus.hidden.reveal(sample_id, "export")
        write_pgm(root / "heldout" / f"{sample_id}.pgm", label)
        heldout.append(f"{sample_id}\theldout/{sample_id}.pgm\n")
    (root / "corpus.txt").write_text(to_text(corpus.spec.model_dump()))
    train = [s for s in corpus if s.split != "test"]
    (root / "manifest.tsv").write_text(_manifest_lines(train))
    (root / "test.tsv").write_text(_manifest_lines(corpus.test))
    (root / "heldout.tsv").write_text("".join(heldout))
    logger.info(f"wrote {len(corpus)} samples to {root}")
    return root / "manifest.tsv"


def _read_rows(path: pathlib.Path, columns: int) -> list[list[str]]:
    if not path.exists():
        return []
    rows = []
    for number, line in enumerate(path.read_text().splitlines(), start=1):
        if not line:
            continue
        row = line.split("\t")
        if len(row) != columns:
            raise FormatError(f"{path.name}:{number}: expected {columns} columns, got {row}")
        rows.append(row)
    return rows


def _read_file(
    root: pathlib.Path, name: str, reader: Callable[[pathlib.Path], T]
) -> T:
    path = root / name
    if not path.exists():
        raise DataError(f"missing file {path}")
    return reader(path)


def read_corpus(path: str | pathlib.Path) -> Corpus:
    """Reads a dataset directory written by :func:`write_corpus`."""
    root = pathlib.Path(path)
    if not (root / "manifest.tsv").exists():
        raise DataError(f"{root} has no manifest.tsv")
    try:
        spec = CorpusSpec(
            **parse_text(_read_file(root, "corpus.txt", pathlib.Path.read_text))
        )
    except ValidationError as e:
        raise FormatError(f"{root / 'corpus.txt'}: {e}") from e
    samples = []
    seen: set[str] = set()
    rows = _read_rows(root / "manifest.tsv", 4) + _read_rows(root / "test.tsv", 4)
    for sample_id, image, label, split in rows:
        if split not in ("labeled", "unlabeled", "test"):
            raise FormatError(f"sample {sample_id!r} has unknown split {split!r}")
        if sample_id in seen:
            raise FormatError(f"duplicate sample id {sample_id!r}")
        seen.add(sample_id)
        y = None if label == "-" else _read_file(root, label, read_pgm)
        if y is not None and y.size and y.max() >= spec.c:
            raise DataError(f"sample {sample_id!r} has label id {y.max()} >= c={spec.c}")
        samples.append(Sample(sample_id, _read_file(root, image, read_image), y, split))
    hidden = HiddenLabels(
        {
            sample_id: _read_file(root, label, read_pgm)
            for sample_id, label in _read_rows(root / "heldout.tsv", 2)
        }
    )
    return Corpus(spec, samples, hidden)


if __name__ == "__main__":
    corpus = generate(CorpusSpec(n_labeled=4, n_unlabeled=4, n_test=2))
    print([(s.id, s.split) for s in corpus])
