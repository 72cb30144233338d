"""Ready-made pipeline and corpus configurations."""

from __future__ import annotations

from functools import partial
from typing import Any

from grnparse.autodiff.optim import SgdConfig
from grnparse.data.corpus import CorpusSpec
from grnparse.errors import ConfigError
from grnparse.metrics import Protocol
from grnparse.nets.rectnet import RectNetConfig
from grnparse.nets.segnet import SegNetConfig
from grnparse.pipeline import PipelineConfig
from grnparse.tech import PRESETS


def pipeline_config(
    c: int = PRESETS.desk_c,
    size: int = PRESETS.desk_size,
    c_prime: int = PRESETS.desk_c_prime,
    d: int = PRESETS.desk_d,
    n_high: int = PRESETS.desk_n_high,
    epochs: int = PRESETS.desk_epochs,
    batch_size: int = PRESETS.desk_batch_size,
    protocol: Protocol = "lip",
    seed: int = 0,
    **options: Any,
) -> PipelineConfig:
    """Pipeline settings with matching S-Net and R-Net shapes.

    Args:
        c: number of categories.
        size: image side length.
        c_prime: feature channels of both networks.
        d: graph node feature size.
        n_high: high-level node count.
        epochs: epochs of every training stage.
        batch_size: samples per optimizer step.
        protocol: metric protocol.
        seed: root seed.
        options: further :class:`PipelineConfig` fields.
    """
    shape = dict(c=c, size=size, c_prime=c_prime, d=d, n_high=n_high)
    return PipelineConfig(
        seed=seed,
        seg_epochs=epochs,
        rect_epochs=epochs,
        batch_size=batch_size,
        sgd=SgdConfig(),
        segnet=SegNetConfig(**shape),
        rectnet=RectNetConfig(**shape),
        protocol=protocol,
        **options,
    )


def corpus_spec(
    labeled_fraction: float,
    pool: int = 512,
    n_test: int = 64,
    **options: Any,
) -> CorpusSpec:
    """Splits a training pool of ``pool`` samples by ``labeled_fraction``."""
    if not 0 < labeled_fraction <= 1:
        raise ConfigError(
            f"labeled_fraction must lie in (0, 1], got {labeled_fraction}"
        )
    n_labeled = round(labeled_fraction * pool)
    return CorpusSpec(
        n_labeled=n_labeled, n_unlabeled=pool - n_labeled, n_test=n_test, **options
    )


lip_pipeline = partial(
    pipeline_config,
    c=PRESETS.c_lip,
    epochs=PRESETS.full_epochs,
    batch_size=PRESETS.batch_size,
    protocol="lip",
)
atr_pipeline = partial(
    pipeline_config,
    c=PRESETS.c_atr,
    epochs=PRESETS.full_epochs,
    batch_size=PRESETS.batch_size,
    protocol="atr",
)
desk_pipeline = partial(pipeline_config, ablate_raw=True)
tiny_pipeline = partial(
    pipeline_config, size=16, c_prime=4, d=6, n_high=2, epochs=1, batch_size=2
)

eighth, quarter, half = PRESETS.labeled_fractions
eighth_labeled = partial(corpus_spec, labeled_fraction=eighth)
quarter_labeled = partial(corpus_spec, labeled_fraction=quarter)
half_labeled = partial(corpus_spec, labeled_fraction=half)
tiny_corpus = partial(corpus_spec, labeled_fraction=0.5, pool=8, n_test=2, size=16)


if __name__ == "__main__":
    print(desk_pipeline())
    print(eighth_labeled())
