# flake8: noqa

from grnparse.data.augment import AugmentConfig, augment, flip_sample, scale_crop
from grnparse.data.corpus import (
    Corpus,
    CorpusSpec,
    HiddenLabels,
    Sample,
    generate,
    read_corpus,
    write_corpus,
)
from grnparse.data.netpbm import (
    read_image,
    read_pgm,
    read_ppm,
    write_image,
    write_pgm,
    write_ppm,
)
from grnparse.data.noise import (
    NoiseConfig,
    corrupt,
    inject_global_error,
    inject_local_error,
)
from grnparse.data.render import Capsule, Figure, render_figure


__all__ = [
    "AugmentConfig",
    "Capsule",
    "Corpus",
    "CorpusSpec",
    "Figure",
    "HiddenLabels",
    "NoiseConfig",
    "Sample",
    "augment",
    "corrupt",
    "flip_sample",
    "generate",
    "inject_global_error",
    "inject_local_error",
    "read_corpus",
    "read_image",
    "read_pgm",
    "read_ppm",
    "render_figure",
    "scale_crop",
    "write_corpus",
    "write_image",
    "write_pgm",
    "write_ppm",
]
