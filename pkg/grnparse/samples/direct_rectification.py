import numpy as np

from grnparse.autodiff import SgdConfig
from grnparse.data import CorpusSpec, NoiseConfig, corrupt, generate
from grnparse.nets import (
    RectNetConfig,
    init_rectnet,
    one_hot,
    rectify_mask,
    train_rectifier,
)

if __name__ == "__main__":
    corpus = generate(CorpusSpec(n_labeled=32, n_unlabeled=0, n_test=8, size=32))
    table, noise = corpus.table, NoiseConfig()
    rng = np.random.default_rng(0)

    def triples(samples):
        return [
            (s.image, one_hot(corrupt(s.label, table, noise, rng), table.c), s.label)
            for s in samples
        ]

    train, test = triples(corpus.labeled), triples(corpus.test)
    rnet = init_rectnet(RectNetConfig(size=32), rng=0)
    train_rectifier(train, rnet, SgdConfig(), epochs=10)
    for image, mask, label in test:
        before = (mask.argmax(axis=0) != label).mean()
        after = (rectify_mask(image, mask, rnet)[0] != label).mean()
        print(f"wrong pixels {before:.3f} -> {after:.3f}")
