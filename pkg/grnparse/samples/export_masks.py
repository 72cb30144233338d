from grnparse.cli import export_masks
from grnparse.config import PATH
from grnparse.data import CorpusSpec, generate

if __name__ == "__main__":
    corpus = generate(CorpusSpec(n_labeled=4, n_unlabeled=0, n_test=0))
    out = PATH.runs / "masks"
    out.mkdir(parents=True, exist_ok=True)
    for s in corpus.labeled:
        print(export_masks(s.label, corpus.table.palette(), out / f"{s.id}.ppm"))
