from grnparse import recipes
from grnparse.config import PATH
from grnparse.data import generate
from grnparse.pipeline import run_pipeline

if __name__ == "__main__":
    corpus = generate(recipes.eighth_labeled())
    run = run_pipeline(recipes.desk_pipeline(), corpus, PATH.runs / "desk")
    for stage, metrics in run.metrics.items():
        print(f"{stage:24s} {metrics.mean_iou:.4f}")
