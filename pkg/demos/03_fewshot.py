"""
Feedback guidance when the first stage has little data
=======================================================

The second stage trains on everything; the first stage sees a fraction.
"""
import warnings

from cascadeforge.config import config_from_dict
from cascadeforge.dataset import generate_synthetic, split
from cascadeforge.evaluation import FEWSHOT_COLUMNS, evaluate_pipeline, format_table, relative_improvement
from cascadeforge.training import train_strategy

warnings.simplefilter("ignore")
cfg = config_from_dict({"seed": 2, "synthetic": {}, "ga": {"population_size": 12, "generations": 10}})
train, val, test = split(generate_synthetic(cfg.synthetic, seed=cfg.seed), cfg.split, seed=cfg.seed)

rows = []
for fraction in (0.02, 0.05, 0.2, 1.0):
    f1 = {}
    for strategy in ("independent", "feedback"):
        res = train_strategy(train, val, cfg.strategy_config(strategy, fewshot_fraction=fraction))
        rep = evaluate_pipeline(res.pipeline, test, strategy, "test").to_dict()
        f1[strategy] = rep["f1_e2e"]
        rep.update(fraction=fraction, improvement=None)
        if strategy == "feedback":
            rep["improvement"] = relative_improvement(f1["independent"], f1["feedback"])
        rows.append(rep)
print(format_table(rows, FEWSHOT_COLUMNS))
