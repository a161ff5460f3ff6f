"""Distributed training on synthetic load data.

Four agents on a ring each hold a quarter of two years of synthetic daily
load. They train with learn-before-consensus (LBC) and consensus-before-learn
(CBL) and are compared with one model trained on the pooled data.
Pass ``--plot`` to draw validation curves (needs matplotlib).
"""

#%% Data
import sys

from dlstm.data import Shard, shard_dataset
from dlstm.experiment import ExperimentConfig, evaluate_model, prepare_data
from dlstm.lstm import empirical_loss
from dlstm.trainer import train

EPOCHS = 200
base = ExperimentConfig(epochs=EPOCHS)
data = prepare_data(base)
print(f"{len(data.records)} days -> {len(data.train)} train / {len(data.validation)} "
      f"validation / {len(data.test)} test samples")
validation = Shard(tuple(data.validation))

#%% Train under each schedule
runs = {}
for schedule in ("LBC", "CBL", "CENTRALIZED"):
    cfg = ExperimentConfig(epochs=EPOCHS, schedule=schedule)
    g = cfg.graph()
    shards = shard_dataset(data.train, g.n_agents)
    rep = train(cfg.train_config(), shards, g, validation)
    metrics, actual, forecast = evaluate_model(rep.final_model(), data.test, data.normalizer)
    runs[schedule] = rep
    print(f"{schedule:12s} test MAPE {100 * metrics.mape:5.2f}%  MAE {metrics.mae:7.2f}  "
          f"val loss {empirical_loss(rep.final_model(), data.validation):.5f}  "
          f"local time {rep.timings['local_parallel_seconds']:.1f}s")

#%% Validation curves
if "--plot" in sys.argv:
    import matplotlib.pyplot as plt

    rep = runs["LBC"]
    for a in range(rep.n_agents):
        plt.plot([row[a] for row in rep.val_loss], lw=0.8, label=f"agent {a}")
    plt.plot([row[0] for row in runs["CENTRALIZED"].val_loss], "k", label="centralized")
    plt.yscale("log")
    plt.xlabel("epoch")
    plt.ylabel("validation MSE (normalized)")
    plt.legend()
    plt.show()
