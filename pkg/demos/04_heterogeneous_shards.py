"""How shard layout and mixing speed affect agreement.

Contiguous shards give each agent a different season; round-robin shards
give every agent a bit of everything. A path graph mixes more slowly than a
ring, so more trailing consensus rounds are needed at the end.
"""

#%%
from dlstm.data import Shard, shard_dataset
from dlstm.experiment import ExperimentConfig, prepare_data
from dlstm.graph import named_topology
from dlstm.trainer import TrainConfig, train

data = prepare_data(ExperimentConfig())
validation = Shard(tuple(data.validation))

for strategy in ("contiguous", "round_robin"):
    for name in ("ring", "path"):
        cfg = TrainConfig(schedule="LBC", epochs=60, consensus_rounds=3, batch_size=32,
                          learning_rate=0.2, hidden_size=8, seed=7)
        rep = train(cfg, shard_dataset(data.train, 6, strategy), named_topology(name, 6), validation)
        print(f"{strategy:11s} {name:5s}  mean-model val loss {rep.mean_val_loss[-1]:.5f}  "
              f"last-epoch disagreement {rep.disagreement[-1]:.2e}  "
              f"trailing rounds {rep.trailing_rounds}")
