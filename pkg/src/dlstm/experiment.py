"""Config-driven experiments: data preparation, training, result files."""

import csv
import json
import time
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np
import yaml

from . import data as D
from .graph import build_topology, is_connected, named_topology
from .lstm import predict_batch
from .metrics import evaluate
from .trainer import TrainConfig, TrainingDivergence, topology_summary, train

HISTORY_HEADER = ("epoch", "agent", "train_loss", "val_loss", "disagreement")
PREDICTIONS_HEADER = ("index", "actual", "forecast")


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    name: str = "experiment"
    data_source: str = "synthetic"  # "synthetic" or "csv"
    csv_path: str | None = None
    synthetic_days: int = 730
    synthetic_seed: int = 7
    split: list = field(default_factory=lambda: [0.8, 0.1, 0.1])
    topology: str = "ring"
    n_agents: int = 4
    edges: list | None = None
    shard_strategy: str = "contiguous"
    schedule: str = "LBC"
    epochs: int = 200
    consensus_rounds: int = 20
    batch_size: int | str = 32
    learning_rate: float = 0.2
    seed: int = 7
    disagreement_tolerance: float = 1e-6
    consensus_every_batch: bool = False
    max_trailing_rounds: int = 1000
    hidden_size: int = 16
    output_dir: str = "results"

    def train_config(self):
        bs = self.batch_size
        return TrainConfig(
            schedule=self.schedule, epochs=self.epochs, consensus_rounds=self.consensus_rounds,
            batch_size=None if bs == "full" else bs, learning_rate=self.learning_rate,
            seed=self.seed, disagreement_tolerance=self.disagreement_tolerance,
            hidden_size=self.hidden_size, consensus_every_batch=self.consensus_every_batch,
            max_trailing_rounds=self.max_trailing_rounds,
        )

    def graph(self):
        if self.schedule.upper() == "CENTRALIZED":
            return build_topology(1)
        if self.edges is not None:
            return build_topology(self.n_agents, [tuple(e) for e in self.edges])
        return named_topology(self.topology, self.n_agents)

    def to_dict(self):
        return asdict(self)


def _fail(key, msg):
    raise ConfigError(f"config field {key!r}: {msg}")


def load_config(path):
    """Read a flat YAML mapping of :class:`ExperimentConfig` keys.

    Relative ``csv_path`` and ``output_dir`` resolve against the config
    file's directory.
    """
    path = Path(path)
    try:
        raw = yaml.safe_load(path.read_text()) or {}
    except (OSError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: expected a key-value mapping at top level")
    return config_from_dict(raw, base_dir=path.parent)


def config_from_dict(raw, base_dir=None):
    known = {f.name: f for f in fields(ExperimentConfig)}
    for key in raw:
        if key not in known:
            _fail(key, "unknown key")
    cfg = ExperimentConfig(**raw)
    validate(cfg, base_dir)
    return cfg


def validate(cfg, base_dir=None):
    if cfg.data_source not in ("synthetic", "csv"):
        _fail("data_source", f"expected 'synthetic' or 'csv', got {cfg.data_source!r}")
    if cfg.data_source == "csv":
        if not cfg.csv_path:
            _fail("csv_path", "required when data_source is 'csv'")
        p = Path(cfg.csv_path)
        if base_dir is not None and not p.is_absolute():
            p = Path(base_dir) / p
        if not p.is_file():
            _fail("csv_path", f"file {p} does not exist")
        cfg.csv_path = str(p)
    elif not isinstance(cfg.synthetic_days, int) or cfg.synthetic_days < 30:
        _fail("synthetic_days", "must be an integer >= 30")
    if (not isinstance(cfg.split, (list, tuple)) or len(cfg.split) != 3
            or any(not isinstance(x, (int, float)) or x < 0 for x in cfg.split)):
        _fail("split", "expected three nonnegative fractions [train, validation, test]")
    if abs(sum(cfg.split) - 1.0) > 1e-9:
        _fail("split", f"fractions sum to {sum(cfg.split)}, not 1")
    if not isinstance(cfg.n_agents, int) or cfg.n_agents < 1:
        _fail("n_agents", "must be a positive integer")
    if cfg.batch_size != "full" and (not isinstance(cfg.batch_size, int) or cfg.batch_size < 1):
        _fail("batch_size", "must be a positive integer or 'full'")
    if cfg.shard_strategy not in ("contiguous", "round_robin"):
        _fail("shard_strategy", "expected 'contiguous' or 'round_robin'")
    try:
        cfg.train_config()
    except ValueError as exc:
        _fail("schedule/epochs/learning_rate", str(exc))
    try:
        g = cfg.graph()
    except ValueError as exc:
        _fail("edges" if cfg.edges is not None else "topology", str(exc))
    if not is_connected(g):
        _fail("edges" if cfg.edges is not None else "topology", "communication graph is disconnected")
    if base_dir is not None and not Path(cfg.output_dir).is_absolute():
        cfg.output_dir = str(Path(base_dir) / cfg.output_dir)


@dataclass
class PreparedData:
    records: list
    normalizer: D.Normalizer
    train: list
    validation: list
    test: list


def prepare_data(cfg):
    """Load records, fit scaling on the training window, split chronologically."""
    if cfg.data_source == "csv":
        records = D.parse_series(cfg.csv_path)
    else:
        records = D.gen_synthetic(cfg.synthetic_days, cfg.synthetic_seed)
    n = len(records) - D.HISTORY
    if n < 3:
        raise D.DataError(f"only {max(n, 0)} samples; need at least 3 to split")
    n_train, n_val, n_test = D.split_counts(n, cfg.split)
    if min(n_train, n_val, n_test) < 1:
        raise D.DataError(f"split {cfg.split} leaves an empty part of {n} samples")
    # training targets are records[8 : n_train + 8]; their inputs start at record 0
    normalizer = D.fit_normalizer(records[:n_train + D.HISTORY])
    samples = D.build_samples(records, normalizer)
    return PreparedData(records, normalizer, samples[:n_train],
                        samples[n_train:n_train + n_val], samples[n_train + n_val:])


def evaluate_model(params, samples, normalizer):
    """Raw-unit metrics plus the (actual, forecast) arrays."""
    forecast = normalizer.invert(predict_batch(params, samples), "load")
    actual = normalizer.invert(np.array([s.target for s in samples]), "load")
    return evaluate(actual, forecast), actual, forecast


def run_experiment(cfg, workers=1):
    """Train per ``cfg`` and write ``report.json``, ``history.csv``,
    ``predictions.csv`` and ``timings.json`` into ``cfg.output_dir``.

    Returns the report dict. On divergence the partial history is written
    before :class:`~dlstm.trainer.TrainingDivergence` propagates.
    """
    validate(cfg)
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    wall = time.perf_counter()
    prepared = prepare_data(cfg)
    tcfg = cfg.train_config()
    g = cfg.graph()
    n_agents = g.n_agents
    shards = D.shard_dataset(prepared.train, n_agents, cfg.shard_strategy)
    validation = D.Shard(tuple(prepared.validation), "validation")
    try:
        rep = train(tcfg, shards, g, validation, workers=workers)
    except TrainingDivergence as exc:
        write_history(exc.report, out / "history.csv")
        raise

    metrics, actual, forecast = evaluate_model(rep.final_model(), prepared.test, prepared.normalizer)
    val_metrics, _, _ = evaluate_model(rep.final_model(), prepared.validation, prepared.normalizer)
    report = {
        "config": cfg_echo(cfg),
        "topology": topology_summary(g),
        "data": {
            "n_records": len(prepared.records),
            "n_train": len(prepared.train),
            "n_validation": len(prepared.validation),
            "n_test": len(prepared.test),
            "shard_sizes": [len(s) for s in shards],
            "normalizer": {"x_min": prepared.normalizer.x_min, "x_max": prepared.normalizer.x_max},
        },
        "train": rep.to_dict(),
        "metrics": metrics.to_dict(),
        "validation_metrics": val_metrics.to_dict(),
        "timings_file": "timings.json",
    }
    (out / "report.json").write_text(json.dumps(report, indent=2) + "\n")
    write_history(rep, out / "history.csv")
    write_predictions(actual, forecast, out / "predictions.csv")
    timings = dict(rep.timings, workers=workers,
                   run_wall_seconds=time.perf_counter() - wall)
    (out / "timings.json").write_text(json.dumps(timings, indent=2) + "\n")
    return report


def cfg_echo(cfg):
    d = cfg.to_dict()
    # paths are machine-specific; keep the echo portable
    if d["csv_path"]:
        d["csv_path"] = Path(d["csv_path"]).name
    d["output_dir"] = Path(d["output_dir"]).name
    return d


def write_history(rep, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(HISTORY_HEADER)
        for epoch, agent, tl, vl, dis in rep.history_rows():
            w.writerow([epoch, agent, repr(tl), "" if vl is None else repr(vl), repr(dis)])


def write_predictions(actual, forecast, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(PREDICTIONS_HEADER)
        for i, (a, f) in enumerate(zip(actual, forecast)):
            w.writerow([i, repr(float(a)), repr(float(f))])


def load_report(path):
    """Parse a ``report.json`` and check it carries the metric fields."""
    path = Path(path)
    try:
        rep = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"{path}: cannot read report ({exc})") from None
    metrics = rep.get("metrics") if isinstance(rep, dict) else None
    if not isinstance(metrics, dict):
        raise ConfigError(f"{path}: report has no 'metrics' object")
    missing = [k for k in ("mape", "mae", "mse_plain", "mse_relative") if k not in metrics]
    if missing:
        raise ConfigError(f"{path}: metrics missing {', '.join(missing)}")
    return rep


def compare_rows(paths):
    rows = []
    for p in paths:
        rep = load_report(p)
        cfg = rep.get("config", {})
        m = rep["metrics"]
        rows.append({
            "run": cfg.get("name") or Path(p).parent.name,
            "schedule": cfg.get("schedule", ""),
            "mape": m["mape"], "mae": m["mae"],
            "mse": m["mse_plain"], "mse_relative": m["mse_relative"],
        })
    return rows


def markdown_table(rows):
    lines = ["| run | schedule | MAPE (%) | MAE | MSE | MSE (relative) |",
             "|---|---|---:|---:|---:|---:|"]
    for r in rows:
        lines.append(f"| {r['run']} | {r['schedule']} | {100 * r['mape']:.3f} | "
                     f"{r['mae']:.3f} | {r['mse']:.3f} | {r['mse_relative']:.3e} |")
    return "\n".join(lines)


def write_compare_csv(rows, path):
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
