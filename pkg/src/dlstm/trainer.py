"""Distributed LSTM training over a communication graph.

Every agent owns one :class:`~dlstm.data.Shard` and a private copy of the
model. The only thing that ever leaves an agent is its packed parameter
vector, which enters :func:`consensus_round` together with its neighbours'.

Two orderings are supported:

* ``LBC`` (learn before consensus): local gradient steps, then averaging.
* ``CBL`` (consensus before learn): averaging, then local gradient steps.

``CENTRALIZED`` is plain gradient descent on the union of all data and goes
through the same code path with a single agent.
"""

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .graph import contraction_factor, is_connected, metropolis_weights
from .lstm import Batch, LstmParams, empirical_loss, init_params, loss_and_gradient, stack

SCHEDULES = ("LBC", "CBL", "CENTRALIZED")


class TrainingDivergence(RuntimeError):
    """A loss or gradient went non-finite. ``report`` holds the history so far."""

    def __init__(self, epoch, report, cause=None):
        super().__init__(f"training diverged at epoch {epoch}" + (f": {cause}" if cause else ""))
        self.epoch = epoch
        self.report = report


@dataclass
class TrainConfig:
    schedule: str = "LBC"
    epochs: int = 100
    consensus_rounds: int = 20
    batch_size: int | None = None  # None trains on the full shard each step
    learning_rate: float = 0.1
    seed: int = 0
    disagreement_tolerance: float = 1e-6
    hidden_size: int = 16
    consensus_every_batch: bool = False
    max_trailing_rounds: int = 1000

    def __post_init__(self):
        self.schedule = str(self.schedule).upper()
        if self.schedule not in SCHEDULES:
            raise ValueError(f"schedule must be one of {SCHEDULES}, got {self.schedule!r}")
        if self.epochs < 1:
            raise ValueError("epochs must be at least 1")
        if self.schedule != "CENTRALIZED" and self.consensus_rounds < 1:
            raise ValueError("consensus_rounds must be at least 1 for distributed schedules")
        if not 0.0 < self.learning_rate <= 1.0:
            raise ValueError(f"learning_rate must lie in (0, 1], got {self.learning_rate}")
        if self.batch_size is not None and self.batch_size < 1:
            raise ValueError("batch_size must be positive (or None for full batch)")
        if self.hidden_size < 1:
            raise ValueError("hidden_size must be at least 1")
        if self.disagreement_tolerance <= 0:
            raise ValueError("disagreement_tolerance must be positive")


@dataclass
class AgentState:
    agent_id: int
    params: LstmParams
    shard: object
    learning_rate: float


@dataclass
class TrainReport:
    schedule: str
    n_agents: int
    dims: tuple
    train_loss: list = field(default_factory=list)  # [epoch][agent]
    val_loss: list = field(default_factory=list)  # [epoch][agent]
    mean_val_loss: list = field(default_factory=list)  # [epoch], at agent-mean params
    disagreement: list = field(default_factory=list)  # [epoch]
    trailing_rounds: int = 0
    final_disagreement: float = 0.0
    agent_params: list = field(default_factory=list)
    consensus_params: np.ndarray | None = None
    timings: dict = field(default_factory=dict)
    trajectory: list | None = None  # [epoch][agent] packed params, when requested

    @property
    def epochs(self):
        return len(self.train_loss)

    def final_model(self):
        return LstmParams.from_flat(self.consensus_params, *self.dims)

    def history_rows(self):
        """``(epoch, agent, train_loss, val_loss, disagreement)`` tuples, 1-based epochs."""
        rows = []
        for e in range(self.epochs):
            for a in range(self.n_agents):
                val = self.val_loss[e][a] if self.val_loss else None
                rows.append((e + 1, a, self.train_loss[e][a], val, self.disagreement[e]))
        return rows

    def to_dict(self, include_params=True):
        """JSON-ready summary. Timings are left out so the output is reproducible."""
        out = {
            "schedule": self.schedule,
            "n_agents": self.n_agents,
            "dims": {"input_size": self.dims[0], "hidden_size": self.dims[1],
                     "readout_extras": self.dims[2]},
            "epochs": self.epochs,
            "history": {
                "train_loss": self.train_loss,
                "val_loss": self.val_loss,
                "mean_val_loss": self.mean_val_loss,
                "disagreement": self.disagreement,
            },
            "trailing_rounds": self.trailing_rounds,
            "final_disagreement": self.final_disagreement,
        }
        if include_params and self.consensus_params is not None:
            out["consensus_params"] = self.consensus_params.tolist()
            out["agent_params"] = [p.tolist() for p in self.agent_params]
        return out


def disagreement(params):
    """Largest 2-norm distance between any two agents' parameter vectors."""
    X = np.asarray([np.asarray(p, dtype=float) for p in params])
    if X.ndim != 2:
        raise ValueError("parameter vectors must all have the same length")
    worst = 0.0
    for i in range(len(X)):
        for j in range(i + 1, len(X)):
            worst = max(worst, float(np.linalg.norm(X[i] - X[j])))
    return worst


def consensus_round(candidates, W, rounds):
    """Apply ``v <- W v`` coordinate-wise ``rounds`` times.

    Agent ``i`` combines only the vectors of agents with ``W[i, j] != 0``
    (itself and its neighbours), in ascending index order.
    """
    X = [np.asarray(c, dtype=float) for c in candidates]
    W = np.asarray(W, dtype=float)
    n = len(X)
    if W.shape != (n, n):
        raise ValueError(f"mixing matrix is {W.shape}, expected ({n}, {n})")
    if len({x.shape for x in X}) > 1:
        raise ValueError("candidate vectors have different lengths")
    support = [[j for j in range(n) if W[i, j] != 0.0] for i in range(n)]
    for _ in range(rounds):
        new = []
        for i in range(n):
            acc = np.zeros_like(X[0])
            for j in support[i]:
                acc += W[i, j] * X[j]
            new.append(acc)
        X = new
    return X


def descent_step(theta, grad, learning_rate):
    return np.asarray(theta, dtype=float) - learning_rate * np.asarray(grad, dtype=float)


def local_gradient_step(agent, batch):
    """Candidate parameters after one gradient step on the agent's own data.

    ``agent.params`` is left untouched.
    """
    _, grad = loss_and_gradient(agent.params, batch)
    theta = agent.params.flat()
    return LstmParams.from_flat(descent_step(theta, grad, agent.learning_rate), *agent.params.dims)


def _shard_arrays(shard):
    samples = shard.samples if hasattr(shard, "samples") else shard
    return stack(list(samples))


def _subset(full, idx):
    return Batch(full.X[idx], full.ctx[idx], full.y[idx])


class _Agent:
    """Private per-agent training state: data, batch plan RNG and parameters."""

    def __init__(self, state, rng):
        self.state = state
        self.data = _shard_arrays(state.shard)
        self.rng = rng

    def plan(self, batch_size):
        n = len(self.data)
        if batch_size is None or batch_size >= n:
            return [self.data]
        order = self.rng.permutation(n)
        return [_subset(self.data, order[k:k + batch_size]) for k in range(0, n, batch_size)]

    def step(self, batch):
        self.state.params = local_gradient_step(self.state, batch)

    def train(self, batches):
        start = time.perf_counter()
        for b in batches:
            self.step(b)
        return time.perf_counter() - start


def _run(cfg, shards, W, validation, workers=1, record_trajectory=False):
    n = len(shards)
    if n == 0:
        raise ValueError("no shards")
    first = _shard_arrays(shards[0])
    D, E = first.X.shape[2], first.ctx.shape[1]
    dims = (D, cfg.hidden_size, E)
    init = init_params(D, cfg.hidden_size, E, seed=cfg.seed)
    seeds = np.random.SeedSequence(cfg.seed).spawn(n)
    agents = [
        _Agent(AgentState(i, LstmParams.from_flat(init.flat(), *dims), shards[i], cfg.learning_rate),
               np.random.default_rng(seeds[i]))
        for i in range(n)
    ]
    val = _shard_arrays(validation) if validation is not None else None
    report = TrainReport(schedule=cfg.schedule, n_agents=n, dims=dims,
                         trajectory=[] if record_trajectory else None)
    timings = dict(local_seconds=0.0, local_parallel_seconds=0.0, consensus_seconds=0.0,
                   trailing_consensus_seconds=0.0, eval_seconds=0.0)
    pool = ThreadPoolExecutor(max_workers=workers) if workers > 1 and n > 1 else None

    def local_phase(plans):
        if pool is None:
            elapsed = [a.train(p) for a, p in zip(agents, plans)]
        else:
            elapsed = list(pool.map(lambda ap: ap[0].train(ap[1]), zip(agents, plans)))
        timings["local_seconds"] += sum(elapsed)
        timings["local_parallel_seconds"] += max(elapsed)

    def mix():
        if n == 1:
            return
        start = time.perf_counter()
        mixed = consensus_round([a.state.params.flat() for a in agents], W, cfg.consensus_rounds)
        for a, v in zip(agents, mixed):
            a.state.params = LstmParams.from_flat(v, *dims)
        timings["consensus_seconds"] += time.perf_counter() - start

    def phases(plans):
        if cfg.schedule == "CBL":
            mix()
            local_phase(plans)
        else:
            local_phase(plans)
            mix()

    total_start = time.perf_counter()
    # non-finite values are caught explicitly and raised as TrainingDivergence
    with np.errstate(over="ignore", invalid="ignore"):
        try:
            for epoch in range(1, cfg.epochs + 1):
                try:
                    plans = [a.plan(cfg.batch_size) for a in agents]
                    if cfg.consensus_every_batch:
                        for s in range(max(len(p) for p in plans)):
                            phases([p[s:s + 1] for p in plans])
                    else:
                        phases(plans)
                    _record_epoch(report, agents, val, timings)
                except FloatingPointError as exc:
                    raise TrainingDivergence(epoch, report, exc) from exc
                if not np.isfinite(report.train_loss[-1]).all():
                    raise TrainingDivergence(epoch, report, "non-finite training loss")

            start = time.perf_counter()
            vectors = [a.state.params.flat() for a in agents]
            gap = disagreement(vectors)
            while (n > 1 and gap > cfg.disagreement_tolerance
                   and report.trailing_rounds < cfg.max_trailing_rounds):
                vectors = consensus_round(vectors, W, cfg.consensus_rounds)
                report.trailing_rounds += 1
                gap = disagreement(vectors)
            timings["trailing_consensus_seconds"] = time.perf_counter() - start
        finally:
            if pool is not None:
                pool.shutdown()

    report.final_disagreement = gap
    report.agent_params = vectors
    report.consensus_params = _mean(vectors)
    timings["total_seconds"] = time.perf_counter() - total_start
    report.timings = timings
    return report


def _mean(vectors):
    acc = np.zeros_like(vectors[0])
    for v in vectors:
        acc += v
    return acc / len(vectors)


def _record_epoch(report, agents, val, timings):
    start = time.perf_counter()
    vectors = [a.state.params.flat() for a in agents]
    report.train_loss.append([empirical_loss(a.state.params, a.data) for a in agents])
    if val is not None:
        report.val_loss.append([empirical_loss(a.state.params, val) for a in agents])
        mean_params = LstmParams.from_flat(_mean(vectors), *agents[0].state.params.dims)
        report.mean_val_loss.append(empirical_loss(mean_params, val))
    report.disagreement.append(disagreement(vectors))
    if report.trajectory is not None:
        report.trajectory.append(vectors)
    timings["eval_seconds"] += time.perf_counter() - start


def _check_graph(shards, g):
    if g.n_agents != len(shards):
        raise ValueError(f"topology has {g.n_agents} agents but {len(shards)} shards were given")
    if not is_connected(g):
        raise ValueError("communication graph is not connected")
    return metropolis_weights(g)


def train_lbc(cfg, shards, g, validation, workers=1, record_trajectory=False):
    """Learning before consensus: local steps on each shard, then K mixing rounds."""
    W = _check_graph(shards, g)
    if cfg.schedule != "LBC":
        cfg = _with_schedule(cfg, "LBC")
    return _run(cfg, shards, W, validation, workers, record_trajectory)


def train_cbl(cfg, shards, g, validation, workers=1, record_trajectory=False):
    """Consensus before learning: K mixing rounds, then local steps from the mixed point."""
    W = _check_graph(shards, g)
    if cfg.schedule != "CBL":
        cfg = _with_schedule(cfg, "CBL")
    return _run(cfg, shards, W, validation, workers, record_trajectory)


def train_centralized(cfg, full, validation, record_trajectory=False):
    """Single-model gradient descent on the pooled data."""
    if len(full) == 0:
        raise ValueError("empty dataset")
    if cfg.schedule != "CENTRALIZED":
        cfg = _with_schedule(cfg, "CENTRALIZED")
    return _run(cfg, [full], np.ones((1, 1)), validation, 1, record_trajectory)


def train(cfg, shards, g, validation, workers=1, record_trajectory=False):
    """Dispatch on ``cfg.schedule``; the centralized run pools all shards in order."""
    if cfg.schedule == "CENTRALIZED":
        pooled = [s for shard in shards for s in shard.samples]
        from .data import Shard
        return train_centralized(cfg, Shard(tuple(pooled), "pooled"), validation, record_trajectory)
    fn = train_lbc if cfg.schedule == "LBC" else train_cbl
    return fn(cfg, shards, g, validation, workers, record_trajectory)


def _with_schedule(cfg, schedule):
    from dataclasses import replace
    return replace(cfg, schedule=schedule)


def topology_summary(g):
    """Mixing matrix and its contraction factor, for reports."""
    if g.n_agents == 1:
        return {"n_agents": 1, "edges": [], "contraction_factor": 0.0}
    W = metropolis_weights(g)
    return {"n_agents": g.n_agents, "edges": [list(e) for e in g.edges],
            "contraction_factor": contraction_factor(W)}


