"""Experiment configs, replicated runs, sweeps and the CSV trace format."""
from __future__ import annotations

import copy
import csv
import io
import itertools
import json
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import IO, Iterable, Iterator

import numpy as np

from ..agents import feedback_of, make_agent
from ..envmodel import (
    DistributionSequence,
    NonStationarityParams,
    compute_params,
    gen_drifting,
    gen_switching,
)
from .runner import ALG_STREAM, LOSS_STREAM, RegretTrace, run_bandit, run_fullinfo, stream

__all__ = [
    "ExperimentConfig",
    "ENV_STREAM",
    "build_env",
    "run_experiment",
    "run_on_sequence",
    "write_traces",
    "read_traces",
    "traces_csv",
    "sweep",
    "summarize",
    "CSV_HEADER",
]

ENV_STREAM = 3
CSV_HEADER = ("step", "cum_regret", "alg", "env", "seed", "rep")


def fmt(x: float) -> str:
    return f"{x:.12g}"


@dataclass
class ExperimentConfig:
    """One experiment: an environment, an algorithm, and how often to replicate.

    ``env`` is ``{"kind": "switching" | "drifting", ...generator params}`` or
    ``{"kind": "file", "path": ...}``.  ``alg`` is ``{"name": ..., ...options}``.
    """

    env: dict = field(default_factory=lambda: {"kind": "switching", "gamma": 2, "gap": 0.5})
    alg: dict = field(default_factory=lambda: {"name": "rerun-ucbv"})
    T: int = 1000
    K: int = 2
    replications: int = 10
    base_seed: int = 0
    out_csv: str | None = None
    out_svg: str | None = None

    def __post_init__(self) -> None:
        if self.replications < 1:
            raise ValueError("replications must be at least 1")
        if self.T < 1 or self.K < 1:
            raise ValueError("T and K must be positive")
        if "kind" not in self.env:
            raise ValueError("env spec needs a 'kind'")
        if "name" not in self.alg:
            raise ValueError("alg spec needs a 'name'")

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        extra = set(d) - known
        if extra:
            raise ValueError(f"unknown config fields: {sorted(extra)}")
        return cls(**copy.deepcopy(d))

    @classmethod
    def load(cls, path: str | Path) -> "ExperimentConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def to_dict(self) -> dict:
        return asdict(self)

    def with_overrides(self, overrides: dict) -> "ExperimentConfig":
        """Apply ``{"T": 4000, "env.gamma": 4, "alg.name": "prod"}``-style overrides."""
        d = self.to_dict()
        for key, value in overrides.items():
            head, _, tail = key.partition(".")
            if tail:
                if head not in ("env", "alg"):
                    raise ValueError(f"cannot override nested key {key!r}")
                d[head][tail] = value
            else:
                d[head] = value
        return type(self).from_dict(d)

    @property
    def env_id(self) -> str:
        spec = self.env
        if spec["kind"] == "file":
            return Path(spec["path"]).stem
        params = ",".join(f"{k}={spec[k]}" for k in sorted(spec) if k != "kind")
        return f"{spec['kind']}({params})" if params else spec["kind"]


def build_env(config: ExperimentConfig) -> DistributionSequence:
    """Materialise the environment; generated ones draw from the ``(base_seed, ENV_STREAM)`` stream."""
    spec = dict(config.env)
    kind = spec.pop("kind")
    rng = stream(config.base_seed, ENV_STREAM)
    if kind == "file":
        seq = DistributionSequence.load(spec["path"])
    elif kind == "switching":
        seq = gen_switching(config.K, config.T, int(spec.get("gamma", 2)), float(spec.get("gap", 0.5)),
                            rng, sigma2=float(spec.get("sigma2", 0.0)))
    elif kind == "drifting":
        seq = gen_drifting(config.K, config.T, float(spec.get("drift", 1.0)),
                           float(spec.get("sigma2", 0.0)), rng)
    else:
        raise ValueError(f"unknown environment kind {kind!r}")
    if (seq.horizon, seq.arms) != (config.T, config.K):
        raise ValueError(f"environment is {seq.horizon}x{seq.arms}, config says {config.T}x{config.K}")
    return seq


def run_on_sequence(alg: dict, seq: DistributionSequence, seed: int, rep: int = 0, *,
                    env_id: str = "", params: NonStationarityParams | None = None) -> RegretTrace:
    """One replication of ``alg`` on ``seq``; the agent is told ``params`` (default: the true ones)."""
    opts = dict(alg)
    name = opts.pop("name")
    params = params if params is not None else compute_params(seq)
    agent = make_agent(name, seq.arms, seq.horizon, params, stream(seed, ALG_STREAM), **opts)
    run = run_fullinfo if feedback_of(agent) == "full" else run_bandit
    return run(agent, seq, stream(seed, LOSS_STREAM), alg=name, env=env_id, seed=seed, rep=rep)


def iter_experiment(config: ExperimentConfig, seq: DistributionSequence | None = None
                    ) -> Iterator[RegretTrace]:
    seq = seq if seq is not None else build_env(config)
    params = compute_params(seq)
    for rep in range(config.replications):
        yield run_on_sequence(config.alg, seq, config.base_seed + rep, rep,
                              env_id=config.env_id, params=params)


def run_experiment(config: ExperimentConfig, seq: DistributionSequence | None = None) -> list[RegretTrace]:
    traces = list(iter_experiment(config, seq))
    if config.out_csv:
        with open(config.out_csv, "w", newline="") as fh:
            write_traces(traces, fh)
    return traces


def write_traces(traces: Iterable[RegretTrace], fh: IO[str], header: bool = True) -> None:
    w = csv.writer(fh, lineterminator="\n")
    if header:
        w.writerow(CSV_HEADER)
    for tr in traces:
        tail = (tr.alg, tr.env, tr.seed, tr.rep)
        w.writerows((t, fmt(v), *tail) for t, v in enumerate(tr.cum_regret.tolist(), start=1))


def traces_csv(traces: Iterable[RegretTrace]) -> str:
    buf = io.StringIO()
    write_traces(traces, buf)
    return buf.getvalue()


def read_traces(fh: IO[str]) -> list[RegretTrace]:
    """Inverse of :func:`write_traces` (one trace per ``(alg, env, seed, rep)`` run of rows)."""
    reader = csv.reader(fh)
    head = next(reader, None)
    if head is None:
        return []
    if tuple(head) != CSV_HEADER:
        raise ValueError(f"unexpected CSV header {head}")
    groups: dict[tuple, list[float]] = {}
    for row in reader:
        key = (row[2], row[3], int(row[4]), int(row[5]))
        groups.setdefault(key, []).append(float(row[1]))
    return [RegretTrace(np.array(v), *k) for k, v in groups.items()]


def summarize(finals: Iterable[float]) -> tuple[float, float]:
    """Mean and standard error (zero for a single replication)."""
    x = np.asarray(list(finals), dtype=float)
    if x.size == 0:
        raise ValueError("nothing to summarise")
    se = float(x.std(ddof=1) / math.sqrt(x.size)) if x.size > 1 else 0.0
    return float(x.mean()), se


def sweep(base: ExperimentConfig, grid: dict[str, list], out: IO[str] | None = None) -> list[dict]:
    """Cartesian sweep; one row (mean final regret, standard error) per cell, written as it completes."""
    keys = sorted(grid)
    columns = [*keys, "replications", "mean_final_regret", "stderr"]
    writer = None
    if out is not None:
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(columns)
    rows = []
    for values in itertools.product(*(grid[k] for k in keys)):
        cfg = base.with_overrides(dict(zip(keys, values)))
        mean, se = summarize(tr.final for tr in iter_experiment(cfg))
        row = dict(zip(keys, values), replications=cfg.replications, mean_final_regret=mean, stderr=se)
        rows.append(row)
        if writer is not None:
            writer.writerow([*(str(v) for v in values), cfg.replications, fmt(mean), fmt(se)])
            out.flush()
    return rows
