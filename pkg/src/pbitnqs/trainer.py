"""Outer VMC loop: sample, estimate local energies, SR update; final evaluation."""
from dataclasses import dataclass, field
import csv
import io
import logging
import time

import numpy as np

from .estimator import CollapsedEstimatorError, local_energies_dbm, local_energies_rbm
from .lattice import build_tfim_bonds
from .model import DBM, FRBM, dbm_topology, frbm_topology, init_params, quantize
from .rng import StreamSplitter, substreams
from .partition import partition_graph, partitioned_chain, stale_sweep
from .sampler import BoltzmannNetwork, new_chain, sample_states
from .stats import blocking_se
from .sr import IllConditionedError, SrBatch, schedules_for, sr_step

log = logging.getLogger(__name__)

CHEMICAL_ACCURACY = 1.6e-3
METRICS_HEADER = ["iter", "energy_per_spin", "std_err", "lr", "lambda", "cg_iters", "cg_flag", "wall_ms"]

# master-seed substreams (jump index)
STREAM_OUTER, STREAM_INNER, STREAM_EVAL_OUTER, STREAM_EVAL_INNER = range(4)


class TrainingAbort(RuntimeError):
    pass


@dataclass
class TrainingConfig:
    L: int
    arch: str = FRBM
    k1: float = 2
    k2: float = None
    J: float = 1.0
    gamma: float = 3.044
    n_iter: int = 1000
    n_s: int = 10_000
    n_c: int = 1000
    n_eval: int = 1_000_000
    eval_n_c: int = None
    profile: str = "algorithmic"
    schedule_overrides: dict = field(default_factory=dict)
    seed: int = 0
    quantize: bool = False
    burn_in: int = None
    sweeps_per_sample: int = 1
    bins: int = 50
    beta: float = 1.0
    threads: int = None
    partitions: int = 1
    tau: int = 1
    lr_scale: float = 1.0       # eta multiplier; 1/s is the same as training on H/s

    def __post_init__(self):
        if self.arch not in (FRBM, DBM):
            raise ValueError(f"arch must be 'frbm' or 'dbm', got {self.arch!r}")
        if self.arch == DBM and self.k2 is None:
            self.k2 = self.k1
        if self.burn_in is None:
            self.burn_in = 10 * self.L
        if self.eval_n_c is None:
            self.eval_n_c = self.n_c
        for name in ("L", "n_iter", "n_s", "n_c", "n_eval", "eval_n_c", "sweeps_per_sample", "bins",
                     "partitions", "tau", "lr_scale"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.burn_in < 0:
            raise ValueError("burn_in must be non-negative")

    @property
    def n_sites(self):
        return self.L * self.L

    def topology(self):
        if self.arch == FRBM:
            return frbm_topology(self.L, self.k1)
        return dbm_topology(self.L, self.k1, self.k2)

    def schedules(self):
        return schedules_for(self.profile, n_iter=self.n_iter, **self.schedule_overrides)


@dataclass
class IterationMetrics:
    iter: int
    energy_per_spin: float
    std_err: float
    lr: float
    lam: float
    cg_iters: int
    cg_residual_flag: bool
    wall_ms: float
    clipped: int = 0

    def row(self, wall_time=True):
        return [self.iter, repr(self.energy_per_spin), repr(self.std_err), repr(self.lr), repr(self.lam),
                self.cg_iters, int(self.cg_residual_flag), f"{self.wall_ms:.3f}" if wall_time else "0"]


def chemical_accuracy_check(E, E_ref, band=CHEMICAL_ACCURACY):
    if E_ref == 0:
        raise ValueError("reference energy is zero")
    return abs(E - E_ref) / abs(E_ref) <= band


class LocalEnergyEngine:
    """Local energies for one architecture; owns the inner-loop stream splitter."""

    def __init__(self, cfg, inner_state, n_c):
        self.cfg = cfg
        self.bonds = build_tfim_bonds(cfg.L)
        self.splitter = StreamSplitter(inner_state)
        self.n_c = n_c

    def __call__(self, states, theta, theta_q):
        cfg = self.cfg
        nv = theta.topology.n_visible
        if theta.arch == FRBM:
            e, O = local_energies_rbm(states[:, :nv], theta, self.bonds, cfg.J, cfg.gamma)
            return e, O, 0
        return local_energies_dbm(states, theta, theta_q, self.bonds, cfg.J, cfg.gamma, self.n_c,
                                  self.splitter, cfg.beta, cfg.threads)


def _sampler_params(cfg, theta):
    return quantize(theta) if cfg.quantize else theta


@dataclass
class TrainingResult:
    theta: object
    history: list

    def energies(self):
        return np.array([m.energy_per_spin for m in self.history])


class OuterSampler:
    """Persistent free-running chain, optionally split across simulated devices.

    With more than one partition (or tau > 1) one sample is taken per
    exchange round of ``tau`` sweeps; burn-in is rounded up to whole rounds.
    """

    def __init__(self, cfg, topo, state):
        self.cfg = cfg
        if cfg.partitions == 1 and cfg.tau == 1:
            self.partition = None
            self.chain = new_chain(topo.n_nodes, state=state)
        else:
            self.partition = partition_graph(topo.graph, cfg.partitions, seed=cfg.seed)
            self.chain = partitioned_chain(topo.n_nodes, cfg.partitions, state=state)

    def __call__(self, net, n):
        cfg = self.cfg
        if self.partition is None:
            return sample_states(self.chain, net, n, cfg.burn_in, cfg.sweeps_per_sample)
        tau = cfg.tau
        every = -(-cfg.sweeps_per_sample // tau)
        stale_sweep(self.chain, self.partition, net, tau, -(-cfg.burn_in // tau))
        return stale_sweep(self.chain, self.partition, net, tau, n * every, record=True)[every - 1::every]


def train(cfg, theta0=None, callback=None):
    """Run ``cfg.n_iter`` SR iterations; returns final parameters and per-iteration metrics."""
    topo = cfg.topology()
    theta = init_params(topo, cfg.seed) if theta0 is None else theta0
    streams = substreams(cfg.seed, 4)
    sampler = OuterSampler(cfg, topo, streams[STREAM_OUTER])
    engine = LocalEnergyEngine(cfg, streams[STREAM_INNER], cfg.n_c)
    sched = cfg.schedules()
    bins = min(cfg.bins, cfg.n_s)
    history = []
    for t in range(cfg.n_iter):
        t0 = time.perf_counter()
        theta_q = _sampler_params(cfg, theta)
        net = BoltzmannNetwork.from_params(theta_q, cfg.beta)
        states = sampler(net, cfg.n_s)
        try:
            e, O, clipped = engine(states, theta, theta_q)
        except CollapsedEstimatorError as exc:
            raise TrainingAbort(f"iteration {t}: {exc}") from exc
        if not np.all(np.isfinite(e)):
            raise TrainingAbort(f"iteration {t}: non-finite local energy (mean {np.mean(e)})")
        batch = SrBatch(O, e)
        try:
            delta, info = sr_step(batch, t, sched, lr=cfg.lr_scale * sched.lr(t))
        except IllConditionedError as exc:
            raise TrainingAbort(f"iteration {t}: {exc}") from exc
        if not info.cg.converged:
            log.warning("iteration %d: CG stopped at residual %.3g", t, info.cg.residual)
        new = theta.theta + delta
        if not np.all(np.isfinite(new)):
            raise TrainingAbort(f"iteration {t}: non-finite parameter update")
        theta = theta.with_theta(new)
        m = IterationMetrics(t, batch.e_mean / cfg.n_sites, blocking_se(e, bins) / cfg.n_sites,
                             info.lr, info.shift, info.cg.iterations, not info.cg.converged,
                             1e3 * (time.perf_counter() - t0), clipped)
        history.append(m)
        if callback is not None:
            callback(m, theta)
    return TrainingResult(theta, history)


def evaluate(theta, cfg, n_eval=None, bins=None, seed=None, chunk=10_000):
    """Frozen-parameter energy per spin and its blocking standard error."""
    n_eval = cfg.n_eval if n_eval is None else n_eval
    bins = cfg.bins if bins is None else bins
    streams = substreams(cfg.seed if seed is None else seed, 4)
    chain = new_chain(theta.topology.n_nodes, state=streams[STREAM_EVAL_OUTER])
    engine = LocalEnergyEngine(cfg, streams[STREAM_EVAL_INNER], cfg.eval_n_c)
    theta_q = _sampler_params(cfg, theta)
    net = BoltzmannNetwork.from_params(theta_q, cfg.beta)
    e = np.empty(n_eval)
    done = 0
    while done < n_eval:
        n = min(chunk, n_eval - done)
        states = sample_states(chain, net, n, cfg.burn_in if done == 0 else 0, cfg.sweeps_per_sample)
        e[done:done + n] = engine(states, theta, theta_q)[0]
        done += n
    return float(e.mean() / cfg.n_sites), blocking_se(e, bins) / cfg.n_sites


def metrics_csv(history, wall_time=False):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(METRICS_HEADER)
    for m in history:
        w.writerow(m.row(wall_time))
    return buf.getvalue()
