"""Stochastic reconfiguration with a matrix-free conjugate-gradient solve."""
from dataclasses import dataclass, replace
import math

import numpy as np


class IllConditionedError(FloatingPointError):
    pass


@dataclass
class SrBatch:
    """Log-derivatives ``O`` (N_s x N_p) and local energies ``e`` of one batch.

    ``weights`` (optional, summing to one) turns sample means into weighted
    means; exact expectations over an enumerated basis use this.
    """
    O: np.ndarray
    e: np.ndarray
    weights: np.ndarray = None

    def __post_init__(self):
        self.O = np.asarray(self.O, np.float64)
        self.e = np.asarray(self.e, np.float64)
        if self.O.ndim != 2 or self.O.shape[0] != self.e.shape[0]:
            raise ValueError("O must be N_s x N_p with one local energy per row")
        if self.O.shape[0] == 0:
            raise ValueError("empty batch")
        if self.weights is None:
            self.w = np.full(len(self.e), 1.0 / len(self.e))
        else:
            self.w = np.asarray(self.weights, np.float64) / np.sum(self.weights)
        self.O_mean = self.w @ self.O
        self.e_mean = float(self.w @ self.e)

    @property
    def n_samples(self):
        return self.O.shape[0]

    @property
    def n_params(self):
        return self.O.shape[1]


def gradient(batch):
    """g_k = 2 (<e O_k> - <e><O_k>)."""
    if batch.weights is None and batch.n_samples < 2:
        raise ValueError("need at least two samples")
    if np.ptp(batch.e) == 0.0:
        # eigenstate: the mean of equal values need not round back exactly
        return np.zeros(batch.n_params)
    return 2.0 * ((batch.w * (batch.e - batch.e_mean)) @ batch.O)


def fisher_matvec(batch, x, lam):
    """(S + lam I) x with S = <O O^T> - <O><O>^T, never forming S."""
    x = np.asarray(x, np.float64)
    if x.shape != (batch.n_params,):
        raise ValueError(f"x has shape {x.shape}, expected ({batch.n_params},)")
    y = batch.O @ x
    z = (batch.w * y) @ batch.O - batch.O_mean * (batch.O_mean @ x)
    return z + lam * x


@dataclass
class CgResult:
    x: np.ndarray
    iterations: int
    residual: float
    converged: bool


def cg_solve(matvec, g, tol=1e-4, max_iter=500):
    """Plain conjugate gradient from x = 0; stops at ||Ax - g|| <= tol ||g||."""
    g = np.asarray(g, np.float64)
    x = np.zeros_like(g)
    gnorm = np.linalg.norm(g)
    if gnorm == 0.0:
        return CgResult(x, 0, 0.0, True)
    r = g.copy()
    p = r.copy()
    rr = r @ r
    for it in range(1, max_iter + 1):
        Ap = matvec(p)
        pAp = p @ Ap
        if not np.isfinite(pAp) or pAp <= 0.0:
            raise IllConditionedError(f"CG breakdown at iteration {it}: p.Ap = {pAp}")
        alpha = rr / pAp
        x += alpha * p
        r -= alpha * Ap
        rr_new = r @ r
        if not np.isfinite(rr_new):
            raise IllConditionedError(f"non-finite residual at CG iteration {it}")
        res = math.sqrt(rr_new) / gnorm
        if res <= tol:
            return CgResult(x, it, res, True)
        p = r + (rr_new / rr) * p
        rr = rr_new
    return CgResult(x, max_iter, math.sqrt(rr) / gnorm, False)


@dataclass(frozen=True)
class Schedules:
    eta_max: float = 0.1
    eta_min: float = 1e-5
    lambda0: float = 0.1
    b0: float = 0.9
    lambda_min: float = 1e-4
    n_iter: int = 1000
    cg_tol: float = 1e-4
    cg_max: int = 500

    def __post_init__(self):
        vals = (self.eta_max, self.eta_min, self.lambda0, self.b0, self.lambda_min, self.n_iter,
                self.cg_tol, self.cg_max)
        if any(not v > 0 for v in vals):
            raise ValueError("all schedule values must be positive")
        if self.eta_min > self.eta_max:
            raise ValueError("eta_min must not exceed eta_max")
        if self.lambda_min > self.lambda0:
            raise ValueError("lambda_min must not exceed lambda0")

    def lr(self, t):
        return cosine_lr(t, self.n_iter, self.eta_max, self.eta_min)

    def shift(self, t):
        return lambda_schedule(t, self.lambda0, self.b0, self.lambda_min)


PROFILES = {
    "algorithmic": Schedules(),
    "hardware": Schedules(eta_max=0.05, eta_min=0.01),
}


def schedules_for(profile, **overrides):
    try:
        base = PROFILES[profile]
    except KeyError:
        raise ValueError(f"unknown optimizer profile {profile!r}; expected one of {sorted(PROFILES)}") from None
    return replace(base, **overrides)


def cosine_lr(t, n_iter, eta_max, eta_min):
    if not 0 <= t <= n_iter:
        raise ValueError(f"t={t} outside [0, {n_iter}]")
    return eta_min + 0.5 * (eta_max - eta_min) * (1.0 + math.cos(math.pi * t / n_iter))


def lambda_schedule(t, lambda0, b0, lambda_min):
    if t < 0:
        raise ValueError("t must be non-negative")
    return max(lambda_min, lambda0 * b0 ** t)


@dataclass
class SrStepInfo:
    lr: float
    shift: float
    cg: CgResult


def sr_step(batch, t, schedules, lam=None, lr=None):
    """Parameter delta -eta(t) (S + lambda(t) I)^{-1} g and solver diagnostics."""
    lam = schedules.shift(t) if lam is None else lam
    lr = schedules.lr(t) if lr is None else lr
    g = gradient(batch)
    res = cg_solve(lambda x: fisher_matvec(batch, x, lam), g, schedules.cg_tol, schedules.cg_max)
    return -lr * res.x, SrStepInfo(lr, lam, res)
