"""MCMC engine for mixed binary/continuous data.

The joint law of the (centered) discrete columns and the continuous columns
is Gaussian given latent Polya-Gamma scales: the precision matrix factorizes
as Omega = Theta Gamma Theta with Theta_i = sqrt(Omega_ii) and Gamma the
unit-diagonal matrix of (negated) partial correlations.  Discrete diagonal
entries are tied to the PG scales (Omega_jj = 1 / omega_j, omega_j ~ PG(n, 0));
continuous diagonal entries carry a Gamma-type prior; Gamma itself gets a
spike/slab treatment with exact zeros, which is what the sign tables need.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from . import dist
from .backend import core
from .errors import (
    ChainError,
    DimensionMismatch,
    EmptySampleSet,
    InvalidParams,
    SchemaMismatch,
)
from .gsm import PosteriorSummary


@dataclass(frozen=True)
class MixedData:
    """n samples over d discrete-first plus q continuous columns.

    ``values`` holds the raw (uncentered) matrix; ``centering`` is the
    constant subtracted from discrete columns before likelihood evaluation.
    """

    n: int
    d: int
    q: int
    values: np.ndarray
    centering: float = 0.0

    @classmethod
    def from_matrix(cls, values, d: int, centering: float = 0.0) -> "MixedData":
        values = np.asarray(values, dtype=float)
        if values.ndim != 2:
            raise DimensionMismatch("need an n x (d+q) matrix")
        n, p = values.shape
        if not (0 <= d <= p):
            raise InvalidParams("discrete count out of range")
        disc = values[:, :d]
        if disc.size and not np.allclose(disc, np.round(disc)):
            raise SchemaMismatch("discrete columns must be integer-valued before centering")
        return cls(n=n, d=d, q=p - d, values=values, centering=float(centering))

    @property
    def p(self) -> int:
        return self.d + self.q


def center_discrete(data: MixedData, c: float | None = None) -> np.ndarray:
    """Transformed matrix: discrete columns shifted by -c, continuous untouched."""
    c = data.centering if c is None else c
    out = np.array(data.values, dtype=float, copy=True)
    out[:, : data.d] -= c
    return out


@dataclass(frozen=True)
class PrecisionDecomp:
    """Diagonal/partial-correlation split of the precision matrix.

    ``gamma`` is unit-diagonal positive definite; ``inclusion`` marks the
    slab entries, and spike entries of gamma are exactly zero.
    """

    theta: np.ndarray
    gamma: np.ndarray
    inclusion: np.ndarray

    def precision(self) -> np.ndarray:
        t = self.theta
        return self.gamma * np.outer(t, t)


@dataclass(frozen=True)
class MixedState:
    omega: np.ndarray
    decomp: PrecisionDecomp
    loglik: float


def precision_from_state(state: MixedState) -> np.ndarray:
    """Omega = Theta Gamma Theta; spike entries are exactly zero.

    Block reading: discrete-discrete entries are the negated pair
    interactions, discrete-continuous the negated cross couplings,
    continuous-continuous the conditional precisions, with diagonals
    1/omega_j on the discrete side.
    """
    return state.decomp.precision()


@dataclass(frozen=True)
class MixedConfig:
    alpha: float
    beta: float
    iters: int
    burnin: int
    seed: int
    slab_prob: float = 0.5
    omega_step: float = 0.3
    theta_step: float = 0.3
    gamma_rw_sd: float = 0.1
    recheck_every: int = 1000

    def __post_init__(self):
        if self.alpha <= 0 or self.beta <= 0:
            raise InvalidParams("alpha and beta must be positive")
        if not (0 < self.slab_prob < 1):
            raise InvalidParams("slab_prob must lie in (0, 1)")
        if not (self.iters > self.burnin >= 0):
            raise InvalidParams("need iters > burnin >= 0")


@dataclass
class MixedSamples:
    """Mergeable post-burn-in accumulator for the mixed chain."""

    p: int
    d: int
    count: int = 0
    incl_freq: np.ndarray = None
    precision_sum: np.ndarray = None
    omega_sum: np.ndarray = None
    loglik_trace: list = field(default_factory=list)
    acceptance: dict = field(default_factory=dict)
    max_drift: float = 0.0

    def __post_init__(self):
        if self.incl_freq is None:
            self.incl_freq = np.zeros((self.p, self.p))
        if self.precision_sum is None:
            self.precision_sum = np.zeros((self.p, self.p))
        if self.omega_sum is None:
            self.omega_sum = np.zeros(self.d)


def merge_mixed_samples(parts: Sequence[MixedSamples]) -> MixedSamples:
    if not parts:
        raise EmptySampleSet("nothing to merge")
    out = MixedSamples(parts[0].p, parts[0].d)
    for part in parts:
        if (part.p, part.d) != (out.p, out.d):
            raise DimensionMismatch("chains have different dimensions")
        out.count += part.count
        out.incl_freq += part.incl_freq
        out.precision_sum += part.precision_sum
        out.omega_sum += part.omega_sum
        out.loglik_trace.extend(part.loglik_trace)
        out.max_drift = max(out.max_drift, part.max_drift)
        for k, v in part.acceptance.items():
            a, b = out.acceptance.get(k, (0, 0))
            out.acceptance[k] = (a + v[0], b + v[1])
    return out


def summarize_mixed(samples: MixedSamples, threshold: float = 0.5) -> PosteriorSummary:
    """Same decision rule as the continuous model: a pair is classified
    nonzero when its inclusion frequency exceeds the threshold, with the
    sign of the posterior-mean precision entry."""
    if samples.count < 1:
        raise EmptySampleSet("need at least one post-burn-in sample")
    p = samples.p
    edge_prob = samples.incl_freq / samples.count
    np.fill_diagonal(edge_prob, 1.0)
    mean_prec = samples.precision_sum / samples.count
    sign = np.zeros((p, p), dtype=np.int8)
    keep = edge_prob > threshold
    sign[keep] = np.sign(mean_prec[keep]).astype(np.int8)
    rates = {k: (a / max(n, 1)) for k, (a, n) in sorted(samples.acceptance.items())}
    return PosteriorSummary(
        edge_prob=edge_prob,
        mean_precision=mean_prec,
        sign_class=sign,
        scale_means=samples.omega_sum / samples.count,
        loglik_trace=np.asarray(samples.loglik_trace),
        acceptance_rates=rates,
        max_drift=samples.max_drift,
    )


class _MixedEngine:
    def __init__(self, data: MixedData, config: MixedConfig,
                 state: MixedState | None = None):
        self.data = data
        self.cfg = config
        self.n, self.d, self.p = data.n, data.d, data.p
        x = center_discrete(data)
        self.gram = np.ascontiguousarray(x.T @ x)
        if state is None:
            omega = np.full(self.d, max(self.n, 1) / 4.0)
            theta = np.empty(self.p)
            theta[: self.d] = 1.0 / np.sqrt(omega)
            var = x.var(axis=0) if self.n > 0 else np.ones(self.p)
            theta[self.d:] = 1.0 / np.sqrt(np.maximum(var[self.d:], 1e-8))
            gamma = np.eye(self.p)
            incl = np.zeros((self.p, self.p), dtype=np.uint8)
        else:
            omega = np.asarray(state.omega, dtype=float).copy()
            theta = np.asarray(state.decomp.theta, dtype=float).copy()
            gamma = np.asarray(state.decomp.gamma, dtype=float).copy()
            incl = np.asarray(state.decomp.inclusion, dtype=np.uint8).copy()
        self.omega = omega
        self.theta = theta
        self.gamma = np.ascontiguousarray(gamma)
        self.incl = np.ascontiguousarray(incl)
        self._pg_table = dist.pg_density_table(float(self.n)) if self.d else None
        self.refresh()
        self.omega_steps = np.full(self.d, config.omega_step)
        self.theta_steps = np.full(self.p - self.d, config.theta_step)

    def refresh(self) -> None:
        """Recompute the Gamma inverse and log determinant from scratch; the
        Cholesky doubles as a positive-definiteness certificate."""
        try:
            chol = np.linalg.cholesky(self.gamma)
        except np.linalg.LinAlgError as exc:
            raise ChainError("partial-correlation matrix lost positive definiteness") from exc
        self.ainv = np.ascontiguousarray(
            np.linalg.inv(chol).T @ np.linalg.inv(chol)
        )
        self.logdet_gamma = 2.0 * float(np.sum(np.log(np.diag(chol))))

    def _trace_term(self) -> float:
        t = self.theta
        return float(np.einsum("i,j,ij,ij->", t, t, self.gram, self.gamma))

    def loglik(self) -> float:
        return (
            -0.5 * self.n * self.p * math.log(2 * math.pi)
            + 0.5 * self.n * (2.0 * float(np.log(self.theta).sum()) + self.logdet_gamma)
            - 0.5 * self._trace_term()
        )

    def _diag_cross(self, j: int) -> float:
        # sum_{i != j} theta_i * gram_ij * gamma_ij
        row = self.theta * self.gram[j] * self.gamma[j]
        return float(row.sum() - row[j])

    def omega_move(self, j: int, rng, step: float) -> bool:
        w_old = self.omega[j]
        w_new = w_old * math.exp(step * rng.standard_normal())
        if not math.isfinite(w_new) or w_new <= 0:
            return False
        th_old = self.theta[j]
        th_new = 1.0 / math.sqrt(w_new)
        cross = self._diag_cross(j)
        d_trace = (th_new**2 - th_old**2) * self.gram[j, j] + 2.0 * (th_new - th_old) * cross
        d_loglik = self.n * (math.log(th_new) - math.log(th_old)) - 0.5 * d_trace
        log_acc = (
            d_loglik
            + self._pg_table(w_new)
            - self._pg_table(w_old)
            + math.log(w_new)
            - math.log(w_old)
        )
        if math.log(rng.random()) < log_acc:
            self.omega[j] = w_new
            self.theta[j] = th_new
            return True
        return False

    def theta_move(self, g: int, rng, step: float) -> bool:
        j = self.d + g
        th_old = self.theta[j]
        th_new = th_old * math.exp(step * rng.standard_normal())
        if not math.isfinite(th_new) or th_new <= 0:
            return False
        cross = self._diag_cross(j)
        d_trace = (th_new**2 - th_old**2) * self.gram[j, j] + 2.0 * (th_new - th_old) * cross
        d_loglik = self.n * (math.log(th_new) - math.log(th_old)) - 0.5 * d_trace
        # Gamma(alpha, rate beta) prior on theta^2 plus the log-walk measure
        log_acc = (
            d_loglik
            + 2.0 * self.cfg.alpha * (math.log(th_new) - math.log(th_old))
            - self.cfg.beta * (th_new**2 - th_old**2)
        )
        if math.log(rng.random()) < log_acc:
            self.theta[j] = th_new
            return True
        return False

    def gamma_sweep(self, rng) -> tuple:
        self.refresh()
        self.logdet_gamma, counts = core.gamma_pair_sweep(
            self.gamma,
            self.ainv,
            self.incl,
            self.theta,
            self.gram,
            float(self.n),
            self.cfg.slab_prob,
            self.cfg.gamma_rw_sd,
            self.logdet_gamma,
            rng,
        )
        return counts

    def snapshot(self) -> MixedState:
        decomp = PrecisionDecomp(
            theta=self.theta.copy(),
            gamma=self.gamma.copy(),
            inclusion=self.incl.astype(bool),
        )
        return MixedState(omega=self.omega.copy(), decomp=decomp, loglik=self.loglik())


# ---------------------------------------------------------------------------
# public single-step operations


def initial_mixed_state(data: MixedData, config: MixedConfig) -> MixedState:
    return _MixedEngine(data, config).snapshot()


def update_omega(state: MixedState, data: MixedData, rng,
                 config: MixedConfig | None = None) -> MixedState:
    """One log-random-walk MH step on each Polya-Gamma scale (discrete
    coordinates); no-op when the data has no discrete columns."""
    config = config or MixedConfig(alpha=0.5, beta=0.5, iters=1, burnin=0, seed=0)
    eng = _MixedEngine(data, config, state)
    for j in range(eng.d):
        eng.omega_move(j, rng, config.omega_step)
    return eng.snapshot()


def update_theta(state: MixedState, data: MixedData, hyper: tuple[float, float],
                 rng, config: MixedConfig | None = None) -> MixedState:
    """One MH step on each continuous precision diagonal under its
    Gamma(alpha, rate beta) prior; discrete diagonals stay tied to omega."""
    alpha, beta = hyper
    base = config or MixedConfig(alpha=alpha, beta=beta, iters=1, burnin=0, seed=0)
    config = replace(base, alpha=float(alpha), beta=float(beta))
    eng = _MixedEngine(data, config, state)
    for g in range(eng.p - eng.d):
        eng.theta_move(g, rng, config.theta_step)
    return eng.snapshot()


def update_gamma(state: MixedState, data: MixedData, slab_prob: float, rng,
                 config: MixedConfig | None = None) -> MixedState:
    """One spike/slab sweep over all off-diagonal pairs; accepted proposals
    stay positive definite by construction and spike entries are exact zeros."""
    base = config or MixedConfig(alpha=0.5, beta=0.5, iters=1, burnin=0, seed=0)
    config = replace(base, slab_prob=float(slab_prob))
    eng = _MixedEngine(data, config, state)
    eng.gamma_sweep(rng)
    return eng.snapshot()


# ---------------------------------------------------------------------------
# full chain


def run_mixed_chain_samples(data: MixedData, config: MixedConfig,
                            seed: int | None = None) -> MixedSamples:
    """Sweep order: omega, theta, gamma.  Deterministic given the seed."""
    rng = np.random.default_rng(config.seed if seed is None else seed)
    eng = _MixedEngine(data, config)
    out = MixedSamples(eng.p, eng.d)
    w_acc = w_tot = t_acc = t_tot = 0
    g_on = g_on_t = g_off = g_off_t = g_rw = g_rw_t = 0
    for sweep in range(config.iters):
        try:
            burning = sweep < config.burnin
            kappa = min(0.25, 4.0 / math.sqrt(sweep + 1.0))
            for j in range(eng.d):
                acc = eng.omega_move(j, rng, eng.omega_steps[j])
                if burning:
                    eng.omega_steps[j] *= math.exp(kappa * ((1.0 if acc else 0.0) - 0.4))
                else:
                    w_acc += acc
                    w_tot += 1
            for g in range(eng.p - eng.d):
                acc = eng.theta_move(g, rng, eng.theta_steps[g])
                if burning:
                    eng.theta_steps[g] *= math.exp(kappa * ((1.0 if acc else 0.0) - 0.4))
                else:
                    t_acc += acc
                    t_tot += 1
            on_p, on_a, off_p, off_a, rw_p, rw_a = eng.gamma_sweep(rng)
            if not burning:
                g_on += on_a
                g_on_t += on_p
                g_off += off_a
                g_off_t += off_p
                g_rw += rw_a
                g_rw_t += rw_p
            if config.recheck_every and (sweep + 1) % config.recheck_every == 0:
                before = eng.logdet_gamma
                eng.refresh()
                out.max_drift = max(out.max_drift, abs(before - eng.logdet_gamma))
            if burning:
                continue
            out.count += 1
            out.incl_freq += eng.incl
            out.precision_sum += eng.gamma * np.outer(eng.theta, eng.theta)
            out.omega_sum += eng.omega
            out.loglik_trace.append(eng.loglik())
        except Exception as exc:  # noqa: BLE001 - annotate with sweep index
            if isinstance(exc, ChainError):
                raise
            raise ChainError(f"sweep {sweep}: {exc}") from exc
    before = eng.logdet_gamma
    eng.refresh()
    out.max_drift = max(out.max_drift, abs(before - eng.logdet_gamma))
    out.acceptance["omega"] = (int(w_acc), int(w_tot))
    out.acceptance["theta"] = (int(t_acc), int(t_tot))
    out.acceptance["gamma_on"] = (int(g_on), int(g_on_t))
    out.acceptance["gamma_off"] = (int(g_off), int(g_off_t))
    out.acceptance["gamma_rw"] = (int(g_rw), int(g_rw_t))
    return out


def run_mixed_chain(data: MixedData, config: MixedConfig,
                    threshold: float = 0.5) -> PosteriorSummary:
    return summarize_mixed(run_mixed_chain_samples(data, config), threshold=threshold)
