"""Ground-truth generators and evaluation metrics for the simulation studies.

Builds sparse precision matrices (banded, corner-block, random-sparse with a
decomposable support), synthesizes continuous scale-mixture data and mixed
binary/continuous data, and scores sign recovery against the truth.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import (
    DimensionMismatch,
    InvalidParams,
    NotDiagonallyDominant,
    NotPositiveDefinite,
)
from .dist import sample_mixing
from .graph import is_decomposable
from .gsm import MarginSpec
from .mixed import MixedData


def make_banded_precision(q: int, v: float, frac1: float, frac2: float) -> np.ndarray:
    """Symmetric banded matrix: diagonal v, first band frac1*v, second frac2*v."""
    k = np.zeros((q, q))
    np.fill_diagonal(k, v)
    for i in range(q - 1):
        k[i, i + 1] = k[i + 1, i] = frac1 * v
    for i in range(q - 2):
        k[i, i + 2] = k[i + 2, i] = frac2 * v
    row_off = np.abs(k).sum(axis=1) - np.abs(np.diag(k))
    if np.any(row_off >= v):
        raise NotDiagonallyDominant(
            f"off-diagonal row mass {row_off.max():.3f} >= diagonal {v}"
        )
    return k


def make_block_precision(q: int, size: int, magnitude: float) -> np.ndarray:
    """Identity-dominated matrix with a dense top-left block of alternating
    +/- magnitude entries (half positive, half negative)."""
    if size > q:
        raise InvalidParams("block size exceeds dimension")
    k = np.zeros((q, q))
    idx = 0
    for i in range(size):
        for j in range(i + 1, size):
            val = magnitude if idx % 2 == 0 else -magnitude
            k[i, j] = k[j, i] = val
            idx += 1
    diag = np.abs(k).sum(axis=1).max() + 1.0
    np.fill_diagonal(k, diag)
    return k


def make_random_sparse_precision(q: int, pos_frac: float, neg_frac: float,
                                 seed: int, magnitude: float = 1.0,
                                 max_tries: int = 10_000) -> np.ndarray:
    """Random +/- support, rejection-sampled until the support graph is
    decomposable; positive definiteness by diagonal dominance."""
    if pos_frac < 0 or neg_frac < 0 or pos_frac + neg_frac > 1:
        raise InvalidParams("fractions must be nonnegative and sum below 1")
    rng = np.random.default_rng(seed)
    pairs = [(u, vv) for u in range(q) for vv in range(u + 1, q)]
    for _ in range(max_tries):
        k = np.zeros((q, q))
        r = rng.random(len(pairs))
        for (u, vv), x in zip(pairs, r):
            if x < pos_frac:
                k[u, vv] = k[vv, u] = magnitude
            elif x < pos_frac + neg_frac:
                k[u, vv] = k[vv, u] = -magnitude
        support = (k != 0).astype(np.uint8)
        np.fill_diagonal(support, 0)
        if is_decomposable(support):
            diag = np.abs(k).sum(axis=1).max() + 1.0
            np.fill_diagonal(k, diag)
            return k
    raise InvalidParams(f"no decomposable support found in {max_tries} tries")


def add_block(matrix: np.ndarray, row_range: tuple[int, int],
              col_range: tuple[int, int], value: float) -> np.ndarray:
    """Symmetric assignment of ``value`` on a rectangular off-diagonal block.

    Ranges are 0-based half-open.  Blocks touching the diagonal are rejected,
    and the result must stay positive definite.
    """
    r0, r1 = row_range
    c0, c1 = col_range
    if max(r0, c0) < min(r1, c1):
        raise InvalidParams("block overlaps the diagonal")
    out = np.array(matrix, dtype=float, copy=True)
    out[r0:r1, c0:c1] = value
    out[c0:c1, r0:r1] = value
    if value != 0.0:
        try:
            np.linalg.cholesky(out)
        except np.linalg.LinAlgError as exc:
            raise NotPositiveDefinite("block assignment breaks positive definiteness") from exc
    return out


@dataclass(frozen=True)
class TruthSpec:
    """Declarative description of a ground-truth precision matrix."""

    kind: str  # banded | block | random_sparse
    dims: tuple[int, ...]  # (q,) or (d, q)
    params: dict = field(default_factory=dict)
    extra_blocks: tuple = ()

    @property
    def total_dim(self) -> int:
        return int(sum(self.dims))

    def build(self, seed: int = 0) -> np.ndarray:
        p = self.total_dim
        if self.kind == "banded":
            k = make_banded_precision(p, self.params["v"], self.params["frac1"],
                                      self.params["frac2"])
        elif self.kind == "block":
            k = make_block_precision(p, self.params["size"], self.params["magnitude"])
        elif self.kind == "random_sparse":
            k = make_random_sparse_precision(p, self.params["pos_frac"],
                                             self.params["neg_frac"], seed,
                                             self.params.get("magnitude", 1.0))
        else:
            raise InvalidParams(f"unknown truth kind {self.kind!r}")
        for rows, cols, value in self.extra_blocks:
            k = add_block(k, tuple(rows), tuple(cols), value)
        np.linalg.cholesky(k)
        return k


def continuous_design_truth() -> np.ndarray:
    """The q=50 banded design: diagonal 3, bands +0.75 / -0.6."""
    return make_banded_precision(50, 3.0, 0.25, -0.2)


def mixed_design_truth() -> np.ndarray:
    """The d=9, q=41 design: diagonal 4, bands +0.8 / -0.8, and a -0.7
    block coupling the first five rows to columns 40-45 (1-based)."""
    k = make_banded_precision(50, 4.0, 0.2, -0.2)
    return add_block(k, (0, 5), (39, 45), -0.7)


# ---------------------------------------------------------------------------
# data synthesis


def _covariance_root(precision: np.ndarray) -> np.ndarray:
    try:
        sigma = np.linalg.inv(np.asarray(precision, dtype=float))
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite("precision is singular") from exc
    sigma = (sigma + sigma.T) / 2.0
    return np.linalg.cholesky(sigma)


def simulate_gsm_data(n: int, precision: np.ndarray,
                      margin_specs: Sequence[MarginSpec], seed: int,
                      return_latents: bool = False):
    """Scale-mixture data: one scale per column, shared across the n rows.

    Draws Z with row-independent N(0, inv(precision)) rows, one d_i per
    margin, and returns column i as sqrt(d_i) * z_i + alpha_i + beta_i * d_i,
    the exact inverse of the model transform.
    """
    rng = np.random.default_rng(seed)
    root = _covariance_root(precision)
    q = root.shape[0]
    if len(margin_specs) != q:
        raise DimensionMismatch("margin count does not match precision size")
    z = rng.standard_normal((n, q)) @ root.T
    scales = np.array([sample_mixing(m.mixing, rng) for m in margin_specs])
    y = np.empty_like(z)
    for i, spec in enumerate(margin_specs):
        y[:, i] = np.sqrt(scales[i]) * z[:, i] + spec.skew_alpha + spec.skew_beta * scales[i]
    if return_latents:
        return y, scales, z
    return y


def simulate_gsm_rows(n: int, precision: np.ndarray,
                      margin_specs: Sequence[MarginSpec], seed: int) -> np.ndarray:
    """Independent replicates of the scale-mixture vector: fresh scales for
    every row.  This is the iid law the marginal/sign-independence claims
    are stated for (the data-matrix model shares one scale per column)."""
    rng = np.random.default_rng(seed)
    root = _covariance_root(precision)
    q = root.shape[0]
    z = rng.standard_normal((n, q)) @ root.T
    y = np.empty_like(z)
    for i, spec in enumerate(margin_specs):
        d = np.asarray(sample_mixing(spec.mixing, rng, size=n))
        y[:, i] = np.sqrt(d) * z[:, i] + spec.skew_alpha + spec.skew_beta * d
    return y


def simulate_mixed_data(n: int, precision: np.ndarray, d: int, seed: int) -> MixedData:
    """Joint Gaussian rows from the precision template with the first d
    columns rounded to the nearest integer."""
    rng = np.random.default_rng(seed)
    root = _covariance_root(precision)
    x = rng.standard_normal((n, root.shape[0])) @ root.T
    x[:, :d] = np.round(x[:, :d])
    return MixedData.from_matrix(x, d, centering=0.0)


# ---------------------------------------------------------------------------
# sign recovery metrics


@dataclass(frozen=True)
class SignTable:
    """Estimated-vs-true counts of zero / positive / negative entries."""

    est_zero: int
    true_zero: int
    est_pos: int
    true_pos: int
    est_neg: int
    true_neg: int

    @property
    def counts(self) -> tuple[int, int, int, int, int, int]:
        return (self.est_zero, self.true_zero, self.est_pos, self.true_pos,
                self.est_neg, self.true_neg)

    @property
    def ratios(self) -> tuple[float, float, float]:
        def safe(a, b):
            return a / b if b else float("nan")

        return (
            safe(self.est_zero, self.true_zero),
            safe(self.est_pos, self.true_pos),
            safe(self.est_neg, self.true_neg),
        )


def sign_detection_table(estimated_sign: np.ndarray, truth: np.ndarray,
                         include_diagonal: bool = True) -> SignTable:
    """Count zero/positive/negative entries of the estimate and the truth.

    All p^2 entries are counted (the diagonal is included by default, which
    is what makes the class counts partition p^2)."""
    est = np.asarray(estimated_sign)
    tru = np.asarray(truth)
    if est.shape != tru.shape:
        raise DimensionMismatch(f"shape mismatch: {est.shape} vs {tru.shape}")
    if not include_diagonal:
        mask = ~np.eye(est.shape[0], dtype=bool)
        est = est[mask]
        tru = tru[mask]
    est_sign = np.sign(est)
    tru_sign = np.sign(tru)
    return SignTable(
        est_zero=int((est_sign == 0).sum()),
        true_zero=int((tru_sign == 0).sum()),
        est_pos=int((est_sign > 0).sum()),
        true_pos=int((tru_sign > 0).sum()),
        est_neg=int((est_sign < 0).sum()),
        true_neg=int((tru_sign < 0).sum()),
    )
