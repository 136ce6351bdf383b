"""Lossy sharing models: what agent i actually receives from its neighbors.

Each agent forms a neighbor estimate x_hat_i = sum_j W_ij * (corrupted x_j).
The corruption is conditionally unbiased with conditionally bounded second
moment, quantified by a scalar gamma: E[e_i | past] = 0 and
E[||e_i||^2 | past] <= gamma, where e_i = x_hat_i - sum_j W_ij x_j.

Three models:

* ``noiseless``          exact exchange, gamma = 0.
* ``gaussian_channel``   each link adds an isotropic Gaussian with total
                         variance sigma^2 split evenly across coordinates,
                         so gamma = sigma^2 (worst case over rows since
                         sum_j W_ij^2 <= 1).
* ``stochastic_quantizer`` each transmitted vector is compressed with an
                         unbiased s-level random quantizer; gamma scales
                         with the largest state norm seen.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_KINDS = ("noiseless", "gaussian_channel", "stochastic_quantizer")


@dataclass(frozen=True)
class NoiseModel:
    """Which corruption acts on shared states.

    ``sigma`` is the per-link noise scale of the Gaussian channel;
    ``levels`` is the quantizer resolution s (steps per unit norm).
    Irrelevant fields must be left at their defaults.
    """

    kind: str
    sigma: float = 0.0
    levels: int = 0

    def __post_init__(self) -> None:
        if self.kind not in _KINDS:
            raise ValueError(f"unknown noise kind {self.kind!r}; expected one of {_KINDS}")
        if self.kind == "gaussian_channel":
            if not (self.sigma > 0.0 and np.isfinite(self.sigma)):
                raise ValueError("gaussian_channel needs sigma > 0")
            if self.levels:
                raise ValueError("levels is only meaningful for stochastic_quantizer")
        elif self.kind == "stochastic_quantizer":
            if self.levels < 1:
                raise ValueError("stochastic_quantizer needs levels >= 1")
            if self.sigma:
                raise ValueError("sigma is only meaningful for gaussian_channel")
        else:
            if self.sigma or self.levels:
                raise ValueError("noiseless takes no parameters")


def noiseless() -> NoiseModel:
    return NoiseModel("noiseless")


def gaussian_channel(sigma: float) -> NoiseModel:
    return NoiseModel("gaussian_channel", sigma=float(sigma))


def stochastic_quantizer(levels: int) -> NoiseModel:
    return NoiseModel("stochastic_quantizer", levels=int(levels))


def zeta(tau, s: int, u) -> np.ndarray:
    """Randomized rounding of s*tau to a neighboring integer level.

    For tau in [0, 1], returns floor(s*tau) + 1 with probability
    s*tau - floor(s*tau) (decided by the uniform draw u) and floor(s*tau)
    otherwise, so E[zeta] = s*tau exactly.  tau slightly outside [0, 1] from
    floating-point division is clipped; genuinely out-of-range values raise.
    """
    tau = np.asarray(tau, dtype=float)
    u = np.asarray(u, dtype=float)
    if s < 1:
        raise ValueError("quantizer needs at least one level")
    if np.any(tau < -1e-9) or np.any(tau > 1.0 + 1e-9):
        raise ValueError("normalized magnitudes must lie in [0, 1]")
    tau = np.clip(tau, 0.0, 1.0)
    scaled = s * tau
    low = np.floor(scaled)
    return low + (u < scaled - low)


def stochastic_quantize(x, s: int, rng: np.random.Generator) -> np.ndarray:
    """Unbiased random quantization of x to s magnitude levels.

    Each coordinate is mapped to sign(x_j) * ||x|| * (level / s) where the
    level is the randomized rounding of s|x_j|/||x||.  The zero vector passes
    through unchanged.  Vectorizes over rows when x is 2-D (independent draws
    per row, row order preserved).
    """
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    X = x[None, :] if single else x
    if X.ndim != 2:
        raise ValueError("expected a vector or a matrix of row vectors")
    norms = np.linalg.norm(X, axis=1)
    out = np.zeros_like(X)
    live = norms > 0.0
    if np.any(live):
        sub = X[live]
        nrm = norms[live][:, None]
        tau = np.abs(sub) / nrm
        u = rng.random(sub.shape)
        levels = zeta(tau, s, u)
        out[live] = np.sign(sub) * nrm * (levels / s)
    return out[0] if single else out


def quantizer_variance_coeff(d: int, s: int) -> float:
    """min(sqrt(d)/s, d/s^2): the standard relative second-moment bound,
    E||Q(x) - x||^2 <= coeff * ||x||^2."""
    if d < 1 or s < 1:
        raise ValueError("dimension and level count must be >= 1")
    return min(np.sqrt(d) / s, d / s**2)


def noise_variance_bound(
    model: NoiseModel, d: int, state_norm_bound: float | None = None
) -> float:
    """The gamma certified for one neighbor estimate in dimension d.

    The quantizer's bound is relative to the transmitted norm, so it needs a
    bound on state norms along the trajectory (measured empirically by the
    driver and fed back here).
    """
    if model.kind == "noiseless":
        return 0.0
    if model.kind == "gaussian_channel":
        return model.sigma**2
    if state_norm_bound is None or state_norm_bound < 0.0:
        raise ValueError("quantizer variance bound needs a nonnegative state norm bound")
    return quantizer_variance_coeff(d, model.levels) * state_norm_bound**2


def neighbor_estimate(
    states: np.ndarray, w_row: np.ndarray, model: NoiseModel, rng: np.random.Generator
) -> np.ndarray:
    """One agent's estimate of the W-weighted neighborhood average.

    ``states`` is the full (n, d) state matrix, ``w_row`` the agent's row of
    the mixing matrix.  Independent corruption is drawn for every positive
    entry of the row, including the agent's own (a node quantizes or
    transmits its own state through the same pipeline), in ascending neighbor
    order so scalar and batched paths consume the generator identically.
    """
    states = np.asarray(states, dtype=float)
    w_row = np.asarray(w_row, dtype=float)
    if states.ndim != 2 or w_row.ndim != 1 or w_row.size != states.shape[0]:
        raise ValueError("states must be (n, d) and w_row length n")
    if np.any(w_row < 0.0) or abs(w_row.sum() - 1.0) > 1e-9:
        raise ValueError("mixing row must be nonnegative and sum to 1")

    support = np.flatnonzero(w_row > 0.0)
    if model.kind == "noiseless":
        return w_row[support] @ states[support]
    if model.kind == "gaussian_channel":
        d = states.shape[1]
        z = rng.normal(0.0, model.sigma / np.sqrt(d), size=(support.size, d))
        return w_row[support] @ (states[support] + z)
    q = stochastic_quantize(states[support], model.levels, rng)
    return w_row[support] @ q
