"""Exact t-SNE: affinity calibration, KL objective, gradient-descent optimizer.

The same code path serves the secure pipeline (the noise-holding
collaborator runs it on the recovered probability matrix) and the
plaintext reference used for verification, which is what makes
"protocol result == standard result" a testable statement.

High-dimensional affinities: each point i gets a Gaussian bandwidth
sigma_i^2 calibrated so the conditional distribution over neighbours
has a target perplexity (effective neighbour count 2^H).  Conditionals
are symmetrized as p_ij = (p_{j|i} + p_{i|j}) / 2N.  Low-dimensional
affinities use a Student-t kernel with one degree of freedom, and the
layout minimizes KL(P||Q) by momentum gradient descent with adaptive
per-coordinate gains and an early exaggeration phase.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

ENTROPY_TOL = 1e-5
MAX_SIGMA_ITERS = 50
Q_FLOOR = 1e-12


class DivergenceError(RuntimeError):
    """The optimizer produced non-finite coordinates."""


@dataclass
class TsneConfig:
    perplexity: float = 30.0
    iterations: int = 1000
    learning_rate: float = 200.0
    momentum: float = 0.5
    final_momentum: float = 0.8
    momentum_switch_iter: int = 250
    early_exaggeration: float = 12.0
    exaggeration_iters: int = 250
    init_seed: int = 0
    init_stddev: float = 1e-4

    def validate(self, n_points: int) -> None:
        if not (self.perplexity > 0 and self.iterations > 0 and self.learning_rate > 0):
            raise ValueError("perplexity, iterations and learning_rate must be positive")
        if self.perplexity >= (n_points - 1) / 3:
            raise ValueError(
                f"perplexity {self.perplexity} too large for {n_points} points "
                f"(needs perplexity < (N-1)/3)"
            )


@dataclass
class ProbabilityMatrix:
    values: np.ndarray
    kind: str  # "conditional" (row-stochastic) or "symmetric" (sums to 1)

    def validate(self, atol: float = 1e-9) -> None:
        v = self.values
        if np.any(v < 0) or np.any(np.diag(v) != 0):
            raise ValueError("probability matrix needs non-negative entries, zero diagonal")
        if self.kind == "conditional":
            if not np.allclose(v.sum(axis=1), 1.0, atol=atol):
                raise ValueError("conditional rows must sum to 1")
        elif self.kind == "symmetric":
            if not np.allclose(v, v.T) or abs(v.sum() - 1.0) > atol:
                raise ValueError("symmetric matrix must be symmetric with total mass 1")
        else:
            raise ValueError(f"unknown kind {self.kind!r}")


@dataclass
class Bandwidths:
    sigma_sq: np.ndarray


@dataclass
class EmbeddingState:
    Y: np.ndarray
    velocity: np.ndarray
    gains: np.ndarray
    iteration: int = 0


@dataclass
class TsneResult:
    Y: np.ndarray
    kl_trace: np.ndarray

    def kl_trace_csv(self) -> str:
        lines = ["iteration,kl"]
        lines += [f"{t},{v:.12g}" for t, v in enumerate(self.kl_trace)]
        return "\n".join(lines) + "\n"


def _canonical_sum(values: np.ndarray) -> float:
    # Sum in sorted order: the result then depends only on the multiset of
    # addends, not on row presentation order.  Affinity rows are processed
    # both in natural and in permuted index order during the secure
    # pipeline, and this keeps the two bitwise identical.
    return float(np.sum(np.sort(values)))


def _row_entropy_bits(shifted_sq: np.ndarray, sigma_sq: float) -> float:
    """Shannon entropy (bits) of the Gaussian conditional at this bandwidth."""
    w = np.exp(-shifted_sq / (2.0 * sigma_sq))
    total = _canonical_sum(w)
    p = w / total
    terms = np.where(p > 0.0, p * np.log2(np.where(p > 0.0, p, 1.0)), 0.0)
    return -_canonical_sum(terms)


def sigma_search(sq_distances_row: np.ndarray, perplexity: float,
                 exclude: int | None = None) -> float:
    """Calibrate one point's Gaussian variance by binary search.

    `sq_distances_row` holds squared distances to neighbours; `exclude`
    removes the self entry when the full row is passed.  Searches
    sigma^2 until the conditional entropy matches log2(perplexity)
    within 1e-5 bits, at most 50 halvings; returns the last iterate on
    non-convergence (degenerate all-equal rows are uniform at any
    bandwidth, so they either converge immediately or not at all).
    """
    row = np.asarray(sq_distances_row, dtype=float)
    if exclude is not None:
        row = np.delete(row, exclude)
    if row.size < 2 or not np.all(np.isfinite(row)):
        raise ValueError("need at least 2 finite off-diagonal distances")

    shifted = row - row.min()
    target = np.log2(perplexity)

    # Scale-proportional start keeps the search trajectory equivariant
    # under rescaling of the distances.
    mean = _canonical_sum(shifted) / shifted.size
    sigma_sq = mean if mean > 0 else 1.0
    lo, hi = 0.0, np.inf
    for _ in range(MAX_SIGMA_ITERS):
        entropy = _row_entropy_bits(shifted, sigma_sq)
        if abs(entropy - target) <= ENTROPY_TOL:
            break
        if entropy > target:
            hi = sigma_sq
            sigma_sq = (lo + hi) / 2.0
        else:
            lo = sigma_sq
            sigma_sq = sigma_sq * 2.0 if hi == np.inf else (lo + hi) / 2.0
    return sigma_sq


def calibrate_bandwidths(sq_distances: np.ndarray, perplexity: float) -> Bandwidths:
    """Per-row sigma^2 for a full squared-distance matrix (zero diagonal)."""
    n = sq_distances.shape[0]
    sigma_sq = np.empty(n)
    for i in range(n):
        sigma_sq[i] = sigma_search(sq_distances[i], perplexity, exclude=i)
    return Bandwidths(sigma_sq)


def row_affinities(sq_distances_row: np.ndarray, sigma_sq: float) -> np.ndarray:
    """Gaussian affinities over one point's neighbours (self entry removed).

    The row is shifted by its minimum before exponentiation; the softmax
    is invariant under additive row shifts, which is the property the
    secure pipeline leans on to shed row noise.
    """
    row = np.asarray(sq_distances_row, dtype=float)
    shifted = row - row.min()
    w = np.exp(-shifted / (2.0 * sigma_sq))
    return w / _canonical_sum(w)


def conditional_probs(sq_distances: np.ndarray, bandwidths: Bandwidths) -> ProbabilityMatrix:
    """Row-stochastic Gaussian conditionals p_{j|i} with zero diagonal."""
    d = np.asarray(sq_distances, dtype=float)
    n = d.shape[0]
    if np.any(d < 0) or np.any(np.diag(d) != 0):
        raise ValueError("expected non-negative squared distances with zero diagonal")
    p = np.zeros_like(d)
    for i in range(n):
        probs = row_affinities(np.delete(d[i], i), bandwidths.sigma_sq[i])
        p[i, :i] = probs[:i]
        p[i, i + 1:] = probs[i:]
    return ProbabilityMatrix(p, "conditional")


def symmetrize(conditional: ProbabilityMatrix) -> ProbabilityMatrix:
    """p_ij = (p_{j|i} + p_{i|j}) / 2N; total mass 1."""
    if conditional.kind != "conditional":
        raise ValueError("symmetrize expects a conditional matrix")
    c = conditional.values
    n = c.shape[0]
    return ProbabilityMatrix((c + c.T) / (2.0 * n), "symmetric")


def joint_probabilities(sq_distances: np.ndarray, perplexity: float) -> ProbabilityMatrix:
    """Calibrate bandwidths, build conditionals, symmetrize."""
    bw = calibrate_bandwidths(sq_distances, perplexity)
    return symmetrize(conditional_probs(sq_distances, bw))


def _pairwise_sq_dists(Y: np.ndarray) -> np.ndarray:
    diff = Y[:, None, :] - Y[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


def low_dim_affinities(Y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Student-t affinities Q and the unnormalized kernel matrix.

    q_ij = (1 + ||y_i - y_j||^2)^-1 normalized over all ordered pairs
    k != l, zero diagonal.  Returns (Q, student_num); the 1e-12 floor on
    q is applied at KL evaluation time so Q itself still sums to 1.
    """
    student = 1.0 / (1.0 + _pairwise_sq_dists(Y))
    np.fill_diagonal(student, 0.0)
    return student / student.sum(), student


def kl_divergence(P: np.ndarray | ProbabilityMatrix, Q: np.ndarray) -> float:
    """KL(P||Q) = sum p log(p/q), with 0 log 0 = 0 and q floored at 1e-12."""
    p = P.values if isinstance(P, ProbabilityMatrix) else np.asarray(P)
    q = np.maximum(Q, Q_FLOOR)
    mask = p > 0
    return float(np.sum(p[mask] * np.log(p[mask] / q[mask])))


def kl_gradient(Y: np.ndarray, P: np.ndarray, Q: np.ndarray, student: np.ndarray) -> np.ndarray:
    """dC/dy_i = 4 sum_j (p_ij - q_ij)(y_i - y_j)(1 + ||y_i - y_j||^2)^-1."""
    W = (P - Q) * student
    return 4.0 * (W.sum(axis=1)[:, None] * Y - W @ Y)


def gradient_step(state: EmbeddingState, P: np.ndarray | ProbabilityMatrix,
                  config: TsneConfig) -> EmbeddingState:
    """One gains-adjusted momentum update; recenters Y afterwards."""
    p = P.values if isinstance(P, ProbabilityMatrix) else np.asarray(P)
    if state.iteration < config.exaggeration_iters:
        p = p * config.early_exaggeration
    Q, student = low_dim_affinities(state.Y)
    grad = kl_gradient(state.Y, p, Q, student)

    gains = state.gains.copy()
    same_direction = np.sign(grad) == np.sign(state.velocity)
    gains[~same_direction] += 0.2
    gains[same_direction] *= 0.8
    np.maximum(gains, 0.01, out=gains)

    momentum = (config.momentum if state.iteration < config.momentum_switch_iter
                else config.final_momentum)
    velocity = momentum * state.velocity - config.learning_rate * gains * grad
    Y = state.Y + velocity
    Y = Y - Y.mean(axis=0)
    if not np.all(np.isfinite(Y)):
        raise DivergenceError(
            f"non-finite coordinates at iteration {state.iteration} "
            f"(max |grad| = {np.abs(grad).max():.3e})"
        )
    return EmbeddingState(Y, velocity, gains, state.iteration + 1)


MAX_BACKTRACKS = 30


def _kl_at(P: np.ndarray, Y: np.ndarray) -> float:
    Q, _ = low_dim_affinities(Y)
    return kl_divergence(P, Q)


def run_tsne(P: np.ndarray | ProbabilityMatrix, config: TsneConfig,
             init: np.ndarray | None = None) -> TsneResult:
    """Optimize a 2-D layout for a symmetric affinity matrix.

    Deterministic given config.init_seed (or an explicit init); the KL
    trace is evaluated against the unexaggerated P after every step.

    Momentum is reset when exaggeration lifts, and every later step is
    backtracked (update halved, momentum dropped as a last resort) if
    it would raise the objective, so the post-exaggeration KL trace is
    non-increasing by construction.  The exploration phase keeps the
    raw heavy-ball dynamics.
    """
    p = P.values if isinstance(P, ProbabilityMatrix) else np.asarray(P)
    n = p.shape[0]
    config.validate(n)
    if init is None:
        rng = np.random.default_rng(config.init_seed)
        Y0 = rng.normal(0.0, config.init_stddev, size=(n, 2))
    else:
        Y0 = np.array(init, dtype=float)
    state = EmbeddingState(Y0, np.zeros((n, 2)), np.ones((n, 2)))

    kl_trace = np.empty(config.iterations)
    prev_kl = np.inf
    for t in range(config.iterations):
        if t == config.exaggeration_iters:
            state = EmbeddingState(state.Y, np.zeros((n, 2)), np.ones((n, 2)), t)
        base = state
        state = gradient_step(state, p, config)
        kl = _kl_at(p, state.Y)
        if t >= config.exaggeration_iters and kl > prev_kl:
            update = state.velocity
            for _ in range(MAX_BACKTRACKS):
                update = update / 2.0
                Y = base.Y + update
                Y = Y - Y.mean(axis=0)
                kl = _kl_at(p, Y)
                if kl <= prev_kl:
                    break
            else:
                update, Y, kl = np.zeros((n, 2)), base.Y, prev_kl
            state = EmbeddingState(Y, update, state.gains, state.iteration)
        kl_trace[t] = kl
        prev_kl = kl
    return TsneResult(state.Y, kl_trace)
