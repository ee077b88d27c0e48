"""The distributed gradient-play iteration on the estimation matrix.

Each player keeps one row of an ``n x n`` estimation matrix: her running
estimate of the full joint action.  Entry ``(i, i)`` is her own action.  One
iteration mixes every column through the mixing matrix ``W`` and then
corrects each player's own-action entry with a local gradient step:

    x[i, l] <- sum_j w[i, j] * x[j, l]                      for l != i
    x[i, i] <- sum_j w[i, j] * x[j, i] - alpha * g_i        g_i = own partial
                                                            gradient at row i

in matrix form ``x <- W x - alpha * Diag(g)``.  The column means (the
network-wide running average) then follow the exact recursion
``avg <- avg - (alpha / n) * g``.

:func:`run` iterates this update and can record, per iteration, every
quantity used by the convergence analysis: consensus violation, distances
to the equilibrium, gradient norm, and the slack (rhs - lhs) of the three
per-step inequalities that drive the geometric-rate proof.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, fields

import numpy as np

from .errors import DivergenceError
from .game import QuadraticGame, estimate_constants, solve_nash_equilibrium
from .network import MixingMatrix

__all__ = [
    "IterationTrace",
    "TRACE_COLUMNS",
    "diag_gradient",
    "step",
    "running_average",
    "consensual_matrix",
    "initial_estimates",
    "run",
    "trace_to_csv",
    "write_trace_csv",
]

#: Divergence guard: abort when the distance to the equilibrium exceeds this
#: multiple of its initial value.  Admissible step sizes contract, so the
#: guard only ever trips on a step size far beyond the certified ceiling.
DIVERGENCE_FACTOR = 1e12


@dataclass(frozen=True)
class IterationTrace:
    """Per-iteration record of the quantities used in the rate analysis.

    All norms are Frobenius norms of ``n x n`` matrices.  The slack fields
    hold ``rhs - lhs`` of the corresponding inequality; nonnegative slack
    (up to rounding) means the inequality held.

    * ``lemma1_slack``: consensus-violation contraction for the transition
      into this iterate, ``sigma * cv_prev + alpha * sqrt((n-1)/n) * gn_prev
      - cv``.
    * ``lemma2_slack``: gradient-norm bound at this iterate,
      ``L * distance_to_ne - grad_norm``.
    * ``lemma3_slack``: averaged-iterate contraction for the transition into
      this iterate, ``avg_d_prev**2 + (L**2 * alpha / mu) * cv_prev**2 -
      (1 + mu * alpha / n) * avg_d**2`` (valid whenever
      ``alpha <= mu / L**2``).

    At ``t = 0`` there is no arriving transition, so ``lemma1_slack`` and
    ``lemma3_slack`` are NaN.
    """

    t: int
    consensus_violation: float
    distance_to_ne: float
    avg_distance_to_ne: float
    grad_norm: float
    lemma1_slack: float
    lemma2_slack: float
    lemma3_slack: float


TRACE_COLUMNS = tuple(f.name for f in fields(IterationTrace))


def diag_gradient(game, x_mat: np.ndarray) -> np.ndarray:
    """Each player's own partial gradient evaluated at her own row.

    Component ``i`` equals ``game_mapping(row i)[i]``.  The diagonal matrix
    carrying this vector is the gradient-correction term of the update; its
    Frobenius norm is the Euclidean norm of the returned vector.

    ``game`` may also be a callable ``x_mat -> vector`` supplying the same
    per-row gradients for a non-quadratic game.
    """
    x_mat = np.asarray(x_mat, dtype=float)
    if callable(game):
        g = np.asarray(game(x_mat), dtype=float)
        if g.shape != (x_mat.shape[0],):
            raise ValueError(
                f"gradient callback returned shape {g.shape}, "
                f"expected ({x_mat.shape[0]},)"
            )
        return g
    n = game.n
    if x_mat.shape != (n, n):
        raise ValueError(f"estimation matrix has shape {x_mat.shape}, expected ({n}, {n})")
    return np.sum(game.mapping_matrix * x_mat, axis=1) + game.b


def step(x_mat: np.ndarray, w, alpha: float, game) -> np.ndarray:
    """One gradient-play update ``W x - alpha * Diag(g)``.

    Only the diagonal (own-action) entries receive the gradient correction;
    every other entry is pure neighborhood averaging.
    """
    if alpha <= 0:
        raise ValueError(f"step size must be > 0, got {alpha}")
    x_mat = np.asarray(x_mat, dtype=float)
    w_mat = w.w if isinstance(w, MixingMatrix) else np.asarray(w, dtype=float)
    if w_mat.shape != x_mat.shape:
        raise ValueError(
            f"shape mismatch: mixing matrix {w_mat.shape}, estimates {x_mat.shape}"
        )
    g = diag_gradient(game, x_mat)
    out = w_mat @ x_mat
    idx = np.arange(x_mat.shape[0])
    out[idx, idx] -= alpha * g
    return out


def running_average(x_mat: np.ndarray) -> np.ndarray:
    """Column means: the network-wide average estimate of each action."""
    x_mat = np.asarray(x_mat, dtype=float)
    return x_mat.mean(axis=0)


def consensual_matrix(v: np.ndarray) -> np.ndarray:
    """Matrix with every row equal to ``v``."""
    v = np.asarray(v, dtype=float)
    return np.tile(v, (v.shape[0], 1))


def initial_estimates(n: int, seed: int = 0, kind: str = "uniform") -> np.ndarray:
    """Starting estimation matrix, deterministic in ``seed``.

    ``uniform``: entrywise uniform on [-1, 1] (default).
    ``zero``: all zeros.
    ``self``: random own action on the diagonal, zero estimates elsewhere.
    """
    if kind == "zero":
        return np.zeros((n, n))
    rng = np.random.default_rng(seed)
    if kind == "uniform":
        return rng.uniform(-1.0, 1.0, (n, n))
    if kind == "self":
        return np.diag(rng.uniform(-1.0, 1.0, n))
    raise ValueError(f"unknown initializer kind {kind!r}")


def run(
    game: QuadraticGame,
    w: MixingMatrix,
    alpha: float,
    x0: np.ndarray,
    max_iters: int,
    tol: float = 0.0,
    record: bool = True,
):
    """Iterate gradient play until the NE distance drops to ``tol`` or
    ``max_iters`` steps have been taken.

    Parameters
    ----------
    game : QuadraticGame
        Supplies gradients and the exact oracles (equilibrium, mu, L) used
        for stopping and for the recorded slack fields.
    w : MixingMatrix
        Mixing matrix; its ``sigma`` enters the recorded slacks.
    alpha : float
        Constant step size, > 0.
    x0 : ndarray, shape (n, n)
        Initial estimation matrix.
    max_iters : int
        Maximum number of update steps.
    tol : float
        Stop once the Frobenius distance to the consensual equilibrium
        matrix is <= tol.  The default 0 gives a fixed horizon.
    record : bool
        When set, return one :class:`IterationTrace` per visited state
        (including the initial one).

    Returns
    -------
    (final, trace) : (ndarray, list of IterationTrace)

    Raises
    ------
    DivergenceError
        If the distance to the equilibrium exceeds ``DIVERGENCE_FACTOR``
        times its initial value (step size far above the ceiling).
    """
    if not isinstance(game, QuadraticGame):
        raise TypeError(
            "run() needs a QuadraticGame (exact equilibrium and constants); "
            "for a plain gradient callback iterate step() directly"
        )
    if alpha <= 0:
        raise ValueError(f"step size must be > 0, got {alpha}")
    if tol < 0:
        raise ValueError(f"tolerance must be >= 0, got {tol}")
    if max_iters < 0:
        raise ValueError(f"max_iters must be >= 0, got {max_iters}")

    n = game.n
    x = np.array(x0, dtype=float)
    if x.shape != (n, n):
        raise ValueError(f"x0 has shape {x.shape}, expected ({n}, {n})")
    if w.n != n:
        raise ValueError(f"mixing matrix is {w.n} x {w.n}, game has n={n}")

    consts = estimate_constants(game)
    x_star = solve_nash_equilibrium(game)
    x_star_mat = consensual_matrix(x_star)
    sigma = w.sigma
    mu, big_l = consts.mu, consts.l
    off_diag_factor = math.sqrt((n - 1) / n)
    w_mat = w.w
    idx = np.arange(n)

    trace: list[IterationTrace] = []
    initial_dist = float(np.linalg.norm(x - x_star_mat))
    prev = None  # (consensus_violation, grad_norm, avg_dist)

    for t in range(max_iters + 1):
        avg = x.mean(axis=0)
        cv = float(np.linalg.norm(x - avg))
        dist = float(np.linalg.norm(x - x_star_mat))
        avg_dist = math.sqrt(n) * float(np.linalg.norm(avg - x_star))
        g = np.sum(game.mapping_matrix * x, axis=1) + game.b
        gn = float(np.linalg.norm(g))

        if record:
            if prev is None:
                lemma1 = lemma3 = math.nan
            else:
                cv_p, gn_p, avg_dist_p = prev
                lemma1 = sigma * cv_p + alpha * off_diag_factor * gn_p - cv
                lemma3 = (
                    avg_dist_p**2
                    + (big_l**2 * alpha / mu) * cv_p**2
                    - (1.0 + mu * alpha / n) * avg_dist**2
                )
            trace.append(
                IterationTrace(
                    t=t,
                    consensus_violation=cv,
                    distance_to_ne=dist,
                    avg_distance_to_ne=avg_dist,
                    grad_norm=gn,
                    lemma1_slack=lemma1,
                    lemma2_slack=big_l * dist - gn,
                    lemma3_slack=lemma3,
                )
            )
        prev = (cv, gn, avg_dist)

        if dist <= tol:
            break
        if dist > DIVERGENCE_FACTOR * max(initial_dist, 1e-300):
            err = DivergenceError(
                f"diverged at iteration {t}: distance {dist:.3e} exceeds "
                f"{DIVERGENCE_FACTOR:.0e} x initial {initial_dist:.3e} "
                f"(alpha={alpha} too large)"
            )
            err.iteration = t
            err.trace = trace  # partial trace for post-mortem reporting
            raise err
        if t == max_iters:
            break
        x = w_mat @ x
        x[idx, idx] -= alpha * g

    return x, trace


def trace_to_csv(trace) -> str:
    """CSV text for a trace; full double precision via shortest repr."""
    buf = io.StringIO()
    buf.write(",".join(TRACE_COLUMNS))
    buf.write("\n")
    for row in trace:
        buf.write(str(row.t))
        for name in TRACE_COLUMNS[1:]:
            buf.write(",")
            buf.write(repr(float(getattr(row, name))))
        buf.write("\n")
    return buf.getvalue()


def write_trace_csv(trace, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(trace_to_csv(trace))
