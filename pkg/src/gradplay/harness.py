"""Configuration-driven experiment runner and batch invariant auditor.

``run_experiment`` reproduces the headline simulation (20 players on a
random tree) or any variant described by an :class:`ExperimentConfig`:
it draws the game and graph, computes the exact constants and the step-size
certificate, runs the iteration with full trace recording, and writes
``trace.csv``, ``summary.txt``, ``summary.json`` and a standalone
``plot.py`` that renders ``plot.svg``.

``audit`` sweeps a matrix of sizes, topologies and seeds and re-verifies
every checkable statement: the game assumptions, the mixing-matrix
properties, the per-iteration inequalities, the running-average recursion,
elementwise domination by the 2x2 comparison matrix, the spectral
cross-checks and the geometric envelope.  Its report is machine-readable
and the CLI maps failures to a nonzero exit status.
"""

from __future__ import annotations

import json
import math
import os
import time
from dataclasses import dataclass, field, asdict

import numpy as np

from . import bounds
from .dynamics import (
    diag_gradient,
    initial_estimates,
    run,
    running_average,
    step,
    trace_to_csv,
)
from .errors import DivergenceError, PerfectMixingError
from .game import (
    estimate_constants,
    game_mapping,
    game_to_dict,
    local_gradient,
    random_game,
)
from .network import (
    average_property_check,
    complete,
    graph_to_edgelist,
    metropolis_weights,
    random_tree,
    ring,
    save_mixing_matrix,
    star,
)

__all__ = [
    "ExperimentConfig",
    "ExperimentReport",
    "AuditCheck",
    "AuditCell",
    "AuditReport",
    "TOPOLOGIES",
    "PRESETS",
    "paper_sim_config",
    "build_graph",
    "run_experiment",
    "audit",
    "lemma_slack_minima",
    "averaged_step_slacks",
    "first_lemma_violation",
    "zdomination_excess",
    "envelope_excess",
    "recursion_residual",
    "fit_tail_contraction",
    "OUT_DIR_ENV",
]

#: Environment variable naming the default output directory for the CLI.
OUT_DIR_ENV = "GRADPLAY_OUT_DIR"

TOPOLOGIES = ("tree", "ring", "complete", "star")

#: Relative slack below which a per-iteration inequality counts as violated.
SLACK_TOL = 1e-9


@dataclass
class ExperimentConfig:
    """Everything needed to reproduce one experiment bit-for-bit.

    ``alpha`` is either a float or the string ``"auto"``, which resolves to
    0.9 times the certified step-size ceiling of the generated game/network
    pair.  ``tol = 0`` runs the full ``max_iters`` horizon.
    """

    n: int = 20
    game_seed: int = 1
    graph_seed: int = 2
    init_seed: int = 3
    coupling_scale: float = 0.2
    topology: str = "tree"
    alpha: float | str = "auto"
    max_iters: int = 1000
    tol: float = 0.0
    check_lemmas: bool = True

    def validate(self) -> None:
        if self.n < 2:
            raise ValueError(f"n must be >= 2, got {self.n}")
        if self.topology not in TOPOLOGIES:
            raise ValueError(
                f"unknown topology {self.topology!r}; choose from {TOPOLOGIES}"
            )
        if self.topology == "ring" and self.n < 3:
            raise ValueError("ring topology needs n >= 3")
        if self.coupling_scale < 0:
            raise ValueError("coupling_scale must be >= 0")
        if isinstance(self.alpha, str):
            if self.alpha != "auto":
                raise ValueError(f'alpha must be a number or "auto", got {self.alpha!r}')
        elif self.alpha <= 0:
            raise ValueError(f"alpha must be > 0, got {self.alpha}")
        if self.max_iters < 0:
            raise ValueError("max_iters must be >= 0")
        if self.tol < 0:
            raise ValueError("tol must be >= 0")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(doc) - known
        if unknown:
            raise ValueError(
                f"unknown config keys {sorted(unknown)}; known keys: {sorted(known)}"
            )
        config = cls(**doc)
        config.validate()
        return config


def paper_sim_config() -> ExperimentConfig:
    """The headline preset: 20 players, random tree, alpha = 0.05.

    The 0.05 step size follows the published simulation; for games of this
    size it sits far above the certified ceiling (which is O(1e-6) here), so
    the run report flags it as uncertified while the divergence guard stays
    armed.  ``max_iters`` covers convergence to well below 1e-6 relative
    error.
    """
    return ExperimentConfig(
        n=20,
        game_seed=3,
        graph_seed=103,
        init_seed=203,
        coupling_scale=0.2,
        topology="tree",
        alpha=0.05,
        max_iters=10_000,
        tol=0.0,
        check_lemmas=True,
    )


PRESETS = {"paper-sim": paper_sim_config}


def build_graph(topology: str, n: int, seed: int = 0):
    if topology == "tree":
        return random_tree(n, seed)
    if topology == "ring":
        return ring(n)
    if topology == "complete":
        return complete(n)
    if topology == "star":
        return star(n)
    raise ValueError(f"unknown topology {topology!r}")


# ---------------------------------------------------------------------------
# trace analysis helpers


def lemma_slack_minima(trace, mu: float, l: float, alpha: float, n: int) -> dict:
    """Worst normalized slack of each recorded inequality over a trace.

    Slacks are normalized by ``1 + rhs`` so a single tolerance applies
    across scales.  The averaged-iterate inequality only holds under
    ``alpha <= mu / l**2``; outside that range it is reported but marked
    inapplicable.
    """
    mins = {"lemma1": math.inf, "lemma2": math.inf, "lemma3": math.inf}
    for row in trace:
        rhs2 = row.lemma2_slack + row.grad_norm
        mins["lemma2"] = min(mins["lemma2"], row.lemma2_slack / (1.0 + abs(rhs2)))
        if not math.isnan(row.lemma1_slack):
            rhs1 = row.lemma1_slack + row.consensus_violation
            mins["lemma1"] = min(mins["lemma1"], row.lemma1_slack / (1.0 + abs(rhs1)))
        if not math.isnan(row.lemma3_slack):
            rhs3 = row.lemma3_slack + (1.0 + mu * alpha / n) * row.avg_distance_to_ne**2
            mins["lemma3"] = min(mins["lemma3"], row.lemma3_slack / (1.0 + abs(rhs3)))
    mins["lemma3_applicable"] = alpha <= mu / l**2
    return mins


def averaged_step_slacks(trace, mu: float, l: float, alpha: float, n: int, theta=None):
    """Slacks of the averaged-iterate contraction for a general ``theta``.

    For any ``theta > 0`` and ``alpha <= theta / l**2`` the transition into
    each iterate satisfies

        (1 + (2 alpha / n)(mu - theta/2)) * avg_d**2
            <= avg_d_prev**2 + (l**2 alpha / theta) * cv_prev**2

    ``theta=None`` uses ``mu``, the choice behind the headline rate (and the
    ``lemma3_slack`` trace field).  Returns one ``rhs - lhs`` value per
    transition.
    """
    theta = mu if theta is None else float(theta)
    if theta <= 0:
        raise ValueError(f"theta must be > 0, got {theta}")
    if alpha > theta / l**2:
        raise ValueError(
            f"alpha={alpha} exceeds theta/l^2={theta / l**2}; the inequality "
            "is not asserted there"
        )
    slacks = []
    for prev, cur in zip(trace, trace[1:]):
        lhs = (1.0 + (2.0 * alpha / n) * (mu - theta / 2.0)) * cur.avg_distance_to_ne**2
        rhs = prev.avg_distance_to_ne**2 + (l**2 * alpha / theta) * prev.consensus_violation**2
        slacks.append(rhs - lhs)
    return slacks


def first_lemma_violation(trace, mu, l, alpha, n, tol=SLACK_TOL):
    """First (name, iteration, normalized slack) below ``-tol``, or None."""
    lemma3_applies = alpha <= mu / l**2
    for row in trace:
        checks = [("lemma2", row.lemma2_slack, row.lemma2_slack + row.grad_norm)]
        if not math.isnan(row.lemma1_slack):
            checks.append(
                ("lemma1", row.lemma1_slack, row.lemma1_slack + row.consensus_violation)
            )
        if lemma3_applies and not math.isnan(row.lemma3_slack):
            rhs3 = row.lemma3_slack + (1.0 + mu * alpha / n) * row.avg_distance_to_ne**2
            checks.append(("lemma3", row.lemma3_slack, rhs3))
        for name, slack, rhs in checks:
            normalized = slack / (1.0 + abs(rhs))
            if normalized < -tol:
                return (name, row.t, normalized)
    return None


def zdomination_excess(trace, z: np.ndarray) -> float:
    """Worst normalized violation of ``z_next <= Z z`` over a trace.

    Nonpositive means the domination held everywhere; compare against
    ``SLACK_TOL``.
    """
    worst = -math.inf
    for prev, cur in zip(trace, trace[1:]):
        zv = np.array([prev.avg_distance_to_ne**2, prev.consensus_violation**2])
        nxt = np.array([cur.avg_distance_to_ne**2, cur.consensus_violation**2])
        bound = z @ zv
        excess = np.max((nxt - bound) / (1.0 + np.abs(bound)))
        worst = max(worst, float(excess))
    return worst


def envelope_excess(trace, z: np.ndarray, lambda1: float, lambda2: float) -> float:
    """Worst normalized excess of the squared error over its geometric envelope.

    The envelope constant is assembled from the comparison matrix and the
    ``t = 0`` error components:

        K = 4 / (lambda1 - lambda2) * ((Z11 + Z21) * avg_err0^2
                                       + (Z12 + Z22) * cons_viol0^2)

    and the bound checked is ``dist(t)^2 <= K * lambda1**(t-1)`` for
    ``t >= 1``.  Nonpositive return means it held everywhere.
    """
    if len(trace) < 2:
        return -math.inf
    z10 = trace[0].avg_distance_to_ne**2
    z20 = trace[0].consensus_violation**2
    k = 4.0 / (lambda1 - lambda2) * ((z[0, 0] + z[1, 0]) * z10 + (z[0, 1] + z[1, 1]) * z20)
    worst = -math.inf
    for row in trace[1:]:
        env = k * lambda1 ** (row.t - 1)
        worst = max(worst, (row.distance_to_ne**2 - env) / (1.0 + env))
    return worst


def recursion_residual(game, w, alpha: float, x0: np.ndarray, iters: int) -> float:
    """Max normalized residual of the running-average recursion over a run.

    Compares the column means after one update step against
    ``avg - (alpha / n) * g`` computed independently; both sides agree to
    rounding for every state.
    """
    x = np.array(x0, dtype=float)
    n = x.shape[0]
    worst = 0.0
    for _ in range(iters):
        g = diag_gradient(game, x)
        predicted = running_average(x) - (alpha / n) * g
        x = step(x, w, alpha, game)
        actual = running_average(x)
        resid = float(np.linalg.norm(actual - predicted))
        worst = max(worst, resid / (1.0 + float(np.linalg.norm(predicted))))
    return worst


def fit_tail_contraction(trace, burn_frac: float = 0.5, min_points: int = 20):
    """Least-squares line through ``log(dist^2)`` over the trace tail.

    Returns ``(slope, r_squared, n_points)`` or ``None`` when the tail is
    too short or already at numerical zero.  ``exp(slope)`` estimates the
    per-step squared-error contraction ratio.
    """
    if not trace:
        return None
    d0 = trace[0].distance_to_ne
    floor = max(1e-13 * d0, 1e-300)
    start = int(len(trace) * burn_frac)
    ts, ys = [], []
    for row in trace[start:]:
        if row.distance_to_ne > floor:
            ts.append(row.t)
            ys.append(2.0 * math.log(row.distance_to_ne))
    if len(ts) < min_points:
        return None
    t = np.array(ts, dtype=float)
    y = np.array(ys, dtype=float)
    slope, intercept = np.polyfit(t, y, 1)
    fitted = slope * t + intercept
    ss_res = float(np.sum((y - fitted) ** 2))
    ss_tot = float(np.sum((y - np.mean(y)) ** 2))
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    return float(slope), r2, len(ts)


# ---------------------------------------------------------------------------
# experiment runner


@dataclass
class ExperimentReport:
    """Everything ``run_experiment`` measured, plus the trace itself."""

    config: ExperimentConfig
    mu: float
    l: float
    kappa: float
    sigma: float
    terms: tuple | None
    alpha_max: float | None
    alpha: float
    alpha_admissible: bool | None
    alpha_note: str
    q: float | None
    iterations: int
    initial_distance: float
    final_distance: float
    final_relative_error: float
    fitted_contraction_ratio: float | None
    fit_r_squared: float | None
    lemma_min_slacks: dict
    first_violation: tuple | None
    diverged: bool
    runtime_seconds: float
    ok: bool
    trace: list = field(repr=False, default_factory=list)

    def to_dict(self) -> dict:
        doc = {
            "config": self.config.to_dict(),
            "mu": self.mu,
            "l": self.l,
            "kappa": self.kappa,
            "sigma": self.sigma,
            "terms": list(self.terms) if self.terms is not None else None,
            "alpha_max": self.alpha_max,
            "alpha": self.alpha,
            "alpha_admissible": self.alpha_admissible,
            "alpha_note": self.alpha_note,
            "q": self.q,
            "iterations": self.iterations,
            "initial_distance": self.initial_distance,
            "final_distance": self.final_distance,
            "final_relative_error": self.final_relative_error,
            "fitted_contraction_ratio": self.fitted_contraction_ratio,
            "fit_r_squared": self.fit_r_squared,
            "lemma_min_slacks": self.lemma_min_slacks,
            "first_violation": list(self.first_violation) if self.first_violation else None,
            "diverged": self.diverged,
            "runtime_seconds": self.runtime_seconds,
            "ok": self.ok,
        }
        return doc

    def to_text(self) -> str:
        lines = [
            "# experiment summary",
            "# relative error = ||x_t - x*||_Fro / ||x_0 - x*||_Fro, the distance of the",
            "# estimation matrix to the consensual equilibrium matrix normalized by its",
            "# initial value (normalization chosen here; no canonical definition exists).",
        ]
        doc = self.to_dict()
        config = doc.pop("config")
        for key, value in config.items():
            lines.append(f"config.{key}: {value!r}")
        for key, value in doc.items():
            lines.append(f"{key}: {value!r}")
        return "\n".join(lines) + "\n"


_PLOT_SCRIPT = """\
#!/usr/bin/env python3
\"\"\"Render relative error vs iteration from trace.csv into plot.svg.\"\"\"
import csv
import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

here = os.path.dirname(os.path.abspath(__file__))
with open(os.path.join(here, "trace.csv")) as f:
    rows = list(csv.DictReader(f))
d0 = float(rows[0]["distance_to_ne"]) or 1.0
ts = [int(r["t"]) for r in rows]
rel = [float(r["distance_to_ne"]) / d0 for r in rows]

plt.figure(figsize=(6.4, 4.2))
plt.semilogy(ts, rel, lw=1.2)
plt.xlabel("iteration")
plt.ylabel("relative error")
plt.title("distributed gradient play")
plt.grid(True, which="both", alpha=0.3)
plt.tight_layout()
out = os.path.join(here, "plot.svg")
plt.savefig(out)
print("wrote", out)
"""


def _resolve_alpha(config, mu, l, sigma, n):
    """Returns (alpha, terms, ceiling, admissible, note)."""
    terms = ceiling = None
    note = ""
    try:
        terms = bounds.step_size_terms(mu, l, sigma, n)
        ceiling = min(terms)
    except PerfectMixingError as exc:
        note = f"step-size ceiling unavailable: {exc}"
    if isinstance(config.alpha, str):  # "auto"
        if ceiling is None:
            raise PerfectMixingError(
                "alpha='auto' needs a step-size ceiling, but " + note
            )
        alpha = 0.9 * ceiling
        admissible = True
        note = "alpha resolved to 0.9 * alpha_max"
    else:
        alpha = float(config.alpha)
        admissible = None if ceiling is None else bool(0 < alpha < ceiling)
        if admissible is False:
            note = (
                f"alpha={alpha} exceeds the certified ceiling "
                f"alpha_max={ceiling!r}; geometric-rate certificate does not "
                "apply (divergence guard stays active)"
            )
        elif admissible:
            note = "explicit alpha below the certified ceiling"
    return alpha, terms, ceiling, admissible, note


def run_experiment(config: ExperimentConfig, out_dir=None, game=None, graph=None, x0=None):
    """Run one configured experiment; optionally write its artifacts.

    ``game``, ``graph`` and ``x0`` override the seeded constructions (useful
    for hand-built cases); everything else comes from ``config``.  With
    ``out_dir`` set, writes ``trace.csv``, ``summary.txt``, ``summary.json``,
    ``plot.py``, plus the game, graph and mixing-matrix documents.
    """
    config.validate()
    t_start = time.perf_counter()
    if game is None:
        game = random_game(config.n, config.game_seed, config.coupling_scale)
    if graph is None:
        graph = build_graph(config.topology, config.n, config.graph_seed)
    if graph.n != game.n:
        raise ValueError(f"graph has {graph.n} nodes but game has {game.n} players")
    w = metropolis_weights(graph)
    consts = estimate_constants(game)
    alpha, terms, ceiling, admissible, note = _resolve_alpha(
        config, consts.mu, consts.l, w.sigma, game.n
    )
    q = None
    if admissible:
        q = bounds.rate_bound(consts.mu, consts.l, w.sigma, game.n, alpha).q

    if x0 is None:
        x0 = initial_estimates(game.n, config.init_seed)
    diverged = False
    try:
        final, trace = run(
            game, w, alpha, x0, max_iters=config.max_iters, tol=config.tol, record=True
        )
    except DivergenceError as exc:
        diverged = True
        trace = exc.trace
        final = None
        note = (note + "; " if note else "") + str(exc)

    initial_distance = trace[0].distance_to_ne if trace else float("nan")
    final_distance = trace[-1].distance_to_ne if trace else float("nan")
    rel = final_distance / initial_distance if initial_distance > 0 else 0.0

    mins = lemma_slack_minima(trace, consts.mu, consts.l, alpha, game.n)
    violation = None
    if config.check_lemmas:
        violation = first_lemma_violation(trace, consts.mu, consts.l, alpha, game.n)

    fit = fit_tail_contraction(trace)
    fitted_ratio = math.exp(fit[0]) if fit else None
    fit_r2 = fit[1] if fit else None

    report = ExperimentReport(
        config=config,
        mu=consts.mu,
        l=consts.l,
        kappa=consts.kappa,
        sigma=w.sigma,
        terms=terms,
        alpha_max=ceiling,
        alpha=alpha,
        alpha_admissible=admissible,
        alpha_note=note,
        q=q,
        iterations=trace[-1].t if trace else 0,
        initial_distance=initial_distance,
        final_distance=final_distance,
        final_relative_error=rel,
        fitted_contraction_ratio=fitted_ratio,
        fit_r_squared=fit_r2,
        lemma_min_slacks=mins,
        first_violation=violation,
        diverged=diverged,
        runtime_seconds=time.perf_counter() - t_start,
        ok=not diverged and violation is None,
        trace=trace,
    )

    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, "trace.csv"), "w", encoding="utf-8") as f:
            f.write(trace_to_csv(trace))
        with open(os.path.join(out_dir, "summary.txt"), "w", encoding="utf-8") as f:
            f.write(report.to_text())
        with open(os.path.join(out_dir, "summary.json"), "w", encoding="utf-8") as f:
            json.dump(report.to_dict(), f, indent=2)
            f.write("\n")
        with open(os.path.join(out_dir, "plot.py"), "w", encoding="utf-8") as f:
            f.write(_PLOT_SCRIPT)
        with open(os.path.join(out_dir, "game.json"), "w", encoding="utf-8") as f:
            json.dump(game_to_dict(game), f, indent=2)
            f.write("\n")
        with open(os.path.join(out_dir, "graph.edges"), "w", encoding="utf-8") as f:
            f.write(graph_to_edgelist(graph))
        save_mixing_matrix(w, os.path.join(out_dir, "mixing.csv"))

    return report


# ---------------------------------------------------------------------------
# batch audit


@dataclass
class AuditCheck:
    name: str
    passed: bool
    worst: float
    note: str = ""

    def __post_init__(self):
        # numpy scalars sneak in from comparisons; keep the report JSON-clean
        self.passed = bool(self.passed)
        self.worst = float(self.worst)


@dataclass
class AuditCell:
    n: int
    topology: str
    seed: int
    sigma: float
    mu: float | None
    l: float | None
    alpha: float | None
    admissible: bool | None
    degenerate: bool
    checks: list

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.checks)

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "topology": self.topology,
            "seed": self.seed,
            "sigma": self.sigma,
            "mu": self.mu,
            "l": self.l,
            "alpha": self.alpha,
            "admissible": self.admissible,
            "degenerate": self.degenerate,
            "ok": self.ok,
            "checks": [asdict(c) for c in self.checks],
        }


@dataclass
class AuditReport:
    cells: list

    @property
    def ok(self) -> bool:
        return all(cell.ok for cell in self.cells)

    def failures(self):
        return [
            (cell, check)
            for cell in self.cells
            for check in cell.checks
            if not check.passed
        ]

    def to_dict(self) -> dict:
        return {
            "ok": self.ok,
            "cells": [cell.to_dict() for cell in self.cells],
            "failures": [
                {
                    "n": cell.n,
                    "topology": cell.topology,
                    "seed": cell.seed,
                    "check": check.name,
                    "worst": check.worst,
                    "note": check.note,
                }
                for cell, check in self.failures()
            ],
        }

    def to_text(self) -> str:
        lines = []
        for cell in self.cells:
            status = "ok" if cell.ok else "FAIL"
            lines.append(
                f"n={cell.n:3d} {cell.topology:8s} seed={cell.seed} "
                f"sigma={cell.sigma:.4f} {status}"
            )
            for check in cell.checks:
                if not check.passed:
                    lines.append(
                        f"    FAILED {check.name}: worst={check.worst!r} {check.note}"
                    )
        lines.append(f"audit: {'all passed' if self.ok else 'FAILURES PRESENT'}")
        return "\n".join(lines) + "\n"


def _audit_game_assumptions(game, consts, rng, samples=100):
    """Worst normalized margins of monotonicity and the Lipschitz bounds."""
    n = game.n
    worst_mono = math.inf
    worst_lip = math.inf
    for _ in range(samples):
        u = rng.uniform(-5, 5, n)
        v = rng.uniform(-5, 5, n)
        du = u - v
        lhs = float((game_mapping(game, u) - game_mapping(game, v)) @ du)
        rhs = consts.mu * float(du @ du)
        worst_mono = min(worst_mono, (lhs - rhs) / (1.0 + abs(rhs)))
        # per-player and full-mapping Lipschitz bounds
        i = int(rng.integers(0, n))
        g_diff = abs(local_gradient(game, i, u) - local_gradient(game, i, v))
        lip_rhs = consts.l_per_player[i] * float(np.linalg.norm(du))
        worst_lip = min(worst_lip, (lip_rhs - g_diff) / (1.0 + lip_rhs))
        f_diff = float(np.linalg.norm(game_mapping(game, u) - game_mapping(game, v)))
        map_rhs = consts.l_mapping * float(np.linalg.norm(du))
        worst_lip = min(worst_lip, (map_rhs - f_diff) / (1.0 + map_rhs))
    return worst_mono, worst_lip


def _audit_mixing(graph, w):
    err = max(
        float(np.max(np.abs(w.w.sum(axis=1) - 1.0))),
        float(np.max(np.abs(w.w.sum(axis=0) - 1.0))),
    )
    symmetric = bool(np.array_equal(w.w, w.w.T))
    edges = set(graph.edges)
    sparsity_ok = True
    for i in range(graph.n):
        for j in range(i + 1, graph.n):
            if ((i, j) in edges) != (w.w[i, j] > 0):
                sparsity_ok = False
    diag_ok = bool(np.all(np.diag(w.w) > 0))
    ok = err <= 1e-12 and symmetric and sparsity_ok and diag_ok and 0 <= w.sigma < 1
    return ok, err


def _audit_average_property(w, rng, samples=200):
    worst = math.inf
    for _ in range(samples):
        x = rng.uniform(-10, 10, w.n)
        lhs, rhs = average_property_check(w, x)
        worst = min(worst, (rhs - lhs + 1e-12) / (1.0 + rhs))
    return worst


def audit(
    sizes=(2, 5, 10, 20),
    topologies=TOPOLOGIES,
    seeds=5,
    coupling_scale=0.2,
    iters=200,
    alpha_override=None,
    eq5_samples=200,
    out_dir=None,
) -> AuditReport:
    """Verify every checkable invariant over a matrix of configurations.

    Each cell draws a fresh game and graph, picks ``alpha`` (0.9 of the
    certified ceiling unless ``alpha_override`` is given), runs the
    iteration and checks: the game assumptions, the mixing-matrix
    properties, the averaging contraction, the three per-iteration
    inequalities, the running-average recursion, elementwise domination by
    the comparison matrix, the spectral cross-checks and the geometric
    envelope.  Cells whose mixing matrix has ``sigma = 0`` (the 2-node
    complete graph) instead verify the documented degenerate-mixing error.
    Invalid combinations (ring with n < 3) are skipped.
    """
    cells = []
    for n in sizes:
        for topology in topologies:
            if topology == "ring" and n < 3:
                continue
            for seed in range(seeds):
                cells.append(
                    _audit_cell(
                        n, topology, seed, coupling_scale, iters, alpha_override, eq5_samples
                    )
                )
    report = AuditReport(cells=cells)
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, "audit.json"), "w", encoding="utf-8") as f:
            json.dump(report.to_dict(), f, indent=2)
            f.write("\n")
        with open(os.path.join(out_dir, "audit.txt"), "w", encoding="utf-8") as f:
            f.write(report.to_text())
    return report


def _audit_cell(n, topology, seed, coupling_scale, iters, alpha_override, eq5_samples):
    rng = np.random.default_rng(10_000 + 7 * seed + n)
    graph = build_graph(topology, n, seed=1000 + seed)
    w = metropolis_weights(graph)
    game = random_game(n, seed=2000 + seed, coupling_scale=coupling_scale)
    consts = estimate_constants(game)
    checks = []

    mix_ok, mix_err = _audit_mixing(graph, w)
    checks.append(AuditCheck("mixing_matrix", mix_ok, mix_err))
    avg_worst = _audit_average_property(w, rng, eq5_samples)
    checks.append(AuditCheck("averaging_contraction", avg_worst >= 0, avg_worst))
    mono_worst, lip_worst = _audit_game_assumptions(game, consts, rng)
    checks.append(AuditCheck("strong_monotonicity", mono_worst >= -SLACK_TOL, mono_worst))
    checks.append(AuditCheck("lipschitz_bounds", lip_worst >= -SLACK_TOL, lip_worst))

    if w.sigma == 0.0:
        # Degenerate perfect mixing: the ceiling terms must refuse, loudly.
        try:
            bounds.step_size_terms(consts.mu, consts.l, w.sigma, n)
            checks.append(
                AuditCheck("degenerate_mixing_error", False, 0.0, "error not raised")
            )
        except PerfectMixingError:
            checks.append(AuditCheck("degenerate_mixing_error", True, 0.0))
        return AuditCell(
            n=n,
            topology=topology,
            seed=seed,
            sigma=w.sigma,
            mu=consts.mu,
            l=consts.l,
            alpha=None,
            admissible=None,
            degenerate=True,
            checks=checks,
        )

    ceiling = bounds.alpha_max(consts.mu, consts.l, w.sigma, n)
    alpha = alpha_override if alpha_override is not None else 0.9 * ceiling
    admissible = bool(0 < alpha < ceiling)
    checks.append(
        AuditCheck(
            "admissible_step",
            admissible,
            alpha / ceiling,
            "" if admissible else f"alpha={alpha} vs ceiling={ceiling!r}",
        )
    )

    x0 = initial_estimates(n, seed=3000 + seed)
    diverged = False
    try:
        _, trace = run(game, w, alpha, x0, max_iters=iters, tol=0.0, record=True)
    except DivergenceError as exc:
        diverged = True
        trace = exc.trace
        checks.append(AuditCheck("no_divergence", False, math.inf, str(exc)))
    if not diverged:
        checks.append(AuditCheck("no_divergence", True, 0.0))

    if trace:
        mins = lemma_slack_minima(trace, consts.mu, consts.l, alpha, n)
        checks.append(
            AuditCheck("lemma1", mins["lemma1"] >= -SLACK_TOL, mins["lemma1"])
        )
        checks.append(
            AuditCheck("lemma2", mins["lemma2"] >= -SLACK_TOL, mins["lemma2"])
        )
        if mins["lemma3_applicable"]:
            checks.append(
                AuditCheck("lemma3", mins["lemma3"] >= -SLACK_TOL, mins["lemma3"])
            )

    resid = recursion_residual(game, w, alpha, x0, iters=min(iters, 100))
    checks.append(AuditCheck("average_recursion", resid <= 1e-12, resid))

    if admissible:
        rb = bounds.rate_bound(consts.mu, consts.l, w.sigma, n, alpha)
        z = bounds.z_matrix(consts.mu, consts.l, w.sigma, n, alpha)
        eig = np.sort(np.linalg.eigvals(z).real)
        eig_err = max(abs(eig[1] - rb.lambda1), abs(eig[0] - rb.lambda2))
        rate_ok = (
            0 < rb.q < 1
            and rb.lambda1 > abs(rb.lambda2)
            and eig_err <= 1e-12
        )
        checks.append(AuditCheck("rate_certificate", rate_ok, eig_err))
        t5 = bounds.step_size_terms(consts.mu, consts.l, w.sigma, n)[4]
        alt = bounds.quadratic_form_alpha_bound(consts.mu, consts.l, w.sigma, n)
        t5_err = abs(t5 - alt) / abs(t5)
        checks.append(AuditCheck("fifth_term_equivalence", t5_err <= 1e-12, t5_err))
        if trace:
            zdom = zdomination_excess(trace, z)
            checks.append(AuditCheck("z_domination", zdom <= SLACK_TOL, zdom))
            env = envelope_excess(trace, z, rb.lambda1, rb.lambda2)
            checks.append(AuditCheck("geometric_envelope", env <= SLACK_TOL, env))

    return AuditCell(
        n=n,
        topology=topology,
        seed=seed,
        sigma=w.sigma,
        mu=consts.mu,
        l=consts.l,
        alpha=alpha,
        admissible=admissible,
        degenerate=False,
        checks=checks,
    )
