"""Channel-aware simulated annealing over placement vectors.

The search perturbs one candidate per iteration with a channel-guided
mutation: genes whose current placement enjoys a relatively strong channel
are likely to be kept, everything else is redrawn uniformly.  Acceptance is
the classic Boltzmann rule on the weighted-latency objective with geometric
cooling.  The iteration budget is adapted between invocations from the
policy-loss improvement: while the learner still improves quickly the search
works harder, once learning flattens the budget decays to a single step.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .allocator import Evaluator
from .mec import ChannelState, OffloadDecision, Scenario


@dataclass(frozen=True)
class AnnealConfig:
    t0: float = 1.0
    phi_cool: float = 0.95
    t_sa_init: int = 20
    epsilon: float = 0.02
    t_sa_max: int = 100

    def __post_init__(self) -> None:
        if self.t0 <= 0 or not 0 < self.phi_cool <= 1:
            raise ValueError("bad temperature schedule")
        if self.t_sa_init < 1 or self.t_sa_max < 1:
            raise ValueError("iteration budgets must be at least 1")


@dataclass(frozen=True)
class BudgetState:
    """Current adaptive iteration budget."""

    budget: int


@dataclass(frozen=True)
class SearchResult:
    decision: OffloadDecision
    objective: float
    trace: tuple[float, ...]  # best objective after each iteration


def mutation_probs(assign: np.ndarray, gains: np.ndarray) -> np.ndarray:
    """Per-gene keep probability.

    Offloaded genes keep with probability h[i, a_i] / sum_j h[i, j]: the
    better the serving MEC's channel relative to the alternatives, the
    stickier the gene.  Local genes have no channel of their own and keep
    with the neutral 1/(M+1).
    """
    n, m = gains.shape
    probs = np.full(n, 1.0 / (m + 1))
    off = assign > 0
    if off.any():
        rows = np.flatnonzero(off)
        probs[rows] = gains[rows, assign[rows] - 1] / gains[rows].sum(axis=1)
    return probs


def mutate(assign: np.ndarray, gains: np.ndarray,
           rng: np.random.Generator) -> np.ndarray:
    """One channel-guided neighbour, guaranteed to differ from the input.

    Redrawn genes are uniform over the full {0..M} range (they may land on
    their old value); if the whole vector survives unchanged, one uniformly
    chosen gene is forced to a different value.
    """
    n, m = gains.shape
    cand = assign.copy()
    redraw = rng.random(n) > mutation_probs(assign, gains)
    if redraw.any():
        cand[redraw] = rng.integers(0, m + 1, size=int(redraw.sum()))
    if np.array_equal(cand, assign):
        k = int(rng.integers(n))
        shift = int(rng.integers(m))  # uniform over the other M values
        cand[k] = shift if shift < assign[k] else shift + 1
    return cand


def accept(f_old: float, f_new: float, temperature: float,
           rng: np.random.Generator) -> bool:
    """Boltzmann rule: accept iff exp((f_old - f_new)/T) beats a uniform draw."""
    delta = f_old - f_new
    if delta >= 0:
        return True
    return bool(np.exp(delta / temperature) > rng.random())


def adapt_budget(state: BudgetState, delta_loss: float,
                 cfg: AnnealConfig) -> BudgetState:
    """Grow the budget by one while the loss still falls fast, else shrink."""
    if delta_loss >= cfg.epsilon:
        budget = state.budget + 1
    elif state.budget != 1:
        budget = state.budget - 1
    else:
        budget = 1
    return BudgetState(budget=min(max(budget, 1), cfg.t_sa_max))


def search(initial: OffloadDecision, scenario: Scenario, channel: ChannelState,
           cfg: AnnealConfig, state: BudgetState, rng: np.random.Generator,
           evaluator: Evaluator | None = None) -> SearchResult:
    """Run ``state.budget`` annealing iterations from ``initial``.

    Returns the best placement visited, which includes the starting point,
    so the result never scores worse than the input decision.
    """
    ev = evaluator if evaluator is not None else Evaluator(scenario, channel)
    current = initial.assign.copy()
    f_cur = ev.latency_of(current)
    best, f_best = current.copy(), f_cur
    temperature = cfg.t0
    trace = [f_best]
    for _ in range(state.budget):
        cand = mutate(current, channel.gains, rng)
        f_cand = ev.latency_of(cand)
        if f_cand < f_best:
            best, f_best = cand.copy(), f_cand
        if accept(f_cur, f_cand, temperature, rng):
            current, f_cur = cand, f_cand
        temperature *= cfg.phi_cool
        trace.append(f_best)
    return SearchResult(decision=OffloadDecision(assign=best, n_mecs=ev.m),
                        objective=f_best, trace=tuple(trace))


def random_search(initial: OffloadDecision, scenario: Scenario,
                  channel: ChannelState, budget: int, rng: np.random.Generator,
                  evaluator: Evaluator | None = None) -> SearchResult:
    """Ablation baseline: same budget, but uniform redraws of the whole vector."""
    ev = evaluator if evaluator is not None else Evaluator(scenario, channel)
    best = initial.assign.copy()
    f_best = ev.latency_of(best)
    trace = [f_best]
    n = best.shape[0]
    for _ in range(budget):
        cand = rng.integers(0, ev.m + 1, size=n)
        f_cand = ev.latency_of(cand)
        if f_cand < f_best:
            best, f_best = cand, f_cand
        trace.append(f_best)
    return SearchResult(decision=OffloadDecision(assign=best, n_mecs=ev.m),
                        objective=f_best, trace=tuple(trace))
