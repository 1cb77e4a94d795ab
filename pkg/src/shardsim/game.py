"""Edge strategies, best responses, fictitious-play estimates and the potential."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .pricing import check_simplex

TIE_TOL = 1e-12


class GameError(ValueError):
    pass


@dataclass(slots=True)
class EdgeStrategy:
    """Request distribution ``w`` (receiver side) and sending distribution ``v``."""

    w: np.ndarray
    v: np.ndarray

    def __post_init__(self) -> None:
        self.w = check_simplex(self.w, "w")
        self.v = check_simplex(self.v, "v")

    @classmethod
    def pure(cls, m: int, request: int, send: int) -> EdgeStrategy:
        return cls(unit(m, request), unit(m, send))

    def copy(self) -> EdgeStrategy:
        return EdgeStrategy(self.w.copy(), self.v.copy())


class EmpiricalEstimate:
    """Histogram of observed shard choices on one edge, with pseudo-counts.

    The estimate is (counts + prior) / sum(counts + prior).
    """

    __slots__ = ("counts", "prior", "_weights", "_total")

    def __init__(self, counts: Sequence[int], prior: Sequence[float]):
        if len(counts) != len(prior):
            raise GameError("counts and prior differ in length")
        if any(c < 0 for c in counts) or any(p < 0 for p in prior):
            raise GameError("counts and prior must be non-negative")
        self.counts = [int(c) for c in counts]
        self.prior = [float(p) for p in prior]
        self._weights = [c + p for c, p in zip(self.counts, self.prior)]
        self._total = sum(self._weights)

    @classmethod
    def uniform(cls, m: int, pseudo: float = 1.0) -> EmpiricalEstimate:
        return cls([0] * m, [float(pseudo)] * m)

    def observe(self, shard: int) -> None:
        self.counts[shard] += 1
        self._weights[shard] += 1.0
        self._total += 1.0

    def as_list(self) -> list[float]:
        total = self._total
        if total <= 0:
            return [1.0 / len(self._weights)] * len(self._weights)
        return [x / total for x in self._weights]

    @property
    def estimate(self) -> np.ndarray:
        return np.array(self.as_list())

    @property
    def top_mass(self) -> float:
        return max(self.as_list())


def unit(m: int, s: int) -> np.ndarray:
    e = np.zeros(m)
    e[s] = 1.0
    return e


def update_estimate(est: EmpiricalEstimate, observed: int) -> EmpiricalEstimate:
    est.observe(observed)
    return est


def argmax_lowest(values: np.ndarray | Sequence[float], rng: np.random.Generator | None = None) -> int:
    """Index of the maximum; ties within TIE_TOL go to the lowest index, or to a
    uniformly drawn one when ``rng`` is given."""
    if isinstance(values, np.ndarray):
        values = values.tolist()
    cut = max(values) - TIE_TOL
    tied = [k for k, x in enumerate(values) if x >= cut]
    if rng is None or len(tied) == 1:
        return tied[0]
    return tied[int(rng.integers(len(tied)))]


def request_values(pmat: np.ndarray, v_hat: np.ndarray) -> np.ndarray:
    return pmat @ v_hat


def send_values(pmat: np.ndarray, w_hat: np.ndarray) -> np.ndarray:
    return w_hat @ pmat


def best_response_request(pmat: np.ndarray, v_hat: np.ndarray,
                          rng: np.random.Generator | None = None) -> np.ndarray:
    """Pure best response of the receiver to the estimated sending distribution."""
    return unit(len(v_hat), argmax_lowest(request_values(pmat, v_hat), rng))


def best_response_send(pmat: np.ndarray, w_hat: np.ndarray,
                       rng: np.random.Generator | None = None) -> np.ndarray:
    return unit(len(w_hat), argmax_lowest(send_values(pmat, w_hat), rng))


def mixed_best_response(pmat: np.ndarray, v_hat: np.ndarray) -> np.ndarray:
    """Uniform mixture over every vertex attaining the maximum of w^T P v_hat.

    A bilinear objective over the simplex peaks at a vertex, so enumerating
    the m vertices is exact.
    """
    vals = request_values(pmat, v_hat)
    tied = vals >= vals.max() - TIE_TOL
    return tied / tied.sum()


def edge_utility(strategy: EdgeStrategy, pmat: np.ndarray) -> float:
    return float(strategy.w @ pmat @ strategy.v)


def potential(strategies: Sequence[EdgeStrategy], pmat: np.ndarray) -> float:
    """H = sum over edges of w^T P v."""
    if not strategies:
        return 0.0
    w = np.array([st.w for st in strategies])
    v = np.array([st.v for st in strategies])
    return float(np.einsum("ks,st,kt->", w, pmat, v))


@dataclass
class PotentialState:
    """Edge strategies with cached per-edge utilities and their sum."""

    strategies: list[EdgeStrategy]
    pmat: np.ndarray
    utilities: np.ndarray = field(init=False)
    total: float = field(init=False)

    def __post_init__(self) -> None:
        self.utilities = np.array([edge_utility(s, self.pmat) for s in self.strategies])
        self.total = float(self.utilities.sum())

    def recompute(self) -> float:
        return potential(self.strategies, self.pmat)

    def apply(self, edge: int, side: str, new: np.ndarray) -> None:
        st = self.strategies[edge]
        if side == "w":
            st.w = check_simplex(new, "w")
        elif side == "v":
            st.v = check_simplex(new, "v")
        else:
            raise GameError(f"unknown strategy side {side!r}")
        u = edge_utility(st, self.pmat)
        self.total += u - self.utilities[edge]
        self.utilities[edge] = u


def verify_potential_step(before: PotentialState, edge: int, side: str,
                          old: np.ndarray, new: np.ndarray,
                          pmat: np.ndarray | None = None) -> tuple[float, float]:
    """Apply a unilateral change and return (change in H, change in u_edge).

    Both are computed independently: H from a full recomputation over all
    edges, the edge utility from the single edge.  They agree exactly when the
    potential property holds.
    """
    pmat = before.pmat if pmat is None else pmat
    st = before.strategies[edge]
    current = st.w if side == "w" else st.v if side == "v" else None
    if current is None:
        raise GameError(f"unknown strategy side {side!r}")
    if not np.array_equal(current, old):
        raise GameError("old strategy does not match the edge's current strategy")
    h_before = potential(before.strategies, pmat)
    u_before = edge_utility(st, pmat)
    after = [s.copy() for s in before.strategies]
    if side == "w":
        after[edge].w = check_simplex(new, "w")
    else:
        after[edge].v = check_simplex(new, "v")
    h_after = potential(after, pmat)
    u_after = edge_utility(after[edge], pmat)
    return h_after - h_before, u_after - u_before


def check_unilateral(before: Sequence[EdgeStrategy], after: Sequence[EdgeStrategy]) -> tuple[int, str]:
    """Locate the single (edge, side) that differs between two profiles."""
    if len(before) != len(after):
        raise GameError("profiles have different edge counts")
    changed = []
    for k, (a, b) in enumerate(zip(before, after)):
        if not np.array_equal(a.w, b.w):
            changed.append((k, "w"))
        if not np.array_equal(a.v, b.v):
            changed.append((k, "v"))
    if len(changed) > 1:
        raise GameError(f"more than one strategy changed: {changed}")
    return changed[0] if changed else (-1, "")


def best_response_sweeps(strategies: list[EdgeStrategy], pmat: np.ndarray,
                         max_sweeps: int = 10) -> tuple[list[float], bool]:
    """Asynchronous pure best-response sweeps with P held fixed.

    Each sweep visits every edge, updating the request side against the
    current sending side and then the sending side against the new request
    side.  A strategy only changes on strict improvement.  Returns the
    potential after every update (tracked incrementally) and whether a sweep
    finished without any change.
    """
    state = PotentialState(strategies, pmat)
    trace = [state.total]
    m = pmat.shape[0]
    for _ in range(max_sweeps):
        changed = False
        for k, st in enumerate(strategies):
            for side in ("w", "v"):
                if side == "w":
                    vals = request_values(pmat, st.v)
                    cur = float(st.w @ vals)
                else:
                    vals = send_values(pmat, st.w)
                    cur = float(vals @ st.v)
                s = argmax_lowest(vals)
                if vals[s] > cur + TIE_TOL:
                    state.apply(k, side, unit(m, s))
                    changed = True
                trace.append(state.total)
        if not changed:
            return trace, True
    return trace, False
