"""Row-stochastic mixing schedules on a weighted cycle.

Agents share state through a sequence of row-stochastic matrices W(1), W(2), ...
that all preserve a common positive weight vector r from the left (r' W = r').
Two built-in families live on the n-cycle:

* ``fixed_cycle_schedule``: every iteration uses the same matrix, built by a
  detailed-balance rule on the undirected cycle, so each agent always talks to
  both cyclic neighbors.
* ``gossip_schedule``: iteration t activates the single cycle edge joining
  agents ``t mod n`` and ``(t+1) mod n`` (0-based); everyone else keeps their
  own state.  The schedule has period n.

Arbitrary user-supplied periodic schedules are wrapped by
``matrix_list_schedule``.  ``validate_schedule`` measures how well a schedule
satisfies the assumptions the convergence analysis needs: exact row sums,
left-stationarity of r, a positive floor eta on nonzero entries, and strong
connectivity of every length-B window of the communication graph.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# Absolute tolerance for "sums to one" checks on weight vectors and matrix rows.
STOCHASTICITY_TOL = 1e-12


def make_weight_vector(p) -> np.ndarray:
    """Normalize positive scores p into a weight vector r with sum(r) == 1.

    Raises ValueError for empty input, nonfinite entries, or entries <= 0.
    """
    p = np.asarray(p, dtype=float)
    if p.ndim != 1 or p.size == 0:
        raise ValueError("weight scores must be a nonempty 1-D array")
    if not np.all(np.isfinite(p)):
        raise ValueError("weight scores must be finite")
    if np.any(p <= 0.0):
        bad = int(np.argmax(p <= 0.0))
        raise ValueError(
            f"weight scores must be strictly positive; index {bad} is {p[bad]}"
        )
    r = p / p.sum()
    # Division by the exact sum leaves at most a few ulps of drift.
    if abs(r.sum() - 1.0) > STOCHASTICITY_TOL:
        raise ValueError("normalized weights do not sum to 1 within tolerance")
    return r


def _check_weights(r: np.ndarray, n_min: int = 1) -> np.ndarray:
    r = np.asarray(r, dtype=float)
    if r.ndim != 1 or r.size < n_min:
        raise ValueError(f"weight vector must be 1-D with at least {n_min} entries")
    if np.any(r <= 0.0) or abs(r.sum() - 1.0) > STOCHASTICITY_TOL:
        raise ValueError("weight vector must be positive and sum to 1")
    return r


def fixed_cycle_matrix(r) -> np.ndarray:
    """Mixing matrix of the static cycle for weights r (n >= 3).

    Neighbor weights follow a detailed-balance rule,
    ``W[i, j] = r[j] / (2 (r[i] + r[j]))`` for j adjacent to i on the cycle,
    with the diagonal absorbing the remainder.  Detailed balance
    (``r[i] W[i, j] == r[j] W[j, i]``) is what makes r left-stationary, and
    each row sums to exactly 1/2 + 1/2 by construction.
    """
    r = _check_weights(r, n_min=3)
    n = r.size
    W = np.zeros((n, n))
    for i in range(n):
        up = (i + 1) % n
        dn = (i - 1) % n
        W[i, up] = r[up] / (2.0 * (r[i] + r[up]))
        W[i, dn] = r[dn] / (2.0 * (r[i] + r[dn]))
        W[i, i] = r[i] / (2.0 * (r[i] + r[up])) + r[i] / (2.0 * (r[i] + r[dn]))
    return W


def gossip_pair(n: int, t: int) -> tuple[int, int]:
    """0-based agent pair activated by the gossip schedule at iteration t >= 1."""
    return t % n, (t + 1) % n


def gossip_matrix(r, t: int) -> np.ndarray:
    """Mixing matrix of the single-edge gossip schedule at iteration t >= 1.

    Only the two active agents average; the 2x2 block puts weight
    ``r[j] / (r[a] + r[b])`` on column j, which keeps r left-stationary.
    All other rows are identity rows.
    """
    r = _check_weights(r, n_min=3)
    if t < 1:
        raise ValueError("iterations are numbered from 1")
    n = r.size
    a, b = gossip_pair(n, t)
    W = np.eye(n)
    s = r[a] + r[b]
    W[a, a] = r[a] / s
    W[a, b] = r[b] / s
    W[b, a] = r[a] / s
    W[b, b] = r[b] / s
    return W


def edge_set(W: np.ndarray) -> set[tuple[int, int]]:
    """Directed edges (j, i) such that W[i, j] > 0 (j's state flows into i)."""
    rows, cols = np.nonzero(np.asarray(W) > 0.0)
    return {(int(j), int(i)) for i, j in zip(rows, cols)}


def strongly_connected(n: int, edges) -> bool:
    """Whether the digraph on n vertices with directed edges (u, v) is strongly
    connected.  Checked by forward and reverse reachability from vertex 0,
    which is equivalent and avoids recursion.
    """
    if n <= 1:
        return True
    fwd: list[list[int]] = [[] for _ in range(n)]
    rev: list[list[int]] = [[] for _ in range(n)]
    for u, v in edges:
        if u == v:
            continue
        fwd[u].append(v)
        rev[v].append(u)

    def _reaches_all(adj: list[list[int]]) -> bool:
        seen = [False] * n
        seen[0] = True
        stack = [0]
        count = 1
        while stack:
            u = stack.pop()
            for v in adj[u]:
                if not seen[v]:
                    seen[v] = True
                    count += 1
                    stack.append(v)
        return count == n

    return _reaches_all(fwd) and _reaches_all(rev)


@dataclass
class MixingSchedule:
    """A periodic sequence of mixing matrices plus the metadata the analysis
    needs: the common stationary weights r, the entry floor eta, and the
    connectivity window length B.

    ``matrices`` holds one period; ``matrix_at(t)`` cycles it for t >= 1.
    ``activation_edges``, when present, declares the per-iteration
    communication links the family is defined by (used by the connectivity
    check); otherwise links are read off the matrix supports.
    """

    kind: str
    n: int
    r: np.ndarray
    eta: float
    B: int
    matrices: list[np.ndarray]
    activation_edges: list[set[tuple[int, int]]] | None = None
    _support_cache: list[set[tuple[int, int]]] = field(
        default_factory=list, repr=False, compare=False
    )

    @property
    def period(self) -> int:
        return len(self.matrices)

    def matrix_at(self, t: int) -> np.ndarray:
        if t < 1:
            raise ValueError("iterations are numbered from 1")
        return self.matrices[(t - 1) % self.period]

    def edges_at(self, t: int) -> set[tuple[int, int]]:
        """Communication links in effect at iteration t, as directed (j, i)
        pairs meaning agent j's state reaches agent i."""
        slot = (t - 1) % self.period
        if self.activation_edges is not None:
            return self.activation_edges[slot]
        if not self._support_cache:
            self._support_cache = [edge_set(W) for W in self.matrices]
        return self._support_cache[slot]


def _min_positive_entry(matrices) -> float:
    smallest = np.inf
    for W in matrices:
        positive = W[W > 0.0]
        if positive.size:
            smallest = min(smallest, float(positive.min()))
    if not np.isfinite(smallest):
        raise ValueError("schedule has no positive entries")
    return smallest


def fixed_cycle_schedule(r) -> MixingSchedule:
    """Static cycle schedule; every window of length B = 1 is the whole cycle."""
    r = _check_weights(r, n_min=3)
    W = fixed_cycle_matrix(r)
    return MixingSchedule(
        kind="fixed_cycle",
        n=r.size,
        r=r,
        eta=_min_positive_entry([W]),
        B=1,
        matrices=[W],
    )


def gossip_schedule(r) -> MixingSchedule:
    """Single-edge gossip schedule with period n and window length B = n.

    The declared link at iteration t is the ordered activation pair
    ``(t mod n, (t+1) mod n)``, one edge of the directed cycle.  Unions of n
    consecutive links cover the whole directed cycle, so the declared-link
    certificate is B-connected exactly at B = n; this undercounts the realized
    exchange (which is bidirectional), so any window the certificate accepts
    is also connected in the realized graph.
    """
    r = _check_weights(r, n_min=3)
    n = r.size
    matrices = [gossip_matrix(r, t) for t in range(1, n + 1)]
    links = [{gossip_pair(n, t)} for t in range(1, n + 1)]
    return MixingSchedule(
        kind="gossip",
        n=n,
        r=r,
        eta=_min_positive_entry(matrices),
        B=n,
        matrices=matrices,
        activation_edges=links,
    )


def stationary_weights(matrices, tol: float = 1e-9) -> np.ndarray:
    """Common positive left-fixed vector of a matrix family, normalized to
    sum 1.  Solves the joint system r'(W_b - I) = 0 by SVD; when the solution
    space has extra dimensions (e.g. all matrices are the identity) the
    uniform vector is projected onto it.  Raises ValueError when no strictly
    positive common stationary vector exists within tolerance.
    """
    n = matrices[0].shape[0]
    stacked = np.vstack([W.T - np.eye(n) for W in matrices])
    _, svals, vt = np.linalg.svd(stacked)
    svals = np.concatenate([svals, np.zeros(n - svals.size)])
    null_mask = svals <= tol * max(1.0, svals[0] if svals.size else 1.0)
    basis = vt[null_mask]
    if basis.size == 0:
        raise ValueError("matrix family has no common stationary vector")
    uniform = np.full(n, 1.0 / n)
    candidate = basis.T @ (basis @ uniform)
    if candidate.sum() < 0:
        candidate = -candidate
    if np.any(candidate <= tol / n) or abs(candidate.sum()) <= tol:
        # The projection of the uniform vector missed the positive cone; a
        # one-dimensional solution space may still work after sign cleanup.
        candidate = basis[0] if basis[0].sum() > 0 else -basis[0]
        if np.any(candidate <= tol / n):
            raise ValueError(
                "no strictly positive common stationary vector found; "
                "supply the weight vector explicitly"
            )
    r = candidate / candidate.sum()
    worst = max(float(np.max(np.abs(r @ W - r))) for W in matrices)
    if worst > tol:
        raise ValueError(
            f"candidate stationary vector has residual {worst:.2e} (tol {tol:.0e})"
        )
    return r


def matrix_list_schedule(matrices, r=None, B: int | None = None) -> MixingSchedule:
    """Wrap an explicit periodic list of mixing matrices.

    ``r`` is solved for when omitted; ``B`` defaults to the period.  Rows must
    be stochastic to 1e-9 here (the strict 1e-12 measurement is
    ``validate_schedule``'s job).
    """
    mats = [np.asarray(W, dtype=float) for W in matrices]
    if not mats:
        raise ValueError("need at least one matrix")
    n = mats[0].shape[0]
    for W in mats:
        if W.shape != (n, n):
            raise ValueError("all matrices must be square with equal size")
        if not np.all(np.isfinite(W)) or np.any(W < 0.0):
            raise ValueError("matrix entries must be finite and nonnegative")
        if np.max(np.abs(W.sum(axis=1) - 1.0)) > 1e-9:
            raise ValueError("matrix rows must sum to 1")
    r = stationary_weights(mats) if r is None else _check_weights(r)
    if r.size != n:
        raise ValueError("weight vector size does not match the matrices")
    B = len(mats) if B is None else int(B)
    if B < 1:
        raise ValueError("connectivity window B must be >= 1")
    return MixingSchedule(
        kind="matrix_list",
        n=n,
        r=r,
        eta=_min_positive_entry(mats),
        B=B,
        matrices=mats,
    )


def parse_matrix_file(path) -> list[np.ndarray]:
    """Read a periodic matrix schedule from text: comma-separated rows, one
    blank-line-separated block per iteration slot."""
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    blocks: list[np.ndarray] = []
    current: list[list[float]] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            if current:
                blocks.append(np.array(current, dtype=float))
                current = []
            continue
        try:
            current.append([float(tok) for tok in line.split(",")])
        except ValueError as exc:
            raise ValueError(f"{path}:{lineno}: bad matrix row: {raw!r}") from exc
    if current:
        blocks.append(np.array(current, dtype=float))
    if not blocks:
        raise ValueError(f"{path}: no matrix blocks found")
    for b, W in enumerate(blocks):
        if W.ndim != 2 or W.shape[0] != W.shape[1]:
            raise ValueError(f"{path}: block {b + 1} is not square")
        if W.shape != blocks[0].shape:
            raise ValueError(f"{path}: block {b + 1} size differs from block 1")
    return blocks


@dataclass
class ValidationReport:
    """Measured compliance of a schedule with the mixing assumptions."""

    kind: str
    n: int
    horizon: int
    window: int
    max_row_sum_dev: float
    max_stationarity_dev: float
    min_positive_entry: float
    eta: float
    windows_checked: int
    connectivity_failures: list[int]
    edge_source: str
    tol: float = STOCHASTICITY_TOL

    @property
    def stochasticity_ok(self) -> bool:
        return (
            self.max_row_sum_dev <= self.tol
            and self.max_stationarity_dev <= self.tol
        )

    @property
    def eta_ok(self) -> bool:
        # eta is declared by the schedule; entries may not dip below it.
        return self.min_positive_entry >= self.eta - 1e-15

    @property
    def connectivity_ok(self) -> bool:
        return not self.connectivity_failures

    @property
    def passed(self) -> bool:
        return self.stochasticity_ok and self.eta_ok and self.connectivity_ok

    def summary(self) -> str:
        lines = [
            f"schedule {self.kind}: n={self.n} horizon={self.horizon} window={self.window}",
            f"  row sums        max dev {self.max_row_sum_dev:.3e}"
            f"  ({'ok' if self.max_row_sum_dev <= self.tol else 'FAIL'})",
            f"  r-stationarity  max dev {self.max_stationarity_dev:.3e}"
            f"  ({'ok' if self.max_stationarity_dev <= self.tol else 'FAIL'})",
            f"  entry floor     min positive {self.min_positive_entry:.6g}"
            f" vs eta {self.eta:.6g}  ({'ok' if self.eta_ok else 'FAIL'})",
        ]
        if self.windows_checked:
            if self.connectivity_ok:
                lines.append(
                    f"  connectivity    all {self.windows_checked} windows strongly"
                    f" connected ({self.edge_source})"
                )
            else:
                shown = ", ".join(str(t) for t in self.connectivity_failures[:5])
                more = (
                    "" if len(self.connectivity_failures) <= 5
                    else f" (+{len(self.connectivity_failures) - 5} more)"
                )
                lines.append(
                    f"  connectivity    FAIL at window starts {shown}{more}"
                    f" of {self.windows_checked} ({self.edge_source})"
                )
        else:
            lines.append("  connectivity    no complete window inside horizon")
        lines.append(f"  overall         {'PASS' if self.passed else 'FAIL'}")
        return "\n".join(lines)


def validate_schedule(
    schedule: MixingSchedule, horizon: int, window: int | None = None
) -> ValidationReport:
    """Measure a schedule against the mixing assumptions over t in [1, horizon].

    Stochasticity and the entry floor are checked once per period slot (the
    matrices repeat exactly, so this covers every t).  Connectivity is checked
    for every window start t in [1, horizon - window]: the links of iterations
    t+1 .. t+window are pooled and the pooled digraph must be strongly
    connected.  ``window`` defaults to the schedule's declared B.
    """
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    window = schedule.B if window is None else int(window)
    if window < 1:
        raise ValueError("window must be >= 1")

    r = schedule.r
    row_dev = 0.0
    stat_dev = 0.0
    slots = min(schedule.period, horizon)
    for t in range(1, slots + 1):
        W = schedule.matrix_at(t)
        row_dev = max(row_dev, float(np.max(np.abs(W.sum(axis=1) - 1.0))))
        stat_dev = max(stat_dev, float(np.max(np.abs(r @ W - r))))
    min_pos = _min_positive_entry([schedule.matrix_at(t) for t in range(1, slots + 1)])

    edge_source = (
        "declared activation links"
        if schedule.activation_edges is not None
        else "matrix support"
    )
    failures: list[int] = []
    last_start = horizon - window
    slot_edges = [schedule.edges_at(t) for t in range(1, schedule.period + 1)]
    for start in range(1, last_start + 1):
        union: set[tuple[int, int]] = set()
        for k in range(start + 1, start + window + 1):
            union |= slot_edges[(k - 1) % schedule.period]
        if not strongly_connected(schedule.n, union):
            failures.append(start)
            if len(failures) >= 1000:
                break

    return ValidationReport(
        kind=schedule.kind,
        n=schedule.n,
        horizon=horizon,
        window=window,
        max_row_sum_dev=row_dev,
        max_stationarity_dev=stat_dev,
        min_positive_entry=min_pos,
        eta=schedule.eta,
        windows_checked=max(last_start, 0),
        connectivity_failures=failures,
        edge_source=edge_source,
    )
