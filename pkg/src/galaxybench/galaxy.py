"""Graph-bisection query strategy for class-imbalanced pools (GALAXY).

For every class X the pool is sorted by a signed one-vs-all margin
``p_X - max(other class probabilities)``, forming a linear graph whose
ends hold the samples most confidently predicted X and not-X, with the
uncertain ones in between.  Adjacent labeled nodes whose revealed classes
disagree form a *cut*; a span between two consecutive labeled nodes of
opposite sides with unlabeled interior is a *bisectable segment* and is
guaranteed to contain a cut, which binary-search querying localizes.

Phase 1 repeatedly bisects the shortest segment across all graphs (ties:
lowest class index, then lowest start position).  When no segment
remains, phase 2 sweeps the nodes around all identified cuts round-robin
in (class, position) order, alternating left/right and expanding
outward; any query that creates a fresh segment reverts to phase 1.  If
neither segments nor cut neighborhoods offer a query, selection falls
back to the confidence choice so a batch can always be filled.

Graphs are rebuilt from scratch at the start of each iteration: sort
positions are only meaningful for one trained model, so per-iteration cut
memory is discarded with them.  A label revealed through any graph is
applied to all graphs before the next query.
"""

from __future__ import annotations

import heapq
from bisect import bisect_left, insort
from dataclasses import dataclass

import numpy as np

from .core import PoolState, PredictionMatrix
from .errors import NoInteriorUnlabeled, PoolExhausted
from .strategies import QueryStrategy, StrategyContext

PHASE_BISECT = "bisect"
PHASE_AROUND_CUTS = "around-cuts"


@dataclass(frozen=True)
class Segment:
    """Span between consecutive labeled nodes of opposite sides."""

    class_x: int
    start: int
    end: int

    @property
    def length(self) -> int:
        return self.end - self.start


@dataclass(frozen=True)
class Cut:
    """Edge (position, position + 1) between labeled nodes of opposite sides."""

    class_x: int
    position: int


def margin_scores(predictions: PredictionMatrix, class_x: int) -> np.ndarray:
    """Signed one-vs-all margins for one class, aligned with ``predictions.ids``.

    margin = p_X - max over c != X of p_c, in [-1, 1]: +1 means most
    confidently class X, -1 most confidently some other class, 0 maximally
    uncertain between X and the rest.
    """
    if class_x < 0 or class_x >= predictions.num_classes:
        raise ValueError(f"class index {class_x} out of range")
    probs = predictions.probs
    others = np.delete(probs, class_x, axis=1).max(axis=1)
    return probs[:, class_x] - others


def all_margin_scores(predictions: PredictionMatrix) -> np.ndarray:
    """(n, K) matrix of one-vs-all margins, one column per class.

    Uses the top-2 probabilities per row so the cost is O(nK) rather than
    O(nK^2).
    """
    probs = predictions.probs
    k = predictions.num_classes
    if k == 1:
        return np.ones_like(probs)
    part = np.partition(probs, (k - 2, k - 1), axis=1)
    top1 = part[:, k - 1]
    top2 = part[:, k - 2]
    arg1 = probs.argmax(axis=1)
    margins = np.empty_like(probs)
    for c in range(k):
        margins[:, c] = probs[:, c] - np.where(arg1 == c, top2, top1)
    return margins


class LinearGraph:
    """One class's sorted node sequence with labeled-side bookkeeping.

    Node order is fixed for the lifetime of the graph (one iteration);
    labels accumulate through :meth:`insert_labeled`.  Side convention:
    True = the revealed label equals ``class_x`` (side X), False = side Y.
    """

    def __init__(self, class_x: int, node_ids: np.ndarray, pos_of: np.ndarray):
        self.class_x = class_x
        self.node_ids = node_ids
        self.pos_of = pos_of
        n = len(node_ids)
        self.num_nodes = n
        # side by position: -1 unlabeled, 0 side Y, 1 side X
        self.side_arr = np.full(n, -1, dtype=np.int8)
        self.labeled_positions: list[int] = []

    def position(self, sample_id: int) -> int:
        return int(self.pos_of[sample_id])

    def is_labeled(self, position: int) -> bool:
        return self.side_arr[position] >= 0

    def side(self, position: int) -> bool:
        return bool(self.side_arr[position] == 1)

    def bulk_load(self, positions: np.ndarray, sides: np.ndarray) -> None:
        """Install all already-revealed labels at graph build time."""
        order = np.argsort(positions)
        positions = positions[order]
        sides = sides[order]
        self.side_arr[positions] = sides.astype(np.int8)
        self.labeled_positions = positions.tolist()

    def insert_labeled(self, position: int, side: bool) -> tuple[int | None, int | None]:
        """Mark a node labeled; returns its labeled neighbors (left, right)."""
        idx = bisect_left(self.labeled_positions, position)
        left = self.labeled_positions[idx - 1] if idx > 0 else None
        right = self.labeled_positions[idx] if idx < len(self.labeled_positions) else None
        self.labeled_positions.insert(idx, position)
        self.side_arr[position] = 1 if side else 0
        return left, right

    def adjacent_labeled(self, start: int, end: int) -> bool:
        """True when start and end are consecutive entries of the labeled list."""
        idx = bisect_left(self.labeled_positions, start)
        return (
            idx + 1 < len(self.labeled_positions)
            and self.labeled_positions[idx] == start
            and self.labeled_positions[idx + 1] == end
        )


def build_graph(pool: PoolState, predictions: PredictionMatrix, class_x: int) -> LinearGraph:
    """Sort the pool by descending margin (ties by ascending id) for one class."""
    margins = margin_scores(predictions, class_x)
    graph = _graph_from_margins(predictions, class_x, margins)
    _load_pool_labels(graph, pool, predictions)
    return graph


def _graph_from_margins(
    predictions: PredictionMatrix, class_x: int, margins: np.ndarray
) -> LinearGraph:
    # prediction rows are sorted by ascending id, so a stable sort on the
    # negated margin alone realizes the ascending-id tie-break
    order = np.argsort(-margins, kind="stable")
    node_ids = predictions.ids[order]
    pos_of = np.full(int(predictions.ids.max()) + 1, -1, dtype=np.int64)
    pos_of[node_ids] = np.arange(len(node_ids))
    return LinearGraph(class_x, node_ids, pos_of)


def _load_pool_labels(graph: LinearGraph, pool: PoolState, predictions: PredictionMatrix) -> None:
    if not pool.labeled:
        return
    ids = np.fromiter(pool.labeled.keys(), dtype=np.int64, count=len(pool.labeled))
    labels = np.fromiter(pool.labeled.values(), dtype=np.int64, count=len(pool.labeled))
    positions = graph.pos_of[ids]
    graph.bulk_load(positions, labels == graph.class_x)


def find_bisectable_segments(graph: LinearGraph) -> list[Segment]:
    """All spans between consecutive labeled nodes of opposite sides.

    Adjacent opposite-side pairs are already-labeled cuts, not segments;
    see :func:`find_cuts`.
    """
    segments = []
    pos = graph.labeled_positions
    for a, b in zip(pos, pos[1:]):
        if graph.side_arr[a] != graph.side_arr[b] and b - a >= 2:
            segments.append(Segment(graph.class_x, a, b))
    return segments


def find_cuts(graph: LinearGraph) -> list[Cut]:
    """All edges between adjacent labeled nodes whose revealed sides differ."""
    cuts = []
    pos = graph.labeled_positions
    for a, b in zip(pos, pos[1:]):
        if b - a == 1 and graph.side_arr[a] != graph.side_arr[b]:
            cuts.append(Cut(graph.class_x, a))
    return cuts


def bisect_step(graph: LinearGraph, segment: Segment) -> int:
    """The id of the unlabeled node nearest the segment midpoint.

    Midpoint is floor((start + end) / 2); offset ties resolve toward the
    start.  Raises :class:`NoInteriorUnlabeled` when the segment has no
    unlabeled interior node (its edge is a cut to record, not to query).
    """
    start, end = segment.start, segment.end
    if end - start < 2:
        raise NoInteriorUnlabeled(f"segment ({start}, {end}) has no interior")
    mid = (start + end) // 2
    for offset in range(end - start):
        for p in (mid - offset, mid + offset):
            if start < p < end and not graph.is_labeled(p):
                return int(graph.node_ids[p])
    raise NoInteriorUnlabeled(f"segment ({start}, {end}) is fully labeled inside")


class _CutExpansion:
    """Outward sweep around one cut: left, right, then alternating."""

    def __init__(self, position: int, num_nodes: int):
        self.left = position - 1
        self.right = position + 2
        self.num_nodes = num_nodes
        self.take_left = True

    def next_position(self, graph: LinearGraph) -> int | None:
        """Nearest unlabeled node on the preferred side, or None if spent."""
        while self.left >= 0 or self.right < self.num_nodes:
            left_ok = self.left >= 0
            right_ok = self.right < self.num_nodes
            if self.take_left and left_ok or not right_ok:
                p = self.left
                self.left -= 1
                self.take_left = False
            else:
                p = self.right
                self.right += 1
                self.take_left = True
            if not graph.is_labeled(p):
                return p
        return None


class GalaxyStrategy(QueryStrategy):
    """Two-phase graph-bisection selection over all per-class graphs.

    Keeps one :class:`LinearGraph` per class, a lazy min-heap of candidate
    segments keyed (length, class, start), and per-cut expansion cursors
    for the phase-2 sweep.  All structures are rebuilt per iteration.
    """

    name = "galaxy"

    def __init__(self):
        self.graphs: list[LinearGraph] = []
        self.phase = PHASE_BISECT
        self._heap: list[tuple[int, int, int, int]] = []
        self._cut_keys: set[tuple[int, int]] = set()
        self._cut_order: list[tuple[int, int]] = []
        self._cut_cursors: dict[tuple[int, int], _CutExpansion] = {}
        self._rr = 0
        self._fallback_ranking: list[int] = []
        self._fallback_cursor = 0
        self._revealed: np.ndarray | None = None
        self.diagnostics = self._fresh_diagnostics()

    @staticmethod
    def _fresh_diagnostics() -> dict[str, int]:
        return {
            "initial_segments": 0,
            "cuts_found": 0,
            "phase1_queries": 0,
            "phase2_queries": 0,
            "fallback_queries": 0,
            "reverts_to_bisect": 0,
        }

    # -- graph construction -------------------------------------------------

    def begin_iteration(self, context: StrategyContext) -> None:
        predictions = context.predictions
        if predictions is None:
            raise ValueError("galaxy requires a prediction matrix")
        pool = context.pool
        max_id = int(predictions.ids.max())
        self._revealed = np.full(max_id + 1, -1, dtype=np.int64)
        if pool.labeled:
            ids = np.fromiter(pool.labeled.keys(), dtype=np.int64, count=len(pool.labeled))
            labels = np.fromiter(pool.labeled.values(), dtype=np.int64, count=len(pool.labeled))
            self._revealed[ids] = labels
        else:
            ids = np.empty(0, dtype=np.int64)
            labels = np.empty(0, dtype=np.int64)

        margins = all_margin_scores(predictions)
        self.graphs = []
        self._heap = []
        self._cut_keys = set()
        self._cut_cursors = {}
        self._rr = 0
        self.phase = PHASE_BISECT
        self.diagnostics = self._fresh_diagnostics()
        for c in range(predictions.num_classes):
            graph = _graph_from_margins(predictions, c, margins[:, c])
            if len(ids):
                graph.bulk_load(graph.pos_of[ids], labels == c)
            self.graphs.append(graph)
            self._scan_graph(graph)
        self.diagnostics["initial_segments"] = len(self._heap)

        order = np.argsort(predictions.max_probs(), kind="stable")
        self._fallback_ranking = [int(i) for i in predictions.ids[order]]
        self._fallback_cursor = 0
        self._refresh_cut_order()

    def _scan_graph(self, graph: LinearGraph) -> None:
        """Initial segment/cut discovery over consecutive labeled pairs."""
        pos = np.asarray(graph.labeled_positions, dtype=np.int64)
        if len(pos) < 2:
            return
        sides = graph.side_arr[pos]
        change = sides[:-1] != sides[1:]
        gaps = pos[1:] - pos[:-1]
        for a, b in zip(pos[:-1][change & (gaps >= 2)], pos[1:][change & (gaps >= 2)]):
            heapq.heappush(self._heap, (int(b - a), graph.class_x, int(a), int(b)))
        for a in pos[:-1][change & (gaps == 1)]:
            self._record_cut(graph.class_x, int(a))

    def _record_cut(self, class_x: int, position: int) -> None:
        key = (class_x, position)
        if key not in self._cut_keys:
            self._cut_keys.add(key)
            self.diagnostics["cuts_found"] += 1
            self._cut_order = []  # stale; rebuilt on demand

    def _refresh_cut_order(self) -> None:
        if len(self._cut_order) != len(self._cut_keys):
            self._cut_order = sorted(self._cut_keys)

    # -- label feedback ------------------------------------------------------

    def observe(self, sample_id: int, label: int) -> None:
        if self._revealed is None:
            return
        self._revealed[sample_id] = label
        for graph in self.graphs:
            p = graph.position(sample_id)
            side = label == graph.class_x
            left, right = graph.insert_labeled(p, side)
            for a, b in ((left, p), (p, right)):
                if a is None or b is None:
                    continue
                if graph.side_arr[a] != graph.side_arr[b]:
                    if b - a >= 2:
                        heapq.heappush(self._heap, (b - a, graph.class_x, a, b))
                    else:
                        self._record_cut(graph.class_x, a)

    # -- query selection -----------------------------------------------------

    def _pop_valid_segment(self) -> tuple[int, int, int] | None:
        """Shortest still-valid segment; entries split by later labels are skipped."""
        while self._heap:
            length, class_x, start, end = self._heap[0]
            graph = self.graphs[class_x]
            if graph.adjacent_labeled(start, end):
                return class_x, start, end
            heapq.heappop(self._heap)
        return None

    def _phase2_position(self) -> tuple[int, int] | None:
        """Next (class, position) around the recorded cuts, round-robin."""
        self._refresh_cut_order()
        n = len(self._cut_order)
        for _ in range(n):
            key = self._cut_order[self._rr % n]
            self._rr += 1
            cursor = self._cut_cursors.get(key)
            if cursor is None:
                class_x, position = key
                cursor = _CutExpansion(position, self.graphs[class_x].num_nodes)
                self._cut_cursors[key] = cursor
            p = cursor.next_position(self.graphs[key[0]])
            if p is not None:
                return key[0], p
        return None

    def _fallback_query(self, context: StrategyContext) -> int:
        while self._fallback_cursor < len(self._fallback_ranking):
            candidate = self._fallback_ranking[self._fallback_cursor]
            self._fallback_cursor += 1
            if candidate in context.pool.unlabeled:
                return candidate
        raise PoolExhausted("no unlabeled samples remain")

    def next_query(self, context: StrategyContext) -> int:
        if not context.pool.unlabeled:
            raise PoolExhausted("no unlabeled samples remain")
        found = self._pop_valid_segment()
        if found is not None:
            if self.phase == PHASE_AROUND_CUTS:
                self.diagnostics["reverts_to_bisect"] += 1
            self.phase = PHASE_BISECT
            class_x, start, end = found
            self.diagnostics["phase1_queries"] += 1
            return bisect_step(self.graphs[class_x], Segment(class_x, start, end))
        self.phase = PHASE_AROUND_CUTS
        around = self._phase2_position()
        if around is not None:
            class_x, position = around
            self.diagnostics["phase2_queries"] += 1
            return int(self.graphs[class_x].node_ids[position])
        self.diagnostics["fallback_queries"] += 1
        return self._fallback_query(context)
