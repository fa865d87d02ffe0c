"""
Follower graph storage: ingestion of edge files and fast followship queries
"""
from pathlib import Path
from types import MappingProxyType
from typing import Iterable, Iterator, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
from loguru import logger
from pydantic import BaseModel, Field

from config.settings import InputFormat, PipelineConfig
from src.models.errors import DomainError, EmptyGraphError, GraphParseError


class GraphAdapter(BaseModel):
    """Column layout of an edge file. The defaults describe the canonical TSV."""
    delimiter: Optional[str] = Field(default="\t", description="None splits on any whitespace")
    follower_column: int = Field(default=0, ge=0)
    followee_column: int = Field(default=1, ge=0)
    skip_header: bool = False
    strict_width: bool = Field(default=True, description="Require exactly two columns")

    @classmethod
    def from_config(cls, cfg: PipelineConfig) -> "GraphAdapter":
        if cfg.graph_format == InputFormat.CANONICAL_TSV:
            return cls()
        return cls(
            delimiter=cfg.graph_delimiter or None,
            follower_column=cfg.graph_follower_column,
            followee_column=cfg.graph_followee_column,
            skip_header=cfg.graph_skip_header,
            strict_width=False,
        )


class FollowerGraph:
    """Immutable directed follower graph; an edge u -> v means "u follows v".

    Out-adjacency (followees) and in-adjacency (followers) are stored as CSR
    arrays with every row sorted ascending, so edge lookups are a binary
    search over one row.
    """

    def __init__(
        self,
        indptr: np.ndarray,
        indices: np.ndarray,
        external_ids: Sequence[str],
        self_loops: int = 0,
        duplicate_edges: int = 0,
    ):
        n = len(external_ids)
        if len(indptr) != n + 1:
            raise ValueError(f"indptr has {len(indptr)} entries for {n} nodes")

        self._indptr = np.asarray(indptr, dtype=np.int64)
        self._indices = np.asarray(indices, dtype=np.int64)
        self._external_ids = tuple(external_ids)
        self._id_map = MappingProxyType({ext: i for i, ext in enumerate(self._external_ids)})
        self.self_loops = int(self_loops)
        self.duplicate_edges = int(duplicate_edges)

        # Reverse CSR: followers of each node, sorted ascending
        src = np.repeat(np.arange(n, dtype=np.int64), np.diff(self._indptr))
        order = np.lexsort((src, self._indices))
        self._in_indices = src[order]
        self._in_indptr = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(np.bincount(self._indices, minlength=n), out=self._in_indptr[1:])

        for arr in (self._indptr, self._indices, self._in_indptr, self._in_indices):
            arr.flags.writeable = False

    @classmethod
    def from_edges(
        cls,
        followers: Union[np.ndarray, Sequence[int]],
        followees: Union[np.ndarray, Sequence[int]],
        external_ids: Sequence[str],
    ) -> "FollowerGraph":
        """Build a graph from parallel arrays of dense ids, dropping self-loops and duplicates"""
        n = len(external_ids)
        src = np.asarray(followers, dtype=np.int64)
        dst = np.asarray(followees, dtype=np.int64)
        if src.shape != dst.shape:
            raise ValueError("follower and followee arrays differ in length")
        if src.size and (min(src.min(), dst.min()) < 0 or max(src.max(), dst.max()) >= n):
            raise DomainError(f"edge endpoint outside [0, {n})")

        keep = src != dst
        self_loops = int(src.size - np.count_nonzero(keep))
        keys = src[keep] * n + dst[keep]
        unique_keys = np.unique(keys)
        duplicates = int(keys.size - unique_keys.size)

        indptr = np.zeros(n + 1, dtype=np.int64)
        if n:
            np.cumsum(np.bincount(unique_keys // n, minlength=n), out=indptr[1:])
            indices = unique_keys % n
        else:
            indices = unique_keys
        return cls(indptr, indices, external_ids, self_loops=self_loops, duplicate_edges=duplicates)

    # ------------------------------------------------------------------ sizes

    @property
    def node_count(self) -> int:
        return len(self._external_ids)

    @property
    def edge_count(self) -> int:
        return int(self._indices.size)

    @property
    def id_map(self) -> Mapping[str, int]:
        """External id -> dense node id (read-only)"""
        return self._id_map

    def external_id(self, node: int) -> str:
        self._check(node)
        return self._external_ids[node]

    def node_of(self, external_id: str) -> int:
        try:
            return self._id_map[external_id]
        except KeyError:
            raise DomainError(f"unknown user id {external_id!r}") from None

    # ---------------------------------------------------------------- queries

    def _check(self, node: int) -> None:
        if not 0 <= node < self.node_count:
            raise DomainError(f"node id {node} outside [0, {self.node_count})")

    def followees(self, u: int) -> np.ndarray:
        """Sorted ids of the users u follows"""
        self._check(u)
        return self._indices[self._indptr[u]:self._indptr[u + 1]]

    def followers(self, v: int) -> np.ndarray:
        """Sorted ids of the users following v"""
        self._check(v)
        return self._in_indices[self._in_indptr[v]:self._in_indptr[v + 1]]

    def out_degree(self, u: int) -> int:
        self._check(u)
        return int(self._indptr[u + 1] - self._indptr[u])

    def in_degree(self, v: int) -> int:
        self._check(v)
        return int(self._in_indptr[v + 1] - self._in_indptr[v])

    def has_edge(self, u: int, v: int) -> bool:
        """True iff u follows v"""
        self._check(v)
        row = self.followees(u)
        i = int(np.searchsorted(row, v))
        return i < row.size and int(row[i]) == v

    def edges(self) -> Iterator[Tuple[int, int]]:
        for u in range(self.node_count):
            for v in self.followees(u):
                yield u, int(v)

    def _members(self, nodes: Iterable[int]) -> np.ndarray:
        members = np.unique(np.fromiter(nodes, dtype=np.int64))
        if members.size and members[0] < 0:
            raise DomainError(f"negative node id {int(members[0])}")
        # Ids past node_count belong to users absent from the snapshot: no links
        return members[members < self.node_count]

    def _row_hits(self, row: np.ndarray, members: np.ndarray) -> np.ndarray:
        """Entries of the sorted row that are also in the sorted member array"""
        if row.size <= members.size:
            pos = np.minimum(np.searchsorted(members, row), members.size - 1)
            return row[members[pos] == row]
        pos = np.minimum(np.searchsorted(row, members), row.size - 1)
        return members[row[pos] == members]

    def count_links_among(self, nodes: Iterable[int]) -> int:
        """Number of ordered pairs (u, v), u != v, both in ``nodes``, with u following v"""
        members = self._members(nodes)
        if members.size < 2:
            return 0
        total = 0
        for u in members:
            row = self._indices[self._indptr[u]:self._indptr[u + 1]]
            if row.size:
                total += int(self._row_hits(row, members).size)
        return total

    def induced_edges(self, nodes: Iterable[int]) -> List[Tuple[int, int]]:
        """The followship links among ``nodes`` as sorted (follower, followee) pairs"""
        members = self._members(nodes)
        pairs: List[Tuple[int, int]] = []
        for u in members:
            row = self._indices[self._indptr[u]:self._indptr[u + 1]]
            if row.size:
                pairs.extend((int(u), int(v)) for v in self._row_hits(row, members))
        return pairs

    def __repr__(self) -> str:
        return f"FollowerGraph(nodes={self.node_count}, edges={self.edge_count})"


def _parse_edge_lines(path: Path, adapter: GraphAdapter) -> Tuple[List[int], List[int], List[str]]:
    id_map = {}
    followers: List[int] = []
    followees: List[int] = []
    width = max(adapter.follower_column, adapter.followee_column) + 1

    with open(path, "r", encoding="utf-8") as f:
        for line_number, line in enumerate(f, start=1):
            text = line.rstrip("\r\n")
            if not text.strip() or text.startswith("#"):
                continue
            if adapter.skip_header and line_number == 1:
                continue
            parts = text.split(adapter.delimiter)
            if adapter.strict_width and len(parts) != 2:
                raise GraphParseError(path, line_number, f"expected 2 columns, found {len(parts)}")
            if len(parts) < width:
                raise GraphParseError(path, line_number, f"expected at least {width} columns, found {len(parts)}")
            follower = parts[adapter.follower_column].strip()
            followee = parts[adapter.followee_column].strip()
            if not follower or not followee:
                raise GraphParseError(path, line_number, "empty user id")
            followers.append(id_map.setdefault(follower, len(id_map)))
            followees.append(id_map.setdefault(followee, len(id_map)))

    return followers, followees, list(id_map)


def load_graph(
    edge_file: Union[str, Path],
    format: InputFormat = InputFormat.CANONICAL_TSV,
    adapter: Optional[GraphAdapter] = None,
) -> FollowerGraph:
    """Load a follower graph from an edge file.

    Dense ids are assigned in order of first appearance. Self-loops and
    duplicate edges are dropped and counted.
    """
    path = Path(edge_file)
    if format == InputFormat.CANONICAL_TSV:
        adapter = GraphAdapter()
    elif adapter is None:
        adapter = GraphAdapter(strict_width=False)

    try:
        followers, followees, external_ids = _parse_edge_lines(path, adapter)
    except OSError as e:
        logger.error(f"Failed to read edge file {path}: {e}")
        raise

    if not followers:
        raise EmptyGraphError(f"edge file {path} contains no edges")

    graph = FollowerGraph.from_edges(followers, followees, external_ids)
    logger.info(
        f"Loaded follower graph from {path}: {graph.node_count} nodes, {graph.edge_count} edges "
        f"({graph.self_loops} self-loops dropped, {graph.duplicate_edges} duplicate edges)"
    )
    if graph.self_loops:
        logger.warning(f"{path}: dropped {graph.self_loops} self-loop edges")
    return graph
