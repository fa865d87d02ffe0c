"""
Cascade storage: parsing retweet logs into cascades and extracting time prefixes
"""
from bisect import bisect_right
from datetime import datetime, timezone
from pathlib import Path
from typing import Dict, Iterator, List, Mapping, NamedTuple, Optional, Tuple, Union

from loguru import logger
from pydantic import BaseModel, Field

from config.settings import InputFormat, OrphanPolicy, PipelineConfig
from src.models.cascade_models import Cascade, CascadePrefix, IngestStats, RetweetEvent
from src.models.errors import CascadeParseError, DomainError, NonContiguousCascadeError


class CascadeAdapter(BaseModel):
    """Column layout of a retweet log. The defaults describe the canonical TSV:
    ``tweet_id<TAB>user_id<TAB>parent_user_id<TAB>unix_timestamp`` with ``-`` as
    the parent of the root record."""
    delimiter: Optional[str] = "\t"
    tweet_column: int = Field(default=0, ge=0)
    user_column: int = Field(default=1, ge=0)
    parent_column: int = Field(default=2, ge=0)
    time_column: int = Field(default=3, ge=0)
    root_marker: str = "-"
    time_format: str = "unix"
    skip_header: bool = False
    strict_width: bool = True

    @classmethod
    def from_config(cls, cfg: PipelineConfig) -> "CascadeAdapter":
        if cfg.cascade_format == InputFormat.CANONICAL_TSV:
            return cls()
        return cls(
            delimiter=cfg.cascade_delimiter or None,
            tweet_column=cfg.cascade_tweet_column,
            user_column=cfg.cascade_user_column,
            parent_column=cfg.cascade_parent_column,
            time_column=cfg.cascade_time_column,
            root_marker=cfg.cascade_root_marker,
            time_format=cfg.cascade_time_format,
            skip_header=cfg.cascade_skip_header,
            strict_width=False,
        )

    @property
    def width(self) -> int:
        return max(self.tweet_column, self.user_column, self.parent_column, self.time_column) + 1

    def parse_time(self, value: str) -> int:
        if self.time_format == "unix":
            return int(value)
        parsed = datetime.strptime(value, self.time_format)
        if parsed.tzinfo is None:
            parsed = parsed.replace(tzinfo=timezone.utc)
        return int(parsed.timestamp())


class _Record(NamedTuple):
    line_number: int
    user: str
    parent: Optional[str]
    timestamp: int


class UserIndex:
    """Resolves external user ids to node ids.

    Users known to the follower graph keep their graph ids; the others get
    fresh ids starting at ``len(known)`` so they never alias a graph node.
    """

    def __init__(self, known: Optional[Mapping[str, int]] = None):
        self.known = known if known is not None else {}
        self.extra: Dict[str, int] = {}

    def resolve(self, external_id: str) -> int:
        node = self.known.get(external_id)
        if node is not None:
            return node
        node = self.extra.get(external_id)
        if node is None:
            node = len(self.known) + len(self.extra)
            self.extra[external_id] = node
        return node

    def external_ids(self) -> Dict[int, str]:
        """Reverse mapping over every id handed out"""
        reverse = {node: ext for ext, node in self.known.items()}
        reverse.update({node: ext for ext, node in self.extra.items()})
        return reverse


class CascadeReader:
    """Reads a retweet log, repairing attribution and collecting ingestion stats"""

    def __init__(
        self,
        adapter: Optional[CascadeAdapter] = None,
        orphan_policy: OrphanPolicy = OrphanPolicy.REPARENT,
        id_map: Optional[Mapping[str, int]] = None,
    ):
        self.adapter = adapter or CascadeAdapter()
        self.orphan_policy = orphan_policy
        self.users = UserIndex(id_map)
        self.stats = IngestStats()

    def _records(self, path: Path) -> Iterator[Tuple[str, _Record]]:
        adapter = self.adapter
        with open(path, "r", encoding="utf-8") as f:
            for line_number, line in enumerate(f, start=1):
                self.stats.lines += 1
                text = line.rstrip("\r\n")
                if not text.strip() or text.startswith("#"):
                    self.stats.comment_lines += 1
                    continue
                if adapter.skip_header and line_number == 1:
                    continue
                parts = text.split(adapter.delimiter)
                if adapter.strict_width and len(parts) != 4:
                    raise CascadeParseError(path, line_number, f"expected 4 columns, found {len(parts)}")
                if len(parts) < adapter.width:
                    raise CascadeParseError(path, line_number, f"expected at least {adapter.width} columns, found {len(parts)}")

                tweet_id = parts[adapter.tweet_column].strip()
                user = parts[adapter.user_column].strip()
                parent = parts[adapter.parent_column].strip()
                if not tweet_id or not user or not parent:
                    raise CascadeParseError(path, line_number, "empty identifier")
                try:
                    timestamp = adapter.parse_time(parts[adapter.time_column].strip())
                except ValueError as e:
                    raise CascadeParseError(path, line_number, f"bad timestamp: {e}") from None

                yield tweet_id, _Record(
                    line_number=line_number,
                    user=user,
                    parent=None if parent == adapter.root_marker else parent,
                    timestamp=timestamp,
                )

    def _build(self, path: Path, tweet_id: str, records: List[_Record]) -> Optional[Cascade]:
        stats = self.stats
        roots = [r for r in records if r.parent is None]
        if not roots:
            stats.missing_roots += 1
            stats.dropped_lines += len(records)
            logger.warning(f"{path}:{records[0].line_number}: tweet {tweet_id} has no root record, skipped")
            return None
        root_record = roots[0]
        if len(roots) > 1:
            stats.duplicate_roots += len(roots) - 1
            stats.dropped_lines += len(roots) - 1
            logger.warning(f"{path}:{roots[1].line_number}: duplicate root record for tweet {tweet_id} ignored")

        root = self.users.resolve(root_record.user)
        post_time = root_record.timestamp

        offsets = []
        for r in records:
            if r.parent is None:
                continue
            offset = r.timestamp - post_time
            if offset < 0:
                stats.clamped_events += 1
                logger.warning(f"{path}:{r.line_number}: retweet precedes its root post, clamped to offset 0")
                offset = 0
            offsets.append((offset, r))
        # Stable sort: ties keep input order
        offsets.sort(key=lambda item: item[0])

        adopted = {root}
        events: List[RetweetEvent] = []
        for offset, r in offsets:
            user = self.users.resolve(r.user)
            parent = self.users.resolve(r.parent)
            if parent not in adopted:
                if self.orphan_policy == OrphanPolicy.DROP:
                    stats.dropped_orphans += 1
                    stats.dropped_lines += 1
                    continue
                stats.repaired_parents += 1
                parent = root
            if user == root:
                stats.self_retweets += 1
            adopted.add(user)
            events.append(RetweetEvent(user=user, parent_user=parent, offset_s=offset))

        stats.cascades += 1
        stats.events += len(events)
        return Cascade(tweet_id=tweet_id, root=root, post_time=post_time, events=tuple(events))

    def iter_cascades(self, event_file: Union[str, Path]) -> Iterator[Cascade]:
        """Stream cascades from a file whose lines are grouped by tweet.

        Only the cascade being assembled is held in memory, plus the id
        strings of finished tweets that the grouping check needs. Those ids
        grow with the number of tweets in the file, never with their events.
        """
        path = Path(event_file)
        finished = set()
        current_id: Optional[str] = None
        current: List[_Record] = []

        for tweet_id, record in self._records(path):
            if tweet_id != current_id:
                if current_id is not None:
                    finished.add(current_id)
                    cascade = self._build(path, current_id, current)
                    if cascade is not None:
                        yield cascade
                if tweet_id in finished:
                    raise NonContiguousCascadeError(
                        f"{path}:{record.line_number}: tweet {tweet_id} reappears after other tweets; "
                        "group the file by tweet_id or use load_cascades"
                    )
                current_id, current = tweet_id, []
            current.append(record)

        if current_id is not None:
            cascade = self._build(path, current_id, current)
            if cascade is not None:
                yield cascade
        self._log_stats(path)

    def load_cascades(self, event_file: Union[str, Path]) -> List[Cascade]:
        """Read every cascade of a file, whatever the line order"""
        path = Path(event_file)
        grouped: Dict[str, List[_Record]] = {}
        for tweet_id, record in self._records(path):
            grouped.setdefault(tweet_id, []).append(record)

        cascades = []
        for tweet_id, records in grouped.items():
            cascade = self._build(path, tweet_id, records)
            if cascade is not None:
                cascades.append(cascade)
        self._log_stats(path)
        return cascades

    def _log_stats(self, path: Path) -> None:
        self.stats.unknown_users = len(self.users.extra)
        s = self.stats
        logger.info(
            f"Loaded {s.cascades} cascades ({s.events} retweets) from {path}: "
            f"{s.dropped_lines} dropped lines, {s.repaired_parents} repaired parents, "
            f"{s.clamped_events} clamped events, {s.missing_roots} tweets without root, "
            f"{s.self_retweets} self-retweets"
        )


def load_cascades(
    event_file: Union[str, Path],
    orphan_policy: OrphanPolicy = OrphanPolicy.REPARENT,
    id_map: Optional[Mapping[str, int]] = None,
    adapter: Optional[CascadeAdapter] = None,
) -> List[Cascade]:
    """Parse a retweet log into one cascade per tweet"""
    return CascadeReader(adapter, orphan_policy, id_map).load_cascades(event_file)


def popularity_at(cascade: Cascade, t: float) -> int:
    """Number of retweet events at offset <= t; the root post is not counted"""
    if t < 0:
        raise DomainError(f"time must be non-negative, got {t}")
    return bisect_right(cascade.events, t, key=lambda e: e.offset_s)


def prefix_at(cascade: Cascade, t_i: float) -> CascadePrefix:
    """Restrict a cascade to the events at or before t_i.

    Each adopter keeps the parent of its earliest in-prefix event. A parent
    that has not adopted by then is replaced by the root, which keeps the
    forest acyclic and rooted whatever the input.
    """
    count = popularity_at(cascade, t_i)
    root = cascade.root
    adopters = {root}
    forest: Dict[int, int] = {}
    reparented = 0
    for event in cascade.events[:count]:
        if event.user in adopters:
            continue
        parent = event.parent_user
        if parent not in adopters:
            parent = root
            reparented += 1
        forest[event.user] = parent
        adopters.add(event.user)
    return CascadePrefix(
        cascade=cascade,
        t_i=t_i,
        adopters=frozenset(adopters),
        forest=forest,
        event_count=count,
        reparented=reparented,
    )
