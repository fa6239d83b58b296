"""Dataset ingestion: fetching, parsing, validation, and chronological splits.

Edge lists are delimited UTF-8 text with one quadruple per row. Raw node and
relation identifiers may be arbitrary strings; they are densified at parse
time and the mappings are written to two-column vocabulary sidecars
(``raw<TAB>dense``, sorted by dense id). The canonical on-disk form used
between pipeline stages stores the dense ids themselves, which round-trip
exactly.
"""

from __future__ import annotations

import hashlib
import shutil
import urllib.error
import urllib.request
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    ConfigError,
    DataError,
    FetchError,
    IntegrityError,
    ParseError,
    SchemaError,
    SplitError,
)
from .graph import Granularity, SplitBoundaries, TemporalMultiGraph

_FIELDS = ("timestamp", "subject", "relation", "object")
STATIC_TIMESTAMP = 0  # sentinel for the relation-only companion graph


@dataclass(frozen=True)
class EdgeListSchema:
    """Column layout of an edge-list file.

    ``columns`` names the four fields in file order; it must be a
    permutation of (timestamp, subject, relation, object). ``node_type_path``
    points at an optional two-column sidecar assigning a type to every node
    (required for THG datasets); ``static_path`` at an optional
    (subject, relation, object) companion file.
    """

    columns: tuple = _FIELDS
    header: bool = True
    delimiter: str = ","
    node_type_path: Path | None = None
    static_path: Path | None = None

    def __post_init__(self):
        if sorted(self.columns) != sorted(_FIELDS):
            raise SchemaError(f"columns must be a permutation of {_FIELDS}, got {self.columns}")
        if len(self.delimiter.encode("utf-8")) != 1:
            raise SchemaError("delimiter must be a single byte")

    def column_index(self, name: str) -> int:
        return self.columns.index(name)

    @classmethod
    def from_file(cls, path) -> "EdgeListSchema":
        kv = read_keyvalue_file(path)
        columns = tuple(c.strip() for c in kv.get("columns", ",".join(_FIELDS)).split(","))
        return cls(
            columns=columns,
            header=kv.get("header", "true").lower() == "true",
            delimiter=kv.get("delimiter", ","),
            node_type_path=Path(kv["node_type_path"]) if "node_type_path" in kv else None,
            static_path=Path(kv["static_path"]) if "static_path" in kv else None,
        )


@dataclass(frozen=True)
class DatasetManifest:
    """Descriptor for one distributable dataset."""

    name: str
    url: str
    checksum: str  # "sha256:<hex>"; required for any remote fetch
    granularity: Granularity
    kind: str  # "tkg" | "thg"
    strategy: str  # "all" | "type-aware" | "node-type" | "random"
    q: int = 0

    def __post_init__(self):
        if self.kind not in ("tkg", "thg"):
            raise ConfigError(f"kind must be tkg or thg, got {self.kind!r}")
        if self.strategy not in ("all", "type-aware", "node-type", "random"):
            raise ConfigError(f"unknown sampling strategy {self.strategy!r}")
        if self.strategy != "all" and self.q < 1:
            raise ConfigError("q must be >= 1 for 1-vs-q strategies")
        if self.url and not self.checksum:
            raise ConfigError("checksum is required for any remote fetch")

    @classmethod
    def from_file(cls, path) -> "DatasetManifest":
        kv = read_keyvalue_file(path)
        try:
            return cls(
                name=kv["name"],
                url=kv.get("url", ""),
                checksum=kv.get("checksum", ""),
                granularity=Granularity(kv["granularity"]),
                kind=kv["kind"],
                strategy=kv["strategy"],
                q=int(kv.get("q", "0")),
            )
        except KeyError as exc:
            raise ConfigError(f"dataset manifest {path} is missing key {exc}") from exc
        except ValueError as exc:
            raise ConfigError(f"dataset manifest {path}: {exc}") from exc

    def to_file(self, path) -> None:
        write_keyvalue_file(
            path,
            [
                ("name", self.name),
                ("url", self.url),
                ("checksum", self.checksum),
                ("granularity", self.granularity.value),
                ("kind", self.kind),
                ("strategy", self.strategy),
                ("q", str(self.q)),
            ],
        )


@dataclass
class IngestReport:
    """What happened during one parse: vocabularies and data-quality counts."""

    rows_read: int = 0
    duplicates_removed: int = 0
    node_vocab: list = field(default_factory=list)  # raw id per dense id
    relation_vocab: list = field(default_factory=list)
    node_type_vocab: list = field(default_factory=list)
    skipped_lines: list = field(default_factory=list)


# -- key-value config files ----------------------------------------------------


def read_keyvalue_file(path) -> dict:
    """Parse a ``key = value`` config file; '#' starts a comment."""
    out = {}
    for raw_line in Path(path).read_text(encoding="utf-8").splitlines():
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}: malformed line {raw_line!r}")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def write_keyvalue_file(path, items) -> None:
    text = "".join(f"{k} = {v}\n" for k, v in items)
    Path(path).write_text(text, encoding="utf-8")


# -- fetching -------------------------------------------------------------------


def checksum_file(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return "sha256:" + digest.hexdigest()


def fetch_dataset(manifest: DatasetManifest, cache_dir) -> Path:
    """Return a local, checksum-verified copy of the dataset file.

    Cached copies are reused without refetching. A cached file failing the
    checksum is deleted before the integrity error is raised, so the next
    call refetches.
    """
    cache_dir = Path(cache_dir)
    filename = manifest.url.rsplit("/", 1)[-1] or manifest.name
    target = cache_dir / manifest.name / filename
    if target.exists():
        actual = checksum_file(target)
        if actual == manifest.checksum:
            return target
        target.unlink()
        raise IntegrityError(
            f"cached {target} failed checksum ({actual} != {manifest.checksum}); entry purged"
        )
    if not manifest.url:
        raise FetchError(f"dataset {manifest.name} is not cached and has no url")
    target.parent.mkdir(parents=True, exist_ok=True)
    tmp = target.with_suffix(target.suffix + ".part")
    try:
        with urllib.request.urlopen(manifest.url) as response, open(tmp, "wb") as out:
            shutil.copyfileobj(response, out)
    except (urllib.error.URLError, OSError) as exc:
        tmp.unlink(missing_ok=True)
        raise FetchError(f"download of {manifest.url} failed: {exc}") from exc
    actual = checksum_file(tmp)
    if actual != manifest.checksum:
        tmp.unlink()
        raise IntegrityError(
            f"download of {manifest.url} failed checksum ({actual} != {manifest.checksum})"
        )
    tmp.replace(target)
    return target


# -- parsing --------------------------------------------------------------------


def _read_lines(source):
    if hasattr(source, "read"):
        data = source.read()
        if isinstance(data, bytes):
            data = data.decode("utf-8")
        return data.splitlines()
    return Path(source).read_text(encoding="utf-8").splitlines()


class _Vocabulary:
    """Raw-string to dense-id assignment in first-seen order."""

    def __init__(self):
        self.index = {}
        self.raw = []

    def dense(self, raw: str) -> int:
        got = self.index.get(raw)
        if got is None:
            got = len(self.raw)
            self.index[raw] = got
            self.raw.append(raw)
        return got


def parse_edgelist(
    source,
    schema: EdgeListSchema | None = None,
    *,
    granularity: Granularity = Granularity.DAY,
    on_invalid: str = "error",
):
    """Parse a delimited edge list into a graph with dense ids.

    Rows with a missing subject or object (or any blank field) are rejected
    with their line number; with ``on_invalid="skip"`` they are dropped and
    recorded in the report instead, mirroring edge-list cleaning.

    Returns (TemporalMultiGraph, IngestReport).
    """
    schema = schema or EdgeListSchema()
    if on_invalid not in ("error", "skip"):
        raise ConfigError("on_invalid must be 'error' or 'skip'")
    lines = _read_lines(source)
    t_col = schema.column_index("timestamp")
    s_col = schema.column_index("subject")
    r_col = schema.column_index("relation")
    o_col = schema.column_index("object")

    nodes = _Vocabulary()
    relations = _Vocabulary()
    subjects, rels, objects, times = [], [], [], []
    report = IngestReport()

    start = 2 if schema.header else 1
    body = lines[1:] if schema.header else lines
    for lineno, line in enumerate(body, start=start):
        if not line.strip():
            continue
        parts = line.split(schema.delimiter)
        if len(parts) != 4:
            raise SchemaError(f"line {lineno}: expected 4 columns, got {len(parts)}")
        fields = [p.strip() for p in parts]
        blank = [
            name
            for name, idx in (
                ("timestamp", t_col),
                ("subject", s_col),
                ("relation", r_col),
                ("object", o_col),
            )
            if not fields[idx]
        ]
        if blank:
            if on_invalid == "skip":
                report.skipped_lines.append(lineno)
                continue
            raise ParseError(f"missing {', '.join(blank)} column", lineno)
        try:
            timestamp = int(fields[t_col])
        except ValueError:
            raise ParseError(f"timestamp {fields[t_col]!r} is not an integer", lineno) from None
        subjects.append(nodes.dense(fields[s_col]))
        rels.append(relations.dense(fields[r_col]))
        objects.append(nodes.dense(fields[o_col]))
        times.append(timestamp)
        report.rows_read += 1

    node_types = None
    if schema.node_type_path is not None:
        node_types, report.node_type_vocab = _parse_node_types(
            schema.node_type_path, nodes, schema.delimiter
        )

    graph = TemporalMultiGraph(
        subjects,
        rels,
        objects,
        times,
        node_count=len(nodes.raw),
        relation_count=len(relations.raw),
        node_types=node_types,
        granularity=granularity,
    )
    report.duplicates_removed = graph.duplicates_removed
    report.node_vocab = nodes.raw
    report.relation_vocab = relations.raw
    return graph, report


def _parse_node_types(path, nodes: _Vocabulary, delimiter: str):
    types = _Vocabulary()
    assigned = np.full(len(nodes.raw), -1, dtype=np.int64)
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        parts = [p.strip() for p in line.split(delimiter)]
        if len(parts) != 2:
            raise SchemaError(f"{path} line {lineno}: expected 2 columns, got {len(parts)}")
        raw_node, raw_type = parts
        dense_node = nodes.index.get(raw_node)
        if dense_node is None:
            continue  # type info for a node absent from the edge list
        assigned[dense_node] = types.dense(raw_type)
    missing = int((assigned < 0).sum())
    if missing:
        raise DataError(f"{missing} nodes have no type in {path}")
    return assigned, types.raw


def parse_static_edgelist(source, node_index: dict, *, delimiter: str = ",", header: bool = True):
    """Parse the optional static companion file of (subject, relation, object) rows.

    Nodes are resolved through the temporal graph's vocabulary; rows naming
    unknown nodes are skipped and counted, since static edges are scorer
    context only and never enter splits or metrics. Relations get their own
    id space and every row carries the sentinel timestamp.

    Returns (TemporalMultiGraph, relation_vocab, skipped_count).
    """
    lines = _read_lines(source)
    body = lines[1:] if header else lines
    start = 2 if header else 1
    relations = _Vocabulary()
    subjects, rels, objects = [], [], []
    skipped = 0
    node_count = max(node_index.values()) + 1 if node_index else 0
    for lineno, line in enumerate(body, start=start):
        if not line.strip():
            continue
        parts = [p.strip() for p in line.split(delimiter)]
        if len(parts) != 3:
            raise SchemaError(f"line {lineno}: expected 3 columns, got {len(parts)}")
        s_raw, r_raw, o_raw = parts
        if s_raw not in node_index or o_raw not in node_index:
            skipped += 1
            continue
        subjects.append(node_index[s_raw])
        rels.append(relations.dense(r_raw))
        objects.append(node_index[o_raw])
    graph = TemporalMultiGraph(
        subjects,
        rels,
        objects,
        [STATIC_TIMESTAMP] * len(subjects),
        node_count=node_count,
        relation_count=len(relations.raw),
    )
    return graph, relations.raw, skipped


def load_dense_edgelist(
    source,
    *,
    node_count: int,
    relation_count: int,
    node_types=None,
    granularity: Granularity = Granularity.DAY,
    inverse_augmented: bool = False,
    schema: EdgeListSchema | None = None,
) -> TemporalMultiGraph:
    """Read an edge list whose fields already are dense integer ids.

    This is the exact inverse of :func:`write_edgelist`, preserving ids
    bit-for-bit (unlike :func:`parse_edgelist`, which assigns fresh dense ids
    in first-seen order).
    """
    schema = schema or EdgeListSchema()
    lines = _read_lines(source)
    body = lines[1:] if schema.header else lines
    start = 2 if schema.header else 1
    cols = {name: schema.column_index(name) for name in _FIELDS}
    rows = [[], [], [], []]
    for lineno, line in enumerate(body, start=start):
        if not line.strip():
            continue
        parts = line.split(schema.delimiter)
        if len(parts) != 4:
            raise SchemaError(f"line {lineno}: expected 4 columns, got {len(parts)}")
        try:
            rows[0].append(int(parts[cols["subject"]]))
            rows[1].append(int(parts[cols["relation"]]))
            rows[2].append(int(parts[cols["object"]]))
            rows[3].append(int(parts[cols["timestamp"]]))
        except ValueError:
            raise ParseError("non-integer field in dense edge list", lineno) from None
    return TemporalMultiGraph(
        rows[0],
        rows[1],
        rows[2],
        rows[3],
        node_count=node_count,
        relation_count=relation_count,
        node_types=node_types,
        granularity=granularity,
        inverse_augmented=inverse_augmented,
    )


def write_edgelist(graph: TemporalMultiGraph, path, schema: EdgeListSchema | None = None) -> None:
    """Serialize a graph to delimited text with dense ids (canonical form)."""
    schema = schema or EdgeListSchema()
    delim = schema.delimiter
    out = []
    if schema.header:
        out.append(delim.join(schema.columns))
    columns = {
        "timestamp": graph.timestamps,
        "subject": graph.subjects,
        "relation": graph.relations,
        "object": graph.objects,
    }
    stacked = [columns[name] for name in schema.columns]
    for row in zip(*stacked):
        out.append(delim.join(str(int(v)) for v in row))
    Path(path).write_text("\n".join(out) + "\n", encoding="utf-8")


def write_vocab(path, raw_ids) -> None:
    """Two-column (raw-id, dense-id) file, sorted by dense id."""
    with open(path, "w", encoding="utf-8") as fh:
        for dense, raw in enumerate(raw_ids):
            fh.write(f"{raw}\t{dense}\n")


def read_vocab(path) -> list:
    raw_ids = []
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        if not line:
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            raise SchemaError(f"{path} line {lineno}: expected 2 tab-separated columns")
        raw, dense = parts
        if int(dense) != len(raw_ids):
            raise DataError(f"{path} line {lineno}: dense ids must be 0..n-1 in order")
        raw_ids.append(raw)
    return raw_ids


# -- chronological split --------------------------------------------------------


def chronological_split(
    graph: TemporalMultiGraph,
    train_frac: float = 0.70,
    valid_frac: float = 0.15,
):
    """Split a graph chronologically into train/valid/test parts.

    The boundary rule: ``train_end`` is the smallest timestamp whose
    cumulative edge fraction reaches ``train_frac``, with the whole boundary
    timestamp assigned to the earlier split; ``valid_end`` likewise at
    ``train_frac + valid_frac``. Edges of one timestamp therefore never
    straddle a boundary, and the realized train fraction can overshoot the
    target by up to the boundary timestamp's edge share.

    Returns (train, valid, test, SplitBoundaries).

    Raises
    ------
    SplitError
        If the graph has fewer than three distinct timestamps or the
        cumulative rule leaves any part empty.
    """
    if graph.is_empty:
        raise SplitError("cannot split an empty graph")
    if train_frac <= 0 or valid_frac <= 0 or train_frac + valid_frac >= 1:
        raise ConfigError("fractions must be positive and sum to less than 1")
    distinct, counts = np.unique(graph.timestamps, return_counts=True)
    if len(distinct) < 3:
        raise SplitError(f"need at least 3 distinct timestamps, got {len(distinct)}")
    cumulative = np.cumsum(counts) / len(graph)
    train_idx = _first_reaching(cumulative, train_frac)
    valid_idx = _first_reaching(cumulative, train_frac + valid_frac)
    if valid_idx <= train_idx:
        raise SplitError("validation split is empty under the cumulative boundary rule")
    if valid_idx >= len(distinct) - 1:
        raise SplitError("test split is empty under the cumulative boundary rule")
    boundaries = SplitBoundaries(int(distinct[train_idx]), int(distinct[valid_idx]))
    train = graph.time_slice(graph.t_min, boundaries.train_end)
    valid = graph.time_slice(boundaries.train_end + 1, boundaries.valid_end)
    test = graph.time_slice(boundaries.valid_end + 1, graph.t_max)
    return train, valid, test, boundaries


def _first_reaching(cumulative: np.ndarray, fraction: float) -> int:
    idx = int(np.searchsorted(cumulative, fraction, side="left"))
    while idx < len(cumulative) and cumulative[idx] < fraction:
        idx += 1
    return min(idx, len(cumulative) - 1)


# -- graph directories (pipeline storage convention) ----------------------------


def write_graph_dir(
    graph: TemporalMultiGraph,
    directory,
    report: IngestReport | None = None,
    static: TemporalMultiGraph | None = None,
    static_relation_vocab=None,
) -> None:
    """Write a graph plus sidecars into a directory (canonical dense-id form)."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    write_edgelist(graph, directory / "edgelist.csv")
    kind = "thg" if graph.is_heterogeneous else "tkg"
    write_keyvalue_file(
        directory / "meta.txt",
        [
            ("node_count", graph.node_count),
            ("relation_count", graph.relation_count),
            ("granularity", graph.granularity.value),
            ("kind", kind),
            ("inverse_augmented", str(graph.inverse_augmented).lower()),
        ],
    )
    if graph.is_heterogeneous:
        with open(directory / "node_types.csv", "w", encoding="utf-8") as fh:
            fh.write("node,type\n")
            for node, typ in enumerate(graph.node_types):
                fh.write(f"{node},{int(typ)}\n")
    if report is not None:
        write_vocab(directory / "nodes.vocab", report.node_vocab)
        write_vocab(directory / "relations.vocab", report.relation_vocab)
        if report.node_type_vocab:
            write_vocab(directory / "node_types.vocab", report.node_type_vocab)
        write_keyvalue_file(
            directory / "ingest_report.txt",
            [
                ("rows_read", report.rows_read),
                ("duplicates_removed", report.duplicates_removed),
                ("skipped_lines", ",".join(map(str, report.skipped_lines))),
            ],
        )
    if static is not None:
        write_edgelist(static, directory / "static_edgelist.csv")
        if static_relation_vocab is not None:
            write_vocab(directory / "static_relations.vocab", static_relation_vocab)


def load_graph_dir(directory):
    """Load a graph directory written by :func:`write_graph_dir`.

    Returns (graph, static_graph_or_None).
    """
    directory = Path(directory)
    meta = read_keyvalue_file(directory / "meta.txt")
    node_count = int(meta["node_count"])
    relation_count = int(meta["relation_count"])
    granularity = Granularity(meta["granularity"])
    augmented = meta.get("inverse_augmented", "false") == "true"

    node_types = None
    if meta.get("kind") == "thg":
        types_path = directory / "node_types.csv"
        if not types_path.exists():
            raise DataError(f"{directory}: THG graph dir lacks node_types.csv")
        rows = np.loadtxt(types_path, delimiter=",", skiprows=1, dtype=np.int64, ndmin=2)
        node_types = np.full(node_count, -1, dtype=np.int64)
        node_types[rows[:, 0]] = rows[:, 1]

    graph = load_dense_edgelist(
        directory / "edgelist.csv",
        node_count=node_count,
        relation_count=relation_count,
        node_types=node_types,
        granularity=granularity,
        inverse_augmented=augmented,
    )
    static = None
    static_path = directory / "static_edgelist.csv"
    if static_path.exists():
        static_rel_vocab = directory / "static_relations.vocab"
        n_static_rel = len(read_vocab(static_rel_vocab)) if static_rel_vocab.exists() else None
        static = load_dense_edgelist(
            static_path,
            node_count=node_count,
            relation_count=n_static_rel if n_static_rel is not None else _max_relation(static_path) + 1,
            granularity=granularity,
        )
    return graph, static


def _max_relation(path) -> int:
    try:
        graph_rows = np.loadtxt(path, delimiter=",", skiprows=1, dtype=np.int64, ndmin=2)
    except ValueError:
        return 0  # header-only companion file
    return int(graph_rows[:, 2].max()) if len(graph_rows) else 0


def save_splits(directory, train, valid, test, boundaries: SplitBoundaries) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    write_edgelist(train, directory / "train.csv")
    write_edgelist(valid, directory / "valid.csv")
    write_edgelist(test, directory / "test.csv")
    write_keyvalue_file(
        directory / "boundaries.txt",
        [("train_end", boundaries.train_end), ("valid_end", boundaries.valid_end)],
    )


def load_splits(directory, template: TemporalMultiGraph):
    """Load split graphs written by :func:`save_splits`.

    ``template`` supplies the vocabulary sizes and metadata (usually the full
    graph the splits were derived from).
    """
    directory = Path(directory)
    kv = read_keyvalue_file(directory / "boundaries.txt")
    boundaries = SplitBoundaries(int(kv["train_end"]), int(kv["valid_end"]))
    parts = []
    for name in ("train.csv", "valid.csv", "test.csv"):
        parts.append(
            load_dense_edgelist(
                directory / name,
                node_count=template.node_count,
                relation_count=template.relation_count,
                node_types=template.node_types,
                granularity=template.granularity,
                inverse_augmented=template.inverse_augmented,
            )
        )
    return parts[0], parts[1], parts[2], boundaries
