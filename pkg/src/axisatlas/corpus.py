"""Corpus and embedding-table ingestion.

The sole ingestion boundary: parses the corpus annotation JSON and the
keyword embedding table (text or binary), normalizes keywords, and
cross-validates vocabulary coverage before anything downstream runs.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, field

import numpy as np

from . import blockio

log = logging.getLogger(__name__)

_WS_RUN = re.compile(r"\s+")


class CorpusError(ValueError):
    """Malformed corpus file or broken corpus invariant."""


class EmbeddingTableError(ValueError):
    """Malformed embedding table or inconsistent record."""


class MissingKeywordError(KeyError):
    """A corpus keyword has no embedding and skipping is disallowed."""


def normalize_keyword(raw: str) -> str:
    """Canonical keyword form: case-folded, trimmed, inner whitespace
    runs collapsed to single spaces.  Hyphens are preserved."""
    return _WS_RUN.sub(" ", raw.strip()).casefold()


@dataclass(frozen=True)
class Artwork:
    id: str
    title: str
    artist: str
    year: int | None
    keywords_by_axis: dict[str, tuple[str, ...]]

    def all_keywords(self):
        for kws in self.keywords_by_axis.values():
            yield from kws

    def keyword_count(self) -> int:
        return sum(len(kws) for kws in self.keywords_by_axis.values())


@dataclass(frozen=True)
class Corpus:
    works: tuple[Artwork, ...]
    axes: tuple[str, ...]
    artists: dict[str, tuple[str, ...]] = field(compare=False)

    def __post_init__(self):
        object.__setattr__(self, "artists", _index_artists(self.works))

    def vocabulary(self) -> set[str]:
        return {kw for w in self.works for kw in w.all_keywords()}

    def assignment_count(self) -> int:
        return sum(w.keyword_count() for w in self.works)

    def work_ids(self) -> list[str]:
        return [w.id for w in self.works]


def _index_artists(works) -> dict[str, tuple[str, ...]]:
    idx: dict[str, list[str]] = {}
    for w in works:
        idx.setdefault(w.artist, []).append(w.id)
    return {artist: tuple(ids) for artist, ids in sorted(idx.items())}


def _parse_work(rec: dict, axes: tuple[str, ...]) -> Artwork:
    try:
        wid = rec["id"]
        title = rec["title"]
        artist = rec["artist"]
    except KeyError as exc:
        raise CorpusError(f"work record missing field {exc.args[0]!r}: {rec!r}") from exc
    if not isinstance(wid, str) or not wid:
        raise CorpusError(f"work id must be a non-empty string, got {wid!r}")
    if not isinstance(artist, str) or not artist.strip():
        raise CorpusError(f"work {wid!r}: artist name is empty")
    year = rec.get("year")
    if year is not None and not isinstance(year, int):
        raise CorpusError(f"work {wid!r}: year must be an integer calendar year or null")

    keywords: dict[str, tuple[str, ...]] = {}
    for axis, kws in rec.get("keywords", {}).items():
        if axis not in axes:
            raise CorpusError(f"work {wid!r} references unknown axis {axis!r}")
        seen: list[str] = []
        for kw in kws:
            norm = normalize_keyword(kw)
            if not norm:
                raise CorpusError(f"work {wid!r}: empty keyword under axis {axis!r}")
            if norm in seen:
                log.warning("work %r axis %r: duplicate keyword %r dropped", wid, axis, norm)
                continue
            seen.append(norm)
        keywords[axis] = tuple(seen)
    return Artwork(id=wid, title=str(title), artist=artist.strip(), year=year,
                   keywords_by_axis=keywords)


def load_corpus(path, expected_axes: int | None = None) -> Corpus:
    """Parse and validate a corpus annotation file.

    Works are returned in canonical order (sorted by id), so permuting
    records on disk yields an equal Corpus.  ``expected_axes`` pins the
    axis count (13 for the released dataset); None accepts any.
    """
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise CorpusError(f"cannot parse corpus file {path}: {exc}") from exc
    return corpus_from_dict(doc, expected_axes=expected_axes)


def corpus_from_dict(doc: dict, expected_axes: int | None = None) -> Corpus:
    if not isinstance(doc, dict) or "axes" not in doc or "works" not in doc:
        raise CorpusError("corpus document must contain 'axes' and 'works'")
    axes = tuple(doc["axes"])
    if len(set(axes)) != len(axes):
        raise CorpusError("axis names must be unique")
    if not axes:
        raise CorpusError("axis list is empty")
    if expected_axes is not None and len(axes) != expected_axes:
        raise CorpusError(f"expected {expected_axes} axes, file declares {len(axes)}")

    works = []
    seen_ids = set()
    for rec in doc["works"]:
        work = _parse_work(rec, axes)
        if work.id in seen_ids:
            raise CorpusError(f"duplicate work id {work.id!r}")
        seen_ids.add(work.id)
        works.append(work)
    works.sort(key=lambda w: w.id)
    return Corpus(works=tuple(works), axes=axes, artists={})


def corpus_to_dict(corpus: Corpus) -> dict:
    return {
        "axes": list(corpus.axes),
        "works": [
            {
                "id": w.id,
                "title": w.title,
                "artist": w.artist,
                "year": w.year,
                "keywords": {axis: list(kws) for axis, kws in w.keywords_by_axis.items()},
            }
            for w in corpus.works
        ],
    }


def save_corpus(corpus: Corpus, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(corpus_to_dict(corpus), fh, ensure_ascii=False, indent=2, sort_keys=True)
        fh.write("\n")


@dataclass(frozen=True)
class EmbeddingTable:
    dimension: int
    entries: dict[str, np.ndarray]

    def keywords(self) -> list[str]:
        return list(self.entries)

    def vector(self, keyword: str) -> np.ndarray:
        return self.entries[keyword]

    def matrix(self, keywords=None) -> np.ndarray:
        """Stack vectors (float64) in the given order, default table order."""
        keys = list(self.entries) if keywords is None else list(keywords)
        return np.array([self.entries[k] for k in keys], dtype=np.float64)


def _validate_entries(entries: dict[str, np.ndarray], dim: int) -> None:
    for kw, vec in entries.items():
        if vec.shape != (dim,):
            raise EmbeddingTableError(
                f"keyword {kw!r}: vector has {vec.shape[0]} values, header says {dim}"
            )
        if not np.all(np.isfinite(vec)):
            raise EmbeddingTableError(f"keyword {kw!r}: non-finite component")


def load_embedding_table(path) -> EmbeddingTable:
    """Load a keyword embedding table (text ``dim=<D>`` header form or
    AXEB binary).  Binary vectors are read bit-exactly."""
    with open(path, "rb") as fh:
        magic = fh.read(4)
    if magic == blockio.TABLE_MAGIC:
        raw_entries, dim = blockio.read_embedding_table(path)
        entries = {normalize_keyword(k): v for k, v in raw_entries.items()}
        if len(entries) != len(raw_entries):
            raise EmbeddingTableError("duplicate keyword after normalization")
        _validate_entries(entries, dim)
        return EmbeddingTable(dimension=dim, entries=entries)
    return _load_text_table(path)


def _load_text_table(path) -> EmbeddingTable:
    entries: dict[str, np.ndarray] = {}
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        if not header.startswith("dim="):
            raise EmbeddingTableError(f"first line must be 'dim=<D>', got {header!r}")
        try:
            dim = int(header[4:])
        except ValueError as exc:
            raise EmbeddingTableError(f"bad dimension in header {header!r}") from exc
        if dim <= 0:
            raise EmbeddingTableError("dimension must be positive")
        for lineno, line in enumerate(fh, start=2):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            keyword = normalize_keyword(parts[0])
            values = parts[1:]
            if len(values) != dim:
                raise EmbeddingTableError(
                    f"record {lineno - 1} (line {lineno}): {len(values)} values under a {dim} header"
                )
            if keyword in entries:
                raise EmbeddingTableError(f"duplicate keyword {keyword!r} at line {lineno}")
            try:
                vec = np.array([float(v) for v in values], dtype=np.float32)
            except ValueError as exc:
                raise EmbeddingTableError(f"line {lineno}: non-numeric value") from exc
            entries[keyword] = vec
    _validate_entries(entries, dim)
    return EmbeddingTable(dimension=dim, entries=entries)


def save_embedding_table(table: EmbeddingTable, path, binary: bool = True) -> None:
    if binary:
        blockio.write_embedding_table(path, table.entries, table.dimension)
        return
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"dim={table.dimension}\n")
        for kw, vec in table.entries.items():
            vals = "\t".join(repr(float(v)) for v in vec)
            fh.write(f"{kw}\t{vals}\n")


@dataclass(frozen=True)
class ValidationReport:
    missing: tuple[str, ...]
    unused: tuple[str, ...]
    present: tuple[str, ...]
    assignments: int

    @property
    def ok(self) -> bool:
        return not self.missing


def validate_against(corpus: Corpus, table: EmbeddingTable) -> ValidationReport:
    """Cross-check corpus vocabulary against the embedding table."""
    vocab = corpus.vocabulary()
    table_keys = set(table.entries)
    missing = tuple(sorted(vocab - table_keys))
    unused = tuple(sorted(table_keys - vocab))
    present = tuple(sorted(vocab & table_keys))
    return ValidationReport(missing=missing, unused=unused, present=present,
                            assignments=corpus.assignment_count())


def require_coverage(corpus: Corpus, table: EmbeddingTable, allow_missing: bool = False) -> ValidationReport:
    """Gate downstream stages on full vocabulary coverage unless the
    caller explicitly allows skipping missing keywords."""
    report = validate_against(corpus, table)
    if report.missing and not allow_missing:
        head = ", ".join(report.missing[:5])
        raise MissingKeywordError(
            f"{len(report.missing)} corpus keywords missing from embedding table: {head}"
        )
    return report
