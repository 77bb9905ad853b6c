"""Readers and writers for panel data, parameters and result tables.

File formats
------------
Edge list
    UTF-8 CSV with header ``year,source,target,relation``; ``relation`` is
    ``G`` or ``H``; one edge per row.
Growth
    UTF-8 CSV with header ``year,firm,log_growth``. Floats are written with
    ``repr`` so they round-trip exactly.
Firm registry
    UTF-8 CSV with header ``firm``; row order is the dense index.
Binary panel (``.fnp``), little-endian::

    magic     8 bytes   b"FIRMNET\\0"
    version   uint32    1
    n_firms   uint64
    n_years   uint32
    reg_len   uint64    byte length of the registry blob
    registry  bytes     UTF-8 JSON list of firm ids, index order
    per year, in increasing order:
        year      int64
        for G then H:
            nnz       uint64
            indptr    int64[n_firms + 1]
            indices   int32[nnz]

    Matrix data is implicit (all ones).
Parameters
    JSON object with exactly the keys ``beta_G, beta_H, beta_LG, beta_LH,
    gamma, mu0, sigma0``.
"""

from __future__ import annotations

import csv
import io as _io
import json
import struct
import warnings
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np
import scipy.sparse as sp

from .exceptions import ConfigError, PanelFormatError
from .network import IngestReport, PanelNetwork, Snapshot, adjacency

MAGIC = b"FIRMNET\x00"
VERSION = 1

EDGE_HEADER = ["year", "source", "target", "relation"]
GROWTH_HEADER = ["year", "firm", "log_growth"]


def _open_text(source, mode="r"):
    if hasattr(source, "read") or hasattr(source, "write"):
        return source, False
    return open(source, mode, encoding="utf-8", newline=""), True


def _normalize_registry(firm_registry) -> tuple:
    if isinstance(firm_registry, Mapping):
        reg = {str(k): int(v) for k, v in firm_registry.items()}
        n = len(reg)
        if sorted(reg.values()) != list(range(n)):
            raise PanelFormatError("firm registry indices must be dense 0..n-1")
        ids = [None] * n
        for k, v in reg.items():
            ids[v] = k
        return reg, ids
    ids = [str(f) for f in firm_registry]
    reg = {f: i for i, f in enumerate(ids)}
    if len(reg) != len(ids):
        raise PanelFormatError("duplicate firm id in registry")
    return reg, ids


def load_panel(edge_list_source, firm_registry, years=None) -> PanelNetwork:
    """Ingest an edge list into a :class:`PanelNetwork`.

    ``edge_list_source`` is a path, an open text file (with header), or an
    iterable of ``(year, source, target, relation)`` tuples. Duplicate edges
    are collapsed and self-loops dropped, each with a warning carrying the
    count; the counts are kept on ``panel.ingest_report``. Years listed in
    ``years`` but absent from the data become empty snapshots.
    """
    reg, ids = _normalize_registry(firm_registry)
    n = len(ids)
    report = IngestReport()
    buckets: dict = {}

    if isinstance(edge_list_source, (str, Path)) or hasattr(edge_list_source, "read"):
        fh, close = _open_text(edge_list_source)
        try:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None or [h.strip() for h in header] != EDGE_HEADER:
                raise PanelFormatError(f"expected header {','.join(EDGE_HEADER)}", line=1)
            rows = list(enumerate(reader, start=2))
        finally:
            if close:
                fh.close()
    else:
        rows = list(enumerate(edge_list_source, start=1))

    for line, row in rows:
        if len(row) == 0:
            continue
        if len(row) != 4:
            raise PanelFormatError(f"expected 4 fields, got {len(row)}", line=line)
        year_s, src, dst, rel = (str(x).strip() for x in row)
        try:
            year = int(year_s)
        except ValueError:
            raise PanelFormatError(f"bad year {year_s!r}", line=line) from None
        if rel not in ("G", "H"):
            raise PanelFormatError(f"relation must be G or H, got {rel!r}", line=line)
        for f in (src, dst):
            if f not in reg:
                raise PanelFormatError(f"unknown firm id {f!r}", line=line)
        report.rows += 1
        i, j = reg[src], reg[dst]
        if i == j:
            report.self_loops += 1
            continue
        buckets.setdefault(year, {"G": [], "H": []})[rel].append(i * n + j)

    all_years = sorted(set(buckets) | set(int(y) for y in (years or ())))
    if not all_years:
        raise PanelFormatError("edge list holds no years")
    yearly = {}
    for y in all_years:
        pair = []
        for rel in ("G", "H"):
            keys = np.asarray(buckets.get(y, {}).get(rel, []), dtype=np.int64)
            uniq = np.unique(keys)
            report.duplicates += keys.size - uniq.size
            r, c = np.divmod(uniq, n)
            pair.append(adjacency(r, c, n))
        yearly[y] = Snapshot(*pair)
    if report.duplicates:
        warnings.warn(f"{report.duplicates} duplicate edges collapsed", stacklevel=2)
    if report.self_loops:
        warnings.warn(f"{report.self_loops} self-loops dropped", stacklevel=2)
    return PanelNetwork(ids, all_years, yearly, ingest_report=report)


def write_edge_list(panel: PanelNetwork, dest) -> None:
    fh, close = _open_text(dest, "w")
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(EDGE_HEADER)
        ids = panel.firm_ids
        for y in panel.years:
            s = panel.snapshot(y)
            for rel in ("G", "H"):
                for i, j in s.edges(rel).tolist():
                    w.writerow([y, ids[i], ids[j], rel])
    finally:
        if close:
            fh.close()


def write_registry(firm_ids, dest) -> None:
    fh, close = _open_text(dest, "w")
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["firm"])
        for f in firm_ids:
            w.writerow([f])
    finally:
        if close:
            fh.close()


def read_registry(source) -> list:
    fh, close = _open_text(source)
    try:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["firm"]:
            raise PanelFormatError("expected header firm", line=1)
        return [row[0] for row in reader if row]
    finally:
        if close:
            fh.close()


# ---------------------------------------------------------------------------
# binary container


def save_panel(panel: PanelNetwork, path) -> None:
    """Write the documented binary container."""
    n = panel.firm_count
    blob = json.dumps(panel.firm_ids, ensure_ascii=False).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<IQIQ", VERSION, n, len(panel.years), len(blob)))
        fh.write(blob)
        for y in panel.years:
            fh.write(struct.pack("<q", y))
            for a in (panel.G(y), panel.H(y)):
                fh.write(struct.pack("<Q", a.nnz))
                fh.write(np.ascontiguousarray(a.indptr, dtype="<i8").tobytes())
                fh.write(np.ascontiguousarray(a.indices, dtype="<i4").tobytes())


def read_panel(path) -> PanelNetwork:
    """Inverse of :func:`save_panel`."""
    data = Path(path).read_bytes()
    if data[:8] != MAGIC:
        raise PanelFormatError("not a firmnet panel file (bad magic)")
    off = 8
    version, n, n_years, reg_len = struct.unpack_from("<IQIQ", data, off)
    off += struct.calcsize("<IQIQ")
    if version != VERSION:
        raise PanelFormatError(f"unsupported panel version {version}")
    ids = json.loads(data[off:off + reg_len].decode("utf-8"))
    off += reg_len
    years, snaps = [], {}
    for _ in range(n_years):
        (year,) = struct.unpack_from("<q", data, off)
        off += 8
        pair = []
        for _ in range(2):
            (nnz,) = struct.unpack_from("<Q", data, off)
            off += 8
            indptr = np.frombuffer(data, dtype="<i8", count=n + 1, offset=off).astype(np.int64)
            off += 8 * (n + 1)
            indices = np.frombuffer(data, dtype="<i4", count=nnz, offset=off).astype(np.int32)
            off += 4 * nnz
            m = sp.csr_matrix((np.ones(nnz), indices, indptr), shape=(n, n))
            m.has_sorted_indices = True
            pair.append(m)
        years.append(int(year))
        snaps[int(year)] = Snapshot(*pair)
    if off != len(data):
        raise PanelFormatError("trailing bytes in panel file")
    return PanelNetwork(ids, years, snaps)


# ---------------------------------------------------------------------------
# growth files


def write_growth(growth_panel, firm_ids, dest, latent: bool = False) -> None:
    values = growth_panel.z if latent else growth_panel.y
    if values is None:
        raise ValueError("growth panel carries no latent series")
    fh, close = _open_text(dest, "w")
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(GROWTH_HEADER)
        for t, year in enumerate(growth_panel.years):
            for f, v in zip(firm_ids, values[t].tolist()):
                w.writerow([year, f, repr(v)])
    finally:
        if close:
            fh.close()


def read_growth(source, firm_registry):
    """Read a growth file into a :class:`~firmnet.model.GrowthPanel`.

    Every (year, firm) pair must appear exactly once.
    """
    from .model import GrowthPanel

    reg, ids = _normalize_registry(firm_registry)
    n = len(ids)
    fh, close = _open_text(source)
    by_year: dict = {}
    try:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != GROWTH_HEADER:
            raise PanelFormatError(f"expected header {','.join(GROWTH_HEADER)}", line=1)
        for line, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 3:
                raise PanelFormatError(f"expected 3 fields, got {len(row)}", line=line)
            try:
                year = int(row[0])
                value = float(row[2])
            except ValueError:
                raise PanelFormatError("bad year or growth value", line=line) from None
            if row[1] not in reg:
                raise PanelFormatError(f"unknown firm id {row[1]!r}", line=line)
            if not np.isfinite(value):
                raise PanelFormatError("growth value not finite", line=line)
            vec = by_year.setdefault(year, np.full(n, np.nan))
            k = reg[row[1]]
            if not np.isnan(vec[k]):
                raise PanelFormatError(f"duplicate growth entry for firm {row[1]!r}", line=line)
            vec[k] = value
    finally:
        if close:
            fh.close()
    years = sorted(by_year)
    incomplete = [y for y in years if np.isnan(by_year[y]).any()]
    if incomplete:
        raise PanelFormatError(f"growth missing for some firms in years {incomplete}")
    return GrowthPanel(years, np.vstack([by_year[y] for y in years]) if years else np.empty((0, n)))


# ---------------------------------------------------------------------------
# parameters and tables


def read_params(source):
    from .model import PARAM_NAMES, StructuralParams

    if isinstance(source, Mapping):
        doc = dict(source)
    else:
        try:
            doc = json.loads(Path(source).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"parameter file is not valid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise ConfigError("parameter document must be a flat object")
    missing = [k for k in PARAM_NAMES if k not in doc]
    extra = [k for k in doc if k not in PARAM_NAMES]
    if missing or extra:
        raise ConfigError(f"parameter keys: missing {missing}, unexpected {extra}")
    try:
        return StructuralParams(**{k: float(doc[k]) for k in PARAM_NAMES})
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None


def write_params(params, dest) -> None:
    Path(dest).write_text(json.dumps(params.to_dict(), indent=2) + "\n", encoding="utf-8")


def _cell(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (np.integer,)):
        return str(int(v))
    return v


def write_table(dest, header, rows: Iterable) -> None:
    """Delimited UTF-8 table; floats are written round-trip exact."""
    fh, close = _open_text(dest, "w")
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_cell(v) for v in row])
    finally:
        if close:
            fh.close()


def read_table(source) -> list:
    """Rows of a table written by :func:`write_table` as dicts.

    Numeric-looking cells come back as int or float.
    """
    fh, close = _open_text(source)
    try:
        reader = csv.DictReader(fh)
        out = []
        for row in reader:
            out.append({k: _parse_cell(v) for k, v in row.items()})
        return out
    finally:
        if close:
            fh.close()


def _parse_cell(v):
    for kind in (int, float):
        try:
            return kind(v)
        except (TypeError, ValueError):
            pass
    return v


def table_to_string(header, rows) -> str:
    buf = _io.StringIO()
    write_table(buf, header, rows)
    return buf.getvalue()
