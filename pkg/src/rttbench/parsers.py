"""Parsers for vmstat, iostat and netstat text output, plus frame assembly.

All three tools are captured to plain files by an operator; nothing is
spawned here. vmstat and iostat already report per-interval values, so
their rows map straight to records. netstat -s prints cumulative counters:
two or more snapshots are differenced into per-second rates, and a lone
snapshot yields a record flagged as non-rate that frame assembly ignores.

Timestamps: vmstat -t rows and ``#ts <seconds>`` marker lines (the capture
convention for netstat, also honored for the other tools) are used when
present; otherwise rows are spaced ``interval`` seconds from ``start_time``.
"""

from __future__ import annotations

from datetime import datetime, timezone

import numpy as np

from .errors import DomainError, ParseError, SchemaError
from .schema import FEATURE_INDEX, KpiFrame, ToolRecord, features_for_tool

# vmstat column vocabulary -> canonical feature names (None: keep raw name)
VMSTAT_COLUMNS = {
    "r": "procs_runnable", "b": "procs_blocked", "swpd": None,
    "free": "mem_free", "buff": "mem_buff", "cache": "mem_cache",
    "si": "swap_in", "so": "swap_out", "bi": "blocks_in", "bo": "blocks_out",
    "in": "interrupts", "cs": "context_switches",
    "us": "cpu_user", "sy": "cpu_sys", "id": "cpu_idle", "wa": "cpu_wait",
    "st": None, "gu": None,
}
_VMSTAT_REQUIRED = {c for c, canon in VMSTAT_COLUMNS.items() if canon}

NETSTAT_COUNTERS = {
    ("Tcp", "segments received"): "tcp_segments_in",
    ("Tcp", "segments sent out"): "tcp_segments_out",
    ("Tcp", "segments retransmitted"): "tcp_retransmits",
    ("Tcp", "segments retransmited"): "tcp_retransmits",  # net-tools typo
    ("Udp", "packets received"): "udp_in",
    ("Udp", "packets sent"): "udp_out",
    ("Udp", "packet receive errors"): "udp_errors",
}


def _parse_ts_marker(line: str, line_no: int) -> float:
    try:
        return float(line.split(None, 1)[1])
    except (IndexError, ValueError):
        raise ParseError("malformed #ts marker", line_no) from None


def parse_vmstat(text: str, interval: float = 2.0,
                 start_time: float = 0.0) -> list[ToolRecord]:
    """One record per data row; repeated headers are tolerated.

    The column order is taken from the header line, never assumed. With
    ``vmstat -t`` output, the trailing date and time become the record
    timestamp (seconds since the epoch, read as UTC).
    """
    records: list[ToolRecord] = []
    columns: list[str] | None = None
    has_ts_column = False
    next_ts: float | None = None
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("procs "):
            continue
        if line.startswith("#ts"):
            next_ts = _parse_ts_marker(line, line_no)
            continue
        tokens = line.split()
        if tokens[0] in VMSTAT_COLUMNS and not _is_number(tokens[0]):
            header = [t for t in tokens if t not in ("UTC",) and ":" not in t]
            has_ts_column = any(t in ("UTC",) for t in tokens) or "timestamp" in raw
            unknown = [t for t in header if t not in VMSTAT_COLUMNS]
            missing = _VMSTAT_REQUIRED - set(header)
            if unknown or missing:
                raise SchemaError(
                    f"line {line_no}: unknown vmstat header layout "
                    f"(unknown={unknown}, missing={sorted(missing)})")
            columns = header
            continue
        if columns is None:
            raise SchemaError(f"line {line_no}: vmstat data before header")
        ts_extra = 2 if has_ts_column else 0
        if len(tokens) != len(columns) + ts_extra:
            raise ParseError(
                f"expected {len(columns) + ts_extra} fields, got {len(tokens)}",
                line_no)
        values = {}
        for col, tok in zip(columns, tokens):
            try:
                val = float(tok)
            except ValueError:
                raise ParseError(
                    f"non-numeric value '{tok}' in column '{col}'", line_no) from None
            values[VMSTAT_COLUMNS[col] or col] = val
        if has_ts_column:
            try:
                stamp = datetime.fromisoformat(" ".join(tokens[-2:]))
                ts = stamp.replace(tzinfo=timezone.utc).timestamp()
            except ValueError:
                raise ParseError(
                    f"bad timestamp '{' '.join(tokens[-2:])}'", line_no) from None
        elif next_ts is not None:
            ts, next_ts = next_ts, None
        else:
            ts = start_time + len(records) * interval
        records.append(ToolRecord(tool="vmstat", timestamp=ts, values=values))
    return records


def parse_iostat(text: str, interval: float = 2.0,
                 start_time: float = 0.0) -> list[ToolRecord]:
    """One record per report block (an avg-cpu section plus device rows).

    Device throughput columns (tps, kB_read/s, kB_wrtn/s) are summed over
    devices; the cpu section is kept under iostat-prefixed names. Note that
    iostat's first report covers the time since boot.
    """
    records: list[ToolRecord] = []
    cpu_fields: list[str] | None = None
    dev_fields: list[str] | None = None
    state = None
    current: dict[str, float] | None = None
    next_ts: float | None = None
    pending_ts: float | None = None

    def flush():
        nonlocal current
        if current is not None:
            ts = (pending_ts if pending_ts is not None
                  else start_time + len(records) * interval)
            records.append(ToolRecord(tool="iostat", timestamp=ts, values=current))
        current = None

    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            state = None
            continue
        if line.startswith("#ts"):
            next_ts = _parse_ts_marker(line, line_no)
            continue
        if line.startswith("Linux "):
            continue
        if line.startswith("avg-cpu"):
            flush()
            pending_ts, next_ts = next_ts, None
            cpu_fields = ["cpu_" + f.lstrip("%").lower() for f in line.split()[1:]]
            current = {}
            state = "cpu"
            continue
        if line.startswith("Device"):
            dev_fields = line.replace("Device:", "Device").split()[1:]
            if not {"tps", "kB_read/s", "kB_wrtn/s"} <= set(dev_fields):
                raise SchemaError(
                    f"line {line_no}: iostat device header lacks kB columns")
            state = "device"
            if current is None:
                current = {}
                pending_ts, next_ts = next_ts, None
            continue
        tokens = line.split()
        if state == "cpu":
            if cpu_fields is None or len(tokens) != len(cpu_fields):
                raise ParseError("avg-cpu row width mismatch", line_no)
            for name, tok in zip(cpu_fields, tokens):
                try:
                    current["iostat_" + name] = float(tok)
                except ValueError:
                    raise ParseError(
                        f"non-numeric value '{tok}' in avg-cpu", line_no) from None
            state = None
            continue
        if state == "device":
            if dev_fields is None or len(tokens) != len(dev_fields) + 1:
                raise ParseError("device row width mismatch", line_no)
            row = {}
            for name, tok in zip(dev_fields, tokens[1:]):
                try:
                    row[name] = float(tok)
                except ValueError:
                    raise ParseError(
                        f"non-numeric value '{tok}' for device "
                        f"'{tokens[0]}'", line_no) from None
            current["tps"] = current.get("tps", 0.0) + row["tps"]
            current["kb_read_per_s"] = (current.get("kb_read_per_s", 0.0)
                                        + row["kB_read/s"])
            current["kb_wrtn_per_s"] = (current.get("kb_wrtn_per_s", 0.0)
                                        + row["kB_wrtn/s"])
            continue
        raise ParseError(f"unrecognized iostat line '{line}'", line_no)
    flush()
    return records


def parse_netstat(text: str, interval: float = 6.0,
                  start_time: float = 0.0) -> list[ToolRecord]:
    """Parse one or more ``netstat -s`` snapshots into records.

    With two or more snapshots, cumulative counters are differenced into
    per-second rates; each rate record carries the midpoint of its
    snapshot interval as the timestamp. A single snapshot yields one
    non-rate record holding the raw counters under *_total names.
    """
    snapshots: list[tuple[float | None, dict[str, float]]] = []
    section = None
    counters: dict[str, float] | None = None
    seen_sections: set[str] = set()
    next_ts: float | None = None
    snap_ts: float | None = None

    def open_snapshot():
        nonlocal counters, seen_sections, snap_ts, next_ts
        if counters is not None:
            snapshots.append((snap_ts, counters))
        counters = {}
        seen_sections = set()
        snap_ts, next_ts = next_ts, None

    for line_no, raw in enumerate(text.splitlines(), start=1):
        if not raw.strip():
            continue
        if raw.lstrip().startswith("#ts"):
            next_ts = _parse_ts_marker(raw.strip(), line_no)
            continue
        if not raw.startswith((" ", "\t")):
            name = raw.strip().rstrip(":")
            if name in seen_sections or counters is None:
                open_snapshot()
            section = name
            seen_sections.add(name)
            continue
        if counters is None or section is None:
            raise ParseError("netstat counter line before any section", line_no)
        line = raw.strip()
        parts = line.split(None, 1)
        if len(parts) == 2 and _is_number(parts[0]):
            key = (section, parts[1].strip().lower())
            canon = NETSTAT_COUNTERS.get(key)
            if canon:
                counters[canon + "_total"] = float(parts[0])
        # "Name: value" lines and unrecognized counters are skipped
    if counters is not None:
        snapshots.append((snap_ts, counters))

    if not snapshots:
        return []
    required = {f + "_total" for f in features_for_tool("netstat")}
    for idx, (_, counts) in enumerate(snapshots):
        missing = required - set(counts)
        if missing:
            raise SchemaError(
                f"netstat snapshot {idx + 1} lacks counters: {sorted(missing)}")
    stamps = [(ts if ts is not None else start_time + i * interval)
              for i, (ts, _) in enumerate(snapshots)]
    if len(snapshots) == 1:
        return [ToolRecord(tool="netstat", timestamp=stamps[0],
                           values=snapshots[0][1], is_rate=False)]
    records = []
    for i in range(1, len(snapshots)):
        dt = stamps[i] - stamps[i - 1]
        if dt <= 0:
            raise ParseError(f"netstat snapshots {i} and {i + 1} are not "
                             "in increasing time order")
        values = {}
        for name in required:
            delta = snapshots[i][1][name] - snapshots[i - 1][1][name]
            if delta < 0:
                raise ParseError(
                    f"counter '{name[:-6]}' decreased between snapshots "
                    f"{i} and {i + 1}")
            values[name[:-6]] = delta / dt
        records.append(ToolRecord(tool="netstat",
                                  timestamp=0.5 * (stamps[i - 1] + stamps[i]),
                                  values=values))
    return records


def _is_number(token: str) -> bool:
    try:
        float(token)
        return True
    except ValueError:
        return False


def assemble_frames(records_by_tool: dict[str, list[ToolRecord]],
                    frame_duration: float) -> tuple[list[KpiFrame], int]:
    """Bucket tool records into frame windows and build KPI vectors.

    Records of one tool inside a window are averaged per feature; windows
    missing any tool's contribution (or any schema feature) are dropped.
    Returns (frames, dropped_window_count); raises if nothing usable
    remains.
    """
    if frame_duration <= 0:
        raise DomainError("frame_duration must be > 0")
    needed = {tool: features_for_tool(tool) for tool in ("vmstat", "iostat", "netstat")}
    usable = {tool: [r for r in records_by_tool.get(tool, []) if r.is_rate]
              for tool in needed}
    all_ts = [r.timestamp for recs in usable.values() for r in recs]
    if not all_ts:
        raise DomainError("no usable tool records to assemble")
    t0 = min(all_ts)
    n_windows = int((max(all_ts) - t0) // frame_duration) + 1

    per_window: dict[int, dict[str, list[ToolRecord]]] = {}
    for tool, recs in usable.items():
        for rec in recs:
            w = int((rec.timestamp - t0) // frame_duration)
            per_window.setdefault(w, {}).setdefault(tool, []).append(rec)

    frames: list[KpiFrame] = []
    dropped = 0
    for w in range(n_windows):
        buckets = per_window.get(w, {})
        vec = np.zeros(len(FEATURE_INDEX))
        ok = True
        for tool, feat_names in needed.items():
            recs = buckets.get(tool)
            if not recs:
                ok = False
                break
            for name in feat_names:
                vals = [r.values[name] for r in recs if name in r.values]
                if not vals:
                    ok = False
                    break
                vec[FEATURE_INDEX[name]] = float(np.mean(vals))
            if not ok:
                break
        if not ok:
            dropped += 1
            continue
        frames.append(KpiFrame(frame_start=t0 + w * frame_duration,
                               frame_duration=frame_duration, features=vec))
    if not frames:
        raise DomainError(
            f"zero usable frames ({dropped} windows dropped for missing data)")
    return frames, dropped


def read_rtt_csv(path) -> np.ndarray:
    """Client-side RTT samples from a plain ``timestamp,rtt_ms`` CSV.

    Returns a (n, 2) array sorted by timestamp. A header row is optional.
    """
    rows = []
    with open(path) as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 2:
                raise ParseError("expected 'timestamp,rtt_ms'", line_no)
            if line_no == 1 and not _is_number(parts[0]):
                continue  # header
            try:
                ts, rtt = float(parts[0]), float(parts[1])
            except ValueError:
                raise ParseError(f"non-numeric RTT row '{line}'", line_no) from None
            if rtt <= 0:
                raise ParseError("rtt must be positive", line_no)
            rows.append((ts, rtt))
    if not rows:
        raise DomainError("RTT file has no samples")
    arr = np.array(rows)
    return arr[np.argsort(arr[:, 0], kind="stable")]
