"""Bit-exact persistence format for memory stores, plus a corruption linter.

The format is line-oriented UTF-8 text so a human can read and repair
it, and so encoding-layer corruption (a BOM prepended by a Windows
editor, garbled section markers, CRLF conversion) is detectable instead
of silently propagating through later compression cycles.

Layout:

    #HOMEOSTAT v1 tokenizer=<id> checksum=crc32 profile=<name>
    ===DEEP_MEMORY rev=<n> tokens=<n> at=<iso8601>===
    <deep content lines>
    ===RECENT_CONTEXT cap=<n>===
    ---SESSION id=<uuid> ordinal=<n> tokens=<n> crystallized=<0|1> at=<iso8601>---
    <record content lines>
    ===END===
    #CHECKSUM <8 hex digits>

Rules:
- UTF-8 without byte-order mark; LF line endings only. A BOM is a hard
  load error, not a warning: BOM bytes garble the header marker.
- The checksum is CRC-32 over every byte from the start of the header
  line through the LF that terminates ``===END===``. The footer line
  itself is excluded. The checksum function is named in the header for
  forward compatibility.
- Content lines that could be mistaken for markers (lines beginning
  with ``===``, ``---`` or ``#``, or with spaces followed by one of
  those) are escaped by prefixing a single space on write; readers strip
  one leading space from any content line that matches the escaped
  pattern. This keeps round-trips exact for arbitrary content.
- ``profile=`` in the header and ``at=`` on the deep marker carry store
  fields the minimal marker set cannot; readers accept files without
  them.

load() verifies the checksum and recomputes every token count; lint()
reports all findings without failing, including ones load would accept
(CRLF endings, ordinal disorder in an otherwise well-formed file).
"""

from __future__ import annotations

import re
import zlib
from dataclasses import dataclass
from typing import BinaryIO

from .memory import (
    DeepMemory,
    MemoryStore,
    SessionRecord,
    count_tokens,
    get_tokenizer,
    MemoryStoreError,
)

FORMAT_VERSION = "v1"
BOM = b"\xef\xbb\xbf"

_HEADER_RE = re.compile(
    r"^#HOMEOSTAT v1 tokenizer=(?P<tok>\S+) checksum=crc32(?: profile=(?P<profile>\S+))?$"
)
_DEEP_RE = re.compile(
    r"^===DEEP_MEMORY rev=(?P<rev>\d+) tokens=(?P<tokens>\d+)(?: at=(?P<at>\S+))?===$"
)
_RECENT_RE = re.compile(r"^===RECENT_CONTEXT cap=(?P<cap>\d+)===$")
_END_RE = re.compile(r"^===END===$")
_SESSION_RE = re.compile(
    r"^---SESSION id=(?P<id>\S+) ordinal=(?P<ordinal>\d+) tokens=(?P<tokens>\d+)"
    r" crystallized=(?P<crys>[01]) at=(?P<at>\S+)---$"
)
_CHECKSUM_RE = re.compile(r"^#CHECKSUM (?P<sum>[0-9a-f]{8})$")
_ESCAPED_RE = re.compile(r"^ +(===|---|#)")


class MemoryFileError(MemoryStoreError):
    """Hard load failure: the file cannot be trusted."""

    def __init__(self, code: str, message: str):
        super().__init__(f"{code}: {message}")
        self.code = code


@dataclass(frozen=True)
class LintFinding:
    severity: str  # "error" | "warning"
    code: str
    location: str  # byte offset ("offset=N") or section name
    message: str


@dataclass(frozen=True)
class LintReport:
    findings: tuple[LintFinding, ...]

    @property
    def clean(self) -> bool:
        return not self.findings

    @property
    def errors(self) -> tuple[LintFinding, ...]:
        return tuple(f for f in self.findings if f.severity == "error")


def _crc32(data: bytes) -> str:
    return f"{zlib.crc32(data) & 0xFFFFFFFF:08x}"


def _escape(line: str) -> str:
    if line.startswith(("===", "---", "#")) or _ESCAPED_RE.match(line):
        return " " + line
    return line


def _unescape(line: str) -> str:
    if _ESCAPED_RE.match(line):
        return line[1:]
    return line


def _content_lines(content: str) -> list[str]:
    return [_escape(line) for line in content.split("\n")]


def render(store: MemoryStore) -> bytes:
    """Serialize a store to its canonical byte form."""
    lines: list[str] = []
    lines.append(
        f"#HOMEOSTAT {FORMAT_VERSION} tokenizer={store.tokenizer_id} "
        f"checksum=crc32 profile={store.profile_name}"
    )
    deep = store.deep
    lines.append(
        f"===DEEP_MEMORY rev={deep.revision} tokens={deep.token_count} "
        f"at={deep.last_rewrite_at}==="
    )
    lines.extend(_content_lines(deep.content))
    lines.append(f"===RECENT_CONTEXT cap={store.recent_soft_cap}===")
    for rec in store.recent:
        lines.append(
            f"---SESSION id={rec.session_id} ordinal={rec.ordinal} "
            f"tokens={rec.token_count} crystallized={int(rec.crystallized)} "
            f"at={rec.created_at}---"
        )
        lines.extend(_content_lines(rec.content))
    lines.append("===END===")
    body = ("\n".join(lines) + "\n").encode("utf-8")
    return body + f"#CHECKSUM {_crc32(body)}\n".encode("utf-8")


def save(store: MemoryStore, destination: BinaryIO | str) -> int:
    """Write the store to a binary sink or path; returns bytes written."""
    data = render(store)
    if isinstance(destination, str):
        with open(destination, "wb") as fh:
            fh.write(data)
    else:
        destination.write(data)
    return len(data)


def _read_source(source: BinaryIO | bytes | str) -> bytes:
    if isinstance(source, bytes):
        return source
    if isinstance(source, str):
        with open(source, "rb") as fh:
            return fh.read()
    return source.read()


def load(source: BinaryIO | bytes | str) -> MemoryStore:
    """Parse and verify the persistence format.

    Hard errors: BOM prefix, checksum mismatch, malformed or missing
    boundary markers, token counts that do not match a recount under the
    header's tokenizer, non-increasing ordinals.
    """
    data = _read_source(source)
    if data.startswith(BOM):
        raise MemoryFileError(
            "ENCODING_BOM", "file begins with a UTF-8 byte-order mark"
        )
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise MemoryFileError("ENCODING_INVALID", f"not valid UTF-8: {exc}") from exc

    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    else:
        raise MemoryFileError("TRUNCATED", "file does not end with a newline")
    if len(lines) < 4:
        raise MemoryFileError("TRUNCATED", "file too short for the v1 layout")

    footer = lines[-1]
    m = _CHECKSUM_RE.match(footer)
    if not m:
        raise MemoryFileError("CHECKSUM_MISSING", "no #CHECKSUM footer line")
    body_bytes = text[: len(text) - len(footer) - 1].encode("utf-8")
    actual = _crc32(body_bytes)
    if actual != m.group("sum"):
        raise MemoryFileError(
            "CHECKSUM_MISMATCH",
            f"checksum {m.group('sum')} recorded, {actual} computed",
        )

    header = _HEADER_RE.match(lines[0])
    if not header:
        raise MemoryFileError("MARKER_CORRUPT", f"bad header line: {lines[0]!r}")
    tokenizer = get_tokenizer(header.group("tok"))
    profile_name = header.group("profile") or "default"

    deep_m = _DEEP_RE.match(lines[1])
    if not deep_m:
        raise MemoryFileError(
            "MARKER_CORRUPT", f"bad DEEP_MEMORY marker: {lines[1]!r}"
        )

    # Walk the body: deep content until RECENT_CONTEXT, then records until END.
    idx = 2
    deep_lines: list[str] = []
    recent_m = None
    while idx < len(lines) - 1:
        recent_m = _RECENT_RE.match(lines[idx])
        if recent_m:
            break
        deep_lines.append(_unescape(lines[idx]))
        idx += 1
    if not recent_m:
        raise MemoryFileError("MARKER_MISSING", "no RECENT_CONTEXT marker")
    idx += 1

    records: list[SessionRecord] = []
    current: dict | None = None
    current_lines: list[str] = []
    end_seen = False

    def finish_record() -> None:
        nonlocal current, current_lines
        if current is None:
            return
        records.append(
            SessionRecord(
                session_id=current["id"],
                ordinal=current["ordinal"],
                content="\n".join(current_lines),
                token_count=current["tokens"],
                crystallized=current["crys"],
                created_at=current["at"],
            )
        )
        current, current_lines = None, []

    while idx < len(lines) - 1:
        line = lines[idx]
        if _END_RE.match(line):
            finish_record()
            end_seen = True
            idx += 1
            break
        sess = _SESSION_RE.match(line)
        if sess:
            finish_record()
            current = {
                "id": sess.group("id"),
                "ordinal": int(sess.group("ordinal")),
                "tokens": int(sess.group("tokens")),
                "crys": sess.group("crys") == "1",
                "at": sess.group("at"),
            }
            idx += 1
            continue
        if line.startswith(("===", "---")):
            raise MemoryFileError("MARKER_CORRUPT", f"unrecognized marker: {line!r}")
        if current is None:
            raise MemoryFileError(
                "MARKER_CORRUPT", f"content outside any record: {line!r}"
            )
        current_lines.append(_unescape(line))
        idx += 1

    if not end_seen:
        raise MemoryFileError("MARKER_MISSING", "no END marker")
    if idx != len(lines) - 1:
        raise MemoryFileError("MARKER_CORRUPT", "content after END marker")

    deep_content = "\n".join(deep_lines)
    deep_tokens = int(deep_m.group("tokens"))
    recount = count_tokens(deep_content, tokenizer)
    if recount != deep_tokens:
        raise MemoryFileError(
            "TOKEN_COUNT_MISMATCH",
            f"deep memory records {deep_tokens} tokens, recount is {recount}",
        )
    for rec in records:
        recount = count_tokens(rec.content, tokenizer)
        if recount != rec.token_count:
            raise MemoryFileError(
                "TOKEN_COUNT_MISMATCH",
                f"session {rec.session_id} records {rec.token_count} tokens,"
                f" recount is {recount}",
            )
    ordinals = [r.ordinal for r in records]
    if any(b <= a for a, b in zip(ordinals, ordinals[1:])):
        raise MemoryFileError(
            "ORDINAL_ORDER", f"ordinals not strictly increasing: {ordinals}"
        )

    return MemoryStore(
        deep=DeepMemory(
            content=deep_content,
            token_count=deep_tokens,
            revision=int(deep_m.group("rev")),
            last_rewrite_at=deep_m.group("at") or "1970-01-01T00:00:00+00:00",
        ),
        recent=tuple(records),
        recent_soft_cap=int(recent_m.group("cap")),
        profile_name=profile_name,
        tokenizer_id=tokenizer.id,
    )


# ---------------------------------------------------------------------------
# Lint
# ---------------------------------------------------------------------------

def lint(source: BinaryIO | bytes | str) -> LintReport:
    """Report every detectable defect in a memory file without failing.

    Every hard load error on an input corresponds to at least one error
    finding here; lint additionally reports defects load tolerates.
    """
    data = _read_source(source)
    findings: list[LintFinding] = []

    def add(severity: str, code: str, location: str, message: str) -> None:
        findings.append(LintFinding(severity, code, location, message))

    if data.startswith(BOM):
        add("error", "ENCODING_BOM", "offset=0",
            "file begins with a UTF-8 byte-order mark")
        data = data[len(BOM):]

    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as exc:
        add("error", "ENCODING_INVALID", f"offset={exc.start}",
            "file is not valid UTF-8")
        return LintReport(tuple(findings))

    if "\r" in text:
        offset = text.index("\r")
        add("warning", "CRLF_LINE_ENDING", f"offset={offset}",
            "carriage returns present; the format requires LF endings")

    if not text.endswith("\n"):
        add("error", "TRUNCATED", f"offset={len(data)}",
            "file does not end with a newline")

    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        add("error", "MARKER_MISSING", "header", "empty file")
        return LintReport(tuple(findings))

    # Track byte offsets per line for locations.
    offsets: list[int] = []
    pos = 0
    for line in lines:
        offsets.append(pos)
        pos += len(line.encode("utf-8")) + 1

    # Footer / checksum.
    footer = lines[-1]
    m = _CHECKSUM_RE.match(footer)
    if not m:
        add("error", "CHECKSUM_MISSING", "footer", "no #CHECKSUM footer line")
    else:
        body = text[: len(text) - len(footer) - 1].encode("utf-8")
        actual = _crc32(body)
        if actual != m.group("sum"):
            add("error", "CHECKSUM_MISMATCH", f"offset={offsets[-1]}",
                f"checksum {m.group('sum')} recorded, {actual} computed")

    if not _HEADER_RE.match(lines[0]):
        add("error", "MARKER_CORRUPT", "offset=0",
            f"bad header line: {lines[0]!r}")
        tokenizer = None
    else:
        tok_id = _HEADER_RE.match(lines[0]).group("tok")
        try:
            tokenizer = get_tokenizer(tok_id)
        except MemoryStoreError:
            tokenizer = None
            add("warning", "TOKENIZER_UNKNOWN", "offset=0",
                f"tokenizer {tok_id!r} not registered; counts not verified")

    body_lines = lines[1:-1] if m else lines[1:]
    base_index = 1

    deep_markers: list[int] = []
    recent_markers: list[int] = []
    end_markers: list[int] = []
    sessions: list[tuple[int, re.Match]] = []

    for i, line in enumerate(body_lines):
        index = base_index + i
        if _DEEP_RE.match(line):
            deep_markers.append(index)
        elif _RECENT_RE.match(line):
            recent_markers.append(index)
        elif _END_RE.match(line):
            end_markers.append(index)
        else:
            sess = _SESSION_RE.match(line)
            if sess:
                sessions.append((index, sess))
            elif line.startswith(("===", "---")):
                add("error", "MARKER_CORRUPT", f"offset={offsets[index]}",
                    f"line looks like a marker but parses as none: {line!r}")

    for name, found in (("DEEP_MEMORY", deep_markers),
                        ("RECENT_CONTEXT", recent_markers),
                        ("END", end_markers)):
        if not found:
            add("error", "MARKER_MISSING", name, f"no {name} marker")
        elif len(found) > 1:
            for index in found[1:]:
                add("error", "MARKER_DUPLICATE", f"offset={offsets[index]}",
                    f"duplicate {name} marker")

    # Token recounts and ordinal ordering, only on a structurally sound file.
    structural = not any(
        f.code in ("MARKER_MISSING", "MARKER_DUPLICATE", "MARKER_CORRUPT")
        for f in findings
    )
    if structural and tokenizer is not None and m:
        deep_i, recent_i, end_i = deep_markers[0], recent_markers[0], end_markers[0]
        if deep_i < recent_i < end_i:
            deep_m = _DEEP_RE.match(lines[deep_i])
            deep_content = "\n".join(
                _unescape(l) for l in lines[deep_i + 1:recent_i]
            )
            recount = count_tokens(deep_content, tokenizer)
            if recount != int(deep_m.group("tokens")):
                add("error", "TOKEN_COUNT_MISMATCH", "DEEP_MEMORY",
                    f"marker records {deep_m.group('tokens')} tokens,"
                    f" recount is {recount}")
            in_section = [(i, s) for i, s in sessions if recent_i < i < end_i]
            prev_ordinal = None
            for k, (sess_index, sess) in enumerate(in_section):
                end_bound = (
                    in_section[k + 1][0] if k + 1 < len(in_section) else end_i
                )
                content = "\n".join(
                    _unescape(l) for l in lines[sess_index + 1:end_bound]
                )
                recount = count_tokens(content, tokenizer)
                if recount != int(sess.group("tokens")):
                    add("error", "TOKEN_COUNT_MISMATCH",
                        f"offset={offsets[sess_index]}",
                        f"session {sess.group('id')} records"
                        f" {sess.group('tokens')} tokens, recount is {recount}")
                ordinal = int(sess.group("ordinal"))
                if prev_ordinal is not None and ordinal <= prev_ordinal:
                    add("error", "ORDINAL_ORDER", f"offset={offsets[sess_index]}",
                        f"ordinal {ordinal} follows {prev_ordinal}")
                prev_ordinal = ordinal
        else:
            add("error", "MARKER_CORRUPT", "layout",
                "sections out of order (expected DEEP_MEMORY, RECENT_CONTEXT, END)")

    return LintReport(tuple(findings))
