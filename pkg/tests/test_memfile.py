"""Persistence format: round trips, corruption detection, lint coverage."""

import io
import random
import re

import pytest
from hypothesis import given, settings, strategies as st

from homeostat.memfile import (
    LintReport,
    MemoryFileError,
    lint,
    load,
    render,
    save,
)
from homeostat.memory import append_session, apply_rewrite, empty_store

from helpers import random_store

text_strategy = st.text(
    alphabet=st.characters(blacklist_categories=("Cs",)), min_size=0, max_size=300
)


def clean_file(records=3) -> bytes:
    store = apply_rewrite(empty_store(), "deep layer contents\nsecond line")
    for i in range(records):
        store, _ = append_session(store, f"session {i} content\nwith lines")
    return render(store)


class TestRoundTrip:
    def test_empty_store(self):
        data = render(empty_store())
        reloaded = load(data)
        assert reloaded == empty_store()
        text = data.decode("utf-8")
        assert "===RECENT_CONTEXT cap=8000===\n===END===" in text
        assert lint(data).clean

    def test_record_blocks_match_record_count(self):
        data = clean_file(records=3)
        assert data.decode("utf-8").count("---SESSION ") == 3

    def test_save_writes_to_sink_and_path(self, tmp_path):
        store = load(clean_file())
        sink = io.BytesIO()
        n = save(store, sink)
        assert n == len(sink.getvalue())
        path = str(tmp_path / "m.hsm")
        save(store, path)
        with open(path, "rb") as fh:
            assert fh.read() == sink.getvalue()

    @settings(max_examples=150, deadline=None)
    @given(seed=st.integers(min_value=0, max_value=10**9))
    def test_randomized_stores_round_trip(self, seed):
        store = random_store(random.Random(seed))
        assert load(render(store)) == store

    @settings(max_examples=80, deadline=None)
    @given(deep=text_strategy, session=text_strategy.filter(bool))
    def test_arbitrary_content_round_trips(self, deep, session):
        store = empty_store()
        if deep:
            store = apply_rewrite(store, deep)
        store, _ = append_session(store, session)
        assert load(render(store)) == store

    def test_marker_lookalike_content_round_trips(self):
        store = empty_store()
        nasty = "===END===\n---SESSION id=f ordinal=1 tokens=1 crystallized=0 at=x---\n#CHECKSUM 00000000\n ===END===\n  # deep"
        store, _ = append_session(store, nasty)
        reloaded = load(render(store))
        assert reloaded.recent[0].content == nasty


class TestLoadErrors:
    def test_bom_is_a_hard_error(self):
        data = b"\xef\xbb\xbf" + clean_file()
        with pytest.raises(MemoryFileError) as err:
            load(data)
        assert err.value.code == "ENCODING_BOM"

    def test_flipped_checksum_byte(self):
        data = clean_file()
        flipped = data[:-3] + (b"0" if data[-3:-2] != b"0" else b"1") + data[-2:]
        with pytest.raises(MemoryFileError) as err:
            load(flipped)
        assert err.value.code == "CHECKSUM_MISMATCH"

    def test_corrupted_marker(self):
        data = clean_file().replace(b"===RECENT_CONTEXT", b"===RECENT_CONTEXX", 1)
        with pytest.raises(MemoryFileError) as err:
            load(data)
        # The byte change also breaks the checksum; both are corruption.
        assert err.value.code in ("MARKER_CORRUPT", "MARKER_MISSING",
                                  "CHECKSUM_MISMATCH")

    def test_corrupted_marker_with_recomputed_checksum(self):
        data = _rechecksum(
            clean_file().replace(b"===RECENT_CONTEXT", b"===RECENT_CONTEXX", 1)
        )
        with pytest.raises(MemoryFileError) as err:
            load(data)
        assert err.value.code in ("MARKER_CORRUPT", "MARKER_MISSING")

    def test_token_count_mismatch(self):
        data = clean_file()
        data = _rechecksum(
            re.sub(rb"tokens=(\d+)", b"tokens=9999", data, count=1)
        )
        with pytest.raises(MemoryFileError) as err:
            load(data)
        assert err.value.code == "TOKEN_COUNT_MISMATCH"

    def test_ordinal_disorder(self):
        data = clean_file(records=2)
        data = _rechecksum(data.replace(b"ordinal=2", b"ordinal=1"))
        with pytest.raises(MemoryFileError) as err:
            load(data)
        assert err.value.code == "ORDINAL_ORDER"

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load(str(tmp_path / "absent.hsm"))


def _rechecksum(data: bytes) -> bytes:
    """Recompute the footer over a (possibly corrupted) body."""
    import zlib

    body, _, _ = data.rpartition(b"#CHECKSUM ")
    return body + b"#CHECKSUM " + (
        f"{zlib.crc32(body) & 0xFFFFFFFF:08x}".encode() + b"\n"
    )


class TestLint:
    def test_clean_file_is_clean(self):
        assert lint(clean_file()).clean

    def test_bom_finding(self):
        report = lint(b"\xef\xbb\xbf" + clean_file())
        assert [f.code for f in report.errors] == ["ENCODING_BOM"]
        assert report.findings[0].location == "offset=0"

    def test_marker_corrupt_finding_with_offset(self):
        data = _rechecksum(
            clean_file().replace(b"===RECENT_CONTEXT", b"===RECENT_CONTEXX", 1)
        )
        report = lint(data)
        codes = {f.code for f in report.errors}
        assert "MARKER_CORRUPT" in codes or "MARKER_MISSING" in codes
        corrupt = [f for f in report.findings if f.code == "MARKER_CORRUPT"]
        assert corrupt and corrupt[0].location.startswith("offset=")
        offset = int(corrupt[0].location.split("=")[1])
        assert data[offset:].startswith(b"===RECENT_CONTEXX")

    def test_duplicate_marker_finding(self):
        data = clean_file()
        data = _rechecksum(data.replace(b"===END===", b"===END===\n===END===", 1))
        codes = {f.code for f in lint(data).findings}
        assert "MARKER_DUPLICATE" in codes

    def test_crlf_warning(self):
        data = _rechecksum(clean_file().replace(b"\n", b"\r\n"))
        report = lint(data)
        assert any(f.code == "CRLF_LINE_ENDING" and f.severity == "warning"
                   for f in report.findings)

    def test_checksum_finding(self):
        data = clean_file()
        flipped = data[:-3] + (b"0" if data[-3:-2] != b"0" else b"1") + data[-2:]
        assert any(f.code == "CHECKSUM_MISMATCH" for f in lint(flipped).errors)

    def test_token_mismatch_finding(self):
        data = _rechecksum(re.sub(rb"tokens=(\d+)", b"tokens=9999", clean_file(), count=1))
        assert any(f.code == "TOKEN_COUNT_MISMATCH" for f in lint(data).errors)

    def test_ordinal_finding(self):
        data = _rechecksum(clean_file(2).replace(b"ordinal=2", b"ordinal=1"))
        assert any(f.code == "ORDINAL_ORDER" for f in lint(data).errors)


def _corruptions(data: bytes):
    yield b"\xef\xbb\xbf" + data
    yield data[:-3] + (b"0" if data[-3:-2] != b"0" else b"1") + data[-2:]
    yield _rechecksum(data.replace(b"===RECENT_CONTEXT", b"===RECENT_KONTEXT", 1))
    yield _rechecksum(data.replace(b"===END===\n", b"", 1))
    yield _rechecksum(re.sub(rb"tokens=(\d+)", b"tokens=12345", data, count=1))
    yield _rechecksum(data.replace(b"ordinal=2", b"ordinal=1"))
    yield data.replace(b"#CHECKSUM ", b"#CHEKSUM  ", 1)
    yield data[: len(data) // 2]


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(min_value=0, max_value=10**9))
def test_every_load_error_has_a_lint_finding(seed):
    """Lint completeness: whatever load rejects, lint reports."""
    rng = random.Random(seed)
    store = random_store(rng)
    if len(store.recent) < 2:
        store, _ = append_session(store, "pad one")
        store, _ = append_session(store, "pad two")
    data = render(store)
    for corrupted in _corruptions(data):
        try:
            load(corrupted)
        except MemoryFileError:
            report = lint(corrupted)
            assert report.errors, f"load failed but lint was clean: {corrupted[:120]!r}"
        except Exception:
            report = lint(corrupted)
            assert report.errors
