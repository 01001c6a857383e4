import io
import math
from pathlib import Path

import pytest
from hypothesis import given
from hypothesis import strategies as st

from bellcert.bell_stats import TrialRecord
from bellcert.certify import CertificationConfig, certify
from bellcert.exceptions import DomainError, MissingHeraldTimeError, ParseError
from bellcert.ingest import (
    Dataset,
    PreselectionWindow,
    dataset_hash,
    dumps_dataset,
    filter_window,
    load_dataset,
    save_dataset,
    sweep_windows,
    write_sweep_csv,
)
from bellcert.simulate import SettingsSource, make_strategy, run_experiment

from conftest import make_records

DATA = Path(__file__).parent / "data"

bits = st.integers(0, 1)
times = st.one_of(st.none(), st.floats(0.0, 2000.0))
record_rows = st.lists(st.tuples(bits, bits, bits, bits, times,
                                 st.sampled_from([None, "psi_plus", "psi_minus"])),
                       max_size=40)
windows = st.tuples(st.floats(0.0, 1500.0), st.floats(1.0, 800.0)).map(
    lambda p: PreselectionWindow(p[0], p[0] + p[1]))


def build(rows):
    return [TrialRecord(3 * i + 1, x, y, a, b, herald_time=t, herald_state=s)
            for i, (x, y, a, b, t, s) in enumerate(rows)]


def timed(data):
    return [r for r in build(data) if r.herald_time is not None] or [TrialRecord(0, 0, 0, 0, 0, 1.0)]


class TestLoad:
    def test_csv_fixture(self):
        ds = load_dataset(DATA / "four_rounds.csv")
        assert len(ds) == 4
        assert [r.index for r in ds] == [0, 1, 2, 3]
        assert ds[1] == TrialRecord(1, 0, 1, 1, 1)
        assert ds.metadata["format"] == "csv"
        assert ds.metadata["n_records"] == 4
        assert len(ds.sha256) == 64

    def test_jsonl_with_partial_herald_times(self):
        ds = load_dataset(DATA / "partial_herald.jsonl")
        assert len(ds) == 4
        assert ds.unfilterable == (1, 5)
        assert ds.metadata["n_unfilterable"] == 2
        assert ds[2].herald_state == "psi_minus"
        assert ds[0].herald_time == 751.5

    def test_bad_bit_names_line(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("index,x,y,a,b\n0,0,0,0,0\n1,0,1,2,1\n")
        with pytest.raises(ParseError) as info:
            load_dataset(path)
        assert info.value.line == 3
        assert info.value.column == "a"
        assert "line 3" in str(info.value)

    def test_bad_json_line(self, tmp_path):
        path = tmp_path / "bad.jsonl"
        path.write_text('{"index": 0, "x": 0, "y": 0, "a": 0, "b": 0}\n{"index": 1, "x": \n')
        with pytest.raises(ParseError) as info:
            load_dataset(path)
        assert info.value.line == 2

    @pytest.mark.parametrize("text,line", [
        ("index,x,y,b,a\n0,0,0,0,0\n", 1),
        ("index,x,y,a,b,colour\n0,0,0,0,0,red\n", 1),
        ("index,x,y,a,b\n0,0,0,0\n", 2),
        ("index,x,y,a,b\n1,0,0,0,0\n1,0,0,0,0\n", 3),
        ("index,x,y,a,b,herald_time\n0,0,0,0,0,-5\n", 2),
        ("index,x,y,a,b,herald_state\n0,0,0,0,0,phi\n", 2),
        ("index,x,y,a,b\n-1,0,0,0,0\n", 2),
        ("index,x,y,a,b\n0,0,0,0,1.0\n", 2),
        ("", 1),
    ])
    def test_csv_errors(self, tmp_path, text, line):
        path = tmp_path / "f.csv"
        path.write_text(text)
        with pytest.raises(ParseError) as info:
            load_dataset(path)
        assert info.value.line == line

    def test_jsonl_rejects_unknown_field_and_bool_bits(self, tmp_path):
        path = tmp_path / "f.jsonl"
        path.write_text('{"index": 0, "x": 0, "y": 0, "a": 0, "b": 0, "extra": 1}\n')
        with pytest.raises(ParseError, match="unknown"):
            load_dataset(path)
        path.write_text('{"index": 0, "x": true, "y": 0, "a": 0, "b": 0}\n')
        with pytest.raises(ParseError):
            load_dataset(path)

    def test_format_inference(self, tmp_path):
        path = tmp_path / "log.txt"
        path.write_text("index,x,y,a,b\n0,0,0,0,0\n")
        with pytest.raises(ParseError, match="infer"):
            load_dataset(path)
        assert len(load_dataset(path, "csv")) == 1

    def test_missing_file(self, tmp_path):
        with pytest.raises(ParseError):
            load_dataset(tmp_path / "absent.csv")

    def test_hash_is_format_independent(self, tmp_path):
        records = build([(0, 1, 1, 0, 750.25, "psi_plus"), (1, 1, 0, 0, None, None)])
        save_dataset(records, tmp_path / "d.csv")
        save_dataset(records, tmp_path / "d.jsonl")
        a = load_dataset(tmp_path / "d.csv")
        b = load_dataset(tmp_path / "d.jsonl")
        assert a.sha256 == b.sha256 == dataset_hash(records)
        assert a.metadata["file_sha256"] != b.metadata["file_sha256"]

    def test_loading_does_not_modify_file(self):
        path = DATA / "four_rounds.csv"
        before = path.read_bytes()
        load_dataset(path)
        assert path.read_bytes() == before

    @given(record_rows, st.sampled_from(["csv", "jsonl"]))
    def test_round_trip(self, rows, fmt):
        records = build(rows)
        text = dumps_dataset(records, fmt)
        path = Path(self._tmp) / f"rt.{fmt}"
        path.write_text(text, encoding="utf-8")
        assert list(load_dataset(path).records) == records

    @pytest.fixture(autouse=True)
    def _tmpdir(self, tmp_path):
        self._tmp = tmp_path


class TestDataset:
    def test_order_enforced(self):
        with pytest.raises(DomainError, match="increasing"):
            Dataset((TrialRecord(2, 0, 0, 0, 0), TrialRecord(1, 0, 0, 0, 0)))

    def test_hash_covers_payload(self):
        a = Dataset(tuple(make_records([(0, 0, 0, 0, 700.0)])))
        b = Dataset(tuple(make_records([(0, 0, 0, 0, 700.5)])))
        assert a.sha256 != b.sha256


class TestWindow:
    def test_domain(self):
        with pytest.raises(DomainError):
            PreselectionWindow(800.0, 800.0)
        with pytest.raises(DomainError):
            PreselectionWindow(-1.0, 5.0)
        with pytest.raises(DomainError):
            PreselectionWindow(0.0, math.nan)
        assert PreselectionWindow(10.0, math.inf).contains(1e12)

    def test_inclusive_boundaries(self):
        records = make_records([(0, 0, 0, 0, t) for t in (700.0, 750.0, 800.0, 900.0)])
        kept = filter_window(records, PreselectionWindow(748.0, 895.0))
        assert [r.herald_time for r in kept] == [750.0, 800.0]
        edges = filter_window(records, PreselectionWindow(750.0, 800.0))
        assert [r.herald_time for r in edges] == [750.0, 800.0]
        assert kept.metadata["n_kept"] == 2
        assert kept.metadata["n_total"] == 4
        assert kept.metadata["window"] == {"t_s": 748.0, "t_e": 895.0}

    def test_covering_window_is_identity(self):
        ds = Dataset(tuple(make_records([(0, 1, 0, 1, t) for t in (5.0, 50.0, 500.0)])))
        out = filter_window(ds, PreselectionWindow(0.0, math.inf))
        assert out.records == ds.records
        assert out.sha256 == ds.sha256
        assert out.metadata["parent_sha256"] == ds.sha256

    def test_strict_mode(self):
        ds = load_dataset(DATA / "partial_herald.jsonl")
        with pytest.raises(MissingHeraldTimeError, match="1, 5"):
            filter_window(ds, PreselectionWindow(700.0, 900.0))
        lenient = filter_window(ds, PreselectionWindow(700.0, 900.0), strict=False)
        assert [r.index for r in lenient] == [0, 2]

    def test_predicate_ignores_outcomes(self):
        base = make_records([(0, 0, 0, 0, 760.0), (1, 1, 1, 1, 600.0)])
        flipped = make_records([(1, 1, 1, 0, 760.0), (0, 0, 0, 1, 600.0)])
        w = PreselectionWindow(700.0, 800.0)
        assert [r.index for r in filter_window(base, w)] == [r.index for r in filter_window(flipped, w)]

    @given(record_rows, windows)
    def test_idempotent_and_subsequence(self, rows, window):
        records = timed(rows)
        once = filter_window(records, window)
        assert filter_window(once, window).records == once.records
        it = iter(records)
        assert all(any(r == s for s in it) for r in once.records)
        assert all(window.contains(r.herald_time) for r in once)

    @given(record_rows, windows, windows)
    def test_composition_is_intersection(self, rows, w1, w2):
        records = timed(rows)
        twice = filter_window(filter_window(records, w1), w2)
        other = filter_window(filter_window(records, w2), w1)
        assert twice.records == other.records
        both = w1.intersect(w2)
        if both is None:
            # Windows that only touch share their single boundary point.
            touch = max(w1.t_s, w2.t_s)
            assert all(r.herald_time == touch for r in twice.records)
        else:
            assert filter_window(records, both).records == twice.records


class TestSweep:
    def test_single_covering_point_equals_certify(self):
        records = make_records([(i % 2, (i // 2) % 2, 0, (i % 2) & ((i // 2) % 2), 100.0 + i)
                                for i in range(40)])
        cfg = CertificationConfig(alpha=0.05)
        rows = sweep_windows(records, [0.0], math.inf, cfg)
        cert = certify(records, cfg)
        assert len(rows) == 1
        assert rows[0].n == cert.n == 40
        assert rows[0].s_bar_u == cert.s_bar_u
        assert rows[0].f_hat == {0.05: cert.f_hat}

    @given(record_rows, st.lists(st.floats(0.0, 1999.0), min_size=1, max_size=8))
    def test_counts_match_definition(self, rows, grid):
        records = timed(rows)
        grid = sorted(grid)
        out = sweep_windows(records, grid, 2000.0, CertificationConfig(alpha=0.1))
        for row in out:
            assert row.n == sum(row.t_s <= r.herald_time <= 2000.0 for r in records)
            if row.n == 0:
                assert math.isnan(row.s_bar_u)
        assert all(a.n >= b.n for a, b in zip(out, out[1:]))

    def test_unsorted_grid_rejected(self):
        with pytest.raises(DomainError, match="sorted"):
            sweep_windows(make_records([(0, 0, 0, 0, 1.0)]), [5.0, 1.0], 10.0, CertificationConfig())

    def test_two_regime_rises_then_falls(self):
        strategy = make_strategy("herald_two_regime", early_visibility=0.3, late_visibility=0.95,
                                 cutoff=750.0)
        ledger = run_experiment(strategy, SettingsSource(), 20000, seed=3,
                                herald_range=(700.0, 900.0))
        grid = [700.0, 725.0, 750.0, 800.0, 850.0, 880.0, 893.0]
        rows = sweep_windows(ledger.records, grid, 895.0, CertificationConfig(alpha=0.01))
        f = [r.f_hat[0.01] for r in rows]
        peak = max(range(len(f)), key=f.__getitem__)
        assert 0 < peak < len(f) - 1
        assert f[0] < f[peak] and f[-1] < f[peak]

    def test_csv_header_and_rows(self):
        records = make_records([(0, 0, 0, 0, 10.0), (1, 1, 0, 1, 20.0)])
        alphas = [0.01, 0.001]
        rows = sweep_windows(records, [0.0, 15.0, 30.0], 100.0, CertificationConfig(), alphas)
        buf = io.StringIO()
        write_sweep_csv(rows, alphas, buf)
        lines = buf.getvalue().splitlines()
        assert lines[0] == "t_s,n,s_bar_u,f_hat_0.99,f_hat_0.999"
        assert lines[1].startswith("0.0,2,4.0,")
        assert lines[3] == "30.0,0,nan,nan,nan"
