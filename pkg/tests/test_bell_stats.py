import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from bellcert.bell_stats import (
    CONVENTIONS,
    IDENTITY,
    RelabellingConvention,
    TrialRecord,
    chsh_from_correlators,
    correlator_table,
    effective_chsh,
    mean_win_statistic,
    resolve_convention,
    win_count,
    win_indicator,
)
from bellcert.exceptions import DomainError, EmptyDatasetError

from conftest import make_records

bits = st.integers(0, 1)
rows = st.lists(st.tuples(bits, bits, bits, bits), min_size=1, max_size=60)


class TestTrialRecord:
    @pytest.mark.parametrize("field", ["x", "y", "a", "b"])
    def test_rejects_non_bits(self, field):
        kwargs = dict(index=0, x=0, y=0, a=0, b=0)
        kwargs[field] = 2
        with pytest.raises(DomainError, match=field):
            TrialRecord(**kwargs)

    def test_rejects_float_bits(self):
        with pytest.raises(DomainError):
            TrialRecord(0, 1.0, 0, 0, 0)

    def test_rejects_negative_index_and_time(self):
        with pytest.raises(DomainError):
            TrialRecord(-1, 0, 0, 0, 0)
        with pytest.raises(DomainError):
            TrialRecord(0, 0, 0, 0, 0, herald_time=-3.0)
        with pytest.raises(DomainError):
            TrialRecord(0, 0, 0, 0, 0, herald_time=math.nan)

    def test_herald_state_tag(self):
        assert TrialRecord(0, 0, 0, 0, 0, herald_state="psi_minus").herald_state == "psi_minus"
        with pytest.raises(DomainError):
            TrialRecord(0, 0, 0, 0, 0, herald_state="phi_plus")


class TestWinIndicator:
    @pytest.mark.parametrize("a,b,x,y,expected", [
        (0, 0, 0, 0, 1),
        (0, 1, 1, 1, 1),
        (0, 0, 1, 1, 0),
    ])
    def test_identity_examples(self, a, b, x, y, expected):
        assert win_indicator(TrialRecord(0, x, y, a, b), IDENTITY) == expected

    def test_identity_is_chsh_rule(self, all_16_records):
        for r in all_16_records:
            assert win_indicator(r) == int((r.a ^ r.b) == (r.x & r.y))

    @pytest.mark.parametrize("conv", CONVENTIONS)
    def test_matches_signed_form(self, conv, all_16_records):
        # A round wins when (-1)^(a+b) agrees with the sign of E_xy in the expression.
        for r in all_16_records:
            parity = 1 if r.a == r.b else -1
            assert win_indicator(r, conv) == int(parity == conv.coefficient(r.x, r.y))

    @pytest.mark.parametrize("conv", CONVENTIONS)
    def test_vectorised_count_matches_scalar(self, conv, all_16_records):
        wins, n = win_count(all_16_records, conv)
        assert n == 16
        assert wins == sum(win_indicator(r, conv) for r in all_16_records)


class TestConventions:
    def test_eight_distinct_sign_forms(self):
        forms = {(c.sign_vector, c.global_sign) for c in CONVENTIONS}
        assert len(forms) == 8
        for c in CONVENTIONS:
            assert sorted(c.sign_vector) == [-1, 1, 1, 1]

    def test_identity_is_textbook_form(self):
        assert IDENTITY.sign_vector == (1, 1, 1, -1)
        assert IDENTITY.global_sign == 1

    @pytest.mark.parametrize("conv", CONVENTIONS)
    def test_id_round_trips_through_signs(self, conv):
        assert RelabellingConvention.from_signs(conv.sign_vector, conv.global_sign) == conv

    @pytest.mark.parametrize("bad", [-1, 8, True, 2.0])
    def test_rejects_bad_ids(self, bad):
        with pytest.raises(DomainError):
            RelabellingConvention(bad)

    def test_from_signs_requires_one_minus(self):
        with pytest.raises(DomainError):
            RelabellingConvention.from_signs((1, 1, 1, 1), 1)
        with pytest.raises(DomainError):
            RelabellingConvention.from_signs((1, -1, 1, -1), 1)
        with pytest.raises(DomainError):
            RelabellingConvention.from_signs((1, 1, 1, -1), 0)

    @given(rows)
    def test_apply_twice_with_inverse_is_identity(self, data):
        records = make_records(data)
        for conv in CONVENTIONS:
            back = [conv.inverse().apply(conv.apply(r)) for r in records]
            assert back == records

    @given(rows)
    def test_values_closed_under_global_flip(self, data):
        records = make_records(data)
        values = sorted(effective_chsh(records, c) for c in CONVENTIONS)
        flipped = sorted(-v for v in values)
        assert values == pytest.approx(flipped, abs=1e-12)

    @given(rows)
    def test_global_flip_negates(self, data):
        records = make_records(data)
        for k in range(4):
            s_plus = effective_chsh(records, 2 * k)
            s_minus = effective_chsh(records, 2 * k + 1)
            assert s_plus == pytest.approx(-s_minus, abs=1e-12)

    def test_per_state_mapping(self):
        r_plus = TrialRecord(0, 1, 1, 0, 0, herald_state="psi_plus")
        r_minus = TrialRecord(1, 1, 1, 0, 0, herald_state="psi_minus")
        mapping = {"psi_plus": 0, "psi_minus": 1}
        assert resolve_convention(mapping, r_plus) == IDENTITY
        assert win_indicator(r_plus, mapping) == 0
        assert win_indicator(r_minus, mapping) == 1
        assert win_count([r_plus, r_minus], mapping) == (1, 2)

    def test_per_state_mapping_needs_tags(self):
        with pytest.raises(DomainError, match="herald_state"):
            win_indicator(TrialRecord(0, 0, 0, 0, 0), {"psi_plus": 0})
        with pytest.raises(DomainError, match="psi_minus"):
            win_indicator(TrialRecord(0, 0, 0, 0, 0, herald_state="psi_minus"), {"psi_plus": 0})


class TestWinStatistic:
    def test_all_winning(self):
        records = make_records([(0, 0, 0, 0), (1, 1, 0, 1), (0, 1, 1, 1)])
        assert mean_win_statistic(records) == (1.0, 3)
        assert effective_chsh(records) == 4.0

    def test_none_winning(self):
        records = make_records([(1, 1, 0, 0), (0, 0, 0, 1)])
        assert effective_chsh(records) == -4.0

    def test_three_of_four(self):
        records = make_records([(0, 0, 0, 0), (0, 1, 0, 0), (1, 0, 0, 0), (1, 1, 0, 0)])
        assert mean_win_statistic(records) == (0.75, 3)

    def test_half_gives_zero(self, all_16_records):
        assert mean_win_statistic(all_16_records)[0] == 0.5
        assert effective_chsh(all_16_records) == 0.0

    def test_tsirelson_rate(self):
        # T = (2 + sqrt 2) / 4 maps to 2 sqrt 2 through S = 8 T - 4.
        t = (2 + math.sqrt(2)) / 4
        assert 8 * t - 4 == pytest.approx(2 * math.sqrt(2), abs=1e-15)

    def test_local_deterministic_large_sample(self):
        rng = np.random.default_rng(7)
        xs, ys = rng.integers(0, 2, 20000), rng.integers(0, 2, 20000)
        records = [TrialRecord(i, int(x), int(y), 0, 0) for i, (x, y) in enumerate(zip(xs, ys))]
        t, _ = mean_win_statistic(records)
        assert t == pytest.approx(0.75, abs=4 * math.sqrt(0.75 * 0.25 / 20000))

    def test_empty(self):
        with pytest.raises(EmptyDatasetError):
            mean_win_statistic([])
        with pytest.raises(EmptyDatasetError):
            effective_chsh([])

    @given(rows, st.integers(0, 7))
    def test_consistency_and_range(self, data, conv):
        records = make_records(data)
        t, wins = mean_win_statistic(records, conv)
        assert 0.0 <= t <= 1.0
        assert wins == t * len(records)
        s = effective_chsh(records, conv)
        assert s == 8.0 * t - 4.0
        assert -4.0 <= s <= 4.0


class TestCorrelators:
    def test_all_zero_for_uniform_events(self, all_16_records):
        table = correlator_table(all_16_records)
        assert np.array_equal(table.E, np.zeros((2, 2)))
        assert table.n == 16
        assert table.counts.tolist() == [[4, 4], [4, 4]]

    def test_perfect_and_balanced_cells(self):
        records = make_records([(0, 0, 0, 0), (0, 0, 1, 1), (0, 1, 0, 1), (0, 1, 0, 0),
                                (1, 0, 1, 1), (1, 1, 0, 1)])
        table = correlator_table(records)
        assert table.E[0, 0] == 1.0
        assert table.E[0, 1] == 0.0
        assert table.as_dict()["E11"] == -1.0

    def test_missing_cells_listed(self):
        with pytest.raises(DomainError, match=r"\(0,1\).*\(1,1\)"):
            correlator_table(make_records([(0, 0, 0, 0), (1, 0, 0, 0)]))

    @pytest.mark.parametrize("E,expected", [((1, 1, 1, -1), 4.0), ((1, 1, 1, 1), 2.0)])
    def test_chsh_examples(self, E, expected):
        from bellcert.bell_stats import CorrelatorTable
        table = CorrelatorTable(E=np.array(E, dtype=float).reshape(2, 2), counts=np.ones((2, 2)))
        assert chsh_from_correlators(table, IDENTITY) == expected

    @given(st.lists(st.tuples(bits, bits), min_size=4, max_size=4), st.integers(1, 6), st.integers(0, 7))
    def test_equal_cell_counts_match_effective_chsh(self, outcome_seeds, m, conv):
        # Build m events per cell with varied outcomes, identical cell counts.
        data = []
        for cell, (x, y) in enumerate(itertools.product((0, 1), repeat=2)):
            a0, b0 = outcome_seeds[cell]
            for j in range(m):
                data.append((x, y, a0 ^ (j % 2 if j < m - 1 else 0), b0 ^ (j % 3 == 1)))
        records = make_records(data)
        s_corr = chsh_from_correlators(correlator_table(records), conv)
        s_eff = effective_chsh(records, conv)
        # Uniform-settings identity: S = 8 * T - 4 when every cell carries n / 4 events.
        assert s_corr == pytest.approx(s_eff, abs=1e-12)

    @given(rows)
    def test_correlators_in_range(self, data):
        records = make_records(data)
        try:
            table = correlator_table(records)
        except DomainError:
            return
        assert np.all(np.abs(table.E) <= 1.0)
        assert table.n == len(records)
