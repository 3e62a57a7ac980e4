"""Tests for sign assignments: solving, gauge, rule checks and sign files."""

import pytest
from hypothesis import given, settings, strategies as st

from gridob.cd_complex import CdComplex
from gridob.cdp_complex import CdpComplex, Window, single
from gridob.errors import SignCoverageError, WindowError
from gridob.grid_core import all_generators, annulus_of, constant, decompositions
from gridob.sign_assign import (
    SignAssignment, apply_gauge, build_T, dump_sign_file, extend_sign_cdp,
    gauge_normalize, load_sign_file, partition_sign_induction_check,
    solve_f_j, solve_sign_cd, spanning_tree, verify_rules,
)


class TestObstructionCochain:
    """T on index-2 domains."""

    def test_annulus_values(self, grid3, cd3):
        T = build_T(grid3, cd3)
        for d, value in T.items():
            label = annulus_of(grid3, d)
            if label is None:
                assert value == 1
            else:
                assert value == (1 if label.kind == "V" else 0)


class TestSolve:
    """δs = T over CD_2."""

    def test_solution_satisfies_rules(self, grid3, cd3, signs3):
        assert signs3.unique
        assert verify_rules(signs3, grid3, cd=cd3).ok

    def test_n2_solution(self, grid2, cd2, signs2):
        assert len(signs2.values) == 4
        assert verify_rules(signs2, grid2, cd=cd2).ok

    def test_vertical_annulus_has_one_odd_decomposition(self, grid3, cd3, signs3):
        for d in cd3.basis(2):
            label = annulus_of(grid3, d)
            if label is not None and label.kind == "V":
                total = sum(signs3.value(a) ^ signs3.value(b) for a, b in decompositions(d))
                assert total % 2 == 1

    def test_pivot_order_only_changes_gauge(self, grid3, cd3, signs3):
        order = list(reversed(range(len(cd3.basis(1)))))
        other = gauge_normalize(solve_sign_cd(grid3, cd3, pivot_order=order), grid3)
        assert other.values == signs3.values

    def test_needs_grading_two(self, grid2):
        with pytest.raises(WindowError):
            solve_sign_cd(grid2, CdComplex(grid2, K=1))

    def test_f_j_marks_annuli_through_o_j(self, grid3, cd3):
        for j in range(3):
            f = solve_f_j(grid3, cd3, j)
            for d in cd3.basis(2):
                label = annulus_of(grid3, d)
                expected = int(label is not None and label.marking == j)
                total = sum(f.get(a, 0) + f.get(b, 0) for a, b in decompositions(d))
                assert total % 2 == expected


class TestGauge:
    """Gauge transformations s + δg."""

    def test_normalize_is_idempotent(self, grid3, signs3):
        assert gauge_normalize(signs3, grid3).values == signs3.values

    def test_tree_edges_vanish(self, grid3, signs3):
        tree = spanning_tree(grid3)
        assert len(tree) == 6
        assert all(signs3.value(r) == 0 for r in tree.values() if r is not None)

    @given(st.lists(st.integers(min_value=0, max_value=1), min_size=6, max_size=6))
    @settings(max_examples=20)
    def test_gauge_preserves_rules(self, grid3, cd3, signs3, bits):
        g0 = dict(zip(all_generators(3), bits))
        moved = apply_gauge(signs3, g0)
        assert verify_rules(moved, grid3, cd=cd3).ok
        assert gauge_normalize(moved, grid3).values == signs3.values

    def test_flipped_rectangle_is_caught(self, grid3, cd3, signs3):
        values = dict(signs3.values)
        r = cd3.basis(1)[0]
        values[r] ^= 1
        report = verify_rules(SignAssignment(values), grid3, cd=cd3)
        assert not report.ok
        assert report.violations[0].rule in {"square", "vertical-annulus", "horizontal-annulus"}

    def test_missing_rectangle_is_reported(self, grid3, cd3, signs3):
        values = dict(signs3.values)
        r = cd3.basis(1)[0]
        del values[r]
        partial = SignAssignment(values)
        report = verify_rules(partial, grid3, cd=cd3)
        assert [v.rule for v in report.violations] == ["coverage"]
        with pytest.raises(SignCoverageError):
            partial.value(r)


class TestPartitionSigns:
    """CDP extension with the s_j parameters."""

    @pytest.mark.parametrize("params", [(0, 0), (1, 0), (1, 1)])
    def test_cdp_rules(self, grid2, cd2, signs2, params):
        s = extend_sign_cdp(signs2, params)
        assert s.values == signs2.values
        cdp = CdpComplex(grid2, Window(K=2, Nmax=2), cd2.levels)
        assert verify_rules(s, grid2, cdp=cdp).ok
        assert partition_sign_induction_check(s, grid2, 3) == []

    def test_partition_value(self, signs2):
        s = extend_sign_cdp(signs2, (1, 0))
        x = (0, 1)
        assert [s.partition_value(x, 0, N) for N in range(1, 5)] == [1, 0, 1, 0]
        assert s.partition_value(x, 1, 3) == 0
        assert s.triple_value(single(constant(x), 0, [3])) == 1

    def test_tabulated_partition_signs(self, signs2):
        s = extend_sign_cdp(signs2, (1, 0), Nmax=3)
        assert len(s.partitions) == 2 * 2 * 3
        assert s.partitions[((1, 0), 0, 3)] == 1
        assert s.partitions[((1, 0), 1, 3)] == 0

    def test_corrupted_partition_sign_is_caught(self, grid2, signs2):
        s = extend_sign_cdp(signs2, (1, 0), Nmax=3)
        key = ((0, 1), 0, 2)
        partitions = dict(s.partitions)
        partitions[key] ^= 1
        flipped = SignAssignment(s.values, s.s_params, s.provenance, s.unique, partitions)
        assert flipped.partition_value(*key) == 1
        assert partition_sign_induction_check(flipped, grid2, 3) == [key]

    def test_two_part_triple_has_no_sign(self, signs2):
        s = extend_sign_cdp(signs2, (1, 1))
        with pytest.raises(SignCoverageError):
            s.triple_value(single(constant((0, 1)), 0, [1, 1]))


class TestSignFiles:
    """Writing and reading saved assignments."""

    def test_roundtrip(self, tmp_path, grid3, signs3):
        s = extend_sign_cdp(signs3, (1, 0, 1), Nmax=2)
        path = tmp_path / "n3.signs"
        dump_sign_file(s, path)
        loaded = load_sign_file(path, grid3)
        assert loaded.values == s.values
        assert loaded.partitions == s.partitions
        assert loaded.s_params == (1, 0, 1)
        assert loaded.provenance == "loaded"

    def test_bad_line_names_its_number(self, tmp_path):
        path = tmp_path / "bad.signs"
        path.write_text("s_params=00\nnot-hex 1\n")
        with pytest.raises(ValueError, match=":2:"):
            load_sign_file(path)

    def test_incomplete_file(self, tmp_path, grid2):
        path = tmp_path / "empty.signs"
        path.write_text("s_params=00\n")
        with pytest.raises(SignCoverageError):
            load_sign_file(path, grid2)

    def test_wrong_parameter_count(self, tmp_path, grid2, signs2):
        path = tmp_path / "n2.signs"
        dump_sign_file(extend_sign_cdp(signs2, (1, 1, 1)), path)
        with pytest.raises(ValueError):
            load_sign_file(path, grid2)
