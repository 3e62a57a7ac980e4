"""Tests for the U cycle, its lifts and the homology witness suites."""

import pytest

from gridob import chain_engine as ce
from gridob.cd_complex import CdComplex, boundary_cd_f2
from gridob.cdp_complex import CdpComplex, Window, plain, single
from gridob.errors import CompletionError, InfeasibleError
from gridob.grid_core import GridDiagram, constant, format_bracket, identity_generator
from gridob.witnesses import (
    WitnessCochain, a_generator, b_generator, build_U, build_domain_families,
    complete_cycle, enlarge_all, expected_family_size, expected_partners, homology_class_check, lift_U,
    named_rectangle_audit, obstruction_count, obstruction_of_U, rank_bound, run_witness_suite,
    solve_correction,
)


class TestFormulas:
    """Generators and family sizes."""

    def test_annulus_generators(self):
        assert format_bracket(a_generator(6, 1)) == "[623451]"
        assert format_bracket(b_generator(6, 2)) == "[523461]"
        assert a_generator(4, 0) == identity_generator(4)
        assert b_generator(4, 0) == identity_generator(4)

    def test_expected_family_size(self):
        assert expected_family_size(2) == 4
        assert expected_family_size(3) == 9
        assert expected_family_size(4) == 16

    def test_rank_bound(self):
        assert [rank_bound(4, k) for k in range(4)] == [1, 4, 7, 8]
        assert rank_bound(3, 2) == 4
        with pytest.raises(ValueError):
            rank_bound(1, 0)
        with pytest.raises(ValueError):
            rank_bound(3, -1)

    @pytest.mark.parametrize("n", [3, 4])
    def test_families_are_index_two(self, n):
        families = build_domain_families(GridDiagram.default(n))
        assert len(families) == expected_family_size(n)
        assert all(d.index == 2 for d in families.values())


class TestU:
    """The index-2 cycle in CD_*."""

    def test_n3_needs_no_completion(self, grid3):
        u = build_U(grid3)
        assert u.chain == build_U(grid3, complete=True).chain
        assert u.formula_terms == 9
        assert u.completion_terms == 0

    def test_homology_class(self, grid3, cd3):
        u = build_U(grid3, cd3)
        assert homology_class_check(grid3, cd3, u) == {
            "is_cycle": True, "r_of_U": True, "not_boundary": True}
        assert obstruction_of_U(grid3, u) == 0

    def test_n4_families_leave_a_residue(self):
        with pytest.raises(CompletionError) as info:
            build_U(GridDiagram.default(4))
        assert len(info.value.residue) == 8
        assert all(r.index == 1 for r in info.value.residue)

    def test_n4_completed_is_a_cycle(self):
        u = build_U(GridDiagram.default(4), complete=True)
        assert u.formula_terms == 16
        assert u.completion_terms >= 2
        assert not set(u.completion) & set(u.families.values())
        assert ce.boundary_of_chain(boundary_cd_f2, u.chain) == {}

    def test_obstruction_count_on_families(self, grid3):
        g = GridDiagram.default(4)
        assert obstruction_count(g, build_domain_families(g).values()) == 12
        assert obstruction_count(grid3, build_U(grid3).chain) % 2 == 0


class TestNamedRectangles:
    """Where each named rectangle turns up in the boundaries of the families."""

    @pytest.fixture(scope="class")
    def audit4(self):
        return named_rectangle_audit(GridDiagram.default(4))

    def test_every_formula_gives_a_rectangle(self, audit4):
        assert audit4.formula_failures == []

    def test_interior_rectangles_cancel_in_pairs(self, audit4):
        assert audit4.occurrences["R3_2"] == 2
        assert audit4.occurrences["R3_3"] == 2
        assert audit4.partners["R3_2"] == ["B_1", "D_1"]
        assert audit4.partners["R3_3"] == ["B_2", "D_2"]
        assert "R3_2" not in audit4.partner_mismatches

    def test_edge_rectangles_are_reported(self, audit4):
        assert {"R2_3", "R4_3", "R5_1", "R6_1"} <= set(audit4.unpaired)
        assert audit4.partners["R5_1"] == ["E_1"]
        assert audit4.partner_mismatches["R5_1"] == {"expected": ["E_1", "F_1,1"], "found": ["E_1"]}
        assert not audit4.ok

    def test_expected_partners_n4(self):
        pairs = expected_partners(4)
        assert pairs["R1_1"] == ["A_0", "B_0"]
        assert pairs["R3_2"] == ["B_1", "D_1"]
        assert "R4_3" not in pairs
        assert all(len(pair) == 2 for pair in pairs.values())

    def test_lift_is_a_grading_two_cycle(self, grid3):
        u_prime = lift_U(grid3, build_U(grid3))
        assert u_prime.grading == 2
        assert all(t.grading == 2 for t in u_prime.chain)


class TestCompletion:
    """Cancelling a residue by candidate boundaries."""

    BOUNDARY = {"a": {"x": 1, "y": 1}, "b": {"y": 1, "z": 1}}

    def test_completes(self):
        assert complete_cycle({"x": 1, "z": 1}, ["a", "b"], self.BOUNDARY.get) == {"a": 1, "b": 1}

    def test_impossible_residue(self):
        with pytest.raises(CompletionError):
            complete_cycle({"x": 1}, ["a", "b"], self.BOUNDARY.get)


class TestChainHelpers:
    """Enlargement and cocycle algebra."""

    def test_enlarge_all(self):
        c = constant((0, 1))
        assert enlarge_all({plain(c): 1}, 0) == {single(c, 0, [1]): 1}
        assert enlarge_all({single(c, 1, [2]): 1}, 1) == {
            single(c, 1, [1, 2]): 1, single(c, 1, [2, 1]): 1}

    def test_cochain_sum(self):
        a = WitnessCochain("a", 0, lambda t: 1)
        b = WitnessCochain("b", 0, lambda t: 1 if t == "y" else 0)
        total = a + b
        assert total("x") == 1 and total("y") == 0



class TestCorrection:
    """Solving for the correction terms of a raw cochain."""

    EQUATIONS = [("e1", {"a": 1, "b": 1}), ("e2", {"b": 1, "c": 1})]

    @staticmethod
    def raw(key):
        return 1 if key == "c" else 0

    @staticmethod
    def support(key):
        return key if key in ("a", "b") else None

    def test_closes_every_equation(self):
        values = solve_correction("q", self.raw, self.support, self.EQUATIONS)
        assert values == {"a": 1, "b": 1}

    def test_pin_holds_when_compatible(self):
        values = solve_correction("q", self.raw, self.support, self.EQUATIONS, [("z", {"c": 1, "b": 1})])
        assert values == {"a": 1, "b": 1}

    def test_conflicting_pin_is_dropped(self, caplog):
        values = solve_correction("q", self.raw, self.support, self.EQUATIONS, [("z", {"a": 1})])
        assert values == {"a": 1, "b": 1}
        assert "cannot be set to 0" in caplog.text

    def test_unsolvable_without_pins(self):
        with pytest.raises(InfeasibleError):
            solve_correction("q", self.raw, self.support, [("e", {"c": 1})])


class TestWitnessSuite:
    """Cycles, cocycles and identity pairings per grading."""

    def test_low_gradings_n3(self, grid3, cd3):
        cdp = CdpComplex(grid3, Window(K=2, Nmax=2), cd3.levels)
        suite = run_witness_suite(grid3, cd3, cdp, gradings=(0, 1))
        assert suite[0].ok and suite[0].lower_bound == rank_bound(3, 0)
        assert suite[1].ok and suite[1].lower_bound == rank_bound(3, 1)
        assert suite[1].to_json(3)["rank_bound"] == 3

    def test_pairing_without_window_skips_sweeps(self, grid3, cd3):
        suite = run_witness_suite(grid3, cd3, None, gradings=(1,))
        assert suite[1].identity
        assert all(v is None for v in suite[1].violations.values())

    @pytest.mark.slow
    def test_all_gradings_n3(self, grid3, cd3):
        cdp = CdpComplex(grid3, Window(K=4, Nmax=4), cd3.levels, threads=2)
        suite = run_witness_suite(grid3, cd3, cdp)
        for k, ws in suite.items():
            assert ws.ok, ws.to_json(3)
            assert ws.lower_bound == rank_bound(3, k)


    @pytest.mark.slow
    def test_low_gradings_n4(self):
        g = GridDiagram.default(4)
        cd = CdComplex(g, K=3, threads=4)
        cdp = CdpComplex(g, Window(K=3, Nmax=2), cd.levels, threads=4)
        suite = run_witness_suite(g, cd, cdp, gradings=(0, 1, 2))
        for k, ws in suite.items():
            assert ws.ok, ws.to_json(4)
            assert ws.lower_bound == rank_bound(4, k)
        assert [ws.lower_bound for ws in suite.values()] == [1, 4, 7]
