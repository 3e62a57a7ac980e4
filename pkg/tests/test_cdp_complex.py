"""Tests for ordered partitions, partition triples and the CDP differential."""

import pytest
from hypothesis import given, settings, strategies as st

from gridob import chain_engine as ce
from gridob.cdp_complex import (
    EMPTY, CdpComplex, OrderedPartition, Window, boundary_cdp_f2, boundary_cdp_z,
    case_label, census, enumerate_cdp, make_triple, partition_moves, plain, single,
    triple_from_text, triple_to_text,
)
from gridob.errors import SignCoverageError
from gridob.grid_core import constant, identity_generator, rectangles_from
from gridob.sign_assign import extend_sign_cdp


def P(*parts):
    return OrderedPartition(tuple(parts))


partitions = st.lists(st.integers(min_value=1, max_value=4), max_size=5).map(lambda p: P(*p))


class TestOrderedPartition:
    """Moves and cut vectors."""

    def test_unit_enlargements(self):
        assert partition_moves(P(2))["UE"] == [P(1, 2), P(2, 1)]
        assert partition_moves(EMPTY)["UE"] == [P(1)]

    def test_coarsening_and_reductions(self):
        moves = partition_moves(P(2, 3))
        assert moves["EC"] == [P(5)]
        assert moves["IR"] == [P(3)]
        assert moves["FR"] == [P(2)]
        assert partition_moves(P(1, 2))["EC"] == [P(3)]

    def test_empty_partition_has_no_reductions(self):
        moves = partition_moves(EMPTY)
        assert moves["IR"] == [] and moves["FR"] == [] and moves["EC"] == []

    def test_epsilon(self):
        assert P(1, 2).epsilon() == (1, 0)
        assert P(3).epsilon() == (0, 0)
        assert OrderedPartition.from_epsilon(3, (1, 1)) == P(1, 1, 1)
        assert OrderedPartition.from_epsilon(0, ()) == EMPTY

    def test_parts_must_be_positive(self):
        with pytest.raises(ValueError):
            P(0)
        with pytest.raises(ValueError):
            OrderedPartition.from_epsilon(3, (1,))

    @given(partitions)
    def test_epsilon_bijection(self, lam):
        assert OrderedPartition.from_epsilon(lam.N, lam.epsilon()) == lam
        assert len(lam.epsilon()) == max(lam.N - 1, 0)

    @given(partitions)
    def test_moves_change_length_and_size(self, lam):
        moves = partition_moves(lam)
        assert all(len(p) == len(lam) + 1 and p.N == lam.N + 1 for p in moves["UE"])
        assert all(len(p) == len(lam) - 1 and p.N == lam.N for p in moves["EC"])
        assert all(len(p) == len(lam) - 1 for p in moves["IR"] + moves["FR"])


class TestTriples:
    """Grading and the text format."""

    def test_grading(self):
        x = (0, 1, 2)
        t = make_triple(constant(x), [P(1, 2), EMPTY, P(1)])
        assert t.nvec == (3, 0, 1)
        assert t.grading == 3
        assert plain(constant(x)).grading == 0

    def test_wrong_partition_count(self):
        with pytest.raises(ValueError):
            make_triple(constant((0, 1, 2)), [EMPTY])

    def test_window(self):
        w = Window(K=2, Nmax=2)
        x = (0, 1)
        assert w.contains(single(constant(x), 0, [2]))
        assert not w.contains(single(constant(x), 0, [3]))
        assert not w.contains(single(constant(x), 0, [1, 1, 1]))
        with pytest.raises(ValueError):
            Window(K=-1)

    def test_text_roundtrip(self, grid3):
        r = rectangles_from(grid3, identity_generator(3))[0]
        t = make_triple(r, [P(1, 2), EMPTY, P(3)])
        assert triple_from_text(triple_to_text(t)) == t

    def test_case_labels(self, grid2):
        x = (0, 1)
        r = rectangles_from(grid2, x)[0]
        assert case_label(plain(r)) == "R|"
        assert case_label(make_triple(constant(x), [P(1), P(1)])) == "c|1,1"
        assert case_label(single(constant(x), 1, [1, 1])) == "c|2"


class TestBoundary:
    """The CDP differential over F2 and Z."""

    def test_single_part_partition_is_a_cycle(self, grid3, signs3):
        s = extend_sign_cdp(signs3, (1, 1, 0))
        for N in range(1, 4):
            t = single(constant((0, 1, 2)), 1, [N])
            assert boundary_cdp_f2(grid3, t) == {}
            assert boundary_cdp_z(grid3, t, s) == {}

    def test_rectangle_boundary(self, grid3):
        r = rectangles_from(grid3, identity_generator(3))[0]
        t = single(r, 0, [2])
        # both reductions give (R, 0, 0) and cancel
        assert boundary_cdp_f2(grid3, t) == {
            single(constant(r.source), 0, [2]): 1, single(constant(r.target), 0, [2]): 1}

    def test_two_part_boundary(self, grid2):
        x = (0, 1)
        t = single(constant(x), 0, [1, 1])
        # coarsening gives (2); both reductions give (1) and cancel
        assert boundary_cdp_f2(grid2, t) == {single(constant(x), 0, [2]): 1}

    def test_signed_boundary_needs_all_parameters(self, grid3, signs3):
        t = single(constant((0, 1, 2)), 0, [1])
        with pytest.raises(SignCoverageError):
            boundary_cdp_z(grid3, t, extend_sign_cdp(signs3, (1,)))


class TestComplex:
    """Enumeration, census and the ∂² sweeps."""

    @pytest.fixture(scope="class")
    def cdp2(self, grid2, cd2):
        return CdpComplex(grid2, Window(K=4, Nmax=3), cd2.levels)

    def test_census_n2(self, grid2, cd2):
        cdp = CdpComplex(grid2, Window(K=2, Nmax=2), cd2.levels)
        counts = census(cdp, gradings=(0, 1))
        assert counts[0] == {"c|": 2}
        assert counts[1] == {"R|": 4, "c|1": 8}

    def test_enumeration_respects_window(self, grid2, cdp2):
        for k, triples in cdp2.levels.items():
            assert all(t.grading == k and cdp2.window.contains(t) for t in triples)
        small = enumerate_cdp(grid2, Window(K=1, Nmax=1))
        assert small[1] == [t for t in cdp2.basis(1) if max(t.nvec) <= 1]

    def test_square_zero_f2(self, cdp2):
        assert cdp2.square_zero_sweep(ce.F2) == []

    @pytest.mark.parametrize("params", [(0, 0), (1, 0), (0, 1), (1, 1)])
    def test_square_zero_z(self, cdp2, signs2, params):
        s = extend_sign_cdp(signs2, params)
        assert cdp2.square_zero_sweep(ce.Z, s) == []
        assert cdp2.compatibility_sweep(s) == []

    @pytest.mark.slow
    def test_square_zero_n3(self, grid3, cd3, signs3):
        cdp = CdpComplex(grid3, Window(K=4, Nmax=2), cd3.levels, threads=2)
        assert cdp.square_zero_sweep(ce.F2) == []
        assert cdp.square_zero_sweep(ce.Z, extend_sign_cdp(signs3, (1, 0, 1))) == []

    @pytest.mark.slow
    @pytest.mark.parametrize("params", [(0, 0, 0), (1, 1, 1)])
    def test_square_zero_z_n3_full_window(self, grid3, cd3, signs3, params):
        cdp = CdpComplex(grid3, Window(K=4, Nmax=3), cd3.levels, threads=2)
        s = extend_sign_cdp(signs3, params, cdp.window.Nmax)
        assert cdp.square_zero_sweep(ce.Z, s) == []
        assert cdp.compatibility_sweep(s) == []

    def test_z_matrices_need_signs(self, cdp2):
        with pytest.raises(ValueError):
            cdp2.to_graded_complex(ce.Z)
