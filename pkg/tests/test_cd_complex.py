"""Tests for the CD_* complex of positive domains."""

import pytest

from gridob import chain_engine as ce
from gridob.cd_complex import CdComplex, boundary_cd_f2, boundary_cd_z, marking_independence_audit
from gridob.grid_core import GridDiagram, constant, identity_generator, level_graph_audit, rectangles_from
from gridob.sign_assign import gauge_normalize, solve_sign_cd


class TestEnumeration:
    """Domains graded by Maslov index."""

    def test_low_counts_at_n2(self, cd2):
        assert len(cd2.basis(0)) == 2
        assert len(cd2.basis(1)) == 4

    def test_levels_have_matching_index(self, cd3):
        for k, domains in cd3.levels.items():
            assert all(d.index == k for d in domains)
            assert len(set(domains)) == len(domains)

    def test_rectangles_are_grading_one(self, grid3, cd3):
        rects = {r for x in cd3.basis(0) for r in rectangles_from(grid3, x.source)}
        assert rects == set(cd3.basis(1))

    def test_negative_cap_rejected(self, grid2):
        with pytest.raises(ValueError):
            CdComplex(grid2, K=-1)


class TestBoundary:
    """Peel boundaries over F2 and Z."""

    def test_rectangle_boundary(self, grid3):
        r = rectangles_from(grid3, identity_generator(3))[0]
        assert boundary_cd_f2(r) == {constant(r.source): 1, constant(r.target): 1}

    def test_constant_boundary_is_zero(self):
        assert boundary_cd_f2(constant((0, 1, 2))) == {}

    def test_signed_rectangle_boundary(self, grid3, signs3):
        r = rectangles_from(grid3, identity_generator(3))[0]
        image = boundary_cd_z(r, signs3)
        assert set(image) == {constant(r.source), constant(r.target)}
        assert sorted(image.values()) == [-1, 1]

    def test_square_zero_over_z(self, cd3, signs3):
        ce.check_square_zero(cd3.to_graded_complex(ce.Z, signs3))

    def test_z_needs_signs(self, cd3):
        with pytest.raises(ValueError):
            cd3.to_graded_complex(ce.Z)


class TestHomology:
    """H_*(CD) is F[U] with U in grading 2."""

    def test_f2_homology_n3(self, cd3):
        report = cd3.homology(ce.F2)
        assert [report.ranks[k] for k in range(4)] == [1, 0, 1, 0]

    def test_z_homology_n3(self, cd3, signs3):
        report = cd3.homology(ce.Z, signs3)
        assert [report.ranks[k] for k in range(4)] == [1, 0, 1, 0]
        assert all(not t for t in report.torsion.values())

    def test_threads_do_not_change_the_basis(self, grid3, cd3):
        threaded = CdComplex(grid3, K=3, threads=4)
        for k in range(4):
            assert threaded.basis(k) == cd3.basis(k)

    @pytest.mark.slow
    def test_random_markings(self):
        audit = marking_independence_audit(3, [0, 1], K=4)
        assert set(audit) == {0, 1}
        for run in audit.values():
            assert run["ranks"] == [1, 0, 1, 0]
            assert run["annulus_cochains"] is True


class TestLevelGraph:
    """Peel graphs of index-3 domains."""

    def test_every_level_vertex_decomposes(self, cd3):
        for e in cd3.basis(3)[:40]:
            audit = level_graph_audit(e)
            assert audit.level2 >= 1 and audit.level1 >= 1
            assert min(audit.down_degrees) >= 1
            assert min(audit.up_degrees) >= 1
            assert audit.boundary_index2_terms >= audit.level2 + audit.level1

    def test_peel_graphs_are_balanced_n3(self, cd3):
        audits = [level_graph_audit(e) for e in cd3.basis(3)]
        assert len(audits) == 162
        assert [a for a in audits if not a.balanced] == []
        assert [a for a in audits if a.boundary_index2_terms % 2] == []


@pytest.mark.slow
class TestFourByFour:
    """∂² and homology of CD_* on the default 4x4 grid."""

    @pytest.fixture(scope="class")
    def grid4(self):
        return GridDiagram.default(4)

    @pytest.fixture(scope="class")
    def cd4(self, grid4):
        return CdComplex(grid4, K=4, threads=4)

    @pytest.fixture(scope="class")
    def signs4(self, grid4, cd4):
        return gauge_normalize(solve_sign_cd(grid4, cd4), grid4)

    def test_square_zero_f2(self, cd4):
        ce.check_square_zero(cd4.to_graded_complex(ce.F2))

    def test_square_zero_z(self, cd4, signs4):
        ce.check_square_zero(cd4.to_graded_complex(ce.Z, signs4))

    def test_f2_homology(self, cd4):
        report = cd4.homology(ce.F2)
        assert [report.ranks[k] for k in range(4)] == [1, 0, 1, 0]

    def test_z_homology(self, cd4, signs4):
        report = cd4.homology(ce.Z, signs4)
        assert [report.ranks[k] for k in range(4)] == [1, 0, 1, 0]
        assert all(not t for t in report.torsion.values())
