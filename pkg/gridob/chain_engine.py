"""Graded chain complexes over F2 and Z with exact homology.

Over F2 matrices are reduced with int bitsets. Over Z, unit pivots are
eliminated sparsely first and the leftover block goes to sympy's Smith
normal form, so arbitrary-precision arithmetic is used throughout.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Hashable, Iterable, List, Optional, Sequence, Tuple

from sympy.polys.domains import ZZ
from sympy.polys.matrices import DomainMatrix
from sympy.polys.matrices.normalforms import smith_normal_form

from .errors import BasisClosureError, ComplexError, InfeasibleError, WindowError
from .logger import get_logger

logger = get_logger(__name__)

F2 = "f2"
Z = "z"
RINGS = (F2, Z)

Chain = Dict[Hashable, int]
BoundaryFn = Callable[[Hashable], Chain]


def sort_key(key: Any):
    """Basis order: canonical bytes when the key provides them."""
    if hasattr(key, "canonical_key"):
        return key.canonical_key()
    return key


def add_into(acc: Chain, vec: Chain, coeff: int = 1, ring: str = F2) -> Chain:
    """acc += coeff * vec, dropping zero coefficients."""
    for key, value in vec.items():
        new = acc.get(key, 0) + coeff * value
        if ring == F2:
            new %= 2
        if new:
            acc[key] = new
        else:
            acc.pop(key, None)
    return acc


def reduce_mod2(vec: Chain) -> Chain:
    return {k: 1 for k, v in vec.items() if v % 2}


def boundary_of_chain(boundary: BoundaryFn, chain: Chain, ring: str = F2) -> Chain:
    out: Chain = {}
    for key, coeff in chain.items():
        add_into(out, boundary(key), coeff, ring)
    return out


def evaluate(cochain: Callable[[Hashable], int], chain: Chain, ring: str = F2) -> int:
    """Pairing <cochain, chain>."""
    total = sum(coeff * cochain(key) for key, coeff in chain.items())
    return total % 2 if ring == F2 else total


# ---------- Linear algebra ----------

def rank_f2(columns: Sequence[Iterable[int]]) -> int:
    """Rank over F2 of a matrix given as columns of row indices."""
    pivots: Dict[int, int] = {}
    rank = 0
    for col in columns:
        v = 0
        for r in col:
            v ^= 1 << r
        while v:
            low = v & -v
            if low in pivots:
                v ^= pivots[low]
            else:
                pivots[low] = v
                rank += 1
                break
    return rank


def in_span_f2(vec: Iterable[int], columns: Sequence[Iterable[int]]) -> bool:
    """Whether a 0/1 vector lies in the F2 span of the columns."""
    base = rank_f2(columns)
    return rank_f2(list(columns) + [list(vec)]) == base


def _unit_eliminate(columns: Sequence[Dict[int, int]]) -> Tuple[int, Dict[int, Dict[int, int]]]:
    """Eliminate +-1 pivots; returns their count and the remaining rows."""
    rows: Dict[int, Dict[int, int]] = {}
    cols: Dict[int, set] = {}
    for c, col in enumerate(columns):
        for r, v in col.items():
            if v:
                rows.setdefault(r, {})[c] = v
                cols.setdefault(c, set()).add(r)

    units = 0
    progress = True
    while progress:
        progress = False
        for c in sorted(cols):
            if c not in cols:
                continue
            candidates = [r for r in cols[c] if abs(rows[r][c]) == 1]
            if not candidates:
                continue
            r = min(candidates, key=lambda rr: (len(rows[rr]), rr))
            v = rows[r][c]
            pivot_row = rows[r]
            for r2 in list(cols[c]):
                if r2 == r:
                    continue
                f = rows[r2][c] * v
                target = rows[r2]
                for cc, vv in pivot_row.items():
                    new = target.get(cc, 0) - f * vv
                    if new:
                        target[cc] = new
                        cols[cc].add(r2)
                    else:
                        target.pop(cc, None)
                        cols[cc].discard(r2)
                if not target:
                    del rows[r2]
            for cc in pivot_row:
                cols[cc].discard(r)
                if not cols[cc]:
                    del cols[cc]
            del rows[r]
            units += 1
            progress = True
    return units, rows


def invariant_factors(columns: Sequence[Dict[int, int]], n_rows: int) -> Tuple[int, List[int]]:
    """(rank over Q, nonunit invariant factors) of an integer matrix."""
    units, rest = _unit_eliminate(columns)
    if not rest:
        return units, []
    row_ids = sorted(rest)
    col_ids = sorted({c for row in rest.values() for c in row})
    dense = [[rest[r].get(c, 0) for c in col_ids] for r in row_ids]
    logger.debug(f"Smith normal form on residual block {len(row_ids)}x{len(col_ids)}")
    snf = smith_normal_form(DomainMatrix([[ZZ(v) for v in row] for row in dense],
                                         (len(row_ids), len(col_ids)), ZZ))
    diag = snf.to_Matrix()
    factors = []
    for i in range(min(len(row_ids), len(col_ids))):
        d = abs(int(diag[i, i]))
        if d:
            factors.append(d)
    rank = units + len(factors)
    return rank, sorted(d for d in factors if d != 1)


# ---------- Graded complexes ----------

@dataclass
class GradedComplex:
    """Bases per grading and sparse differential columns ∂_k: C_k -> C_{k-1}."""
    ring: str
    bases: Dict[int, List[Hashable]]
    columns: Dict[int, List[Dict[int, int]]] = field(default_factory=dict)
    index: Dict[int, Dict[Hashable, int]] = field(default_factory=dict)

    def gradings(self) -> List[int]:
        return sorted(self.bases)

    def dim(self, k: int) -> int:
        return len(self.bases.get(k, []))

    def differential_matrix(self, k: int) -> List[Dict[int, int]]:
        if k not in self.columns:
            raise WindowError(f"Differential ∂_{k} was not assembled")
        return self.columns[k]

    def chain_to_vector(self, chain: Chain, k: int) -> Dict[int, int]:
        idx = self.index[k]
        out = {}
        for key, v in chain.items():
            if key not in idx:
                raise BasisClosureError(f"Key outside grading {k} basis: {key}", key)
            out[idx[key]] = v
        return out


def assemble(bases: Dict[int, Iterable[Hashable]], boundary: BoundaryFn, ring: str = F2,
             filter_outside: bool = False, check_square: bool = True,
             threads: int = 1) -> GradedComplex:
    """
    Build a GradedComplex from per-grading keys and a boundary function.

    Args:
        bases: grading -> keys; sorted by canonical key for a deterministic order
        boundary: key -> sparse chain in the grading below
        ring: F2 or Z
        filter_outside: drop boundary terms outside the basis instead of raising
        check_square: verify ∂_{k-1} ∘ ∂_k = 0 column by column

    Returns:
        The assembled complex
    """
    if ring not in RINGS:
        raise ValueError(f"Unknown ring {ring!r}")
    ordered = {k: sorted(set(keys), key=sort_key) for k, keys in bases.items()}
    complex_ = GradedComplex(ring, ordered)
    for k, keys in ordered.items():
        complex_.index[k] = {key: i for i, key in enumerate(keys)}

    for k in sorted(ordered):
        if k - 1 not in ordered:
            continue
        keys = ordered[k]
        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                images = list(pool.map(boundary, keys))
        else:
            images = [boundary(key) for key in keys]
        lower = complex_.index[k - 1]
        cols = []
        for key, image in zip(keys, images):
            col = {}
            for term, coeff in image.items():
                c = coeff % 2 if ring == F2 else coeff
                if not c:
                    continue
                if term not in lower:
                    if filter_outside:
                        continue
                    logger.error(f"Boundary of {key} leaves the grading-{k - 1} basis at {term}")
                    raise BasisClosureError(f"Boundary term {term} is not in grading {k - 1}", term)
                col[lower[term]] = c
            cols.append(col)
        complex_.columns[k] = cols
        logger.debug(f"Assembled ∂_{k}: {len(keys)} columns into {len(lower)} rows")

    if check_square:
        check_square_zero(complex_)
    return complex_


def check_square_zero(c: GradedComplex) -> None:
    """Raise ComplexError naming the first generator with ∂∂ != 0."""
    for k in sorted(c.columns):
        if k - 1 not in c.columns:
            continue
        lower = c.columns[k - 1]
        for j, col in enumerate(c.columns[k]):
            acc: Dict[int, int] = {}
            for r, v in col.items():
                for rr, vv in lower[r].items():
                    acc[rr] = acc.get(rr, 0) + v * vv
            residue = {c.bases[k - 2][rr]: v for rr, v in acc.items()
                       if (v % 2 if c.ring == F2 else v)}
            if residue:
                witness = c.bases[k][j]
                logger.error(f"∂² != 0 at grading {k} on {witness}")
                raise ComplexError(f"∂² is nonzero on {witness}", witness, residue)


def _require_window(c: GradedComplex, k: int) -> None:
    if k not in c.bases or k + 1 not in c.bases:
        raise WindowError(f"Homology in grading {k} needs gradings {k} and {k + 1} assembled")
    if k > 0 and k not in c.columns:
        raise WindowError(f"Homology in grading {k} needs grading {k - 1} assembled")


def homology_f2(c: GradedComplex, k: int) -> int:
    """dim ker ∂_k - rank ∂_{k+1} over F2."""
    _require_window(c, k)
    rank_k = rank_f2(c.columns[k]) if k in c.columns else 0
    rank_k1 = rank_f2(c.columns[k + 1])
    return c.dim(k) - rank_k - rank_k1


def homology_z(c: GradedComplex, k: int) -> Tuple[int, List[int]]:
    """(free rank, torsion invariant factors) of H_k over Z."""
    if c.ring != Z:
        raise ValueError("homology_z needs a complex assembled over Z")
    _require_window(c, k)
    rank_k = invariant_factors(c.columns[k], c.dim(k - 1))[0] if k in c.columns else 0
    rank_k1, torsion = invariant_factors(c.columns[k + 1], c.dim(k))
    return c.dim(k) - rank_k - rank_k1, torsion


@dataclass
class HomologyReport:
    """Per-grading ranks and torsion."""
    ring: str
    ranks: Dict[int, int]
    torsion: Dict[int, List[int]]

    def to_json(self) -> List[Dict[str, Any]]:
        return [{"grading": k, "rank": self.ranks[k], "torsion": self.torsion.get(k, [])}
                for k in sorted(self.ranks)]


def homology_report(c: GradedComplex, gradings: Iterable[int]) -> HomologyReport:
    ranks, torsion = {}, {}
    for k in gradings:
        if c.ring == F2:
            ranks[k] = homology_f2(c, k)
        else:
            ranks[k], torsion[k] = homology_z(c, k)
    logger.info(f"Homology over {c.ring}: {[ranks[k] for k in sorted(ranks)]}")
    return HomologyReport(c.ring, ranks, torsion)


# ---------- Coboundary systems ----------

@dataclass
class CoboundarySolution:
    """A solution of δs = target with the rank data of the system."""
    values: Dict[Hashable, int]
    rank: int
    unknowns: int

    @property
    def nullity(self) -> int:
        return self.unknowns - self.rank


def solve_coboundary(c: GradedComplex, target: Dict[Hashable, int], k: int,
                     pivot_order: Optional[Sequence[int]] = None) -> CoboundarySolution:
    """
    Find s on grading k with s(∂h) = target(h) for every grading-(k+1) key h.

    Unknowns are ordered by ``pivot_order`` (a permutation of column indices,
    default the basis order); the pivot is always the first unknown in that
    order and free unknowns are 0.

    Raises:
        InfeasibleError: with a grading-(k+1) cycle pairing to 1 with target
    """
    if c.ring != F2:
        raise ValueError("solve_coboundary works over F2")
    if k + 1 not in c.columns:
        raise WindowError(f"Coboundary system needs ∂_{k + 1}")
    n_unknowns = c.dim(k)
    order = list(pivot_order) if pivot_order is not None else list(range(n_unknowns))
    position = {col: pos for pos, col in enumerate(order)}

    pivots: Dict[int, Tuple[int, int]] = {}
    for h, col in enumerate(c.columns[k + 1]):
        mask = 0
        for r in col:
            mask ^= 1 << position[r]
        rhs = target.get(c.bases[k + 1][h], 0) % 2
        combo = 1 << h
        while mask:
            low = mask & -mask
            if low not in pivots:
                break
            pmask, prhs, pcombo = pivots[low]
            mask ^= pmask
            rhs ^= prhs
            combo ^= pcombo
        if mask:
            pivots[mask & -mask] = (mask, rhs, combo)
        elif rhs:
            certificate = {c.bases[k + 1][i]: 1 for i in range(combo.bit_length()) if combo >> i & 1}
            logger.error(f"Coboundary system infeasible; certificate has {len(certificate)} terms")
            raise InfeasibleError("δs = target has no solution", certificate)

    solution_bits = 0
    for low in sorted(pivots, reverse=True):
        mask, rhs, _ = pivots[low]
        rest = mask ^ low
        value = rhs ^ (bin(rest & solution_bits).count("1") & 1)
        if value:
            solution_bits |= low
    values = {}
    for pos in range(n_unknowns):
        if solution_bits >> pos & 1:
            values[c.bases[k][order[pos]]] = 1
    logger.debug(f"Coboundary solve: rank {len(pivots)} of {n_unknowns} unknowns")
    return CoboundarySolution(values, len(pivots), n_unknowns)


def is_boundary_f2(c: GradedComplex, chain: Chain, k: int) -> bool:
    """Whether a grading-k chain lies in the image of ∂_{k+1} over F2."""
    if k + 1 not in c.columns:
        raise WindowError(f"Boundary test needs ∂_{k + 1}")
    vec = [i for i, v in c.chain_to_vector(reduce_mod2(chain), k).items() if v]
    return in_span_f2(vec, c.columns[k + 1])
