"""Explicit cycles and cocycles certifying the low-grading homology.

The generator U of H_2(CD_*) is the sum of the annuli A_i, B_i and the
hexagons C_i, D_i, E_i, F_ij, G_ij. Lifted to CDP_* it becomes U′, and
together with the constant triples g_j, g_jk, g_jkl and the dual cocycles
r_j, r, r_jk, rr_j, r_jkl it gives pairing matrices equal to the identity
in gradings 1, 2 and 3.
"""

from collections import deque
from dataclasses import dataclass, field
from itertools import combinations
from math import comb
from typing import Callable, Dict, Hashable, Iterable, List, Optional, Sequence, Tuple, Union

from . import chain_engine as ce
from .cd_complex import CdComplex, boundary_cd_f2
from .cdp_complex import (
    CdpComplex, EMPTY, OrderedPartition, PartitionTriple, boundary_cdp_f2, make_triple,
    plain, single,
)
from .errors import CompletionError, FamilyConstructionError, InfeasibleError, WindowError
from .grid_core import (
    Domain, Generator, GridDiagram, annulus_of, back_peels,
    classify_index2, compose, constant, contains, front_peels, horizontal_footprint,
    identity_generator, is_planar, minus, rectangle_between, rectangles_from, rectangles_into,
    vertical_footprint,
)
from .logger import get_logger
from .sign_assign import solve_f_j

logger = get_logger(__name__)


@dataclass
class WitnessChain:
    name: str
    grading: int
    chain: ce.Chain


@dataclass
class WitnessCochain:
    name: str
    grading: int
    evaluate: Callable[[Hashable], int]

    def __call__(self, key) -> int:
        return self.evaluate(key) % 2

    def __add__(self, other: 'WitnessCochain') -> 'WitnessCochain':
        return WitnessCochain(f"{self.name}+{other.name}", self.grading,
                              lambda t: (self.evaluate(t) + other.evaluate(t)) % 2)


# ---------- Permutation formulas ----------

def _seq(a: int, b: int) -> List[int]:
    """1-based run a..b, empty when b < a."""
    return list(range(a, b + 1))


def _gen(n: int, *pieces: Union[int, List[int]], family: str = "", index=None) -> Generator:
    """A generator from 1-based bracket pieces."""
    values: List[int] = []
    for piece in pieces:
        values.extend(piece if isinstance(piece, list) else [piece])
    if sorted(values) != list(range(1, n + 1)):
        raise FamilyConstructionError(f"{family}{index}: {values} is not a permutation of 1..{n}",
                                      family, index)
    return tuple(v - 1 for v in values)


def _rect(name: str, index, x: Generator, y: Generator, width: int, height: int) -> Domain:
    r = rectangle_between(x, y, width, height)
    if r is None:
        raise FamilyConstructionError(
            f"No empty {width}x{height} rectangle for {name}{index}: {x} -> {y}", name, index)
    return r


def _hexagon(name: str, index, src: Generator, mid: Generator, tgt: Generator,
             first: Tuple[int, int], second: Tuple[int, int]) -> Domain:
    d = compose(_rect(name, index, src, mid, *first), _rect(name, index, mid, tgt, *second))
    if d.index != 2 or classify_index2(d) != "hexagon":
        raise FamilyConstructionError(f"{name}{index} is not an index-2 hexagon", name, index)
    return d


def _family_name(letter: str, *idx: int) -> str:
    return f"{letter}_{','.join(map(str, idx))}"


def a_generator(n: int, i: int) -> Generator:
    if i == 0:
        return identity_generator(n)
    return _gen(n, n, _seq(2, n - i), 1, _seq(n - i + 1, n - 1), family="A", index=i)


def b_generator(n: int, i: int) -> Generator:
    if i == 0:
        return identity_generator(n)
    return _gen(n, n - i + 1, _seq(2, n - i), _seq(n - i + 2, n), 1, family="B", index=i)


def build_domain_families(g: GridDiagram) -> Dict[str, Domain]:
    """
    The domains summed in U, by name.

    A_i is the vertical annulus in the (n-i)th column and B_i the horizontal
    one in the (n-i)th row, both from their formula generator. Each hexagon
    is built as the composition of the two rectangles its formula implies.

    Raises:
        FamilyConstructionError: a formula gives no valid domain
    """
    n = g.n
    out: Dict[str, Domain] = {}
    for i in range(n):
        x = a_generator(n, i)
        out[_family_name("A", i)] = Domain(x, x, vertical_footprint(n, n - i - 1))
    for i in range(n):
        y = b_generator(n, i)
        out[_family_name("B", i)] = Domain(y, y, horizontal_footprint(n, n - i - 1))

    for i in range(1, n - 1):
        src = a_generator(n, i)
        mid = _gen(n, _seq(1, n - i), n, _seq(n - i + 1, n - 1), family="C", index=i)
        tgt = _gen(n, _seq(1, n - i - 1), n, _seq(n - i, n - 1), family="C", index=i)
        out[_family_name("C", i)] = _hexagon("C", i, src, mid, tgt, (n - i, 1), (1, i))
    for i in range(1, n - 1):
        src = b_generator(n, i)
        mid = _gen(n, _seq(1, n - i), _seq(n - i + 2, n), n - i + 1, family="D", index=i)
        tgt = _gen(n, _seq(1, n - i - 1), _seq(n - i + 1, n), n - i, family="D", index=i)
        out[_family_name("D", i)] = _hexagon("D", i, src, mid, tgt, (1, n - i), (i, 1))
    for i in range(1, n - 1):
        src = _gen(n, _seq(1, n - i - 1), n, _seq(n - i + 1, n - 1), n - i, family="E", index=i)
        mid = _gen(n, _seq(1, n - i - 2), n - i, n, _seq(n - i + 1, n - 1), n - i - 1,
                   family="E", index=i)
        tgt = _gen(n, _seq(1, n - i - 2), n, _seq(n - i, n - 1), n - i - 1, family="E", index=i)
        out[_family_name("E", i)] = _hexagon("E", i, src, mid, tgt, (i + 1, 1), (1, i))

    for i in range(1, n - 2):
        for j in range(1, n - i - 1):
            a = n - i - j - 1
            idx = (i, j)
            src = _gen(n, _seq(1, a - 1), a + 1, n - i, _seq(a + 2, n - i - 1), _seq(n - i + 1, n), a,
                       family="F", index=idx)
            mid = _gen(n, _seq(1, a - 1), n - i, _seq(a + 1, n - i - 1), _seq(n - i + 1, n), a,
                       family="F", index=idx)
            tgt = _gen(n, _seq(1, a - 1), n - i + 1, a + 1, _seq(a + 2, n - i), _seq(n - i + 2, n), a,
                       family="F", index=idx)
            out[_family_name("F", i, j)] = _hexagon("F", idx, src, mid, tgt, (1, j), (j + 1, 1))
    for i in range(1, n - 2):
        for j in range(1, n - i - 1):
            a = n - i - j - 1
            idx = (i, j)
            src = _gen(n, _seq(1, a - 1), n, a, _seq(a + 2, n - i - 1), a + 1, _seq(n - i, n - 1),
                       family="G", index=idx)
            mid = _gen(n, _seq(1, a - 1), n, _seq(a + 1, a + j), a, _seq(n - i, n - 1),
                       family="G", index=idx)
            tgt = _gen(n, _seq(1, a - 1), n, _seq(a + 1, n - i), a, _seq(n - i + 1, n - 1),
                       family="G", index=idx)
            out[_family_name("G", i, j)] = _hexagon("G", idx, src, mid, tgt, (j, 1), (1, j + 1))

    logger.debug(f"Built {len(out)} family domains for n={n}")
    return out


def expected_family_size(n: int) -> int:
    """2n annuli, n-2 each of C, D, E and C(n-2, 2) each of F, G."""
    return 2 * n + 3 * max(n - 2, 0) + 2 * comb(max(n - 2, 0), 2)


# ---------- Completion ----------

def complete_cycle(residue: ce.Chain, candidates: Sequence[Hashable],
                   boundary: Callable[[Hashable], ce.Chain]) -> ce.Chain:
    """
    Find Z among ``candidates`` with ∂Z = residue over F2.

    Raises:
        CompletionError: residue is outside the span of the candidate boundaries
    """
    rows: Dict[Hashable, int] = {}

    def mask_of(chain):
        m = 0
        for key, v in chain.items():
            if v % 2:
                m ^= 1 << rows.setdefault(key, len(rows))
        return m

    pivots: Dict[int, Tuple[int, int]] = {}
    for i, c in enumerate(candidates):
        m, combo = mask_of(boundary(c)), 1 << i
        while m:
            low = m & -m
            if low not in pivots:
                pivots[low] = (m, combo)
                break
            pm, pc = pivots[low]
            m ^= pm
            combo ^= pc

    m, combo = mask_of(residue), 0
    while m:
        low = m & -m
        if low not in pivots:
            raise CompletionError(f"Residue of {len(residue)} terms is not a boundary of "
                                  f"{len(candidates)} candidates")
        pm, pc = pivots[low]
        m ^= pm
        combo ^= pc
    return {candidates[i]: 1 for i in range(combo.bit_length()) if combo >> i & 1}


# ---------- U ----------

@dataclass
class UChain:
    """U with its formula part and any completion terms kept apart."""
    families: Dict[str, Domain]
    completion: ce.Chain
    chain: ce.Chain

    @property
    def formula_terms(self) -> int:
        return len(self.families)

    @property
    def completion_terms(self) -> int:
        return len(self.completion)


def build_U(g: GridDiagram, cd: Optional[CdComplex] = None, complete: bool = False) -> UChain:
    """
    The index-2 cycle U.

    The family domains alone must have zero boundary. With ``complete`` a
    leftover boundary is instead cancelled by non-annulus index-2 domains,
    first those near the unmatched rectangles, and the added terms are kept
    apart in ``UChain.completion``.

    Raises:
        CompletionError: the families leave a boundary and ``complete`` is
            off, or no completion exists
    """
    families = build_domain_families(g)
    seed: ce.Chain = {}
    for d in families.values():
        ce.add_into(seed, {d: 1})
    residue = ce.boundary_of_chain(boundary_cd_f2, seed)
    completion: ce.Chain = {}
    if residue:
        if not complete:
            raise CompletionError(f"Family boundaries leave {len(residue)} rectangles", residue)
        logger.warning(f"Family boundaries leave {len(residue)} rectangles; completing U")
        if cd is None:
            cd = CdComplex(g, K=2)
        pool = [d for d in cd.basis(2) if d.source != d.target and d not in seed]
        touched = {r.source for r in residue} | {r.target for r in residue}
        near = [d for d in pool if d.source in touched and d.target in touched]
        try:
            completion = complete_cycle(residue, near, boundary_cd_f2)
        except CompletionError:
            completion = complete_cycle(residue, pool, boundary_cd_f2)
    chain = dict(seed)
    ce.add_into(chain, completion)
    if ce.boundary_of_chain(boundary_cd_f2, chain):
        raise CompletionError("U is not a cycle after completion")
    logger.info(f"U: {len(families)} family terms + {len(completion)} completion terms")
    return UChain(families, completion, chain)


def rightmost_annulus_cochain(n: int) -> Callable[[Domain], int]:
    """1 on the vertical annulus in the last column, from any generator."""
    footprint = vertical_footprint(n, n - 1)

    def r(d: Domain) -> int:
        return 1 if d.source == d.target and d.mult == footprint else 0
    return r


def homology_class_check(g: GridDiagram, cd: CdComplex, u: UChain) -> Dict[str, bool]:
    """U is a cycle, r(U) = 1, and U is not a boundary in CD_*."""
    r = rightmost_annulus_cochain(g.n)
    result = {
        "is_cycle": not ce.boundary_of_chain(boundary_cd_f2, u.chain),
        "r_of_U": ce.evaluate(r, u.chain) == 1,
    }
    if cd.K >= 3:
        complex_ = cd.to_graded_complex(ce.F2, gradings=[1, 2, 3])
        result["not_boundary"] = not ce.is_boundary_f2(complex_, u.chain, 2)
    logger.info(f"U homology class: {result}")
    return result


def obstruction_count(g: GridDiagram, domains: Iterable[Domain]) -> int:
    """Σ T(D) before reducing mod 2: T is 1 on vertical annuli and on non-annuli."""
    total = 0
    for d in domains:
        label = annulus_of(g, d)
        total += 1 if label is None or label.kind == "V" else 0
    return total


def obstruction_of_U(g: GridDiagram, u: UChain) -> int:
    """T(U) mod 2."""
    return obstruction_count(g, u.chain) % 2


# ---------- Named rectangles ----------

def build_named_rectangles(g: GridDiagram, strict: bool = True) -> Tuple[Dict[str, Domain], List[str]]:
    """
    The rectangles met when cancelling ∂U, by name, and the names whose
    formula gives no rectangle. With ``strict`` the first such name raises.
    """
    n = g.n
    found: Dict[str, Domain] = {}
    mismatches: List[str] = []
    specs: List[Tuple[str, tuple, Callable[[], Tuple[Generator, Generator]], Tuple[int, int]]] = []

    def add(name, idx, make, dims):
        specs.append((name, idx, make, dims))

    ident = identity_generator(n)
    add("R1", (1,), lambda: (ident, _gen(n, n, _seq(2, n - 1), 1)), (1, 1))
    add("R2", (1,), lambda: (ident, _gen(n, _seq(1, n - 2), n, n - 1)), (1, 1))
    for i in range(2, n):
        add("R1", (i,), lambda i=i: (_gen(n, n, _seq(2, n - i + 1), 1, _seq(n - i + 2, n - 1)),
                                     _gen(n, n, _seq(2, n - i), 1, _seq(n - i + 1, n - 1))), (1, i))
        add("R2", (i,), lambda i=i: (_gen(n, _seq(1, n - i), n, _seq(n - i + 1, n - 1)),
                                     _gen(n, _seq(1, n - i - 1), n, _seq(n - i, n - 1))), (1, i))
        add("R3", (i,), lambda i=i: (b_generator(n, i - 1), b_generator(n, i)), (i, 1))
        add("R4", (i,), lambda i=i: (_gen(n, _seq(1, n - i), _seq(n - i + 2, n), n - i + 1),
                                     _gen(n, _seq(1, n - i - 1), _seq(n - i + 1, n), n - i)), (i, 1))
    for i in range(1, n - 1):
        add("R5", (i,), lambda i=i: (_gen(n, _seq(1, n - i - 2), n - i, n, _seq(n - i + 1, n - 1), n - i - 1),
                                     _gen(n, _seq(1, n - i - 2), n, _seq(n - i, n - 1), n - i - 1)), (1, i))
        add("R6", (i,), lambda i=i: (_gen(n, _seq(1, n - i - 2), n, n - i - 1, _seq(n - i + 1, n - 1), n - i),
                                     _gen(n, _seq(1, n - i - 2), n, _seq(n - i, n - 1), n - i - 1)), (i, 1))
    for i in range(2, n - 1):
        for j in range(1, n - i):
            b = n - i - j
            add("P", (i, j), lambda i=i, j=j, b=b: (
                _gen(n, _seq(1, b - 1), b + 1, n - i + 1, _seq(b + 2, n - i), _seq(n - i + 2, n), b),
                _gen(n, _seq(1, b - 1), n - i + 1, _seq(b + 1, n - i), _seq(n - i + 2, n), b)), (1, j))
            add("Q", (i, j), lambda i=i, j=j, b=b: (
                _gen(n, _seq(1, b - 1), n, b, _seq(b + 2, n - i), b + 1, _seq(n - i + 1, n - 1)),
                _gen(n, _seq(1, b - 1), n, _seq(b + 1, n - i), b, _seq(n - i + 1, n - 1))), (j, 1))
    for i in range(1, n):
        add("R1'", (i,), lambda i=i: (_gen(n, n, _seq(2, n - i), 1, _seq(n - i + 1, n - 1)),
                                      _gen(n, _seq(1, n - i), n, _seq(n - i + 1, n - 1))), (n - i, 1))
        add("R2'", (i,), lambda i=i: (_gen(n, n - i + 1, _seq(2, n - i), _seq(n - i + 2, n), 1),
                                      _gen(n, _seq(1, n - i), _seq(n - i + 2, n), n - i + 1)), (1, n - i))
    for i in range(1, n - 2):
        for j in range(2, n - i):
            b = n - i - j
            add("P'", (i, j), lambda i=i, j=j, b=b: (
                _gen(n, _seq(1, b - 1), n - i, _seq(b + 1, n - i - 1), _seq(n - i + 1, n), b),
                _gen(n, _seq(1, b - 1), n - i + 1, _seq(b + 1, n - i), _seq(n - i + 2, n), b)), (j, 1))
            add("Q'", (i, j), lambda i=i, j=j, b=b: (
                _gen(n, _seq(1, b - 1), n, _seq(b + 1, n - i - 1), b, _seq(n - i, n - 1)),
                _gen(n, _seq(1, b - 1), n, _seq(b + 1, n - i), b, _seq(n - i + 1, n - 1))), (1, j))

    for name, idx, make, (w, h) in specs:
        label = _family_name(name, *idx)
        try:
            x, y = make()
            found[label] = _rect(name, idx, x, y, w, h)
        except FamilyConstructionError:
            if strict:
                raise
            mismatches.append(label)
    if mismatches:
        logger.warning(f"{len(mismatches)} named rectangle formulas give no rectangle: {mismatches}")
    return found, mismatches


def expected_partners(n: int) -> Dict[str, List[str]]:
    """
    The two families each named rectangle is claimed to cancel between in ∂U.

    Names without a stated pair (R4_{n-1}, the primed rectangles whose
    formulas overlap an earlier name) are left out.
    """
    A, B, C, D, E = (lambda i, L=L: _family_name(L, i) for L in "ABCDE")
    F = lambda i, j: _family_name("F", i, j)
    G = lambda i, j: _family_name("G", i, j)
    out: Dict[str, List[str]] = {"R1_1": [A(0), B(0)], "R2_1": [C(1), D(1)]}
    for i in range(2, n):
        out[_family_name("R1", i)] = [A(i - 1), C(i - 1)]
        out[_family_name("R3", i)] = [B(i - 1), D(i - 1)]
    out[_family_name("R2", n - 1)] = [A(n - 1), E(n - 2)]
    for i in range(2, n - 1):
        out[_family_name("R2", i)] = [C(i), E(i)]
        out[_family_name("R4", i)] = [D(i), E(i - 1)]
    for i in range(1, n - 1):
        j = max(i - 1, 1)
        out[_family_name("R5", i)] = [E(i), F(1, j)]
        out[_family_name("R6", i)] = [E(i), G(1, j)]
    for i in range(2, n - 1):
        for j in range(1, n - i):
            if i == n - 2:
                out[_family_name("P", i, j)] = [F(n - 3, 1), B(n - 2)]
                out[_family_name("Q", i, j)] = [G(n - 3, 1), A(n - 2)]
            else:
                out[_family_name("P", i, j)] = [F(i - 1, j), F(i, max(j - 1, 1))]
                out[_family_name("Q", i, j)] = [G(i - 1, j), G(i, max(j - 1, 1))]
    for i in range(1, n):
        if i == 1:
            out["R1'_1"], out["R2'_1"] = [B(0), C(1)], [A(0), D(1)]
        elif i == n - 1:
            out[f"R1'_{i}"], out[f"R2'_{i}"] = [A(n - 1), C(n - 2)], [B(n - 1), D(n - 2)]
        else:
            out[f"R1'_{i}"], out[f"R2'_{i}"] = [C(i - 1), C(i)], [D(i - 1), D(i)]
    for i in range(1, n - 2):
        for j in range(2, n - i):
            if j == n - i - 1:
                out[_family_name("P'", i, j)] = [F(i, n - i - 2), B(i)]
                out[_family_name("Q'", i, j)] = [G(i, n - i - 2), A(i)]
            else:
                out[_family_name("P'", i, j)] = [F(i, j - 1), F(i, j)]
                out[_family_name("Q'", i, j)] = [G(i, j - 1), G(i, j)]
    return {name: sorted(pair) for name, pair in out.items()}


@dataclass
class NamedRectangleAudit:
    """Occurrences of each named rectangle in the unreduced ∂ of the families."""
    occurrences: Dict[str, int]
    partners: Dict[str, List[str]]
    formula_failures: List[str]
    expected: Dict[str, List[str]] = field(default_factory=dict)

    @property
    def paired(self) -> List[str]:
        return [name for name, count in self.occurrences.items() if count == 2]

    @property
    def unpaired(self) -> Dict[str, int]:
        return {name: count for name, count in self.occurrences.items() if count != 2}

    @property
    def partner_mismatches(self) -> Dict[str, Dict[str, List[str]]]:
        """Names whose families differ from the expected pair."""
        return {name: {"expected": pair, "found": self.partners.get(name, [])}
                for name, pair in self.expected.items()
                if name in self.partners and self.partners[name] != pair}

    @property
    def ok(self) -> bool:
        return not (self.formula_failures or self.unpaired or self.partner_mismatches)


def named_rectangle_audit(g: GridDiagram) -> NamedRectangleAudit:
    families = build_domain_families(g)
    named, failures = build_named_rectangles(g, strict=False)
    where: Dict[Domain, List[str]] = {}
    for fname, d in families.items():
        for _, rest in front_peels(d):
            where.setdefault(rest, []).append(fname)
        for _, rest in back_peels(d):
            where.setdefault(rest, []).append(fname)
    occurrences = {name: len(where.get(r, [])) for name, r in named.items()}
    partners = {name: sorted(where.get(r, [])) for name, r in named.items()}
    audit = NamedRectangleAudit(occurrences, partners, failures, expected_partners(g.n))
    level = logger.info if audit.ok else logger.warning
    level(f"Named rectangles: {len(audit.paired)}/{len(named)} occur exactly twice, "
          f"{len(audit.partner_mismatches)} with unexpected families")
    return audit


# ---------- CDP witnesses ----------

def cocycle_violations(cochain: WitnessCochain, cdp: CdpComplex) -> List[PartitionTriple]:
    """Window triples one grading up on which δ(cochain) is nonzero."""
    k = cochain.grading + 1
    if k > cdp.window.K:
        raise WindowError(f"Cocycle sweep for {cochain.name} needs grading {k} in the window")
    bad = [t for t in cdp.basis(k) if ce.evaluate(cochain, cdp.boundary_f2(t))]
    if bad:
        logger.error(f"{cochain.name}: δ is nonzero on {len(bad)} triples, e.g. {bad[0]}")
    return bad


def pairing_matrix(cocycles: Sequence[WitnessCochain], cycles: Sequence[WitnessChain]) -> List[List[int]]:
    return [[ce.evaluate(c, z.chain) for z in cycles] for c in cocycles]


# ---------- Corrections ----------

Support = Callable[[PartitionTriple], Optional[Hashable]]


def _correction_system(raw: Callable[[PartitionTriple], int], support: Support,
                       rows: Sequence[Tuple[Hashable, ce.Chain]]):
    """
    One F2 equation per row: the unknowns met by ``support`` on the row's
    chain sum to the value of ``raw`` on it.
    """
    unknowns: Dict[Hashable, int] = {}
    keys: List[Hashable] = []
    columns: List[Dict[int, int]] = []
    target: Dict[Hashable, int] = {}
    for key, chain in rows:
        col: Dict[int, int] = {}
        for t, v in chain.items():
            u = support(t) if v % 2 else None
            if u is not None:
                i = unknowns.setdefault(u, len(unknowns))
                col[i] = col.get(i, 0) ^ 1
        col = {i: 1 for i, v in col.items() if v}
        rhs = ce.evaluate(raw, chain)
        if col or rhs:
            keys.append(key)
            columns.append(col)
            if rhs:
                target[key] = 1
    system = ce.GradedComplex(ce.F2, {0: list(unknowns), 1: keys}, {1: columns})
    return system, target


def solve_correction(name: str, raw: Callable[[PartitionTriple], int], support: Support,
                     equations: Sequence[Tuple[Hashable, ce.Chain]],
                     pins: Sequence[Tuple[Hashable, ce.Chain]] = ()) -> Dict[Hashable, int]:
    """
    Values on the support keys so that raw + correction vanishes on every
    equation chain and every pinned cycle.

    When the pins cannot all hold the pinned cycles are dropped and the
    cocycle is reported with whatever pairing it then has.

    Raises:
        InfeasibleError: no correction on this support closes the cochain
    """
    try:
        system, target = _correction_system(raw, support, list(equations) + list(pins))
        solution = ce.solve_coboundary(system, target, 0)
    except InfeasibleError:
        if not pins:
            raise
        logger.warning(f"{name}: pairing with {[key for key, _ in pins]} cannot be set to 0")
        system, target = _correction_system(raw, support, equations)
        solution = ce.solve_coboundary(system, target, 0)
    logger.debug(f"{name}: correction on {sum(solution.values.values())} of "
                 f"{solution.unknowns} support keys, rank {solution.rank}")
    return solution.values


def _corrected(name: str, grading: int, raw: Callable[[PartitionTriple], int],
               support: Support, values: Dict[Hashable, int]) -> WitnessCochain:
    def value(t):
        u = support(t)
        return (raw(t) + (values.get(u, 0) if u is not None else 0)) % 2
    return WitnessCochain(name, grading, value)


def _index2_support(t: PartitionTriple) -> Optional[Hashable]:
    """(E, 0, 0) with E of index 2."""
    if t.total_length == 0 and t.domain.index == 2:
        return t.domain
    return None


def _lift_support(markings: Sequence[int]) -> Support:
    """
    ("c", D) on (D, 0, 0) with D of index 3, and ("h", m, E) on
    (E, N e_m, (N)) with E of index 2, m in ``markings`` and N odd.
    """
    chosen = set(markings)

    def support(t):
        if t.total_length == 0:
            return ("c", t.domain) if t.domain.index == 3 else None
        if t.total_length == 1 and t.domain.index == 2:
            m = next(i for i, lam in enumerate(t.lambdas) if len(lam))
            if m in chosen and t.nvec[m] % 2:
                return ("h", m, t.domain)
        return None
    return support


def _is_rectangle(d: Domain) -> bool:
    return d.index == 1


def _f_value(f: Dict[Domain, int], t: PartitionTriple) -> int:
    return f.get(t.domain, 0) if _is_rectangle(t.domain) else 0


def _constant_at_identity(n: int, markings: Sequence[int]) -> PartitionTriple:
    lambdas = [EMPTY] * n
    for j in markings:
        lambdas[j] = OrderedPartition((1,))
    return make_triple(constant(identity_generator(n)), lambdas)


def build_h1_witnesses(g: GridDiagram, f: Sequence[Dict[Domain, int]]):
    """Cycles g_j and cocycles r_j = N_j + f_j."""
    n = g.n
    cycles = [WitnessChain(f"g_{j + 1}", 1, {_constant_at_identity(n, [j]): 1}) for j in range(n)]

    cocycles = [WitnessCochain(f"r_{j + 1}", 1, _r_j(f[j], j)) for j in range(n)]
    return cycles, cocycles


def _planar_path(g: GridDiagram, x: Generator, y: Generator) -> List[Domain]:
    """Planar rectangles joining x to y, each crossed in either direction."""
    prev: Dict[Generator, Optional[Domain]] = {x: None}
    queue = deque([x])
    while queue and y not in prev:
        u = queue.popleft()
        steps = [(r, r.target) for r in rectangles_from(g, u) if is_planar(r)]
        steps += [(r, r.source) for r in rectangles_into(g, u) if is_planar(r)]
        for r, v in steps:
            if v not in prev:
                prev[v] = r
                queue.append(v)
    if y not in prev:
        raise FamilyConstructionError(f"No planar path from {x} to {y}", "U'", None)
    path, v = [], y
    while v != x:
        r = prev[v]
        path.append(r)
        v = r.source if r.target == v else r.target
    return path


def _with_partition(t: PartitionTriple, j: int, lam: OrderedPartition) -> PartitionTriple:
    lambdas = list(t.lambdas)
    lambdas[j] = lam
    return make_triple(t.domain, lambdas)


def _full_boundary(g: GridDiagram):
    return lambda t: boundary_cdp_f2(g, t)


def lift_U(g: GridDiagram, u: UChain) -> WitnessChain:
    """
    U′ = (U, 0, 0) plus (R, e_j, (1)) along a planar path from x^j to y^j.

    x^j carries the vertical annulus through O_j in U and y^j the horizontal
    one; the path terms cancel the two type II terms (c, e_j, (1)).
    """
    n = g.n
    chain: ce.Chain = {plain(d): 1 for d in u.chain}
    for j in range(n):
        x = a_generator(n, n - 1 - j)
        y = b_generator(n, n - 1 - g.o_pos[j])
        for r in _planar_path(g, x, y):
            ce.add_into(chain, {single(r, j, (1,)): 1})
    if ce.boundary_of_chain(_full_boundary(g), chain):
        raise CompletionError("U' is not a cycle")
    return WitnessChain("U'", 2, chain)


def enlarge_all(chain: ce.Chain, j: int) -> ce.Chain:
    """Sum of every unit enlargement of λ_j over the chain, mod 2."""
    out: ce.Chain = {}
    for t, coeff in chain.items():
        for _, lam in t.lambdas[j].unit_enlargements():
            ce.add_into(out, {_with_partition(t, j, lam): coeff})
    return out


def rank_bound(n: int, k: int) -> int:
    """Upper bound Σ_l C(n, k - 2l) on the rank of H_k(CDP_*)."""
    if n < 2 or k < 0:
        raise ValueError(f"rank_bound needs n >= 2 and k >= 0, got n={n}, k={k}")
    return sum(comb(n, k - 2 * l) for l in range(k // 2 + 1))


# ---------- Cocycles ----------

def _r_j(f_j: Dict[Domain, int], j: int) -> Callable[[PartitionTriple], int]:
    def value(t):
        if t.total_length == 0:
            return _f_value(f_j, t)
        return t.nvec[j] % 2
    return value


def _nprod(t: PartitionTriple, markings: Sequence[int]) -> int:
    out = 1
    for m in markings:
        out *= t.nvec[m]
    return out % 2


def _f_lift(f_j: Dict[Domain, int], t: PartitionTriple, others: Sequence[int]) -> int:
    """N_k...·f_j(R) on rectangles whose partitions are single parts at ``others``."""
    if not _is_rectangle(t.domain) or t.total_length != len(others):
        return 0
    if any(len(t.lambdas[m]) != 1 for m in others):
        return 0
    return _nprod(t, others) * f_j.get(t.domain, 0)


def _rr_j(n: int, f_j: Dict[Domain, int], j: int) -> Callable[[PartitionTriple], int]:
    footprint = vertical_footprint(n, n - 1)
    r_j = _r_j(f_j, j)

    def value(t):
        d = t.domain
        if not contains(d, footprint):
            return 0
        rest = Domain(d.source, d.target, minus(d.mult, footprint))
        return r_j(PartitionTriple(rest, t.nvec, t.lambdas))
    return value


# ---------- Witness suites ----------

@dataclass
class WitnessSet:
    """Cycles and cocycles of one grading with their verification results."""
    grading: int
    cycles: List[WitnessChain]
    cocycles: List[WitnessCochain]
    cycle_ok: Dict[str, bool] = field(default_factory=dict)
    violations: Dict[str, Optional[int]] = field(default_factory=dict)
    matrix: List[List[int]] = field(default_factory=list)

    @property
    def identity(self) -> bool:
        size = len(self.cycles)
        return len(self.matrix) == size and all(
            self.matrix[a][b] == (1 if a == b else 0) for a in range(size) for b in range(size))

    @property
    def lower_bound(self) -> int:
        return len(self.cycles) if self.identity else 0

    @property
    def ok(self) -> bool:
        return self.identity and all(self.cycle_ok.values()) and not any(self.violations.values())

    def to_json(self, n: int) -> Dict:
        return {
            "grading": self.grading,
            "cycles": [{"name": z.name, "is_cycle": self.cycle_ok.get(z.name)} for z in self.cycles],
            "cocycles": [{"name": c.name, "violations": self.violations.get(c.name)}
                         for c in self.cocycles],
            "pairing": self.matrix,
            "identity": self.identity,
            "lower_bound": self.lower_bound,
            "rank_bound": rank_bound(n, self.grading),
        }


def build_h0_witnesses(g: GridDiagram):
    cycles = [WitnessChain("c_Id", 0, {plain(constant(identity_generator(g.n))): 1})]
    cocycles = [WitnessCochain("1", 0, lambda t: 1 if t.grading == 0 else 0)]
    return cycles, cocycles


def build_h2_witnesses(g: GridDiagram, f: Sequence[Dict[Domain, int]], u_prime: WitnessChain,
                       cd: Optional[CdComplex] = None):
    """
    Cycles U′, g_jk and cocycles r, r_jk.

    r_jk starts as N_jN_k plus the f-lifts. Removing an annulus from an
    index-3 domain leaves a rectangle where those terms do not cancel, so
    r_jk is corrected on (E, 0, 0) until δ vanishes on every (D, 0, 0) and
    r_jk(U′) = 0. Without CD_3 the uncorrected cochain is reported.
    """
    n = g.n
    rightmost = rightmost_annulus_cochain(n)
    r = WitnessCochain("r", 2, lambda t: rightmost(t.domain) if t.total_length == 0 else 0)
    pairs = list(combinations(range(n), 2))
    cycles = [u_prime] + [WitnessChain(f"g_{j + 1},{k + 1}", 2, {_constant_at_identity(n, [j, k]): 1})
                          for j, k in pairs]

    def r_jk(j, k):
        def value(t):
            return (_nprod(t, [j, k]) + _f_lift(f[j], t, [k]) + _f_lift(f[k], t, [j])) % 2
        return value

    equations: List[Tuple[Hashable, ce.Chain]] = []
    if cd is not None and cd.K >= 3:
        equations = [(d, boundary_cdp_f2(g, plain(d))) for d in cd.basis(3)]
    else:
        logger.warning("No CD_3 to correct r_jk against; reporting the uncorrected cochains")
    cocycles = [r]
    for j, k in pairs:
        name, raw, values = f"r_{j + 1},{k + 1}", r_jk(j, k), {}
        if equations:
            try:
                values = solve_correction(name, raw, _index2_support, equations,
                                          [(u_prime.name, u_prime.chain)])
            except InfeasibleError as e:
                logger.error(f"{name}: no correction on index-2 domains ({e})")
        cocycles.append(_corrected(name, 2, raw, _index2_support, values))
    return cycles, cocycles


def lift_cycles(g: GridDiagram, u_prime: WitnessChain,
                cdp: Optional[CdpComplex] = None) -> List[WitnessChain]:
    """
    U′_j for each marking: λ_j enlarged in every term of U′.

    A lift that is not already a cycle is completed from grading-3 window
    triples, which needs ``cdp``.
    """
    boundary = _full_boundary(g)
    lifted = []
    for j in range(g.n):
        chain = enlarge_all(u_prime.chain, j)
        residue = ce.boundary_of_chain(boundary, chain)
        if residue:
            if cdp is None:
                raise CompletionError(f"U'_{j + 1} needs completion but no CDP window was given",
                                      residue)
            logger.info(f"Completing U'_{j + 1} against {len(residue)} boundary terms")
            try:
                fix = complete_cycle(residue, cdp.basis(3), boundary)
            except CompletionError as e:
                raise CompletionError(f"U'_{j + 1} does not close in the window; "
                                      f"raise K or Nmax ({e})", residue) from e
            ce.add_into(chain, fix)
        lifted.append(WitnessChain(f"U'_{j + 1}", 3, chain))
    return lifted


def build_h3_witnesses(g: GridDiagram, f: Sequence[Dict[Domain, int]], u_prime: WitnessChain,
                       cdp: Optional[CdpComplex] = None, cd: Optional[CdComplex] = None):
    """
    Cycles U′_j, g_jkl and cocycles rr_j, r_jkl.

    r_jkl starts as N_jN_kN_l plus the f-lifts. It is corrected by N_m·h_m(E)
    on (E, N e_m, (N)) for m in {j, k, l} and by c(D) on (D, 0, 0), solved
    so that δ vanishes on (D, e_m, (1)) and (W, 0, 0) for D of index 3 and
    W of index 4, with r_jkl(U′_p) = 0 for every p.
    """
    n = g.n
    lifted = lift_cycles(g, u_prime, cdp)
    triples = list(combinations(range(n), 3))
    cycles = lifted + [WitnessChain(f"g_{j + 1},{k + 1},{l + 1}", 3,
                                    {_constant_at_identity(n, [j, k, l]): 1})
                       for j, k, l in triples]
    duals = [WitnessCochain(f"rr_{j + 1}", 3, _rr_j(n, f[j], j)) for j in range(n)]

    def r_jkl(j, k, l):
        def value(t):
            total = _nprod(t, [j, k, l])
            total += _f_lift(f[j], t, [k, l]) + _f_lift(f[k], t, [j, l]) + _f_lift(f[l], t, [j, k])
            return total % 2
        return value

    lift_rows: Dict[int, List[Tuple[Hashable, ce.Chain]]] = {m: [] for m in range(n)}
    plain_rows: List[Tuple[Hashable, ce.Chain]] = []
    if cd is not None and cd.K >= 3:
        for m in range(n):
            lift_rows[m] = [(("lift", m, d), boundary_cdp_f2(g, single(d, m, (1,))))
                            for d in cd.basis(3)]
        if cd.K >= 4:
            plain_rows = [(w, boundary_cdp_f2(g, plain(w))) for w in cd.basis(4)]
    else:
        logger.warning("No CD_3 to correct r_jkl against; reporting the uncorrected cochains")
    pins = [(z.name, z.chain) for z in lifted]

    cocycles = list(duals)
    for S in triples:
        name = f"r_{','.join(str(m + 1) for m in S)}"
        raw, support, values = r_jkl(*S), _lift_support(S), {}
        equations = [row for m in S for row in lift_rows[m]] + plain_rows
        if equations:
            try:
                values = solve_correction(name, raw, support, equations, pins)
            except InfeasibleError as e:
                logger.error(f"{name}: no correction on the lift support ({e})")
        cocycles.append(_corrected(name, 3, raw, support, values))
    return cycles, cocycles


def verify_witness_set(g: GridDiagram, grading: int, cycles, cocycles,
                       cdp: Optional[CdpComplex] = None) -> WitnessSet:
    """Exact cycle checks, window cocycle sweeps and the pairing matrix."""
    ws = WitnessSet(grading, list(cycles), list(cocycles))
    boundary = _full_boundary(g)
    for z in ws.cycles:
        ws.cycle_ok[z.name] = not ce.boundary_of_chain(boundary, z.chain)
    for c in ws.cocycles:
        if cdp is None or grading + 1 > cdp.window.K:
            ws.violations[c.name] = None
        else:
            ws.violations[c.name] = len(cocycle_violations(c, cdp))
    ws.matrix = pairing_matrix(ws.cocycles, ws.cycles)
    level = logger.info if ws.ok else logger.error
    level(f"Grading {grading} witnesses: {len(ws.cycles)} cycles, identity={ws.identity}")
    return ws


def run_witness_suite(g: GridDiagram, cd: CdComplex, cdp: Optional[CdpComplex] = None,
                      f: Optional[Sequence[Dict[Domain, int]]] = None,
                      gradings: Sequence[int] = (0, 1, 2, 3)) -> Dict[int, WitnessSet]:
    """Build and verify the witnesses of each requested grading."""
    if f is None:
        f = [solve_f_j(g, cd, j) for j in range(g.n)]
    out: Dict[int, WitnessSet] = {}
    u_prime = None
    if any(k >= 2 for k in gradings):
        u_prime = lift_U(g, build_U(g, cd, complete=True))
    for k in gradings:
        if k == 0:
            cycles, cocycles = build_h0_witnesses(g)
        elif k == 1:
            cycles, cocycles = build_h1_witnesses(g, f)
        elif k == 2:
            cycles, cocycles = build_h2_witnesses(g, f, u_prime, cd)
        elif k == 3:
            cycles, cocycles = build_h3_witnesses(g, f, u_prime, cdp, cd)
        else:
            raise WindowError(f"No witnesses are built for grading {k}")
        out[k] = verify_witness_set(g, k, cycles, cocycles, cdp)
    return out
