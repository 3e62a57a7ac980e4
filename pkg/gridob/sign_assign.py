"""Sign assignments for CD_* and CDP_*.

A sign assignment is an F2-valued 1-cochain s whose coboundary is the
obstruction cochain T: 1 on index-2 domains other than annuli, 1 on
vertical annuli and 0 on horizontal ones. Signs are found by solving
δs = T, then fixed up to gauge by a spanning tree of rectangle moves.
"""

from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

from . import chain_engine as ce
from .cdp_complex import boundary_cdp_f2, plain, single
from .errors import ComplexError, GridObError, SignCoverageError, WindowError
from .grid_core import (
    Domain, Generator, GridDiagram, all_generators, annulus_of, canonical_key, constant,
    decompositions, domain_from_key, identity_generator, rectangles_from, vertical_footprint,
)
from .logger import get_logger

logger = get_logger(__name__)

Cochain = Dict[Domain, int]


@dataclass
class SignAssignment:
    """F2 values on every rectangle, the CDP parameters s_j and a table of
    signs of (c_x, N e_j, (N)) keyed by (x, j, N)."""
    values: Cochain
    s_params: Tuple[int, ...] = ()
    provenance: str = "solved"
    unique: Optional[bool] = None
    partitions: Dict[Tuple[Generator, int, int], int] = field(default_factory=dict)

    def value(self, r: Domain) -> int:
        try:
            return self.values[r]
        except KeyError:
            raise SignCoverageError(f"No sign for rectangle {r}") from None

    def param(self, j: int) -> int:
        return self.s_params[j] if j < len(self.s_params) else 0

    def partition_value(self, x: Generator, j: int, N: int) -> int:
        """Sign of (c_x, N e_j, (N)): the stored value, else N·s_j."""
        stored = self.partitions.get((x, j, N))
        return stored if stored is not None else (N * self.param(j)) % 2

    def triple_value(self, t) -> int:
        """Sign of a grading-1 CDP triple (needs .domain, .nvec, .lambdas)."""
        parts = [j for j, lam in enumerate(t.lambdas) if lam]
        if not parts:
            return self.value(t.domain)
        if len(parts) == 1 and t.domain.is_constant() and len(t.lambdas[parts[0]]) == 1:
            j = parts[0]
            return self.partition_value(t.domain.source, j, t.nvec[j])
        raise SignCoverageError(f"{t} is not a grading-1 triple")

    def ones(self) -> int:
        return sum(self.values.values())


@dataclass
class RuleViolation:
    rule: str
    witness: object
    value: int


@dataclass
class RuleReport:
    """Outcome of verify_rules; ``checked`` counts evaluated keys per rule."""
    violations: List[RuleViolation] = field(default_factory=list)
    checked: Dict[str, int] = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return not self.violations

    def summary(self) -> str:
        counts = ", ".join(f"{rule}={n}" for rule, n in sorted(self.checked.items()))
        return f"{len(self.violations)} violations ({counts})"


# ---------- Obstruction cochain ----------

def _t_value(g: GridDiagram, d: Domain) -> Tuple[str, int]:
    label = annulus_of(g, d)
    if label is None:
        return "square", 1
    if label.kind == "V":
        return "vertical-annulus", 1
    return "horizontal-annulus", 0


def build_T(g: GridDiagram, cd) -> Cochain:
    """T on every enumerated index-2 domain, zeros included."""
    return {d: _t_value(g, d)[1] for d in cd.basis(2)}


@lru_cache(maxsize=8)
def _sign_system(cd) -> ce.GradedComplex:
    """CD gradings 0..2 over F2, shared by the sign and f_j solves."""
    if cd.K < 2:
        raise WindowError("Sign assignments need CD_* up to grading 2")
    return cd.to_graded_complex(ce.F2, gradings=[0, 1, 2])


# ---------- Solving ----------

def solve_sign_cd(g: GridDiagram, cd, pivot_order: Optional[Sequence[int]] = None) -> SignAssignment:
    """
    Solve δs = T on CD_2 and audit that the solution is unique up to gauge.

    Args:
        g: the grid diagram
        cd: a CdComplex enumerated to grading >= 2
        pivot_order: optional elimination order of the rectangle unknowns

    Returns:
        A SignAssignment total on the rectangles of g
    """
    system = _sign_system(cd)
    target = build_T(g, cd)
    solution = ce.solve_coboundary(system, target, 1, pivot_order)

    # H^1 = 0 exactly when cocycles and coboundaries of 0-cochains coincide
    coboundary_rank = ce.rank_f2(system.columns[1])
    unique = solution.nullity == coboundary_rank
    if unique:
        logger.info(f"Sign assignment solved: {solution.unknowns} rectangles, unique up to gauge")
    else:
        logger.warning(f"Sign solution space has dimension {solution.nullity}, "
                       f"coboundaries only {coboundary_rank}")

    values = {r: solution.values.get(r, 0) for r in cd.basis(1)}
    s = SignAssignment(values, tuple([0] * g.n), "solved", unique)
    report = verify_rules(s, g, cd=cd)
    if not report.ok:
        first = report.violations[0]
        logger.error(f"Solved signs fail {first.rule} on {first.witness}")
        raise ComplexError("Solved sign assignment violates its rules", first.witness)
    return s


def solve_f_j(g: GridDiagram, cd, j: int) -> Cochain:
    """A 1-cochain f_j whose coboundary marks exactly the annuli through O_j."""
    system = _sign_system(cd)
    target = {}
    for d in cd.basis(2):
        label = annulus_of(g, d)
        if label is not None and label.marking == j:
            target[d] = 1
    solution = ce.solve_coboundary(system, target, 1)
    logger.debug(f"f_{j + 1}: {len(solution.values)} nonzero rectangles")
    return dict(solution.values)


def extend_sign_cdp(s: SignAssignment, s_params: Sequence[int], Nmax: int = 0) -> SignAssignment:
    """
    Extend a CD sign assignment to CDP_1.

    Rectangles keep their values and (c_x, N e_j, (N)) gets N·s_j, tabulated
    at every generator for N up to ``Nmax``.
    """
    params = tuple(int(b) % 2 for b in s_params)
    values = dict(s.values)
    n = len(params)
    partitions = {(x, j, N): (N * params[j]) % 2
                  for x in all_generators(n) for j in range(n) for N in range(1, Nmax + 1)} if n else {}
    logger.info(f"Extended signs to CDP with s_params={''.join(map(str, params))}, "
                f"{len(partitions)} partition signs")
    return SignAssignment(values, params, s.provenance, s.unique, partitions)


# ---------- Gauge ----------

def apply_gauge(s: SignAssignment, g0: Dict[Generator, int]) -> SignAssignment:
    """s + δg0 for a 0-cochain g0."""
    values = {r: (v + g0.get(r.source, 0) + g0.get(r.target, 0)) % 2
              for r, v in s.values.items()}
    return SignAssignment(values, s.s_params, s.provenance, s.unique, dict(s.partitions))


def spanning_tree(g: GridDiagram) -> Dict[Generator, Optional[Domain]]:
    """BFS tree of rectangle moves rooted at the identity: generator -> parent edge."""
    root = identity_generator(g.n)
    parent: Dict[Generator, Optional[Domain]] = {root: None}
    queue = deque([root])
    while queue:
        x = queue.popleft()
        for r in sorted(rectangles_from(g, x), key=canonical_key):
            if r.target not in parent:
                parent[r.target] = r
                queue.append(r.target)
    return parent


def gauge_normalize(s: SignAssignment, g: GridDiagram) -> SignAssignment:
    """The gauge-equivalent assignment vanishing on the spanning tree."""
    tree = spanning_tree(g)
    if len(tree) != len(all_generators(g.n)):
        raise GridObError(f"Rectangle graph is disconnected: {len(tree)} generators reached")
    potential = {identity_generator(g.n): 0}
    # BFS insertion order visits parents before children
    for y, edge in tree.items():
        if edge is not None:
            potential[y] = potential[edge.source] ^ s.value(edge)
    return apply_gauge(s, potential)


# ---------- Verification ----------

def _cd_check(s: SignAssignment, g: GridDiagram, d: Domain) -> Tuple[str, int, int]:
    rule, expected = _t_value(g, d)
    total = 0
    for r1, r2 in decompositions(d):
        total ^= s.value(r1) ^ s.value(r2)
    return rule, expected, total


def _cdp_rule(t) -> Tuple[str, int]:
    lengths = [len(lam) for lam in t.lambdas]
    if t.domain.is_constant():
        if max(lengths) == 2:
            return "two-part-partition", 0
        return "split-partitions", 0
    return "rectangle-partition", 0


def verify_rules(s: SignAssignment, g: GridDiagram, cd=None, cdp=None,
                 threads: int = 1) -> RuleReport:
    """
    Check the sign rules on CD_2 and, given a CDP window, on its grading 2.

    CD clauses: the Square Rule on index-2 domains that are not annuli, and
    the two annulus rules. CDP clauses additionally require δs = 0 on
    rectangles with one partition and constants with partitions of total
    length 2.
    """
    report = RuleReport()
    if cd is not None:
        rectangles = cd.basis(1)
        missing = [r for r in rectangles if r not in s.values]
        for r in missing:
            report.violations.append(RuleViolation("coverage", r, -1))
        report.checked["coverage"] = len(rectangles)
        if missing:
            return report

        def check(d):
            return d, _cd_check(s, g, d)

        keys = cd.basis(2)
        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                results = list(pool.map(check, keys))
        else:
            results = [check(d) for d in keys]
        for d, (rule, expected, total) in results:
            report.checked[rule] = report.checked.get(rule, 0) + 1
            if total != expected:
                report.violations.append(RuleViolation(rule, d, total))

    if cdp is not None:
        for t in cdp.basis(2):
            if not any(t.lambdas):
                rule, expected = _t_value(g, t.domain)
                label = annulus_of(g, t.domain)
                if label is not None:
                    # the type II term (c_x, e_j, (1)) adds s_j
                    expected ^= s.param(label.marking)
            else:
                rule, expected = _cdp_rule(t)
            value = ce.evaluate(s.triple_value, cdp.boundary_f2(t))
            report.checked[rule] = report.checked.get(rule, 0) + 1
            if value != expected:
                report.violations.append(RuleViolation(rule, t, value))

    level = logger.info if report.ok else logger.error
    level(f"Sign rules: {report.summary()}")
    return report


def _solve_relation(s: SignAssignment, chain: ce.Chain, unknown, derived: Dict[Tuple[Generator, int, int], int],
                    j: int, expected: int) -> int:
    """The value on ``unknown`` making δs on ``chain`` equal ``expected``."""
    total = expected
    for term in chain:
        if term == unknown:
            continue
        if term.total_length == 0:
            total ^= s.value(term.domain)
        else:
            total ^= derived[(term.domain.source, j, term.nvec[j])]
    return total


def partition_sign_induction_check(s: SignAssignment, g: GridDiagram,
                                   Nmax: int) -> List[Tuple[Generator, int, int]]:
    """
    Derive the signs of (c_x, N e_j, (N)) from grading-2 relations and list
    the (x, j, N) where the values stored in s disagree.

    At the identity, δs(V_j, 0, 0) = T(V_j) + s_j fixes N = 1 and
    δs(c_x, N e_j, (1, N-1)) = 0 fixes each larger N from the smaller ones.
    Along each spanning-tree rectangle R, δs(R, N e_j, (N)) = 0 carries the
    values to the far end.
    """
    n = g.n
    root = identity_generator(n)
    tree = spanning_tree(g)
    derived: Dict[Tuple[Generator, int, int], int] = {}
    for j in range(n):
        annulus = plain(Domain(root, root, vertical_footprint(n, j)))
        base = single(constant(root), j, (1,))
        expected = _t_value(g, annulus.domain)[1] ^ s.param(j)
        derived[(root, j, 1)] = _solve_relation(
            s, boundary_cdp_f2(g, annulus), base, derived, j, expected)
        for N in range(2, Nmax + 1):
            split = single(constant(root), j, (1, N - 1))
            derived[(root, j, N)] = _solve_relation(
                s, boundary_cdp_f2(g, split), single(constant(root), j, (N,)), derived, j, 0)
        # BFS order reaches every parent before its children
        for y, edge in tree.items():
            if edge is None:
                continue
            for N in range(1, Nmax + 1):
                move = single(edge, j, (N,))
                derived[(y, j, N)] = _solve_relation(
                    s, boundary_cdp_f2(g, move), single(constant(y), j, (N,)), derived, j, 0)

    mismatches = [key for key, value in derived.items() if s.partition_value(*key) != value]
    if mismatches:
        logger.error(f"Partition signs disagree with the grading-2 relations at {len(mismatches)} "
                     f"places, e.g. {mismatches[0]}")
    else:
        logger.info(f"{len(derived)} partition signs agree with the grading-2 relations")
    return sorted(mismatches)


# ---------- Sign files ----------

def dump_sign_file(s: SignAssignment, path: Union[str, Path]) -> None:
    """
    Write ``s_params=<bits>``, then ``<key-hex> <bit>`` per rectangle and
    ``p <x> <j> <N> <bit>`` per tabulated partition sign, x comma-separated.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [f"s_params={''.join(str(b) for b in s.s_params)}"]
    for r in sorted(s.values, key=canonical_key):
        lines.append(f"{canonical_key(r).hex()} {s.values[r]}")
    for (x, j, N), bit in sorted(s.partitions.items()):
        lines.append(f"p {','.join(map(str, x))} {j} {N} {bit}")
    path.write_text("\n".join(lines) + "\n")
    logger.info(f"Wrote {len(s.values)} rectangle and {len(s.partitions)} partition signs to {path}")


def load_sign_file(path: Union[str, Path], g: Optional[GridDiagram] = None) -> SignAssignment:
    """Read a sign file; with ``g`` the file must cover every rectangle of g."""
    path = Path(path)
    values: Cochain = {}
    partitions: Dict[Tuple[Generator, int, int], int] = {}
    params: Tuple[int, ...] = ()
    for number, raw in enumerate(path.read_text().splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("s_params="):
            bits = line.split("=", 1)[1]
            if any(b not in "01" for b in bits):
                raise ValueError(f"{path}:{number}: bad s_params {bits!r}")
            params = tuple(int(b) for b in bits)
            continue
        try:
            if line.startswith("p "):
                _, x_text, j, N, bit = line.split()
                key = (tuple(int(v) for v in x_text.split(",")), int(j), int(N))
            else:
                key_hex, bit = line.split()
                key = domain_from_key(bytes.fromhex(key_hex))
            value = int(bit)
        except ValueError as e:
            raise ValueError(f"{path}:{number}: {e}") from e
        if value not in (0, 1):
            raise ValueError(f"{path}:{number}: sign must be 0 or 1")
        if isinstance(key, Domain):
            values[key] = value
        else:
            partitions[key] = value

    if g is not None:
        n = g.n
        if len(params) not in (0, n):
            raise ValueError(f"{path}: s_params has {len(params)} bits, grid has n={n}")
        expected = {r for x in all_generators(n) for r in rectangles_from(g, x)}
        missing = expected - set(values)
        if missing:
            raise SignCoverageError(f"{path} lacks {len(missing)} rectangles of the n={n} grid")
        params = params or tuple([0] * n)
    logger.info(f"Loaded {len(values)} rectangle and {len(partitions)} partition signs from {path}")
    return SignAssignment(values, params, "loaded", partitions=partitions)
