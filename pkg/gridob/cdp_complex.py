"""The complex CDP_* of domains with ordered partitions.

A generator is a triple (D, N, λ): a positive domain, a vector of
multiplicities N_j and one ordered partition λ_j of each N_j. The
differential removes rectangles (type I), removes an annulus through O_j
while enlarging λ_j (type II), coarsens a partition (type III) or reduces
it from either end (type IV).
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from itertools import product
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

from . import chain_engine as ce
from .cd_complex import enumerate_cd
from .errors import ComplexError, SignCoverageError
from .grid_core import (
    Domain, GridDiagram, back_peels, canonical_key, contains, domain_from_text,
    domain_to_text, front_peels, horizontal_footprint, minus, vertical_footprint,
)
from .logger import get_logger

logger = get_logger(__name__)


@dataclass(frozen=True)
class OrderedPartition:
    """An ordered tuple of positive parts; the empty tuple partitions 0."""
    parts: Tuple[int, ...] = ()

    def __post_init__(self):
        if any(p <= 0 for p in self.parts):
            raise ValueError(f"Partition parts must be positive: {self.parts}")

    def __len__(self) -> int:
        return len(self.parts)

    @property
    def N(self) -> int:
        return sum(self.parts)

    def epsilon(self) -> Tuple[int, ...]:
        """Cut vector in {0,1}^(N-1): entry i is 1 when a part ends after i."""
        cuts = set()
        total = 0
        for p in self.parts[:-1]:
            total += p
            cuts.add(total)
        return tuple(1 if i in cuts else 0 for i in range(1, self.N))

    @classmethod
    def from_epsilon(cls, N: int, eps: Sequence[int]) -> 'OrderedPartition':
        if N == 0:
            return cls(())
        if len(eps) != N - 1:
            raise ValueError(f"Cut vector for N={N} needs {N - 1} entries, got {len(eps)}")
        parts, run = [], 1
        for bit in eps:
            if bit:
                parts.append(run)
                run = 1
            else:
                run += 1
        parts.append(run)
        return cls(tuple(parts))

    def unit_enlargements(self) -> List[Tuple[int, 'OrderedPartition']]:
        """(k, λ') with a 1 inserted at 1-based position k, for k = 1..m+1."""
        return [(k, OrderedPartition(self.parts[:k - 1] + (1,) + self.parts[k - 1:]))
                for k in range(1, len(self.parts) + 2)]

    def elementary_coarsenings(self) -> List[Tuple[int, 'OrderedPartition']]:
        """(k, λ') merging parts k and k+1 (1-based)."""
        p = self.parts
        return [(k, OrderedPartition(p[:k - 1] + (p[k - 1] + p[k],) + p[k + 1:]))
                for k in range(1, len(p))]

    def initial_reduction(self) -> Optional['OrderedPartition']:
        return OrderedPartition(self.parts[1:]) if self.parts else None

    def final_reduction(self) -> Optional['OrderedPartition']:
        return OrderedPartition(self.parts[:-1]) if self.parts else None

    def __repr__(self) -> str:
        return f"({','.join(map(str, self.parts))})"


def partition_moves(lam: OrderedPartition) -> Dict[str, List[OrderedPartition]]:
    """The four move sets of a partition; reductions are empty for N = 0."""
    return {
        "UE": [p for _, p in lam.unit_enlargements()],
        "EC": [p for _, p in lam.elementary_coarsenings()],
        "IR": [lam.initial_reduction()] if lam else [],
        "FR": [lam.final_reduction()] if lam else [],
    }


EMPTY = OrderedPartition(())


@dataclass(frozen=True)
class PartitionTriple:
    """A CDP generator (D, N, λ)."""
    domain: Domain
    nvec: Tuple[int, ...]
    lambdas: Tuple[OrderedPartition, ...]

    @property
    def grading(self) -> int:
        return self.domain.index + self.total_length

    @property
    def total_length(self) -> int:
        return sum(len(lam) for lam in self.lambdas)

    def canonical_key(self) -> bytes:
        out = bytearray(canonical_key(self.domain))
        for N, lam in zip(self.nvec, self.lambdas):
            out.extend(N.to_bytes(2, "big"))
            out.append(len(lam))
            for p in lam.parts:
                out.extend(p.to_bytes(2, "big"))
        return bytes(out)

    def __repr__(self) -> str:
        return f"({self.domain!r}, N={list(self.nvec)}, λ={list(self.lambdas)})"


def make_triple(domain: Domain, lambdas: Sequence[OrderedPartition]) -> PartitionTriple:
    """Triple with N read off the partitions."""
    lambdas = tuple(lambdas)
    if len(lambdas) != domain.n:
        raise ValueError(f"Need {domain.n} partitions, got {len(lambdas)}")
    return PartitionTriple(domain, tuple(lam.N for lam in lambdas), lambdas)


def plain(domain: Domain) -> PartitionTriple:
    """(D, 0, 0)."""
    return make_triple(domain, [EMPTY] * domain.n)


def single(domain: Domain, j: int, parts: Sequence[int]) -> PartitionTriple:
    """(D, N e_j, (parts)) with every other partition empty."""
    lambdas = [EMPTY] * domain.n
    lambdas[j] = OrderedPartition(tuple(parts))
    return make_triple(domain, lambdas)


@dataclass
class Window:
    """Enumeration caps: gradings up to K and every N_j up to Nmax."""
    K: int = 4
    Nmax: int = 4

    def __post_init__(self):
        if self.K < 0 or self.Nmax < 0:
            raise ValueError(f"Window caps must be nonnegative: K={self.K}, Nmax={self.Nmax}")
        if self.Nmax < self.K:
            logger.warning(f"Nmax={self.Nmax} < K={self.K}; some witnesses will not fit the window")

    def contains(self, t: PartitionTriple) -> bool:
        return t.grading <= self.K and all(N <= self.Nmax for N in t.nvec)


# ---------- Enumeration ----------

@lru_cache(maxsize=None)
def _compositions(length: int, Nmax: int) -> Tuple[OrderedPartition, ...]:
    """Partitions with exactly ``length`` parts and N <= Nmax."""
    if length == 0:
        return (EMPTY,)
    out = []

    def grow(prefix, room):
        if len(prefix) == length:
            out.append(OrderedPartition(tuple(prefix)))
            return
        left = length - len(prefix) - 1
        for p in range(1, room - left + 1):
            grow(prefix + [p], room - p)

    grow([], Nmax)
    return tuple(out)


def _length_vectors(n: int, L: int) -> Iterator[Tuple[int, ...]]:
    if n == 1:
        yield (L,)
        return
    for first in range(L + 1):
        for rest in _length_vectors(n - 1, L - first):
            yield (first,) + rest


def enumerate_cdp(g: GridDiagram, window: Window,
                  cd_levels: Optional[Dict[int, List[Domain]]] = None) -> Dict[int, List[PartitionTriple]]:
    """
    Every triple with grading <= K and all N_j <= Nmax, by grading.

    Args:
        g: the grid diagram
        window: enumeration caps
        cd_levels: CD_* bases up to grading K, enumerated if omitted
    """
    levels = cd_levels if cd_levels is not None else enumerate_cd(g, window.K)
    n = g.n
    out: Dict[int, List[PartitionTriple]] = {}
    for k in range(window.K + 1):
        found = []
        for mu in range(k + 1):
            L = k - mu
            shapes = [combo for lengths in _length_vectors(n, L)
                      for combo in product(*(_compositions(l, window.Nmax) for l in lengths))]
            for d in levels.get(mu, []):
                for combo in shapes:
                    found.append(make_triple(d, combo))
        out[k] = sorted(found, key=ce.sort_key)
        logger.info(f"CDP_{k}: {len(out[k])} triples (n={n}, Nmax={window.Nmax})")
    return out


# ---------- Differential ----------

def _with(t: PartitionTriple, domain: Domain, j: int, lam: OrderedPartition) -> PartitionTriple:
    lambdas = t.lambdas[:j] + (lam,) + t.lambdas[j + 1:]
    nvec = t.nvec[:j] + (lam.N,) + t.nvec[j + 1:]
    return PartitionTriple(domain, nvec, lambdas)


def _signed_terms(g: GridDiagram, t: PartitionTriple, s=None) -> Iterator[Tuple[PartitionTriple, int]]:
    """Every boundary term with its sign exponent; exponents are 0 when s is None."""
    d = t.domain
    n = g.n
    mu = d.index if s is not None else 0

    def sv(r):
        return s.value(r) if s is not None else 0

    def sj(j):
        return s.param(j) if s is not None else 0

    for r, rest in front_peels(d):
        yield PartitionTriple(rest, t.nvec, t.lambdas), sv(r)
    for r, rest in back_peels(d):
        yield PartitionTriple(rest, t.nvec, t.lambdas), mu + sv(r)

    pre = 0
    for j in range(n):
        lam = t.lambdas[j]
        for extra, footprint in ((0, vertical_footprint(n, j)), (1, horizontal_footprint(n, g.o_pos[j]))):
            if not contains(d, footprint):
                continue
            rest = Domain(d.source, d.target, minus(d.mult, footprint))
            for k, new in lam.unit_enlargements():
                yield _with(t, rest, j, new), mu + pre + extra + k + 1
        for k, new in lam.elementary_coarsenings():
            yield _with(t, d, j, new), mu + pre + k
        if lam:
            yield _with(t, d, j, lam.initial_reduction()), mu + pre + lam.parts[0] * sj(j)
            yield _with(t, d, j, lam.final_reduction()), mu + pre + len(lam) + lam.parts[-1] * sj(j)
        pre += len(lam)


def boundary_cdp_f2(g: GridDiagram, t: PartitionTriple) -> ce.Chain:
    """The full F2 boundary; no term is dropped for exceeding a window."""
    out: ce.Chain = {}
    for term, _ in _signed_terms(g, t):
        out[term] = out.get(term, 0) ^ 1
    return {k: v for k, v in out.items() if v}


def boundary_cdp_z(g: GridDiagram, t: PartitionTriple, s) -> ce.Chain:
    """The full signed boundary for a CDP sign assignment ``s``."""
    if len(s.s_params) != g.n:
        raise SignCoverageError(f"Sign assignment has {len(s.s_params)} s_params, grid has n={g.n}")
    out: ce.Chain = {}
    for term, exponent in _signed_terms(g, t, s):
        out[term] = out.get(term, 0) + (-1 if exponent % 2 else 1)
    return {k: v for k, v in out.items() if v}


# ---------- Complex ----------

class CdpComplex:
    """Windowed CDP_* with cached F2 boundaries."""

    def __init__(self, g: GridDiagram, window: Window, cd_levels=None, threads: int = 1):
        self.g = g
        self.window = window
        self.threads = threads
        self.levels = enumerate_cdp(g, window, cd_levels)
        self._f2_cache: Dict[PartitionTriple, ce.Chain] = {}

    def basis(self, k: int) -> List[PartitionTriple]:
        return self.levels.get(k, [])

    def boundary_f2(self, t: PartitionTriple) -> ce.Chain:
        cached = self._f2_cache.get(t)
        if cached is None:
            cached = boundary_cdp_f2(self.g, t)
            self._f2_cache[t] = cached
        return cached

    def boundary_z(self, t: PartitionTriple, s) -> ce.Chain:
        return boundary_cdp_z(self.g, t, s)

    def _boundary_fn(self, ring: str, signs):
        if ring == ce.F2:
            return self.boundary_f2
        if signs is None:
            raise ValueError("CDP over Z needs a sign assignment")
        return lambda t: boundary_cdp_z(self.g, t, signs)

    def to_graded_complex(self, ring: str = ce.F2, signs=None, gradings=None) -> ce.GradedComplex:
        """Window matrices; terms outside the N cap are dropped, so ∂² is not checked here."""
        keep = sorted(gradings) if gradings is not None else sorted(self.levels)
        bases = {k: self.levels[k] for k in keep}
        return ce.assemble(bases, self._boundary_fn(ring, signs), ring,
                           filter_outside=True, check_square=False, threads=self.threads)

    def homology(self, ring: str = ce.F2, signs=None) -> ce.HomologyReport:
        """Homology of the truncated window. Diagnostic only."""
        complex_ = self.to_graded_complex(ring, signs)
        report = ce.homology_report(complex_, range(self.window.K))
        logger.warning("CDP window homology is a truncation diagnostic, not the homology of CDP_*")
        return report

    def square_zero_sweep(self, ring: str = ce.F2, signs=None,
                          raise_on_failure: bool = True) -> List[Tuple[PartitionTriple, ce.Chain]]:
        """
        Apply the untruncated boundary twice to every window triple.

        Returns:
            (triple, residue) for every triple with ∂∂ != 0
        """
        boundary = (lambda t: boundary_cdp_f2(self.g, t)) if ring == ce.F2 else self._boundary_fn(ring, signs)

        def residue(t):
            return t, ce.boundary_of_chain(boundary, boundary(t), ring)

        triples = [t for k in sorted(self.levels) if k >= 2 for t in self.levels[k]]
        if self.threads > 1:
            with ThreadPoolExecutor(max_workers=self.threads) as pool:
                results = list(pool.map(residue, triples))
        else:
            results = [residue(t) for t in triples]
        failures = [(t, r) for t, r in results if r]
        logger.info(f"∂² sweep over {ring}: {len(triples)} triples, {len(failures)} failures")
        if failures and raise_on_failure:
            t, r = failures[0]
            raise ComplexError(f"∂² is nonzero on {t}", t, r)
        return failures

    def compatibility_sweep(self, signs) -> List[PartitionTriple]:
        """Triples whose signed boundary does not reduce to the F2 boundary."""
        bad = [t for k in sorted(self.levels) if k >= 1 for t in self.levels[k]
               if ce.reduce_mod2(boundary_cdp_z(self.g, t, signs)) != boundary_cdp_f2(self.g, t)]
        if bad:
            logger.error(f"{len(bad)} triples have Z boundaries that do not reduce mod 2")
        return bad


# ---------- Census ----------

def case_label(t: PartitionTriple) -> str:
    """Domain kind and the lengths of the nonempty partitions, e.g. 'R|1,1'."""
    mu = t.domain.index
    kind = "c" if mu == 0 else "R" if mu == 1 else f"D{mu}"
    lengths = sorted((len(lam) for lam in t.lambdas if lam), reverse=True)
    return f"{kind}|{','.join(map(str, lengths))}"


def census(cdp: CdpComplex, gradings: Sequence[int] = (0, 1, 2, 3)) -> Dict[int, Dict[str, int]]:
    """Counts of window triples per grading and case."""
    out: Dict[int, Dict[str, int]] = {}
    for k in gradings:
        counts: Dict[str, int] = {}
        for t in cdp.basis(k):
            label = case_label(t)
            counts[label] = counts.get(label, 0) + 1
        out[k] = dict(sorted(counts.items()))
    return out


# ---------- Text format ----------

def triple_to_text(t: PartitionTriple) -> str:
    lams = ";".join(",".join(map(str, lam.parts)) for lam in t.lambdas)
    return f"{domain_to_text(t.domain)}\nN=[{','.join(map(str, t.nvec))}]\nL=[{lams}]"


def triple_from_text(text: str) -> PartitionTriple:
    lines = [line for line in text.strip().splitlines() if line.strip()]
    domain = domain_from_text("\n".join(lines[:-2]))
    nvec = tuple(int(v) for v in lines[-2].strip()[3:-1].split(",") if v)
    lambdas = tuple(OrderedPartition(tuple(int(p) for p in chunk.split(",") if p))
                    for chunk in lines[-1].strip()[3:-1].split(";"))
    t = make_triple(domain, lambdas)
    if t.nvec != nvec:
        raise ValueError(f"N={list(nvec)} does not match the partitions {list(lambdas)}")
    return t
