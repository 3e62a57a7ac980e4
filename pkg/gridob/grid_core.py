"""Toroidal grid diagrams, generators, domains, rectangles and the Maslov index.

Conventions (all 0-based internally, 1-based in bracket notation and files):

* A generator is a tuple ``perm`` with point ``b`` sitting on the lattice
  point (column line b, row line perm[b]).
* Square (c, r) lies between column lines c and c+1 and row lines r and r+1,
  indices mod n. ``Domain.mult`` stores it at ``c * n + r``.
* Corner defect at lattice point p = (b, a) is
  m(b, a) - m(b-1, a) - m(b, a-1) + m(b-1, a-1) and must equal
  [p in source] - [p in target]. A rectangle therefore has its source points
  at the bottom-left and top-right corners.
"""

import itertools
import random
from dataclasses import dataclass
from functools import cached_property, lru_cache
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

from .errors import CompositionError, DegenerateGridError
from .logger import get_logger

logger = get_logger(__name__)

Generator = Tuple[int, ...]


# ---------- Generators ----------

def parse_bracket(text: str) -> Generator:
    """Parse ``[4231]`` or ``[10,2,...]`` into a 0-based generator."""
    body = text.strip()
    if body.startswith("[") and body.endswith("]"):
        body = body[1:-1]
    if "," in body:
        values = [int(part) for part in body.split(",") if part.strip()]
    else:
        values = [int(ch) for ch in body if not ch.isspace()]
    if sorted(values) != list(range(1, len(values) + 1)):
        raise ValueError(f"Not a permutation in bracket notation: {text!r}")
    return tuple(v - 1 for v in values)


def format_bracket(perm: Sequence[int]) -> str:
    """Render a 0-based generator in 1-based bracket notation."""
    if len(perm) <= 9:
        return "[" + "".join(str(v + 1) for v in perm) + "]"
    return "[" + ",".join(str(v + 1) for v in perm) + "]"


def all_generators(n: int) -> List[Generator]:
    """All n! generators in lexicographic bracket order."""
    if n < 2:
        logger.error(f"Rejected degenerate grid size n={n}")
        raise DegenerateGridError(f"Grid size must be at least 2, got {n}")
    return list(itertools.permutations(range(n)))


def identity_generator(n: int) -> Generator:
    return tuple(range(n))


def swap(perm: Generator, i: int, j: int) -> Generator:
    out = list(perm)
    out[i], out[j] = out[j], out[i]
    return tuple(out)


# ---------- Grid diagrams ----------

@dataclass(frozen=True)
class GridDiagram:
    """A toroidal grid with one O and one X per row and column.

    ``o_pos[c]`` is the row of the O in column c; the O in column j is O_j,
    so V_j is the column-j annulus and H_j is the row-``o_pos[j]`` annulus.
    """
    n: int
    o_pos: Tuple[int, ...]
    x_pos: Tuple[int, ...]

    def __post_init__(self):
        if self.n < 2:
            logger.error(f"Rejected degenerate grid size n={self.n}")
            raise DegenerateGridError(f"Grid size must be at least 2, got {self.n}")
        for name, perm in (("O", self.o_pos), ("X", self.x_pos)):
            if sorted(perm) != list(range(self.n)):
                raise DegenerateGridError(f"{name} markings are not a permutation: {perm}")
        if any(o == x for o, x in zip(self.o_pos, self.x_pos)):
            raise DegenerateGridError("An O and an X share a square")

    @classmethod
    def default(cls, n: int) -> 'GridDiagram':
        """O on the diagonal, X shifted up one row."""
        if n < 2:
            raise DegenerateGridError(f"Grid size must be at least 2, got {n}")
        return cls(n, tuple(range(n)), tuple((c + 1) % n for c in range(n)))

    @classmethod
    def random(cls, n: int, seed: int) -> 'GridDiagram':
        """Random markings drawn from ``random.Random(seed)``."""
        if n < 2:
            raise DegenerateGridError(f"Grid size must be at least 2, got {n}")
        rng = random.Random(seed)
        while True:
            o_pos = list(range(n))
            x_pos = list(range(n))
            rng.shuffle(o_pos)
            rng.shuffle(x_pos)
            if all(o != x for o, x in zip(o_pos, x_pos)):
                return cls(n, tuple(o_pos), tuple(x_pos))

    def marking_of_row(self, r: int) -> int:
        """Index j of the O marking in row r."""
        return self.o_pos.index(r % self.n)

    def has_diagonal_o(self) -> bool:
        return self.o_pos == tuple(range(self.n))


def load_grid_file(path) -> GridDiagram:
    """Read the three-line grid file format (``n=``, ``O=``, ``X=``)."""
    fields: Dict[str, str] = {}
    with open(path, "r") as f:
        for line in f:
            line = line.strip()
            if line and "=" in line:
                key, value = line.split("=", 1)
                fields[key.strip()] = value.strip()
    try:
        n = int(fields["n"])
        return GridDiagram(n, parse_bracket(fields["O"]), parse_bracket(fields["X"]))
    except KeyError as e:
        raise DegenerateGridError(f"Grid file {path} lacks field {e}")


def dump_grid_file(g: GridDiagram, path) -> None:
    with open(path, "w") as f:
        f.write(f"n={g.n}\nO={format_bracket(g.o_pos)}\nX={format_bracket(g.x_pos)}\n")


# ---------- Domains ----------

@dataclass(frozen=True)
class Domain:
    """A positive domain from ``source`` to ``target``."""
    source: Generator
    target: Generator
    mult: Tuple[int, ...]

    @property
    def n(self) -> int:
        return len(self.source)

    def at(self, c: int, r: int) -> int:
        n = self.n
        return self.mult[(c % n) * n + (r % n)]

    @cached_property
    def index(self) -> int:
        return maslov_index(self)

    @cached_property
    def area(self) -> int:
        return sum(self.mult)

    def is_constant(self) -> bool:
        return not any(self.mult)

    def canonical_key(self) -> bytes:
        return canonical_key(self)

    def __repr__(self) -> str:
        return f"Domain({format_bracket(self.source)}->{format_bracket(self.target)}, area={self.area})"


def constant(x: Generator) -> Domain:
    """The constant domain c_x."""
    n = len(x)
    return Domain(tuple(x), tuple(x), (0,) * (n * n))


def canonical_key(d: Domain) -> bytes:
    """Fixed-width big-endian encoding of (n, source, target, mult)."""
    n = d.n
    out = bytearray([n])
    out.extend(d.source)
    out.extend(d.target)
    for m in d.mult:
        out.extend(m.to_bytes(2, "big"))
    return bytes(out)


def domain_from_key(key: bytes) -> Domain:
    n = key[0]
    source = tuple(key[1:1 + n])
    target = tuple(key[1 + n:1 + 2 * n])
    body = key[1 + 2 * n:]
    mult = tuple(int.from_bytes(body[2 * i:2 * i + 2], "big") for i in range(n * n))
    return Domain(source, target, mult)


def _corner_sum(mult: Sequence[int], n: int, b: int, a: int) -> int:
    """Sum of the four squares around lattice point (b, a)."""
    bl, al = (b - 1) % n, (a - 1) % n
    return mult[b * n + a] + mult[bl * n + a] + mult[b * n + al] + mult[bl * n + al]


def is_domain(source: Generator, target: Generator, mult: Sequence[int]) -> bool:
    """Corner-defect condition at every lattice point and nonnegativity."""
    n = len(source)
    if len(target) != n or len(mult) != n * n:
        return False
    if any(m < 0 for m in mult):
        return False
    for b in range(n):
        bl = (b - 1) % n
        for a in range(n):
            al = (a - 1) % n
            defect = (mult[b * n + a] - mult[bl * n + a]
                      - mult[b * n + al] + mult[bl * n + al])
            expected = int(source[b] == a) - int(target[b] == a)
            if defect != expected:
                return False
    return True


def maslov_index(d: Domain) -> int:
    """Average multiplicity at the source and target points, summed."""
    n = d.n
    total = 0
    for b in range(n):
        total += _corner_sum(d.mult, n, b, d.source[b])
        total += _corner_sum(d.mult, n, b, d.target[b])
    assert total % 4 == 0, f"corner sums of {d} not divisible by 4"
    return total // 4


def compose(d: Domain, e: Domain) -> Domain:
    """D * E: add the 2-chains; requires D.target == E.source."""
    if d.target != e.source:
        logger.error(f"Cannot compose {d} with {e}")
        raise CompositionError(
            f"Endpoint mismatch: {format_bracket(d.target)} != {format_bracket(e.source)}")
    return Domain(d.source, e.target, tuple(a + b for a, b in zip(d.mult, e.mult)))


def contains(d: Domain, mult: Sequence[int]) -> bool:
    return all(a >= b for a, b in zip(d.mult, mult))


def minus(mult: Sequence[int], other: Sequence[int]) -> Tuple[int, ...]:
    return tuple(a - b for a, b in zip(mult, other))


# ---------- Rectangles ----------

def _rectangle(x: Generator, i: int, j: int) -> Optional[Domain]:
    """Rectangle with bottom-left at point i of x and top-right at point j, if empty."""
    n = len(x)
    w = (j - i) % n
    h = (x[j] - x[i]) % n
    for k in range(n):
        if k == i or k == j:
            continue
        if 0 < (k - i) % n < w and 0 < (x[k] - x[i]) % n < h:
            return None
    mult = [0] * (n * n)
    for dc in range(w):
        c = (i + dc) % n
        for dr in range(h):
            mult[c * n + (x[i] + dr) % n] = 1
    return Domain(tuple(x), swap(x, i, j), tuple(mult))


@lru_cache(maxsize=None)
def _rectangles_from(x: Generator) -> Tuple[Domain, ...]:
    n = len(x)
    found = []
    for i in range(n):
        for j in range(n):
            if i != j:
                r = _rectangle(x, i, j)
                if r is not None:
                    found.append(r)
    return tuple(found)


@lru_cache(maxsize=None)
def _rectangles_into(y: Generator) -> Tuple[Domain, ...]:
    n = len(y)
    found = []
    for i in range(n):
        for j in range(n):
            if i != j:
                r = _rectangle(swap(y, i, j), i, j)
                if r is not None:
                    found.append(r)
    return tuple(found)


def rectangles_from(g: GridDiagram, x: Generator) -> List[Domain]:
    """Empty rectangles whose bottom-left and top-right corners are points of x.

    Every ordered pair of points is tried, which covers the four torus
    rectangles spanned by each unordered pair.
    """
    return list(_rectangles_from(tuple(x)))


def rectangles_into(g: GridDiagram, y: Generator) -> List[Domain]:
    """Empty rectangles ending at y."""
    return list(_rectangles_into(tuple(y)))


def rectangle_dims(r: Domain) -> Tuple[int, int]:
    """(width, height) of a rectangle."""
    n = r.n
    cols = {c for c in range(n) if any(r.mult[c * n + a] for a in range(n))}
    rows = {a for a in range(n) if any(r.mult[c * n + a] for c in range(n))}
    return len(cols), len(rows)


def rectangle_between(x: Generator, y: Generator, width: int, height: int) -> Optional[Domain]:
    """The empty rectangle from x to y with the given width and height, if any."""
    for r in _rectangles_from(tuple(x)):
        if r.target == tuple(y) and rectangle_dims(r) == (width, height):
            return r
    return None


def front_peels(d: Domain) -> Iterator[Tuple[Domain, Domain]]:
    """Pairs (R, E) with D = R * E."""
    for r in _rectangles_from(d.source):
        if contains(d, r.mult):
            yield r, Domain(r.target, d.target, minus(d.mult, r.mult))


def back_peels(d: Domain) -> Iterator[Tuple[Domain, Domain]]:
    """Pairs (R, E) with D = E * R."""
    for r in _rectangles_into(d.target):
        if contains(d, r.mult):
            yield r, Domain(d.source, r.source, minus(d.mult, r.mult))


@lru_cache(maxsize=None)
def decompositions(d: Domain) -> Tuple[Tuple[Domain, ...], ...]:
    """Every ordered decomposition of D into rectangles."""
    if d.is_constant():
        return ((),) if d.source == d.target else ()
    out = []
    for r, rest in front_peels(d):
        for tail in decompositions(rest):
            out.append((r,) + tail)
    return tuple(out)


# ---------- Annuli ----------

@dataclass(frozen=True)
class Annulus:
    """Label of a width-1 annulus: kind 'V' or 'H', 0-based position and O index."""
    kind: str
    position: int
    marking: int

    def name(self) -> str:
        return f"{self.kind}_{self.marking + 1}"

    def position_name(self) -> str:
        return f"{self.kind}_({self.position + 1})"


@lru_cache(maxsize=None)
def vertical_footprint(n: int, c: int) -> Tuple[int, ...]:
    return tuple(1 if k // n == c % n else 0 for k in range(n * n))


@lru_cache(maxsize=None)
def horizontal_footprint(n: int, r: int) -> Tuple[int, ...]:
    return tuple(1 if k % n == r % n else 0 for k in range(n * n))


def annulus_labels(g: GridDiagram) -> List[Tuple[Tuple[int, ...], Annulus]]:
    """The 2n annulus footprints with their labels, columns first."""
    n = g.n
    labels = [(vertical_footprint(n, c), Annulus("V", c, c)) for c in range(n)]
    labels += [(horizontal_footprint(n, r), Annulus("H", r, g.marking_of_row(r))) for r in range(n)]
    return labels


def annuli(g: GridDiagram) -> List[Tuple[Domain, Annulus]]:
    """Every annulus from every generator to itself, labeled."""
    out = []
    for x in all_generators(g.n):
        for footprint, label in annulus_labels(g):
            out.append((Domain(x, x, footprint), label))
    return out


def annulus_of(g: GridDiagram, d: Domain) -> Optional[Annulus]:
    """The label of D if D is a width-1 annulus, else None."""
    if d.source != d.target:
        return None
    for footprint, label in annulus_labels(g):
        if d.mult == footprint:
            return label
    return None


# ---------- Shapes ----------

def is_planar(d: Domain) -> bool:
    """True if D avoids the topmost row and the rightmost column."""
    n = d.n
    return not any(d.at(n - 1, a) for a in range(n)) and not any(d.at(c, n - 1) for c in range(n))


def classify_index2(d: Domain) -> str:
    """One of 'annulus', 'disjoint', 'overlapping', 'hexagon'."""
    moved = sum(1 for a, b in zip(d.source, d.target) if a != b)
    if moved == 0:
        return "annulus"
    if moved == 3:
        return "hexagon"
    return "overlapping" if max(d.mult) >= 2 else "disjoint"


@dataclass
class LevelGraphAudit:
    """Vertex counts of the peel graph of an index-3 domain."""
    level2: int
    level1: int
    down_degrees: List[int]
    up_degrees: List[int]
    boundary_index2_terms: int
    has_annulus_subdomain: bool

    @property
    def balanced(self) -> bool:
        return self.level2 == self.level1


def level_graph_audit(e: Domain) -> LevelGraphAudit:
    """Level-2 vertices are front remainders E = R * E2; level-1 are back remainders E = E1 * R."""
    level2 = {rest for _, rest in front_peels(e)}
    level1 = {rest for _, rest in back_peels(e)}
    down = [len(decompositions(v)) for v in sorted(level2, key=canonical_key)]
    up = [len(decompositions(v)) for v in sorted(level1, key=canonical_key)]
    terms = sum(1 for _ in front_peels(e)) + sum(1 for _ in back_peels(e))
    has_annulus = any(v.source == v.target for v in level2 | level1)
    return LevelGraphAudit(len(level2), len(level1), down, up, terms, has_annulus)


# ---------- Text format ----------

def domain_to_text(d: Domain) -> str:
    """Header ``from=[..] to=[..]`` then rows, top row first."""
    n = d.n
    lines = [f"from={format_bracket(d.source)} to={format_bracket(d.target)}"]
    for a in reversed(range(n)):
        lines.append(" ".join(str(d.at(c, a)) for c in range(n)))
    return "\n".join(lines)


def domain_from_text(text: str) -> Domain:
    lines = [line for line in text.strip().splitlines() if line.strip()]
    header = lines[0].split()
    source = parse_bracket(header[0].split("=", 1)[1])
    target = parse_bracket(header[1].split("=", 1)[1])
    n = len(source)
    rows = [[int(v) for v in line.split()] for line in lines[1:1 + n]]
    mult = [0] * (n * n)
    for offset, row in enumerate(rows):
        a = n - 1 - offset
        for c, value in enumerate(row):
            mult[c * n + a] = value
    if not is_domain(source, target, mult):
        raise ValueError(f"Text block is not a positive domain:\n{text}")
    return Domain(source, target, tuple(mult))

