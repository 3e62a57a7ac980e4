"""Command-line front end: cd, signs, cdp, witness and report."""

import argparse
import json
import sys
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional

from . import __version__
from . import chain_engine as ce
from .cd_complex import CdComplex, marking_independence_audit
from .cdp_complex import CdpComplex, Window, census
from .config import REPORT_SCHEMA, RunConfig, load_config, validate_config
from .errors import CompletionError, ComplexError, ConfigError, GridObError
from .grid_core import GridDiagram, format_bracket, load_grid_file, parse_bracket
from .logger import get_logger, setup_logging
from .sign_assign import (
    SignAssignment, dump_sign_file, extend_sign_cdp, gauge_normalize, load_sign_file,
    partition_sign_induction_check, solve_sign_cd, verify_rules,
)
from .witnesses import (
    build_U, expected_family_size, homology_class_check, named_rectangle_audit,
    obstruction_count, obstruction_of_U, rank_bound, run_witness_suite,
)

logger = get_logger(__name__)

EXIT_PASS = 0
EXIT_FAIL = 1
EXIT_USAGE = 2


class Checks:
    """Collects named pass/fail assertions and prints them as they arrive."""

    def __init__(self):
        self.items: List[Dict[str, Any]] = []

    def add(self, name: str, passed: bool, detail: Any = None) -> bool:
        mark = "✓" if passed else "✗"
        line = f"{mark} {name}" + (f": {detail}" if detail is not None else "")
        print(line)
        (logger.debug if passed else logger.error)(line)
        self.items.append({"name": name, "passed": bool(passed), "detail": detail})
        return passed

    @property
    def passed(self) -> bool:
        return all(item["passed"] for item in self.items)


def build_grid(config: RunConfig) -> GridDiagram:
    if config.grid_file:
        return load_grid_file(Path(config.grid_file).expanduser())
    if config.random_markings is not None:
        return GridDiagram.random(config.n, config.random_markings)
    if config.o_perm:
        return GridDiagram(config.n, parse_bracket(config.o_perm), parse_bracket(config.x_perm))
    return GridDiagram.default(config.n)


def _rings(config: RunConfig) -> List[str]:
    return [ce.F2, ce.Z] if config.ring == "both" else [config.ring]


def _signs(config: RunConfig, g: GridDiagram, cd: CdComplex) -> SignAssignment:
    if config.sign_file:
        return load_sign_file(Path(config.sign_file).expanduser(), g)
    return gauge_normalize(solve_sign_cd(g, cd), g)


def _polynomial_pattern(K: int) -> List[int]:
    """Ranks of F[U] with U in grading 2, up to grading K-1."""
    return [1 if k % 2 == 0 else 0 for k in range(K)]


# ---------- Subcommands ----------

def cmd_cd(config: RunConfig, g: GridDiagram, checks: Checks) -> Dict[str, Any]:
    """∂² over both rings, and homology of CD_* against the polynomial pattern."""
    cd = CdComplex(g, max(config.K, 2), config.threads)
    out: Dict[str, Any] = {"counts": {k: len(v) for k, v in cd.levels.items()}}
    expected = _polynomial_pattern(cd.K)
    signs = None
    for ring in (ce.F2, ce.Z):
        if ring == ce.Z:
            signs = _signs(config, g, cd)
        complex_ = cd.to_graded_complex(ring, signs, check_square=False)
        try:
            ce.check_square_zero(complex_)
            witness = None
        except ComplexError as e:
            witness = repr(e.witness)
        checks.add(f"CD ∂² = 0 over {ring}", witness is None, witness)
        out[f"square_zero_{ring}"] = witness is None
        if ring not in _rings(config):
            continue
        report = ce.homology_report(complex_, range(cd.K))
        ranks = [report.ranks[k] for k in sorted(report.ranks)]
        torsion = [t for k in sorted(report.torsion) for t in report.torsion[k]]
        checks.add(f"CD homology over {ring}", ranks == expected and not torsion, ranks)
        out[ring] = report.to_json()

    if config.audit_markings:
        seeds = [config.random_markings or 0, (config.random_markings or 0) + 1]
        audit = marking_independence_audit(g.n, seeds, cd.K)
        same = all(r["ranks"] == expected for r in audit.values())
        checks.add("CD homology under random markings", same,
                   {seed: r["ranks"] for seed, r in audit.items()})
        solvable = all(r["annulus_cochains"] for r in audit.values())
        checks.add("annulus cochains f_j solvable under random markings", solvable)
        out["marking_audit"] = {str(k): v for k, v in audit.items()}
    return out


def cmd_signs(config: RunConfig, g: GridDiagram, checks: Checks) -> Dict[str, Any]:
    """Solve or load signs, verify both rule sets and save the assignment."""
    cd = CdComplex(g, max(config.K, 2), config.threads)
    s = _signs(config, g, cd)
    if s.unique is not None:
        checks.add("sign assignment unique up to gauge", s.unique)
    cd_report = verify_rules(s, g, cd=cd, threads=config.threads)
    checks.add("CD sign rules", cd_report.ok, cd_report.summary())

    window = Window(K=2, Nmax=max(config.Nmax, 2))
    if s.partitions:
        extended = s
    else:
        extended = extend_sign_cdp(s, config.s_param_bits(), window.Nmax)
    cdp = CdpComplex(g, window, cd.levels, config.threads)
    cdp_report = verify_rules(extended, g, cdp=cdp)
    bits = "".join(map(str, extended.s_params))
    checks.add(f"CDP sign rules (s_params={bits})", cdp_report.ok,
               cdp_report.summary())
    mismatches = partition_sign_induction_check(extended, g, window.Nmax)
    checks.add("partition signs agree with the grading-2 relations", not mismatches,
               len(mismatches))

    out = {
        "rectangles": len(s.values),
        "ones": s.ones(),
        "provenance": s.provenance,
        "cd_rules": cd_report.checked,
        "cdp_rules": cdp_report.checked,
    }
    if config.output:
        path = Path(config.output).with_suffix(".signs")
        dump_sign_file(extended, path)
        out["sign_file"] = str(path)
    return out


def cmd_cdp(config: RunConfig, g: GridDiagram, checks: Checks) -> Dict[str, Any]:
    """∂² sweeps, census, witnesses and the rank certification table."""
    if g.n < 4:
        logger.info(f"n={g.n}: families F and G are empty" + (", C, D and E as well" if g.n < 3 else ""))
    cd = CdComplex(g, max(config.K, 2), config.threads)
    window = Window(config.K, config.Nmax)
    cdp = CdpComplex(g, window, cd.levels, config.threads)
    out: Dict[str, Any] = {
        "counts": {k: len(v) for k, v in cdp.levels.items()},
        "census": census(cdp),
    }

    f2_failures = cdp.square_zero_sweep(ce.F2, raise_on_failure=False)
    checks.add("CDP ∂² = 0 over f2", not f2_failures, len(f2_failures))
    if ce.Z in _rings(config):
        s = extend_sign_cdp(_signs(config, g, cd), config.s_param_bits())
        z_failures = cdp.square_zero_sweep(ce.Z, s, raise_on_failure=False)
        checks.add("CDP ∂² = 0 over z", not z_failures, len(z_failures))
        bad = cdp.compatibility_sweep(s)
        checks.add("signed boundary reduces to the f2 boundary", not bad, len(bad))

    gradings = [k for k in range(4) if k < config.K]
    suite = run_witness_suite(g, cd, cdp, gradings=gradings)
    table = []
    for k, ws in suite.items():
        bound = rank_bound(g.n, k)
        certified = ws.ok and ws.lower_bound == bound
        checks.add(f"H_{k}(CDP) rank certified", certified, f"{ws.lower_bound} of {bound}")
        table.append({"grading": k, "lower_bound": ws.lower_bound, "rank_bound": bound,
                      "certified": certified})
    out["witnesses"] = [ws.to_json(g.n) for ws in suite.values()]
    out["ranks"] = table
    return out


def cmd_witness(config: RunConfig, g: GridDiagram, checks: Checks) -> Dict[str, Any]:
    """U in CD_* and the named-rectangle cancellation audit."""
    cd = CdComplex(g, max(config.K, 3), config.threads)
    try:
        build_U(g, cd)
        residue = 0
    except CompletionError as e:
        residue = len(e.residue)
    checks.add("U families close without completion", residue == 0,
               f"{residue} rectangles left" if residue else None)
    u = build_U(g, cd, complete=True)
    checks.add("U family size", u.formula_terms == expected_family_size(g.n), u.formula_terms)
    result = homology_class_check(g, cd, u)
    checks.add("U is a cycle", result["is_cycle"])
    checks.add("r(U) = 1", result["r_of_U"])
    checks.add("U is not a boundary", result.get("not_boundary", False))
    family_t = obstruction_count(g, u.families.values())
    checks.add("T(U) = 0", obstruction_of_U(g, u) == 0, f"{family_t} on the families")
    out: Dict[str, Any] = {
        "U": {"formula_terms": u.formula_terms, "completion_terms": u.completion_terms,
              "families": sorted(u.families)},
    }
    if g.n >= 4:
        audit = named_rectangle_audit(g)
        checks.add("named rectangle formulas give rectangles", not audit.formula_failures,
                   audit.formula_failures or None)
        checks.add("named rectangles occur exactly twice", not audit.unpaired,
                   audit.unpaired or None)
        checks.add("named rectangles cancel between the expected families",
                   not audit.partner_mismatches, sorted(audit.partner_mismatches) or None)
        out["named_rectangles"] = {
            "paired": len(audit.paired),
            "total": len(audit.occurrences),
            "formula_failures": audit.formula_failures,
            "unpaired": audit.unpaired,
            "partner_mismatches": audit.partner_mismatches,
            "partners": audit.partners,
        }
    return out


def cmd_report(config: RunConfig, g: GridDiagram, checks: Checks) -> Dict[str, Any]:
    return {name: fn(config, g, checks) for name, fn in COMMANDS.items() if name != "report"}


COMMANDS: Dict[str, Callable[[RunConfig, GridDiagram, Checks], Dict[str, Any]]] = {
    "cd": cmd_cd,
    "signs": cmd_signs,
    "cdp": cmd_cdp,
    "witness": cmd_witness,
    "report": cmd_report,
}


# ---------- Entry point ----------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gridob", description=__doc__)
    parser.add_argument("--version", action="version", version=f"gridob {__version__}")
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", help="YAML run configuration")
    parser.add_argument("--n", type=int)
    parser.add_argument("--o-perm", dest="o_perm", help="O rows in bracket notation, e.g. [123]")
    parser.add_argument("--x-perm", dest="x_perm")
    parser.add_argument("--grid-file", dest="grid_file", help="grid file with n=, O= and X= lines")
    parser.add_argument("--random-markings", dest="random_markings", type=int, metavar="SEED")
    parser.add_argument("--K", type=int, help="grading cap")
    parser.add_argument("--Nmax", type=int, help="cap on each N_j")
    parser.add_argument("--ring", choices=["f2", "z", "both"])
    parser.add_argument("--s-params", dest="s_params", help="bit string s_1..s_n")
    parser.add_argument("--sign-file", dest="sign_file")
    parser.add_argument("--output", help="JSON report path")
    parser.add_argument("--threads", type=int)
    parser.add_argument("--audit-markings", dest="audit_markings", action="store_true", default=None)
    parser.add_argument("--debug", action="store_true", default=None)
    return parser


def resolve_config(args: argparse.Namespace) -> RunConfig:
    """YAML file (if given) overridden by explicit flags."""
    if args.config and not Path(args.config).exists():
        raise ConfigError(f"Config file does not exist: {args.config}")
    config = load_config(Path(args.config)) if args.config else RunConfig()
    data = config.to_dict()
    for key in data:
        value = getattr(args, key, None)
        if value is not None:
            data[key] = value
    return RunConfig.from_dict(data)


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = resolve_config(args)
    except ConfigError as e:
        print(f"✗ {e}", file=sys.stderr)
        return EXIT_USAGE
    recorder = setup_logging(debug=config.debug, run=args.command)

    valid, error = validate_config(config)
    if not valid:
        logger.error(f"Invalid configuration: {error}")
        print(f"✗ {error}", file=sys.stderr)
        return EXIT_USAGE

    checks = Checks()
    try:
        g = build_grid(config)
        logger.info(f"Grid n={g.n} O={format_bracket(g.o_pos)} X={format_bracket(g.x_pos)}")
        results = COMMANDS[args.command](config, g, checks)
    except GridObError as e:
        logger.error(f"{args.command} failed: {e}", exc_info=True)
        checks.add(f"{args.command} completed", False, str(e))
        results = {}

    report = {
        "schema": REPORT_SCHEMA,
        "version": __version__,
        "command": args.command,
        "config": config.to_dict(),
        "checks": checks.items,
        "results": results,
        "passed": checks.passed,
        "log": recorder.records,
    }
    failed = sum(not item["passed"] for item in checks.items)
    logger.info(f"{args.command}: {len(checks.items) - failed} of {len(checks.items)} checks passed")
    if config.output:
        path = Path(config.output)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(report, indent=2, default=str) + "\n")
        logger.info(f"Report written to {path}")
    return EXIT_PASS if checks.passed else EXIT_FAIL
