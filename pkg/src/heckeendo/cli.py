"""
Command line front end.

Every subcommand takes the case options (``--preset`` or ``--type``,
``--rank``, ``--parabolic``, ``--lattice``, ``--prime``); a key-value
``--config`` file supplies defaults that flags override. Reports are
JSON with sorted keys, so identical inputs give byte-identical output;
wall-clock timings are only included with ``--timings``.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

from . import __version__
from .endosolve import (OracleRefused, PropagationMismatch, diagonal_congruence, first_column_space,
                        format_expr, idempotent_oracle, propagate_blocks, symbolic_entries)
from .goldens import CASES, run_goldens
from .linalg import is_prime
from .localized import (cleared_system, convolution_idempotent_system, invariance_constraints,
                        membership_check, perm_module_endos)
from .nilhecke import FixedPointFunction, check_simply_laced, torsion_products
from .polyring import LATTICE_PRESETS, LatticeError, homogeneous_image, lattice_preset, parse_lattice_file
from .rootsys import RootSystemError, build_root_system, minimal_coset_reps

SCHEMA_VERSION = 1

# symbolic entries are listed only up to this many classes
SYMBOLIC_LIMIT = 10


class ConfigError(ValueError):
    pass


@dataclass
class CaseConfig:
    type_label: str = "A"
    rank: int = 2
    parabolic: tuple[int, ...] = (2,)
    lattice: str = "root"
    prime: int | None = 2
    oracle: bool = False
    oracle_cap: int = 22
    localized: bool = False
    timings: bool = False
    preset: str | None = None

    def validate(self) -> None:
        if self.prime is not None and not is_prime(self.prime):
            raise ConfigError(f"--prime {self.prime} is not prime")
        bad = [i for i in self.parabolic if not 1 <= i <= self.rank]
        if bad:
            raise ConfigError(f"parabolic indices {bad} outside 1..{self.rank}")

    def echo(self) -> dict:
        d = asdict(self)
        d["parabolic"] = list(self.parabolic)
        del d["timings"]
        return d


def _parse_list(text: str) -> tuple[int, ...]:
    text = text.strip()
    if not text or text.lower() in ("none", "-"):
        return ()
    try:
        return tuple(sorted({int(x) for x in text.split(",") if x.strip()}))
    except ValueError:
        raise ConfigError(f"bad index list {text!r}") from None


def _parse_prime(text: str) -> int | None:
    if str(text).strip().lower() in ("z", "int", "integers", "0", "none"):
        return None
    try:
        return int(text)
    except ValueError:
        raise ConfigError(f"bad coefficient ring {text!r}; use a prime or Z") from None


def _parse_bool(text: str) -> bool:
    return str(text).strip().lower() in ("1", "true", "yes", "on")


_KEYS = {
    "type": ("type_label", str),
    "rank": ("rank", int),
    "parabolic": ("parabolic", _parse_list),
    "lattice": ("lattice", str),
    "prime": ("prime", _parse_prime),
    "oracle": ("oracle", _parse_bool),
    "oracle_cap": ("oracle_cap", int),
    "oracle-cap": ("oracle_cap", int),
    "localized": ("localized", _parse_bool),
    "timings": ("timings", _parse_bool),
    "preset": ("preset", str),
}


def read_config_file(path: str) -> dict:
    out = {}
    for n, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip()
        if not sep or key not in _KEYS:
            raise ConfigError(f"{path}:{n}: cannot read {line!r}")
        out[key] = value.strip()
    return out


def preset_config(name: str) -> CaseConfig:
    if name not in CASES:
        raise ConfigError(f"unknown preset {name!r}; see list-presets")
    c = CASES[name]
    return CaseConfig(type_label=c.type_label, rank=c.rank, parabolic=c.parabolic,
                      lattice=c.lattice, prime=c.prime, preset=name)


def build_config(args: argparse.Namespace) -> CaseConfig:
    raw = read_config_file(args.config) if getattr(args, "config", None) else {}
    for key in _KEYS:
        attr = key.replace("-", "_")
        val = getattr(args, attr, None)
        if val is not None and val is not False:
            raw[key] = val if isinstance(val, str) else str(val)
    preset = raw.pop("preset", None)
    cfg = preset_config(preset) if preset else CaseConfig()
    for key, val in raw.items():
        attr, conv = _KEYS[key]
        cfg = replace(cfg, **{attr: conv(val)})
    cfg.validate()
    return cfg


def load_lattice(name: str, system):
    if name in LATTICE_PRESETS:
        return lattice_preset(name, system)
    path = Path(name)
    if path.is_file():
        return parse_lattice_file(path.read_text(), system, name=path.stem)
    raise ConfigError(f"unknown lattice {name!r}: not a preset and not a file")


def setup(cfg: CaseConfig):
    rs = build_root_system(cfg.type_label, cfg.rank)
    cs = minimal_coset_reps(rs, cfg.parabolic)
    L = load_lattice(cfg.lattice, rs)
    return rs, cs, L


# --- report pieces ---------------------------------------------------------

def coset_summary(cs) -> dict:
    names = cs.names()
    return {
        "size": len(cs),
        "classes": [{"name": n, "length": cs.length(i)} for i, n in enumerate(names)],
        "hasse_edges": [[names[v], j, names[u]] for v, j, u in cs.hasse_edges],
        "double_cosets": [[names[m] for m in blk.members] for blk in cs.double_cosets],
    }


def localized_summary(cs, L) -> dict:
    inv = invariance_constraints(cs)
    return {
        "invariance": {"entries": inv.describe(), "side_conditions": inv.side_conditions()},
        "uncleared": convolution_idempotent_system(cs, L).reduced().to_dict(),
        "cleared": cleared_system(cs, L).reduced().to_dict(),
        "permutation_module_basis_size": len(perm_module_endos(cs, L)),
    }


def run_case(cfg: CaseConfig) -> tuple[dict, int]:
    """Report and exit status (0 when nothing failed)."""
    timings: dict[str, float] = {}
    errors: list[str] = []

    def timed(key, fn):
        t0 = time.perf_counter()
        out = fn()
        timings[key] = round(time.perf_counter() - t0, 4)
        return out

    rs, cs, L = setup(cfg)
    check_simply_laced(cs)
    report: dict = {"schema_version": SCHEMA_VERSION, "tool_version": __version__,
                    "config": cfg.echo(), "lattice": {"name": L.name, "labels": list(L.labels)},
                    "cosets": coset_summary(cs)}
    tp = torsion_products(L, cs)
    report["torsion"] = {"x_Pi": tp.factored(L), "x_P": tp.factored(L, "parabolic"),
                         "x_Pi/P": tp.factored(L, "quotient")}
    space = timed("first_column_space", lambda: first_column_space(cs, L, cfg.prime))
    report["first_column"] = {"dimension": space.dim, "generators": [cs.names()[g] for g in space.generators],
                              "constraints": space.n_constraints}
    blocks = None
    try:
        blocks = timed("propagation", lambda: propagate_blocks(space))
    except PropagationMismatch as e:
        errors.append(f"propagation: {e}")
    if len(cs) <= SYMBOLIC_LIMIT:
        S = symbolic_entries(space)
        names = cs.names()
        report["symbolic_entries"] = {f"a[{names[v]},{names[w]}]": format_expr(e, cs, cfg.prime)
                                      for (v, w), e in sorted(S.items())}
    if cfg.prime is not None and blocks is not None:
        rep = timed("congruence", lambda: diagonal_congruence(cs, L, cfg.prime, space, blocks))
        report["congruence"] = rep.to_dict()
        report["verdict"] = rep.verdict
    if cfg.oracle:
        if cfg.prime is None:
            errors.append("oracle: needs a prime")
        else:
            try:
                res = timed("oracle", lambda: idempotent_oracle(cs, L, cfg.prime, cfg.oracle_cap, space, blocks))
                report["oracle"] = res.to_dict()
            except OracleRefused as e:
                errors.append(f"oracle: {e}")
    if cfg.localized:
        report["localized"] = timed("localized", lambda: localized_summary(cs, L))
    report["errors"] = errors
    if cfg.timings:
        report["timings"] = timings
    return report, 1 if errors else 0


def report_text(report: dict) -> str:
    lines = []
    cfg = report["config"]
    par = ",".join(map(str, cfg["parabolic"])) or "-"
    ring = f"F_{cfg['prime']}" if cfg["prime"] else "Z"
    lines.append(f"{cfg['type_label']}{cfg['rank']} / <{par}>  lattice {cfg['lattice']}  over {ring}")
    lines.append(f"|W^P| = {report['cosets']['size']}, double cosets: "
                 + " | ".join(" ".join(b) for b in report["cosets"]["double_cosets"]))
    lines.append(f"first-column parameters: {report['first_column']['dimension']}")
    if "congruence" in report:
        c = report["congruence"]
        lines.append(f"verdict: {c['verdict']}")
        for cl, pc in zip(c["classes"], c["poincare"]):
            lines.append(f"  class {{{', '.join(cl)}}}: {pc['with_shift']}")
        for e in c["edges"]:
            for wit in e["summands"]:
                if "image" in wit:
                    span = ", ".join(wit["image"])
                    lines.append(f"  {e['from']} -> {e['to']}: {wit['term']} on degree "
                                 f"{wit['source_degree']} mod {c['prime']} has image span{{{span}}}")
    if "oracle" in report:
        o = report["oracle"]
        lines.append(f"oracle: {o['idempotent_count']} idempotents, {o['nontrivial_count']} nontrivial, "
                     f"patterns {', '.join(o['diagonal_patterns'])}")
    if "localized" in report:
        for line in report["localized"]["cleared"]["equations"]:
            lines.append(f"  [{line['coset']}] cleared equation with {len(line['lhs'])} terms")
        for d in report["localized"]["cleared"]["divisibility"]:
            lines.append(f"  {d}")
    for e in report["errors"]:
        lines.append(f"ERROR {e}")
    if "timings" in report:
        lines.append("timings: " + ", ".join(f"{k}={v}s" for k, v in sorted(report["timings"].items())))
    return "\n".join(lines) + "\n"


def dump_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, ensure_ascii=True) + "\n"


def emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


# --- subcommands -------------------------------------------------------------

def cmd_analyze(args) -> int:
    cfg = build_config(args)
    report, status = run_case(cfg)
    emit(dump_json(report) if args.format == "json" else report_text(report), args.out)
    return status


def cmd_hasse(args) -> int:
    cfg = build_config(args)
    _, cs, _ = setup(cfg)
    summary = coset_summary(cs)
    if args.format == "json":
        emit(dump_json({"schema_version": SCHEMA_VERSION, "cosets": summary}), args.out)
    else:
        lines = [f"{c['name']} (length {c['length']})" for c in summary["classes"]]
        lines += [f"{v} --s{j}--> {u}" for v, j, u in summary["hasse_edges"]]
        emit("\n".join(lines) + "\n", args.out)
    return 0


def cmd_coset_table(args) -> int:
    cfg = build_config(args)
    _, cs, _ = setup(cfg)
    T = cs.mult_table
    if args.format == "json":
        emit(dump_json({"schema_version": SCHEMA_VERSION, "classes": cs.names(), "table": T}), args.out)
    else:
        width = len(str(len(cs) - 1))
        lines = [" ".join(f"{x:>{width}}" for x in row) for row in T]
        emit("\n".join([" ".join(cs.names())] + lines) + "\n", args.out)
    return 0


def cmd_demazure_image(args) -> int:
    cfg = build_config(args)
    if cfg.prime is None:
        raise ConfigError("demazure-image needs a prime")
    rs, cs, L = setup(cfg)
    word = [int(x) for x in args.word.split(",")]
    basis = homogeneous_image(L, word, args.degree, cfg.prime)
    label = f"D_{{{','.join(map(str, word))}}} image on degree {args.degree} mod {cfg.prime}"
    texts = [L.fmt(f) for f in basis]
    if args.format == "json":
        emit(dump_json({"schema_version": SCHEMA_VERSION, "operator": word, "degree": args.degree,
                        "prime": cfg.prime, "basis": texts}), args.out)
    else:
        emit(f"{label} = span{{{', '.join(texts)}}}\n", args.out)
    return 0


def cmd_emit_localized(args) -> int:
    cfg = build_config(args)
    _, cs, L = setup(cfg)
    system = convolution_idempotent_system(cs, L) if args.uncleared else cleared_system(cs, L, args.convention)
    if not args.all_classes:
        system = system.reduced()
    if args.format == "json":
        emit(dump_json({"schema_version": SCHEMA_VERSION, **system.to_dict()}), args.out)
    else:
        emit(system.to_text(), args.out)
    return 0


def _parse_function(specs: list[str], cs, L) -> FixedPointFunction:
    names = cs.names()
    vals = [L.poly("0")] * len(cs)
    for spec in specs:
        key, sep, text = spec.partition("=")
        if not sep or key.strip() not in names:
            raise ConfigError(f"bad --value {spec!r}; expected CLASS=POLY with CLASS in {names}")
        vals[names.index(key.strip())] = L.poly(text)
    return FixedPointFunction(tuple(vals))


def cmd_membership(args) -> int:
    cfg = build_config(args)
    _, cs, L = setup(cfg)
    F = _parse_function(args.value or [], cs, L)
    res = membership_check(L, cs, F, narrow=args.narrow)
    if args.format == "json":
        emit(dump_json({"schema_version": SCHEMA_VERSION, **res.to_dict()}), args.out)
    else:
        lines = ["PASS" if res.passed else "FAIL"]
        lines += [f"  {w}: {root} does not divide the difference" for w, root in res.failures]
        if res.disagreement:
            lines.append(f"  (the {'broad' if args.narrow else 'narrow'} form gives "
                         f"{'PASS' if res.narrow_passed else 'FAIL'})")
        emit("\n".join(lines) + "\n", args.out)
    return 0 if res.passed else 1


def cmd_reproduce(args) -> int:
    rows = run_goldens()
    ok = all(r.passed for r in rows)
    if args.format == "json":
        emit(dump_json({"schema_version": SCHEMA_VERSION, "tool_version": __version__,
                        "rows": [r.to_dict() for r in rows], "all_passed": ok}), args.out)
    else:
        lines = [f"{'#':>2}  {'status':6}  case"]
        for r in rows:
            lines.append(f"{r.criterion:>2}  {'PASS' if r.passed else 'FAIL':6}  {r.case}")
            if not r.passed:
                lines.append(f"{'':10}expected {r.expected}")
                lines.append(f"{'':10}observed {r.observed}")
        lines.append(f"{sum(r.passed for r in rows)}/{len(rows)} rows pass")
        emit("\n".join(lines) + "\n", args.out)
    return 0 if ok else 1


def cmd_list_presets(args) -> int:
    cases = {k: {**asdict(v), "parabolic": list(v.parabolic)} for k, v in CASES.items()}
    if args.format == "json":
        emit(dump_json({"schema_version": SCHEMA_VERSION, "cases": cases, "lattices": LATTICE_PRESETS}), args.out)
    else:
        lines = ["cases:"]
        for k, c in CASES.items():
            par = ",".join(map(str, c.parabolic)) or "-"
            lines.append(f"  {k:8} {c.type_label}{c.rank} <{par}> {c.lattice} p={c.prime}  {c.description}")
        lines.append("lattices:")
        lines += [f"  {k:10} {v}" for k, v in LATTICE_PRESETS.items()]
        emit("\n".join(lines) + "\n", args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    io = argparse.ArgumentParser(add_help=False)
    io.add_argument("--format", choices=("json", "text"), default="text")
    io.add_argument("--out", help="write the output to this file instead of stdout")

    case = argparse.ArgumentParser(add_help=False)
    case.add_argument("--config", help="key = value file with defaults for the options below")
    case.add_argument("--preset", help="named case (see list-presets)")
    case.add_argument("--type", dest="type", help="Cartan type letter")
    case.add_argument("--rank", type=int)
    case.add_argument("--parabolic", help="comma list of simple reflections generating W_P")
    case.add_argument("--lattice", help="lattice preset name or lattice file")
    case.add_argument("--prime", help="coefficient prime, or Z for the integers")

    parser = argparse.ArgumentParser(prog="heckeendo", description=__doc__.strip().splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", parents=[io, case], help="full analysis report")
    p.add_argument("--oracle", action="store_true", help="also run the brute-force idempotent search")
    p.add_argument("--oracle-cap", dest="oracle_cap", type=int)
    p.add_argument("--localized", action="store_true", help="include the localized equation systems")
    p.add_argument("--timings", action="store_true", help="include wall-clock timings")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("hasse", parents=[io, case], help="minimal coset representatives and edges")
    p.set_defaults(func=cmd_hasse)
    p = sub.add_parser("coset-table", parents=[io, case], help="multiplication table of W^P")
    p.set_defaults(func=cmd_coset_table)

    p = sub.add_parser("demazure-image", parents=[io, case], help="image of a Demazure word on S^d mod p")
    p.add_argument("--word", required=True, help="comma list, leftmost acts last")
    p.add_argument("--degree", type=int, required=True)
    p.set_defaults(func=cmd_demazure_image)

    p = sub.add_parser("emit-localized", parents=[io, case], help="idempotency equations")
    p.add_argument("--uncleared", action="store_true", help="emit the form with denominators")
    p.add_argument("--all-classes", action="store_true", help="one equation per class, not per double coset")
    p.add_argument("--convention", choices=("all", "negative"), default="all")
    p.set_defaults(func=cmd_emit_localized)

    p = sub.add_parser("membership", parents=[io, case], help="divisibility test for a fixed-point function")
    p.add_argument("--value", action="append", help="CLASS=POLY, repeatable; other classes are 0")
    p.add_argument("--narrow", action="store_true", help="report the narrow condition set")
    p.set_defaults(func=cmd_membership)

    p = sub.add_parser("reproduce-paper", parents=[io], help="check every reference case")
    p.set_defaults(func=cmd_reproduce)
    p = sub.add_parser("list-presets", parents=[io], help="named cases and lattices")
    p.set_defaults(func=cmd_list_presets)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, LatticeError, RootSystemError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
