"""Command-line front end.

    chattering build    --K 6 --out seq.json          # prints the p, q, r table
    chattering figure1  --sequence seq.json --out fig1.csv
    chattering figure2  --sequence seq.json --L 6 --out w.csv
    chattering instance --sequence seq.json --L 6 --T 1 --out inst.json
    chattering verify   --sequence seq.json           # or an instance file

Exit codes: 0 ok, 2 input or build error, 3 verification failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import time
from pathlib import Path

from mpmath import mp

from . import config as cfgmod
from .instance_builder import (
    ChatteringInstance,
    InstanceError,
    build_instance,
    exact_objective,
    positivity_certificate,
    verify_optimality,
)
from .sequence import ChatterSequence, ExponentSpec
from .series_builder import BuildError, check_invariants, run
from .series_eval import (
    IndeterminateSignError,
    find_sign_changes,
    partial_sum_delta,
    root_rows,
    verify_sign_pattern,
    write_sign_csv,
)
from .spectral_heat import terminal_datum_w, write_grid_csv

log = logging.getLogger("chattering")

EXIT_OK, EXIT_INPUT, EXIT_VERIFY = 0, 2, 3


class CliError(Exception):
    def __init__(self, message: str, code: int = EXIT_INPUT):
        super().__init__(message)
        self.code = code


def parse_exponents(text: str) -> ExponentSpec:
    """``squares`` or ``poly:c0,c1,...`` for ``alpha_m = sum c_i m**i``."""
    text = text.strip()
    if text == "squares":
        return ExponentSpec.squares()
    if text.startswith("poly:"):
        coeffs = [int(c) for c in text[5:].split(",")]
        return ExponentSpec.polynomial(*coeffs, increasing=all(c >= 0 for c in coeffs))
    raise CliError(f"unknown exponent specification {text!r}")


def sci3(x) -> str:
    """Three significant figures, truncated rather than rounded (as in the published table)."""
    x = mp.mpf(x)
    if x == 0:
        return "0.00e+00"
    e = int(mp.floor(mp.log10(abs(x))))
    mant = abs(x) / mp.mpf(10) ** e
    if mant >= 10:  # log10 rounding at exact powers of ten
        mant, e = mant / 10, e + 1
    digits = int(mp.floor(mant * 100 + mp.mpf(10) ** -20))
    sign = "-" if x < 0 else ""
    return f"{sign}{digits // 100}.{digits % 100:02d}e{e:+03d}"


def table_rows(seq: ChatterSequence):
    for k in range(1, seq.K + 1):
        yield k, sci3(seq.delta(k)), seq.p(k), seq.q(k), seq.r(k)


def format_table(seq: ChatterSequence) -> str:
    lines = ["k\t1-z_k\tp_k\tq_k\tr_k"]
    lines += ["\t".join(str(c) for c in row) for row in table_rows(seq)]
    return "\n".join(lines)


def load_sequence(path) -> ChatterSequence:
    p = Path(path)
    if not p.is_file():
        raise CliError(f"sequence file {p} not found")
    try:
        doc = json.loads(p.read_text())
        if "sequence" in doc and "blocks" not in doc:
            doc = doc["sequence"]
        return ChatterSequence.from_json(doc)
    except (KeyError, ValueError, TypeError) as exc:
        raise CliError(f"cannot read sequence file {p}: {exc}") from exc


def _out(cfg: dict, default: str) -> Path:
    return Path(cfg["out"] or default)


def _sibling(path: Path, suffix: str) -> Path:
    return path.with_name(path.stem + suffix)


def cmd_build(cfg: dict) -> int:
    t0 = time.perf_counter()
    try:
        seq = run(cfg["z1"], parse_exponents(cfg["exponents"]), cfg["K"], cfg["precision_bits"])
    except BuildError as exc:
        raise CliError(f"build failed at {exc}") from exc
    except ValueError as exc:
        raise CliError(str(exc)) from exc
    out = _out(cfg, "sequence.json")
    out.write_text(seq.dumps() + "\n")
    with open(_sibling(out, "_table.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["k", "one_minus_z", "p", "q", "r"])
        w.writerows(table_rows(seq))
    print(format_table(seq))
    log.info("built K=%d in %.2fs -> %s", seq.K, time.perf_counter() - t0, out)
    return EXIT_OK


def rescaled_delta(x):
    """Distance from one plotted at abscissa ``x``: ``1 - z = exp(1 - (1 - x)**-2)``."""
    return mp.exp(1 - (1 - mp.mpf(x)) ** -2)


def rescaled_abscissa(delta):
    return 1 - (1 - mp.log(delta)) ** mp.mpf(-0.5)


def _levels(cfg: dict, seq: ChatterSequence) -> list[int]:
    if cfg["l_list"]:
        levels = [int(v) for v in str(cfg["l_list"]).split(",")]
    else:
        levels = list(range(2, seq.K + 1)) or [1]
    bad = [L for L in levels if not 1 <= L <= seq.K]
    if bad:
        raise CliError(f"levels {bad} exceed K={seq.K}")
    return levels


def cmd_figure1(cfg: dict) -> int:
    seq = load_sequence(cfg["sequence"])
    levels = _levels(cfg, seq)
    n = cfg["samples"]
    out = _out(cfg, "figure1.csv")
    with mp.workprec(seq.precision_bits):
        with open(out, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x", "L", "value"])
            for L in levels:
                for i in range(n):
                    x = mp.mpf(i) / n
                    v = partial_sum_delta(seq, L, rescaled_delta(x))[0] if i else mp.zero
                    w.writerow([mp.nstr(x, 12), L, mp.nstr(v, 17)])
        with open(_sibling(out, "_dots.csv"), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["k", "x", "L", "value"])
            for L in levels:
                for k in range(1, L + 1):
                    v = partial_sum_delta(seq, L, seq.delta(k))[0]
                    w.writerow([k, mp.nstr(rescaled_abscissa(seq.delta(k)), 17), L, mp.nstr(v, 17)])
    return EXIT_OK


def cmd_figure2(cfg: dict) -> int:
    seq = load_sequence(cfg["sequence"])
    L = cfg["L"]
    if not 1 <= L <= seq.K:
        raise CliError(f"L={L} exceeds K={seq.K}")
    x, values = terminal_datum_w(seq, L).sample_uniform(cfg["grid"])
    write_grid_csv(_out(cfg, "figure2.csv"), x, values, ("x", "w"))
    return EXIT_OK


def _report_doc(inst: ChatteringInstance, report, cert) -> dict:
    return {
        "L": inst.L,
        "T": inst.T,
        "interior_switch_count": inst.diagnostics.interior_switch_count,
        "objective_value": inst.diagnostics.objective_value,
        "objective_exact": str(exact_objective(inst.seq, inst.L)),
        "oracle_l2_gap": inst.diagnostics.oracle_l2_gap,
        "sign_residual": report.sign_residual,
        "sign_points": report.sign_points,
        "vi_min": report.vi_min,
        "vi_eps": report.vi_eps,
        "vi_exact_min": report.vi_exact_min,
        "vi_exact_eps": float(report.vi_exact_eps),
        "opposite_control_value": report.opposite_control_value,
        "terminal_defect": report.terminal_defect,
        "positivity_parseval": cert.parseval if cert else None,
        "positivity_quadrature": cert.quadrature if cert else None,
        "checks": {k: bool(v) for k, v in report.checks.items()},
        "ok": bool(report.ok and cert is not None),
    }


def _verify_instance(inst: ChatteringInstance, cfg: dict, report_path: Path) -> int:
    report = verify_optimality(inst, cfg["t_grid"], cfg["control_samples"], cfg["seed"])
    try:
        cert = positivity_certificate(inst)
    except InstanceError as exc:
        log.error("%s", exc)
        cert = None
    doc = _report_doc(inst, report, cert)
    report_path.write_text(json.dumps(doc, indent=2) + "\n")
    for name, passed in doc["checks"].items():
        print(f"{'PASS' if passed else 'FAIL'}\t{name}")
    print(f"{'PASS' if cert else 'FAIL'}\tpositivity_certificate")
    print(f"switches\t{inst.diagnostics.interior_switch_count}")
    print(f"objective\t{inst.diagnostics.objective_value:.12g}")
    return EXIT_OK if doc["ok"] else EXIT_VERIFY


def cmd_instance(cfg: dict) -> int:
    seq = load_sequence(cfg["sequence"])
    try:
        inst = build_instance(
            seq,
            cfg["L"],
            cfg["T"],
            cfg["root_sampling"],
            mode_tol=cfg["mode_tol"],
            oracle_nx=cfg["oracle_nx"],
            oracle_nt=cfg["oracle_nt"],
        )
    except (InstanceError, IndeterminateSignError) as exc:
        raise CliError(str(exc)) from exc
    out = _out(cfg, "instance.json")
    code = _verify_instance(inst, cfg, _sibling(out, "_report.json"))
    out.write_text(inst.dumps() + "\n")
    return code


def cmd_verify(cfg: dict) -> int:
    path = Path(cfg["sequence"])
    if not path.is_file():
        raise CliError(f"file {path} not found")
    doc = json.loads(path.read_text())
    if "control" in doc:
        inst = ChatteringInstance.from_json(doc)
        return _verify_instance(inst, cfg, Path(cfg["out"] or _sibling(path, "_report.json")))
    seq = load_sequence(path)
    violations = check_invariants(seq)
    for v in violations:
        print(f"FAIL\t{v}")
    ok = not violations
    out = _out(cfg, str(_sibling(path, "_signs.csv")))
    try:
        reports = [verify_sign_pattern(seq, L) for L in range(1, seq.K + 1)]
    except IndeterminateSignError as exc:
        raise CliError(str(exc), EXIT_VERIFY) from exc
    for rep in reports:
        print(f"{'PASS' if rep.ok else 'FAIL'}\tsign pattern L={rep.L}")
        ok = ok and rep.ok
    write_sign_csv(out, reports[-1].rows(seq))
    scan = find_sign_changes(seq, seq.K, cfg["root_sampling"])
    write_sign_csv(_sibling(out, "_roots.csv"), root_rows(seq, scan), "root")
    enough = len(scan) >= seq.K - 1
    print(f"{'PASS' if enough else 'FAIL'}\t{len(scan)} sign changes of P_{seq.K}")
    ok = ok and enough
    return EXIT_OK if ok else EXIT_VERIFY


COMMANDS = {
    "build": cmd_build,
    "figure1": cmd_figure1,
    "figure2": cmd_figure2,
    "instance": cmd_instance,
    "verify": cmd_verify,
}


def make_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat key = value file; flags override it")
    common.add_argument("--z1")
    common.add_argument("--exponents", help="'squares' or 'poly:c0,c1,...'")
    common.add_argument("--K", type=int)
    common.add_argument("--L", type=int)
    common.add_argument("--T", type=float)
    common.add_argument("--precision-bits", dest="precision_bits", type=int)
    common.add_argument("--sequence", help="sequence (or instance) JSON file")
    common.add_argument("--samples", type=int, help="curve samples per level (figure1)")
    common.add_argument("--grid", type=int, help="grid points (figure2)")
    common.add_argument("--L-list", dest="l_list", help="comma-separated levels (figure1)")
    common.add_argument("--root-sampling", dest="root_sampling", type=int)
    common.add_argument("--t-grid", dest="t_grid", type=int)
    common.add_argument("--control-samples", dest="control_samples", type=int)
    common.add_argument("--seed", type=int)
    common.add_argument("--out")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="chattering", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common])
    return parser


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    overrides = {k: v for k, v in vars(args).items() if k in cfgmod.DEFAULTS}
    try:
        cfg = cfgmod.resolve(args.config, overrides)
        return COMMANDS[args.command](cfg)
    except (CliError, cfgmod.ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return getattr(exc, "code", EXIT_INPUT)


if __name__ == "__main__":
    sys.exit(main())
