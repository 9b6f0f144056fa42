"""Batch command-line front end: sweeps, perturbation reports and figure data as CSV.

Exit codes: 0 ok, 2 usage, 3 I/O, 4 no EP in bracket, 5 degenerate level,
6 partial output (continuation failure).
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .currents_analysis import rows_from_branches
from .errors import DegenerateLevelError, NoBracketError
from .linalg import CLUSTER_GAP
from .model import build_h0, build_hp, parity
from .nonlinear import (
    NEWTON_TOL,
    ContinuationConfig,
    SeedCensus,
    is_pt_symmetric,
    trace_folds,
    track_states,
)
from .perturbation import (
    MAX_ORDER,
    first_order_splitting,
    kato_series,
    leading_entry_basis,
    partial_sum_errors,
    unperturbed_basis,
)
from .spectrum import find_ep2, sweep_gamma
from .stability import STABILITY_TOL, bdg_spectrum

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_NO_EP, EXIT_DEGENERATE, EXIT_PARTIAL = 0, 2, 3, 4, 5, 6
KATO_GAMMAS = (0.01, 0.05, 0.1)
FIG2_J = (0.0, 0.1, 0.4, 0.8, 1.0)
FIG34_J = (0.0, 0.1, 0.4, 0.8)
FIG5_U = {"a": 1.0, "b": 1.0, "c": 2.0, "d": 4.0}
FIG6_U = {"a": 1.0, "b": 1.5, "c": 2.0, "d": 2.5}
FIG_GRID = (0.0, 1.5, 301)

EPILOG = """exit codes:
  0  success
  2  invalid flags or configuration
  3  output could not be written
  4  no exceptional point inside the bracket
  5  requested level is degenerate (use degenerate-check)
  6  partial output: a continuation stopped early (see manifest.json)

configuration:
  --config FILE reads key=value lines ('#' starts a comment); keys are the
  long flag names with dashes or underscores. Flags override the file, the
  file overrides built-in defaults. PTWELL_THREADS is the fallback for
  --threads.
"""


class UsageError(Exception):
    pass


def fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if x == 0:
        x = 0.0
    return format(x, ".12g")


def fmt_complex(z) -> str:
    z = complex(z)
    re, im = fmt(z.real), fmt(abs(z.imag))
    sign = "-" if z.imag < 0 and fmt(z.imag) != "0" else "+"
    return f"{re}{sign}{im}i"


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([v if isinstance(v, str) else fmt(v) for v in r])
    return buf.getvalue()


def write_text(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def emit(out, text: str, written: list):
    if out in (None, "-"):
        sys.stdout.write(text)
        return
    write_text(Path(out), text)
    written.append(Path(out))


def write_manifest(directory: Path, command: str, args: argparse.Namespace, outputs, status="ok", note=None):
    arguments = {k: v for k, v in sorted(vars(args).items()) if k not in ("func", "config")}
    manifest = {
        "artifact": "ptwell",
        "version": __version__,
        "command": command,
        "arguments": arguments,
        "outputs": sorted(p.name for p in outputs),
        "status": status,
        "tolerances": {
            "newton": NEWTON_TOL,
            "stability_im_omega": STABILITY_TOL,
            "cluster_gap": CLUSTER_GAP,
        },
        "seeds": {"census_rng": SeedCensus().rng_seed},
    }
    if note:
        manifest["note"] = note
    write_text(directory / "manifest.json", json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def gamma_grid(args) -> np.ndarray:
    if args.gamma_steps < 2:
        raise UsageError("--gamma-steps must be at least 2")
    if not 0 <= args.gamma_min < args.gamma_max <= 2:
        raise UsageError("need 0 <= --gamma-min < --gamma-max <= 2")
    return np.round(np.linspace(args.gamma_min, args.gamma_max, args.gamma_steps), 12)


def linear_rows(J: float, grid, workers):
    for br in sweep_gamma(J, grid, workers=workers):
        for g, s, d in zip(br.param_values, br.states, br.labels["pt_defect"]):
            yield (g, br.id, s.mu.real, s.mu.imag, d)


def sort_rows(rows):
    return sorted(rows, key=lambda r: (r[0], r[1]))


# --- commands ---------------------------------------------------------------

def cmd_linear_sweep(args) -> int:
    grid = gamma_grid(args)
    rows = sort_rows(linear_rows(args.j, grid, args.threads))
    written = []
    emit(args.out, csv_text(["gamma", "branch", "re_mu", "im_mu", "pt_defect"], rows), written)
    if written:
        write_manifest(written[0].parent, "linear-sweep", args, written)
    return EXIT_OK


def cmd_ep2(args) -> int:
    try:
        res = find_ep2(args.j, tuple(args.bracket))
    except NoBracketError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NO_EP
    line = f"J={fmt(args.j)} gamma_EP={res.gamma_ep:.8f} pair={res.pair[0]},{res.pair[1]}"
    if res.degenerate_at_zero:
        line += " degenerate_at_zero"
    print(line)
    return EXIT_OK


def cmd_kato(args) -> int:
    if not 1 <= args.max_order <= MAX_ORDER:
        raise UsageError(f"--max-order must lie in 1..{MAX_ORDER}")
    h0, hp = build_h0(args.j), build_hp()
    basis = unperturbed_basis(h0, parity())
    if not 0 <= args.level < len(basis):
        raise UsageError(f"--level must lie in 0..{len(basis) - 1}")
    try:
        terms = kato_series(basis, hp, args.level, args.max_order)
    except DegenerateLevelError as exc:
        print(f"error: {exc}; run `degenerate-check --j {fmt(args.j)}`", file=sys.stderr)
        return EXIT_DEGENERATE
    errors = [partial_sum_errors(h0, hp, basis, args.level, terms, g) for g in KATO_GAMMAS]
    header = ["s", "re_mu_s", "im_mu_s"] + [f"abs_err_gamma_{g}" for g in KATO_GAMMAS]
    rows = [(t.order, t.value.real, t.value.imag, *(e[i] for e in errors)) for i, t in enumerate(terms)]
    written = []
    emit(args.out, csv_text(header, rows), written)
    if written:
        write_manifest(written[0].parent, "kato", args, written)
    return EXIT_OK


def degenerate_report(J: float, paper_basis: bool = False) -> str:
    basis = unperturbed_basis(build_h0(J), parity())
    clusters = basis.degenerate_clusters()
    lines = [f"J={fmt(J)}"]
    if not clusters:
        lines.append("no degeneracies")
        return "\n".join(lines) + "\n"
    for cluster in clusters:
        vecs = basis.eigenvectors[:, list(cluster)]
        lines.append(f"cluster levels={','.join(map(str, cluster))} mu={fmt(basis.eigenvalues[cluster[0]])}")
        verdict = first_order_splitting(vecs, build_hp())
        if paper_basis:
            vecs = leading_entry_basis(vecs)
            for j in range(vecs.shape[1]):
                lines.append(f"basis_vector_{j}=[{', '.join(fmt_complex(z) for z in vecs[:, j])}]")
            coupling = first_order_splitting(vecs, build_hp(), enforce_orthonormal=False).coupling
            lines.append("note=unnormalized basis; entries are not first-order energy shifts")
        else:
            coupling = verdict.coupling
        for i, row in enumerate(coupling):
            lines.append(f"S[{i}]=[{', '.join(fmt_complex(z) for z in row)}]")
        lines.append(f"splitting=[{', '.join(fmt_complex(z) for z in verdict.splitting_eigenvalues)}]")
        lines.append(f"pt_survives={fmt(verdict.pt_survives)}")
    return "\n".join(lines) + "\n"


def cmd_degenerate_check(args) -> int:
    written = []
    emit(args.out, degenerate_report(args.j, args.paper_basis), written)
    return EXIT_OK


def nonlinear_tables(J: float, U: float, grid, workers=None):
    """States and fold tables for one (J, U); also returns branch kinds and failures."""
    if U == 0:
        rows = []
        for br in sweep_gamma(J, grid, workers=workers):
            for s in br.states:
                rows.append(state_row(s, br.id, "linear"))
        return sort_rows(rows), [], {}, []
    branches = track_states(J, U, grid, workers=workers)
    kinds = {br.id: br.labels.get("kind") for br in branches}
    rows = [state_row(s, br.id, kinds[br.id]) for br in branches for s in br.states]
    starts = [br.states[0] for br in branches if is_pt_symmetric(br.states[0])]
    ids = [br.id for br in branches if is_pt_symmetric(br.states[0])]
    cfg = ContinuationConfig(gamma_min=float(grid[0]), gamma_max=float(grid[-1]))
    folds, _, failures = trace_folds(starts, cfg, ids)
    fold_rows = [(f.branch_id, f.gamma_fold) for f in folds]
    return sort_rows(rows), fold_rows, kinds, failures


STATE_HEADER = ["gamma", "branch", "re_mu", "im_mu", "re_psi1", "im_psi1", "re_psi2", "im_psi2", "re_psi3",
                "im_psi3", "stable", "max_im_omega", "kind"]


def state_row(s, branch, kind):
    rep = bdg_spectrum(s)
    psi = s.psi
    return (s.params.gamma, branch, s.mu.real, s.mu.imag, psi[0].real, psi[0].imag, psi[1].real, psi[1].imag,
            psi[2].real, psi[2].imag, rep.stable, rep.max_im, kind or "")


def cmd_nonlinear(args) -> int:
    grid = gamma_grid(args)
    rows, fold_rows, _, failures = nonlinear_tables(args.j, args.u, grid, args.threads)
    out = Path(args.out_dir)
    written = [out / "states.csv", out / "folds.csv"]
    write_text(written[0], csv_text(STATE_HEADER, rows))
    write_text(written[1], csv_text(["branch", "gamma_fold"], fold_rows))
    if failures:
        note = f"continuation stopped early on branches {failures}; folds may be missing"
        write_manifest(out, "nonlinear", args, written, "partial", note)
        print(f"warning: {note}", file=sys.stderr)
        return EXIT_PARTIAL
    write_manifest(out, "nonlinear", args, written)
    return EXIT_OK


CURRENT_HEADER = ["gamma", "branch", "j_ext", "j12", "j13", "ratio", "any_broken", "stable", "pt_symmetric"]


def current_rows(J: float, U: float, grid, workers=None, kinds=None):
    if U == 0:
        branches = sweep_gamma(J, grid, workers=workers)
    else:
        branches = track_states(J, U, grid, workers=workers)
        if kinds is not None:
            kinds.update({br.id: br.labels.get("kind") for br in branches})
    return [(r.gamma, r.branch_id, r.j_ext, r.j12, r.j13, r.ratio, r.any_broken, r.stable, r.pt_symmetric)
            for r in rows_from_branches(branches)]


def cmd_currents(args) -> int:
    grid = gamma_grid(args)
    written = []
    emit(args.out, csv_text(CURRENT_HEADER, current_rows(args.j, args.u, grid, args.threads)), written)
    if written:
        write_manifest(written[0].parent, "currents", args, written)
    return EXIT_OK


def fig_tables(n: int, workers=None) -> tuple:
    """Panel name -> (header, rows) for one figure; also returns partial-failure notes."""
    grid = np.round(np.linspace(*FIG_GRID), 12)
    tables, notes = {}, []
    if n == 2:
        re_rows, im_rows = [], []
        for J in FIG2_J:
            for g, b, re, im, _ in sort_rows(linear_rows(J, grid, workers)):
                re_rows.append((J, g, b, re))
                im_rows.append((J, g, b, im))
        tables["fig2_a"] = (["J", "gamma", "branch", "re_mu"], re_rows)
        tables["fig2_b"] = (["J", "gamma", "branch", "im_mu"], im_rows)
    elif n in (3, 4):
        for panel, J in zip("abcd", FIG34_J):
            rows = current_rows(J, 0.0, grid, workers)
            if n == 3:
                tables[f"fig3_{panel}"] = (["J", "gamma", "branch", "j_ext", "any_broken", "pt_symmetric"],
                                           [(J, r[0], r[1], r[2], r[6], r[8]) for r in rows])
            else:
                tables[f"fig4_{panel}"] = (["J", "gamma", "branch", "ratio", "any_broken", "pt_symmetric"],
                                           [(J, r[0], r[1], r[5], r[6], r[8]) for r in rows])
    elif n == 5:
        cache = {}
        for panel, U in FIG5_U.items():
            if U not in cache:
                cache[U] = nonlinear_tables(1.0, U, grid, workers)
            rows, _, _, failures = cache[U]
            if failures and panel != "b":
                notes.append(f"U={fmt(U)}: continuation stopped early on branches {failures}")
            want = ("continued", "new") if panel == "a" else ("new",)
            pt = [r for r in rows if r[12] in want and abs(r[3]) <= 1e-10]
            tables[f"fig5_{panel}"] = (["U", "gamma", "branch", "re_mu", "stable", "max_im_omega", "kind"],
                                       [(U, r[0], r[1], r[2], r[10], r[11], r[12]) for r in pt])
    elif n == 6:
        for panel, U in FIG6_U.items():
            kinds = {}
            rows = current_rows(1.0, U, grid, workers, kinds)
            keep = [r for r in rows if kinds.get(r[1]) == "new" and r[8]]
            tables[f"fig6_{panel}"] = (["U", "gamma", "branch", "j_ext", "stable"],
                                       [(U, r[0], r[1], r[2], r[7]) for r in keep])
    else:
        raise UsageError("--n must be one of 2, 3, 4, 5, 6")
    return tables, notes


def cmd_fig(args) -> int:
    tables, notes = fig_tables(args.n, args.threads)
    out = Path(args.out_dir)
    written = []
    for name, (header, rows) in sorted(tables.items()):
        path = out / f"{name}.csv"
        write_text(path, csv_text(header, rows))
        written.append(path)
    if notes:
        write_manifest(out, "fig", args, written, "partial", "; ".join(notes))
        return EXIT_PARTIAL
    write_manifest(out, "fig", args, written)
    return EXIT_OK


# --- argument handling ------------------------------------------------------

def _grid_flags(p, gmax=1.5, steps=301):
    p.add_argument("--gamma-min", type=float, default=0.0)
    p.add_argument("--gamma-max", type=float, default=gmax)
    p.add_argument("--gamma-steps", type=int, default=steps, help="number of grid points")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ptwell", description=__doc__.splitlines()[0], epilog=EPILOG,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--config", help="key=value file with flag defaults")
    parser.add_argument("--threads", type=int, default=None, help="worker threads (default: PTWELL_THREADS or all cores)")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("linear-sweep", help="linear eigenvalue branches over gamma")
    p.add_argument("--j", type=float, required=True)
    _grid_flags(p)
    p.add_argument("--out", default="-", help="CSV path ('-' for stdout)")
    p.set_defaults(func=cmd_linear_sweep)

    p = sub.add_parser("ep2", help="locate the EP2 by bisection")
    p.add_argument("--j", type=float, required=True)
    p.add_argument("--bracket", type=float, nargs=2, default=[0.0, 2.0], metavar=("LO", "HI"))
    p.set_defaults(func=cmd_ep2)

    p = sub.add_parser("kato", help="Kato perturbation coefficients of one level")
    p.add_argument("--j", type=float, required=True)
    p.add_argument("--level", type=int, default=0, help="0-based level index in ascending order")
    p.add_argument("--max-order", type=int, default=MAX_ORDER)
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_kato)

    p = sub.add_parser("degenerate-check", help="first-order PT verdict for degenerate levels")
    p.add_argument("--j", type=float, required=True)
    p.add_argument("--paper-basis", action="store_true",
                   help="show the coupling matrix in the integer, unnormalized cluster basis")
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_degenerate_check)

    p = sub.add_parser("nonlinear", help="nonlinear stationary states and folds over gamma")
    p.add_argument("--j", type=float, required=True)
    p.add_argument("--u", type=float, required=True)
    _grid_flags(p)
    p.add_argument("--out-dir", default=".")
    p.set_defaults(func=cmd_nonlinear)

    p = sub.add_parser("currents", help="currents of every stationary state over gamma")
    p.add_argument("--j", type=float, required=True)
    p.add_argument("--u", type=float, default=0.0)
    _grid_flags(p)
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_currents)

    p = sub.add_parser("fig", help="data tables for one figure")
    p.add_argument("--n", type=int, required=True, choices=range(2, 7))
    p.add_argument("--out-dir", default=".")
    p.set_defaults(func=cmd_fig)
    return parser


def read_config(path) -> dict:
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{lineno}: expected key=value")
            key, value = (part.strip() for part in line.split("=", 1))
            out[key.replace("-", "_")] = value
    return out


def _apply_config(parser: argparse.ArgumentParser, command: str, config: dict):
    targets = [parser, parser._subparsers._group_actions[0].choices[command]]
    for key, value in config.items():
        action = next((a for p in targets for a in p._actions if a.dest == key), None)
        if action is None or key in ("config", "help", "version"):
            raise UsageError(f"unknown config key '{key}'")
        if isinstance(action, argparse._StoreTrueAction):
            value = value.lower() in ("1", "true", "yes", "on")
        elif action.nargs not in (None, 1):
            value = [action.type(v) for v in value.replace(",", " ").split()]
        else:
            value = action.type(value) if action.type else value
        action.default = value
        action.required = False


def main(argv=None) -> int:
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    pre.add_argument("--threads")
    known, rest = pre.parse_known_args(argv)
    commands = build_parser()._subparsers._group_actions[0].choices
    command = next((a for a in rest if a in commands), None)
    try:
        if known.config and command:
            try:
                config = read_config(known.config)
            except OSError as exc:
                raise UsageError(f"cannot read config: {exc}")
            _apply_config(parser, command, config)
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    except (UsageError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if args.threads is not None and args.threads < 1:
        print("error: --threads must be positive", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"error: cannot write output: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
