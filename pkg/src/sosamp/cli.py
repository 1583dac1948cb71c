"""``sosamp`` command line: optimize, scan, cost and verify.

Every JSON report embeds a run manifest that ``sosamp replay`` can re-run.
Exit codes: 0 success, 2 usage or input error, 3 verification failure,
4 numerical divergence.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, replace
from importlib import resources
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from sosamp import __version__, costs, dfthc, sdp, sos, tensors, walk
from sosamp.errors import DivergenceError, OracleLimitError, ParseError, SosampError

EXIT_OK, EXIT_USAGE, EXIT_VERIFY, EXIT_DIVERGED = 0, 2, 3, 4
SCAN_COLUMNS = ["R", "B", "C", "e_reg", "seed", "status", "eps_fro", "eps_fro_rel",
                "Lambda", "E_gap", "lambda_eff", "error_proxy"]


class UsageError(Exception):
    pass


# ---------------------------------------------------------------- helpers

def load_schema(subcommand: str) -> dict:
    """Published JSON schema of a subcommand's report."""
    return json.loads(resources.files("sosamp").joinpath("schemas", f"{subcommand}.json").read_text())


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def manifest(command: str, args: argparse.Namespace, seeds: list[int]) -> dict:
    """Run manifest; everything except ``created`` determines the output."""
    params = {k: v for k, v in sorted(vars(args).items()) if k != "func"}
    inp = {}
    for key in ("input", "checkpoint"):
        path = params.get(key)
        if path:
            inp[key] = {"path": str(path), "sha256": _sha256(Path(path))}
    return {
        "tool": "sosamp",
        "version": __version__,
        "subcommand": command,
        "args": params,
        "inputs": inp,
        "seeds": [int(s) for s in seeds],
        "created": datetime.now(timezone.utc).isoformat(timespec="seconds"),
    }


def load_problem(path: str, eta: int | None = None) -> tensors.Problem:
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"input file not found: {path}")
    raw = p.read_bytes()
    if raw.startswith(b"SOSAMPPB"):
        prob = tensors.Problem.from_bytes(raw)
    elif raw.lstrip().startswith(b"{"):
        prob = tensors.Problem.from_json(raw.decode())
    else:
        prob = tensors.parse_fcidump(raw.decode())
    return prob.replace(eta=eta) if eta is not None else prob


def parse_shape(text: str) -> tuple[int, int, int]:
    try:
        shape = tuple(int(x) for x in text.split(","))
    except ValueError:
        raise UsageError(f"shape must be R,B,C integers, got {text!r}") from None
    if len(shape) != 3 or min(shape) < 1:
        raise UsageError(f"shape must be three positive integers, got {text!r}")
    return shape  # type: ignore[return-value]


def _opt_float(text: str) -> float | None:
    return None if text.lower() in ("none", "off") else float(text)


def build_hyper(args: argparse.Namespace, seed: int, e_reg: float | None = None) -> dfthc.Hyper:
    try:
        return dfthc.Hyper(eps_reg=args.eps_reg, lambda_reg=args.lambda_reg,
                           e_reg=args.e_reg if e_reg is None else e_reg,
                           lr_init=args.lr_init, lr_final=args.lr_final, steps=args.steps,
                           seed=seed, use_shift=not args.no_shift)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _lambda_eff(Lambda: float, gap: float | None) -> float | None:
    if gap is None:
        return None
    try:
        return costs.lambda_eff(Lambda, gap)
    except SosampError:
        return None


def _fit_row(result: dfthc.OptimizeResult, p: tensors.Problem, e_gs: float | None) -> dict:
    summ = dfthc.fit_summary(result.params, p, result.hyper.use_shift, e_gs)
    proxy = None
    if p.n_orb <= tensors.oracle_limit():
        proxy = dfthc.error_proxy(result.params, p, result.hyper.use_shift)
    return {**summ, "lambda_eff": _lambda_eff(summ["Lambda"], summ["E_gap"]), "error_proxy": proxy}


@dataclass
class Outcome:
    code: int
    payload: dict
    text: str


def _render(payload: dict, args: argparse.Namespace, table: str | None = None) -> str:
    if args.format in ("table", "csv") and table is not None:
        return table
    return json.dumps(payload, indent=2)


# ---------------------------------------------------------------- optimize

def cmd_optimize(args: argparse.Namespace) -> Outcome:
    p = load_problem(args.input, args.eta)
    shape = parse_shape(args.shape)
    if args.restarts < 1:
        raise UsageError("--restarts must be >= 1")
    seeds = [args.seed] if args.restarts == 1 else list(dfthc.restart_seeds(args.seed, args.restarts))
    runs = []
    for s in seeds:
        res = dfthc.optimize(p, shape, build_hyper(args, s), e_gs=args.e_gs)
        runs.append((res, _fit_row(res, p, args.e_gs)))
    th = args.threshold * 1e-3
    # lowest-cost run among those under the error threshold, else lowest loss
    ok = [r for r in runs if r[1]["error_proxy"] is not None and abs(r[1]["error_proxy"]) <= th
          and r[1]["lambda_eff"] is not None]
    best = min(ok, key=lambda r: r[1]["lambda_eff"]) if ok else min(runs, key=lambda r: r[0].terms.total)
    result, row = best
    if args.out:
        dfthc.save_checkpoint(result, args.out)
    summary = {
        "shape": list(shape),
        "seed": int(result.seed),
        **row,
        "threshold_mHa": args.threshold,
        "below_threshold": None if row["error_proxy"] is None else abs(row["error_proxy"]) <= th,
        "loss_tail": [float(x) for x in result.trace[-5:]],
    }
    if len(runs) > 1:
        proxies = [r[1]["error_proxy"] for r in runs]
        summary["restarts"] = {
            "count": len(runs),
            "seeds": [int(s) for s in seeds],
            "error_proxy": proxies,
            "mean": float(np.mean(proxies)) if None not in proxies else None,
            "std": float(np.std(proxies, ddof=1)) if None not in proxies else None,
        }
    payload = {"manifest": manifest("optimize", args, seeds), "summary": summary}
    table = "\n".join(f"{k:16s} {v}" for k, v in summary.items() if k != "restarts")
    return Outcome(EXIT_OK, payload, _render(payload, args, table))


# ---------------------------------------------------------------- scan

def parse_grid(text: str) -> list[tuple[int, int, int]]:
    cells = [parse_shape(c) for c in text.split(";") if c.strip()]
    if not cells:
        raise UsageError("empty --grid")
    return cells


def cmd_scan(args: argparse.Namespace) -> Outcome:
    p = load_problem(args.input, args.eta)
    grid = parse_grid(args.grid)
    e_regs = [args.e_reg] if args.e_reg_grid is None else [_opt_float(x) for x in args.e_reg_grid.split(",")]
    seeds = [args.seed] if args.restarts == 1 else list(dfthc.restart_seeds(args.seed, args.restarts))
    cells = [(shape, er, s) for shape in grid for er in e_regs for s in seeds]

    def run(cell):
        shape, er, s = cell
        base = {"R": shape[0], "B": shape[1], "C": shape[2], "e_reg": er, "seed": s}
        try:
            hy = build_hyper(args, s)
            hy = replace(hy, e_reg=er)
            res = dfthc.optimize(p, shape, hy, e_gs=args.e_gs)
            return {**base, "status": "ok", **_fit_row(res, p, args.e_gs)}
        except (SosampError, ValueError) as exc:
            return {**base, "status": f"error: {exc}"}

    if args.workers > 1:
        with ThreadPoolExecutor(max_workers=args.workers) as pool:
            rows = list(pool.map(run, cells))
    else:
        rows = [run(c) for c in cells]
    gaps = [r["E_gap"] for r in rows if r.get("E_gap") is not None]
    estimate = min(gaps) if gaps else None
    payload = {"manifest": manifest("scan", args, seeds), "rows": rows, "E_gap_star": estimate}
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=SCAN_COLUMNS, extrasaction="ignore", lineterminator="\n")
    writer.writeheader()
    for r in rows:
        writer.writerow({k: ("" if r.get(k) is None else r.get(k)) for k in SCAN_COLUMNS})
    table = buf.getvalue().rstrip("\n")
    if args.out:
        Path(args.out).write_text(table + "\n")
        Path(str(args.out) + ".json").write_text(json.dumps(payload, indent=2) + "\n")
    return Outcome(EXIT_OK, payload, _render(payload, args, table))


# ---------------------------------------------------------------- cost

def _cost_inputs(args: argparse.Namespace) -> tuple[costs.CostInputs, float | None, float | None]:
    Lambda, gap = args.Lambda, args.e_gap
    if args.checkpoint:
        if not args.input:
            raise UsageError("--checkpoint needs --input to derive Lambda and E_gap")
        params, data = dfthc.load_checkpoint(args.checkpoint)
        p = load_problem(args.input, args.eta)
        use_shift = bool(data["hyper"].get("use_shift", True))
        summ = dfthc.fit_summary(params, p, use_shift, args.e_gs)
        Lambda, gap = summ["Lambda"], summ["E_gap"]
        n, shape = params.n_orb, params.shape
    else:
        if args.n_orb is None or args.shape is None:
            raise UsageError("cost needs --n-orb and --shape, or --checkpoint with --input")
        n, shape = args.n_orb, parse_shape(args.shape)
    ks = [None] * 4
    if args.k:
        try:
            ks = [int(x) for x in args.k.split(",")]
        except ValueError:
            raise UsageError("--k must be k1,k2,k4,k5") from None
        if len(ks) != 4:
            raise UsageError("--k must be k1,k2,k4,k5")
    try:
        inp = costs.CostInputs(n, *shape, b_rot=args.b_rot, b_coeff=args.b_coeff, b_k1=args.b_k1,
                               b_k2=args.b_k2, k1=ks[0], k2=ks[1], k4=ks[2], k5=ks[3])
    except (ValueError, SosampError) as exc:
        raise UsageError(str(exc)) from None
    return inp, Lambda, gap


def cmd_cost(args: argparse.Namespace) -> Outcome:
    if args.sigma_pea is not None and not args.sigma_pea > 0:
        raise UsageError("--sigma-pea must be positive")
    inp, Lambda, gap = _cost_inputs(args)
    report = costs.block_encoding_cost(inp)
    out = {"manifest": manifest("cost", args, []), "report": report.to_dict()}
    if (inp.N, inp.R, inp.B, inp.C) == (54, 10, 27, 27):
        out["reference"] = {
            "breakdown_table": costs.FEMOCO54_BREAKDOWN,
            "summary_table": costs.FEMOCO54_SUMMARY,
            "computed": {"toffoli": report.total_toffoli, "qubits": report.total_qubits},
            "matches_breakdown": report.total_toffoli == costs.FEMOCO54_BREAKDOWN["toffoli"]
            and report.total_qubits == costs.FEMOCO54_BREAKDOWN["qubits"],
        }
    if Lambda is not None and gap is not None:
        try:
            lam = costs.lambda_eff(Lambda, gap)
        except SosampError as exc:
            raise UsageError(str(exc)) from None
        sigma = (args.sigma_pea if args.sigma_pea is not None else 1.0) * 1e-3
        c_be = args.c_be if args.c_be is not None else report.total_toffoli
        queries, total = costs.pea_cost(lam, sigma, c_be)
        out["pea"] = {"Lambda": Lambda, "E_gap": gap, "lambda_eff": lam, "sigma_pea_Ha": sigma,
                      "C_BE": c_be, "queries": queries, "total_toffoli": total}
        if lam > 0:
            sc = costs.sigma_correction(Lambda, gap, sigma / lam)
            out["sigma_correction"] = asdict(sc)
    budget = costs.BudgetInputs(
        sigma_pea=args.sigma_pea if args.sigma_pea is not None else 1.0,
        eps_corr=args.eps_corr, sigma_corr=args.sigma_corr, sigma_trunc=args.sigma_trunc,
        mean_corr=args.mean_corr, mean_trunc=args.mean_trunc)
    out["error_budget"] = costs.error_budget(budget)
    table = report.to_csv().rstrip("\n") if args.format == "csv" else report.to_table()
    return Outcome(EXIT_OK, out, _render(out, args, table))


# ---------------------------------------------------------------- verify

def _check(name: str, value: float | None, tol: float | None, passed: bool | None = None) -> dict:
    if passed is None and tol is not None and value is not None:
        passed = bool(value <= tol)
    return {"name": name, "value": value, "tolerance": tol, "pass": passed}


def run_checks(params: dfthc.DfthcParams, p: tensors.Problem, use_shift: bool,
               do_walk: bool, do_sdp: bool) -> list[dict]:
    checks = []
    unit = params.unit_error()
    checks.append(_check("u unit norm", unit, 1e-10))
    if not checks[-1]["pass"]:
        return checks
    ident = sos.verify_sos_identity(params, p, use_shift)
    checks.append(_check("SOS identity residual", ident["sos_residual"], 1e-9))
    checks.append(_check("factorization residual (informational)", ident["hamiltonian_residual"], None))
    h1p = dfthc.effective_h1(params, p, use_shift, replace_trace=False)
    dec = sos.decompose(params, h1p)
    H = sos.dfthc_hamiltonian(params, h1p)
    emin = float(np.linalg.eigvalsh(H)[0])
    gap_closed = dfthc.e_gap(params, h1p, emin, p, use_shift)
    checks.append(_check("gap closed form vs dense", abs(gap_closed - (emin - dec.e_sos)), 1e-8))
    checks.append(_check("E_SOS below dense spectrum", dec.e_sos - emin, 1e-9))
    if do_walk:
        be = walk.encode_rectangular(dec)
        energies = walk.sa_energies(dec)
        tw = walk.walk_twice(be)
        checks.append(_check("walk unitarity", be.unitarity_error(), 1e-11))
        checks.append(_check("double-walk phases", walk.match_phases(
            tw["phases"], walk.double_walk_targets(energies, dec.Lambda)), 1e-8))
        _, spec = walk.hermitian_dilation(dec)
        checks.append(_check("Hermitian dilation spectrum", float(np.max(np.abs(
            spec - walk.dilation_targets(energies, len(dec.lambdas))))), 1e-9))
    if do_sdp:
        res = sdp.solve_lower_bound(p)
        e_full = float(np.linalg.eigvalsh(tensors.hamiltonian_matrix(p.h1, p.h2, p.e_core))[0])
        checks.append(_check("SDP bound below ground energy", res.bound - e_full, 1e-6))
    return checks


def cmd_verify(args: argparse.Namespace) -> Outcome:
    p = load_problem(args.input, args.eta)
    if p.n_orb > tensors.oracle_limit():
        raise OracleLimitError(
            f"N={p.n_orb} exceeds the dense oracle limit {tensors.oracle_limit()}; refusing to verify")
    if not Path(args.checkpoint).is_file():
        raise UsageError(f"checkpoint not found: {args.checkpoint}")
    params, data = dfthc.load_checkpoint(args.checkpoint)
    if params.n_orb != p.n_orb:
        raise UsageError("checkpoint and problem disagree on the orbital count")
    use_shift = bool(data["hyper"].get("use_shift", True)) and not args.no_shift
    do_walk = args.walk if args.walk is not None else p.n_orb <= 2
    do_sdp = args.sdp if args.sdp is not None else p.n_orb <= 2
    checks = run_checks(params, p, use_shift, do_walk, do_sdp)
    failed = [c["name"] for c in checks if c["pass"] is False]
    payload = {"manifest": manifest("verify", args, []), "checks": checks,
               "passed": not failed, "failed": failed}
    table = "\n".join(f"{'FAIL' if c['pass'] is False else 'ok  '}  {c['name']}: {c['value']}"
                      for c in checks)
    return Outcome(EXIT_OK if not failed else EXIT_VERIFY, payload, _render(payload, args, table))


# ---------------------------------------------------------------- parser

def _add_fit_flags(sp: argparse.ArgumentParser) -> None:
    sp.add_argument("--input", required=True, help="FCIDUMP, problem JSON or binary problem file")
    sp.add_argument("--eta", type=int, default=None, help="override the electron count")
    sp.add_argument("--steps", type=int, default=2000)
    sp.add_argument("--lr-init", type=float, default=1e-1)
    sp.add_argument("--lr-final", type=float, default=1e-4)
    sp.add_argument("--eps-reg", type=float, default=1e-2)
    sp.add_argument("--lambda-reg", type=_opt_float, default=1.0, help="'none' disables the term")
    sp.add_argument("--e-reg", type=_opt_float, default=None, help="'none' disables the term")
    sp.add_argument("--e-gs", type=float, default=None, help="reference ground energy (Ha)")
    sp.add_argument("--no-shift", action="store_true", help="freeze the particle-number shift")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--restarts", type=int, default=1)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sosamp", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"sosamp {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    op = sub.add_parser("optimize", help="fit a DFTHC factorization")
    _add_fit_flags(op)
    op.add_argument("--shape", required=True, help="R,B,C")
    op.add_argument("--threshold", type=float, default=0.3, help="error threshold in mHa")
    op.add_argument("--out", default=None, help="checkpoint path")
    op.add_argument("--out-report", default=None)
    op.add_argument("--format", choices=["json", "table"], default="json")
    op.set_defaults(func=cmd_optimize)

    sc = sub.add_parser("scan", help="optimize over a grid of shapes and gap regularizers")
    _add_fit_flags(sc)
    sc.add_argument("--grid", required=True, help="R,B,C;R,B,C;...")
    sc.add_argument("--e-reg-grid", default=None, help="comma list; 'none' allowed")
    sc.add_argument("--workers", type=int, default=1)
    sc.add_argument("--out", default=None, help="CSV path")
    sc.add_argument("--out-report", default=None)
    sc.add_argument("--format", choices=["csv", "json"], default="csv")
    sc.set_defaults(func=cmd_scan)

    co = sub.add_parser("cost", help="Toffoli and qubit cost report")
    co.add_argument("--n-orb", type=int, default=None)
    co.add_argument("--shape", default=None, help="R,B,C")
    co.add_argument("--checkpoint", default=None)
    co.add_argument("--input", default=None)
    co.add_argument("--eta", type=int, default=None)
    co.add_argument("--e-gs", type=float, default=None)
    co.add_argument("--b-rot", type=int, default=15)
    co.add_argument("--b-coeff", type=int, default=15)
    co.add_argument("--b-k1", type=int, default=None)
    co.add_argument("--b-k2", type=int, default=None)
    co.add_argument("--k", default=None, help="k1,k2,k4,k5 (default: optimized)")
    co.add_argument("--Lambda", type=float, default=None, help="Ha")
    co.add_argument("--e-gap", type=float, default=None, help="Ha")
    co.add_argument("--sigma-pea", type=float, default=None, help="mHa (default 1)")
    co.add_argument("--c-be", type=int, default=None, help="Toffoli per walk step override")
    for flag in ("eps-corr", "sigma-corr", "sigma-trunc", "mean-corr", "mean-trunc"):
        co.add_argument(f"--{flag}", type=float, default=0.0, help="mHa")
    co.add_argument("--out-report", default=None)
    co.add_argument("--format", choices=["json", "table", "csv"], default="json")
    co.set_defaults(func=cmd_cost)

    ve = sub.add_parser("verify", help="dense identity checks for a checkpoint")
    ve.add_argument("--input", required=True)
    ve.add_argument("--checkpoint", required=True)
    ve.add_argument("--eta", type=int, default=None)
    ve.add_argument("--no-shift", action="store_true")
    ve.add_argument("--walk", dest="walk", action="store_true", default=None)
    ve.add_argument("--no-walk", dest="walk", action="store_false")
    ve.add_argument("--sdp", dest="sdp", action="store_true", default=None)
    ve.add_argument("--no-sdp", dest="sdp", action="store_false")
    ve.add_argument("--out-report", default=None)
    ve.add_argument("--format", choices=["json", "table"], default="json")
    ve.set_defaults(func=cmd_verify)

    rp = sub.add_parser("replay", help="re-run a recorded JSON report and compare")
    rp.add_argument("report")
    rp.set_defaults(func=cmd_replay)
    return parser


COMMANDS = {"optimize": cmd_optimize, "scan": cmd_scan, "cost": cmd_cost, "verify": cmd_verify}


def replay(report: dict) -> Outcome:
    """Re-run the command recorded in a report's manifest without writing files.

    Input files must still hash to the recorded digests.
    """
    man = report["manifest"]
    for key, rec in man.get("inputs", {}).items():
        if _sha256(Path(rec["path"])) != rec["sha256"]:
            raise UsageError(f"{key} {rec['path']} changed since the run was recorded")
    args = argparse.Namespace(**man["args"])
    for key in ("out", "out_report"):
        if hasattr(args, key):
            setattr(args, key, None)
    return COMMANDS[man["subcommand"]](args)


def same_result(a: dict, b: dict) -> bool:
    """Reports agree on everything except the manifest."""
    strip = lambda r: {k: v for k, v in r.items() if k != "manifest"}
    return json.dumps(strip(a), sort_keys=True) == json.dumps(strip(b), sort_keys=True)


def cmd_replay(args: argparse.Namespace) -> Outcome:
    path = Path(args.report)
    if not path.is_file():
        raise UsageError(f"report not found: {args.report}")
    recorded = json.loads(path.read_text())
    fresh = replay(recorded)
    ok = same_result(recorded, fresh.payload)
    payload = {"manifest": manifest("replay", args, []), "report": str(path), "identical": ok}
    return Outcome(EXIT_OK if ok else EXIT_VERIFY, payload, json.dumps(payload, indent=2))


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        outcome = args.func(args)
    except DivergenceError as exc:
        print(f"sosamp: divergence: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except (UsageError, OracleLimitError, ParseError, OSError, ValueError, SosampError) as exc:
        print(f"sosamp: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if getattr(args, "out_report", None):
        Path(args.out_report).write_text(json.dumps(outcome.payload, indent=2) + "\n")
    print(outcome.text)
    return outcome.code


if __name__ == "__main__":
    sys.exit(main())
