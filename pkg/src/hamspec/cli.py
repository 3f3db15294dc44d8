"""``hamspec`` command line front end.

Exit codes: 0 ok, 1 usage or IO error, 2 validation failure, 3 spectral
point (``z`` is an eigenvalue), 4 classification ambiguity.
"""

from __future__ import annotations

import argparse
import json
import sys as _sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .classify import (CaseKind, ClassificationAmbiguous, DefinitenessNotFound,
                       NoSelfAdjointExtension)
from .config import (ConfigError, build_descriptor, build_system, case_label, load_config,
                     load_source)
from .extensions import InvalidBoundaryCondition, dirichlet_bc, induce_regular, validate_sse
from .linalg import ContractViolation
from .model import AssumptionViolation, apply_L, validate
from .report import (convergence_svg, defect_table, dumps, eigen_rows, trajectory_table,
                     write_csv)
from .solutions import TailDivergence
from .spectral import (ApproxOptions, ShiftSearchFailed, ZIsEigenvalue, approximate,
                       eigen_oracle, eigenvalues_regular, regular_resolvent)

EXIT_OK, EXIT_USAGE, EXIT_VALIDATION, EXIT_SPECTRAL, EXIT_AMBIGUOUS = 0, 1, 2, 3, 4


class UsageError(Exception):
    pass


def _parse_z(text: str) -> complex:
    try:
        parts = [float(p) for p in text.split(",")]
    except ValueError as exc:
        raise UsageError(f"--z expects 're,im', got {text!r}") from exc
    if len(parts) == 1:
        return complex(parts[0], 0.0)
    if len(parts) != 2:
        raise UsageError(f"--z expects 're,im', got {text!r}")
    return complex(parts[0], parts[1])


def _out_dir(args, cfg) -> Path | None:
    out = args.out or cfg.out
    if out is None:
        return None
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _regular_bc(cfg, sys, b):
    if cfg.boundary == "dirichlet":
        return dirichlet_bc(sys, b), None
    label = case_label(cfg, sys)
    desc = build_descriptor(cfg, sys, label)
    if cfg.shift:
        raise UsageError("a spectral shift is only supported by 'approx'")
    return induce_regular(desc, b), desc


def _need_b(args, cfg) -> int:
    b = args.b if args.b is not None else cfg.b
    if b is None:
        raise UsageError("this command needs --b (or 'b' in the config)")
    return int(b)


def cmd_validate(args, cfg, stdout) -> int:
    sys = build_system(cfg)
    horizon = max([64] + cfg.schedule + ([int(cfg.b)] if cfg.b is not None else [])) + 2
    report = {"system": None, "sse": None}
    try:
        rep = validate(sys, (sys.a, sys.a + horizon))
        report["system"] = {"ok": True, "checked": [sys.a, sys.a + horizon],
                            "max_herm_B": rep.worst("herm_B"), "max_herm_C": rep.worst("herm_C"),
                            "min_eig_W1": rep.worst("min_eig_W1"),
                            "min_eig_W2": rep.worst("min_eig_W2"),
                            "min_sv_I_minus_A": rep.worst("smin_I_minus_A")}
        if cfg.boundary != "dirichlet" and (cfg.sse or cfg.case is not None):
            label = case_label(cfg, sys)
            desc = build_descriptor(cfg, sys, label)
            sse = validate_sse(desc)
            report["sse"] = {"ok": True, "case": label.kind.value, "residuals": sse.residuals,
                             "ranks": sse.ranks}
    finally:
        stdout.write(dumps(report))
    return EXIT_OK


def cmd_classify(args, cfg, stdout) -> int:
    sys = build_system(cfg)
    label = case_label(cfg, sys)
    stdout.write(dumps(label.as_dict()))
    return EXIT_OK


def cmd_eigs(args, cfg, stdout) -> int:
    sys = build_system(cfg)
    b = _need_b(args, cfg)
    bc, _ = _regular_bc(cfg, sys, b)
    eigs = eigenvalues_regular(sys, bc, zero_tol=cfg.tolerances["zero"],
                               cluster_tol=cfg.tolerances["cluster"])
    oracle = None
    if args.oracle:
        if cfg.oracle_window:
            win = tuple(cfg.oracle_window)
        elif len(eigs.values):
            win = (float(eigs.values.min()) - 0.5, float(eigs.values.max()) + 0.5)
        else:
            win = (0.0, 1.0)
        oracle = eigen_oracle(sys, bc, win, cfg.oracle_grid)
    ct = cfg.tolerances["cluster"]
    header = ["k [signed index]", f"lambda [spectral parameter; cluster_tol={ct:g}]",
              "multiplicity [count]", "oracle_lambda [spectral parameter; width=1e-10]"]
    rows = eigen_rows(eigs, 0.0, oracle)
    if not args.oracle:
        header = header[:3]
        rows = [r[:3] for r in rows]
    out = _out_dir(args, cfg)
    text = write_csv(out / f"eigs_b{b}.csv" if out else None, header, rows)
    if out is None:
        stdout.write(text)
    return EXIT_OK


def cmd_resolvent(args, cfg, stdout) -> int:
    sys = build_system(cfg)
    b = _need_b(args, cfg)
    if args.z is None:
        raise UsageError("resolvent needs --z re,im")
    z = _parse_z(args.z)
    bc, _ = _regular_bc(cfg, sys, b)
    g = load_source(cfg, sys, b)
    y = regular_resolvent(sys, bc, z, g)
    n = sys.n
    # g extended by zeros so R(g)(t) is defined up to t = b
    gv = np.zeros((b + 2 - sys.a, 2 * n), dtype=complex)
    lo, hi = max(g.start, sys.a), min(g.end, b + 1)
    if hi >= lo:
        gv[lo - sys.a:hi - sys.a + 1] = g.values[lo - g.start:hi - g.start + 1]
    rows = []
    for t in range(sys.a, b + 2):
        v = y(t)
        res = None
        if t <= b:
            rzy = np.concatenate([z * y(t + 1)[:n] - gv[t + 1 - sys.a, :n],
                                  z * y(t)[n:] - gv[t - sys.a, n:]])
            res = float(np.linalg.norm(apply_L(sys, y, t) - sys.weight(t) @ rzy))
        rows.append([t] + [x for c in v for x in (c.real, c.imag)] + [res])
    header = ["t [index]"]
    for i in range(2 * n):
        comp = f"y{1 if i < n else 2}_{i % n + 1}"
        header += [f"{comp}_re [solution]", f"{comp}_im [solution]"]
    header.append("defining_residual [abs; tol=1e-08]")
    out = _out_dir(args, cfg)
    text = write_csv(out / f"resolvent_b{b}.csv" if out else None, header, rows)
    if out is None:
        stdout.write(text)
    return EXIT_OK


def cmd_approx(args, cfg, stdout) -> int:
    if not cfg.schedule:
        raise UsageError("approx needs a non-empty schedule")
    sys = build_system(cfg)
    t_start = time.perf_counter()
    label = case_label(cfg, sys)
    desc = build_descriptor(cfg, sys, label)
    opts = ApproxOptions(shift=cfg.shift, indices=cfg.indices, oracle=args.oracle,
                         oracle_window=tuple(cfg.oracle_window) if cfg.oracle_window else None,
                         oracle_grid=cfg.oracle_grid, seed=cfg.seed,
                         tail_tol=cfg.tolerances["tail"], workers=cfg.workers)
    rep = approximate(desc, cfg.schedule, opts)
    elapsed = time.perf_counter() - t_start
    out = _out_dir(args, cfg) or Path(".")
    tt = cfg.tolerances["tail"]
    if cfg.emit.get("csv", True):
        write_csv(out / "trajectories.csv",
                  ["r [run]", "b_r [index]", "k [signed index]",
                   f"lambda_k [spectral parameter; cluster_tol={cfg.tolerances['cluster']:g}]",
                   f"e_r [spectral parameter; tail_tol={tt:g}]",
                   f"bound_a [spectral parameter; tail_tol={tt:g}]",
                   f"bound_b [spectral parameter; tail_tol={tt:g}]", "verdict [label]"],
                  trajectory_table(rep))
        write_csv(out / "defects.csv",
                  ["r [run]", "b_r [index]", "sample [id]",
                   f"delta_r [weighted norm^2; tail_tol={tt:g}]",
                   f"delta_r1 [weighted norm^2; tail_tol={tt:g}]",
                   f"delta_r2 [weighted norm^2; tail_tol={tt:g}]",
                   "g_norm2 [weighted norm^2; exact]"],
                  defect_table(rep))
    if cfg.emit.get("svg", True):
        (out / "convergence.svg").write_text(convergence_svg(rep))
    if cfg.emit.get("json", True):
        import numpy, scipy
        bundle = {
            "classification": label.as_dict(),
            "shift": cfg.shift,
            "schedule": cfg.schedule,
            "runs": [{"b": r.b, "eigenvalues": None if r.eigs is None else r.eigs.values + cfg.shift,
                      "multiplicities": None if r.eigs is None else r.eigs.multiplicities,
                      "mu": None if r.eigs is None else r.eigs.mu, "e_r": r.e_r,
                      "hs_partial_sum": r.hs_sum, "oracle": r.oracle, "error": r.error}
                     for r in rep.runs],
            "verdicts": rep.verdicts,
            "bound_error": getattr(rep, "bound_error", None),
            "tolerances": cfg.tolerances,
            "metadata": {"hamspec": __version__, "numpy": numpy.__version__,
                         "scipy": scipy.__version__, "seed": cfg.seed},
        }
        (out / "report.json").write_text(dumps(bundle))
        (out / "timings.json").write_text(dumps({"wall_seconds": round(elapsed, 3)}))
    stdout.write(f"wrote results for {len(rep.runs)} truncations to {out}\n")
    return EXIT_OK


COMMANDS = {"validate": cmd_validate, "classify": cmd_classify, "eigs": cmd_eigs,
            "approx": cmd_approx, "resolvent": cmd_resolvent}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hamspec",
                                description="Spectra of discrete Hamiltonian systems by truncation.")
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", required=True, help="run configuration (JSON)")
    p.add_argument("--b", type=int, default=None, help="right end of the truncated interval")
    p.add_argument("--z", default=None, help="spectral point as 're,im'")
    p.add_argument("--oracle", action="store_true", help="cross-check with the determinant scan")
    p.add_argument("--out", default=None, help="output directory")
    p.add_argument("--version", action="version", version=f"hamspec {__version__}")
    return p


def main(argv=None, stdout=None, stderr=None) -> int:
    stdout = stdout or _sys.stdout
    stderr = stderr or _sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    try:
        cfg = load_config(args.config)
        return COMMANDS[args.command](args, cfg, stdout)
    except (OSError, json.JSONDecodeError, ConfigError, UsageError) as exc:
        stderr.write(f"error: {exc}\n")
        return EXIT_USAGE
    except (AssumptionViolation, InvalidBoundaryCondition, NoSelfAdjointExtension,
            DefinitenessNotFound, ContractViolation, TailDivergence) as exc:
        stderr.write(f"validation error: {exc}\n")
        return EXIT_VALIDATION
    except (ZIsEigenvalue, ShiftSearchFailed) as exc:
        stderr.write(f"spectral point: {exc}\n")
        return EXIT_SPECTRAL
    except ClassificationAmbiguous as exc:
        stderr.write(f"classification ambiguous: {exc}\n")
        return EXIT_AMBIGUOUS


if __name__ == "__main__":  # pragma: no cover
    raise SystemExit(main())
