"""Command-line front end: ``propagate``, ``modes``, ``sweep`` and ``su11``.

Exit codes: 0 success, 1 mode-overlap check failed, 2 configuration error,
3 divergence or residual above threshold, 4 mode decomposition failed or
ambiguous.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from threadpoolctl import threadpool_limits

from . import io
from .analysis import sweep_K, sweep_grid
from .config import FORMATS, PRESETS, ConfigError, RunConfig, build_config, load_config
from .modes import DecompositionError, PairingAmbiguityError, extract_mode_structure, verify_appendix
from .propagator import (RESIDUAL_TOLERANCE, DivergenceError, PropagationConfig, TransferState, default_grid,
                         identity_residuals, propagate)
from .su11 import ContinuousGainParams, StageSpec, cascade, continuous_gain, convergence_table

EXIT_OK = 0
EXIT_OVERLAP = 1
EXIT_CONFIG = 2
EXIT_DIVERGENCE = 3
EXIT_DECOMPOSITION = 4

OVERLAP_TOLERANCE = 1e-5


class CommandFailed(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="JSON run configuration")
    p.add_argument("--out", type=Path, help="output directory")
    p.add_argument("--format", choices=FORMATS, help="export format")


def _run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--steps", type=int, help="RK4 steps over the medium")
    p.add_argument("--grid", metavar="MIN:MAX:N", help="frequency grid")
    p.add_argument("--threads", type=int, help="BLAS threads (propagate, modes) or worker processes (sweep)")
    p.add_argument("--preset", choices=sorted(PRESETS), help="dispersion preset")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="parametric-modes", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("propagate", help="integrate the transfer kernels and export them")
    _common(p)
    _run_flags(p)
    p.add_argument("--K", type=float, help="pump parameter")

    p = sub.add_parser("modes", help="mode decomposition and consistency report")
    _common(p)
    _run_flags(p)
    p.add_argument("--K", type=float, help="pump parameter")
    p.add_argument("--kernels", help="read kernels from a bundle instead of propagating")

    p = sub.add_parser("sweep", help="observables over a list of pump parameters")
    _common(p)
    _run_flags(p)
    p.add_argument("--K-values", dest="K_values", help="comma-separated pump parameters")

    p = sub.add_parser("su11", help="single-mode gain of a cascade or continuous amplifier")
    _common(p)
    p.add_argument("--zeta", type=complex, help="coupling per unit length (complex allowed, e.g. 0.4+0.1j)")
    p.add_argument("--eta", type=float, help="phase mismatch per unit length")
    p.add_argument("--x", type=float, help="length")
    return parser


def _overrides(args: argparse.Namespace) -> dict:
    out = {}
    for key in ("steps", "grid", "threads", "preset", "K", "kernels", "format", "eta", "x"):
        v = getattr(args, key, None)
        if v is not None:
            out[key] = v
    zeta = getattr(args, "zeta", None)
    if zeta is not None:
        out["zeta"] = [zeta.real, zeta.imag] if zeta.imag else zeta.real
    ks = getattr(args, "K_values", None)
    if ks is not None:
        try:
            out["K_values"] = [float(k) for k in ks.split(",") if k.strip()]
        except ValueError as exc:
            raise ConfigError(f"bad --K-values: {exc}") from exc
    return out


def resolve_config(args: argparse.Namespace) -> RunConfig:
    raw = {}
    if args.config is not None:
        raw = dict(load_config(args.config, args.command).raw)
    raw.update(_overrides(args))
    return build_config(args.command, raw)


def _prepare_out(out: Path | None, cfg: RunConfig) -> Path | None:
    if out is None:
        return None
    out.mkdir(parents=True, exist_ok=True)
    io.write_json(out / "config.json", cfg.raw)
    return out


def _propagate(cfg: RunConfig) -> TransferState:
    pump = cfg.pump()
    grid = cfg.grid or default_grid(pump.K)
    try:
        with threadpool_limits(limits=cfg.threads):
            return propagate(PropagationConfig(pump, grid, cfg.steps, auto_refine=cfg.auto_refine))
    except DivergenceError as exc:
        raise CommandFailed(EXIT_DIVERGENCE, str(exc)) from exc


def residual_report(state: TransferState) -> dict:
    r1, r2, r3 = identity_residuals(state)
    residual = max(r1, r2, r3)
    return {
        "residual": residual,
        "residual_h1a_h2a": r1,
        "residual_h1b_h2b": r2,
        "residual_cross": r3,
        "threshold": RESIDUAL_TOLERANCE,
        "passed": residual <= RESIDUAL_TOLERANCE,
        "steps": state.steps,
        "leakage": state.meta.get("leakage"),
        "leakage_flag": state.meta.get("leakage_flag"),
        "K": state.meta.get("K"),
        "inv_delta1": state.meta.get("inv_delta1"),
        "inv_delta2": state.meta.get("inv_delta2"),
        "grid_a": state.grid_a.to_dict(),
        "grid_b": state.grid_b.to_dict(),
    }


def cmd_propagate(cfg: RunConfig, out: Path | None) -> int:
    state = _propagate(cfg)
    report = residual_report(state)
    print(f"K={cfg.K:g} steps={state.steps} residual={report['residual']:.3e} leakage={report['leakage']:.3e}")
    if out is not None:
        io.write_kernels(state, out, cfg.format)
        if cfg.format in ("csv", "both"):
            io.write_contour(out / "h2a_modulus.csv", state)
        io.write_json(out / "report.json", report)
    if not report["passed"]:
        raise CommandFailed(EXIT_DIVERGENCE, f"identity residual {report['residual']:.3e} exceeds "
                                             f"{RESIDUAL_TOLERANCE:g}")
    return EXIT_OK


def cmd_modes(cfg: RunConfig, out: Path | None) -> int:
    if cfg.kernels:
        try:
            state = io.read_kernels(Path(cfg.kernels))
        except (OSError, io.BundleError, ValueError) as exc:
            raise ConfigError(f"cannot read kernels from {cfg.kernels}: {exc}") from exc
    else:
        state = _propagate(cfg)
    try:
        modes = extract_mode_structure(state, cfg.truncation)
        report = verify_appendix(state, modes, cfg.appendix_floor)
    except PairingAmbiguityError as exc:
        raise CommandFailed(EXIT_DECOMPOSITION, f"pairing ambiguity: {exc}") from exc
    except DecompositionError as exc:
        raise CommandFailed(EXIT_DECOMPOSITION, str(exc)) from exc
    passed = report.worst_overlap() > 1 - OVERLAP_TOLERANCE
    print(f"G={modes.G:.6g} kept={modes.n_modes_kept} checked={report.modes_evaluated}")
    print("r = " + " ".join(f"{v:.6g}" for v in modes.r[:8]))
    print(f"worst overlap={report.worst_overlap():.12f} worst cosh/sinh defect={report.worst_defect():.3e}")
    if out is not None:
        io.write_modes(out / "modes.json", modes)
        io.write_appendix(out / "appendix.json", report, passed)
    if not passed:
        raise CommandFailed(EXIT_OVERLAP, "mode-function overlaps below 1 - 1e-5")
    return EXIT_OK


def cmd_sweep(cfg: RunConfig, out: Path | None) -> int:
    if not cfg.K_values:
        raise ConfigError("field 'K_values' is empty")
    grid_for_K = None if cfg.grid is not None else sweep_grid
    base = PropagationConfig(cfg.pump(0.0), cfg.grid or sweep_grid(0.0), cfg.steps, auto_refine=cfg.auto_refine)
    records = sweep_K(base, cfg.K_values, grid_for_K=grid_for_K, n_ratios=cfg.n_ratios, workers=cfg.threads)
    for r in records:
        print(f"K={r.K:<10.4g} M={r.M:<10.6g} g2={r.g2:<10.6g} fwhm={r.fwhm_mode1:<10.6g} status={r.status}")
    if out is not None:
        if cfg.format in ("csv", "both"):
            io.write_sweep_csv(out / "sweep.csv", records, cfg.n_ratios)
            io.figure_files(records, out, cfg.ratio_figure, cfg.n_ratios)
        if cfg.format in ("json", "both"):
            io.write_sweep_json(out / "sweep.json", records,
                                {"inv_delta1": cfg.inv_delta1, "inv_delta2": cfg.inv_delta2})
    if not any(r.status in ("ok", "limit") for r in records):
        raise CommandFailed(EXIT_DIVERGENCE, "no sweep point succeeded")
    return EXIT_OK


def _cx(z: complex) -> str:
    return f"{z.real:.12g}{z.imag:+.12g}j"


def cmd_su11(cfg: RunConfig, out: Path | None) -> int:
    doc = {}
    if cfg.stages:
        total = cascade([StageSpec(g, theta) for g, theta in cfg.stages])
        print(f"cascade of {len(cfg.stages)} stages: G_T = {_cx(total.G)}  g_T = {_cx(total.g)}")
        print(f"|G_T|^2 - |g_T|^2 = {abs(total.G) ** 2 - abs(total.g) ** 2:.15f}")
        doc["cascade"] = {"G": [total.G.real, total.G.imag], "g": [total.g.real, total.g.imag],
                          "defect": total.bogoliubov_defect()}
    if cfg.zeta is not None:
        params = ContinuousGainParams(cfg.zeta, cfg.eta or 0.0, 1.0 if cfg.x is None else cfg.x)
        gain = continuous_gain(params)
        print(f"continuous zeta={_cx(params.zeta)} eta={params.eta:g} x={params.x:g}: "
              f"G_T = {_cx(gain.G)}  g_T = {_cx(gain.g)}")
        print(f"|G_T|^2 - |g_T|^2 = {abs(gain.G) ** 2 - abs(gain.g) ** 2:.15f}")
        rows = convergence_table(params, cfg.stage_counts)
        print(f"{'N':>8} {'error':>12} {'ratio':>8}")
        for row in rows:
            ratio = "" if row["ratio"] is None else f"{row['ratio']:.4f}"
            print(f"{row['N']:>8d} {row['error']:>12.4e} {ratio:>8}")
        doc["continuous"] = {"G": [gain.G.real, gain.G.imag], "g": [gain.g.real, gain.g.imag],
                             "defect": gain.bogoliubov_defect(), "convergence": rows}
        if out is not None and cfg.format in ("csv", "both"):
            io.write_csv(out / "su11_convergence.csv", ("N", "error", "ratio"),
                         ((r["N"], r["error"], "" if r["ratio"] is None else r["ratio"]) for r in rows))
    if not doc:
        raise ConfigError("missing required field 'zeta' (or 'stages')")
    if out is not None and cfg.format in ("json", "both"):
        io.write_json(out / "su11.json", doc)
    return EXIT_OK


COMMANDS = {"propagate": cmd_propagate, "modes": cmd_modes, "sweep": cmd_sweep, "su11": cmd_su11}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args)
        out = _prepare_out(args.out, cfg)
        return COMMANDS[args.command](cfg, out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except CommandFailed as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
