"""Command-line front end: scans, loop phases, detection, verification.

Each subcommand reads a family document, writes machine outputs (JSON,
CSV, optional binary frames) plus rendered figures into --out, and
prints a short human summary.  Exit codes are a stable contract:
0 success, 2 configuration, 3 continuation failure, 4 cell budget
exhausted, 5 verification failure.
"""
from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from .continuation import (
    ContinuationOptions,
    GaugeMode,
    continue_loop,
    write_trace_frames,
)
from .detector import DetectOptions, detect, detection_to_dict
from .embedding import (
    discr_limit_probe,
    embedding_discriminant,
    embedding_eigendecomposition,
    genericity_det,
    hermitian_embedding,
    sigma_limit_probe,
)
from .errors import (
    ContinuationFailedError,
    DimensionError,
    DomainError,
    ParseError,
)
from .linalg import discriminant, herm_eig, svd_point
from .model import (
    Rect,
    grid_scan,
    loop_to_dict,
    parse_family,
    parse_loop,
    with_samples,
)
from .phase import accrued_phases, principal_angle, report_to_dict

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_CONTINUATION = 3
EXIT_BUDGET = 4
EXIT_VERIFY = 5

SPECTRUM_TOL = 1e-10
BLOCK_TOL = 1e-10
DISCR_RTOL = 1e-8


class _ConfigError(Exception):
    pass


def format_phase(x: float) -> str:
    """Render an angle at 4 decimals on the principal branch.

    The two ends of the branch are the same angle, so a value that
    rounds to the lower end prints as the canonical "+3.1416"; likewise
    a vanishing negative prints as "+0.0000".
    """
    s = f"{principal_angle(float(x)):+.4f}"
    if s == "-3.1416":
        return "+3.1416"
    if s == "-0.0000":
        return "+0.0000"
    return s


def _load_text(path: str, what: str) -> str:
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise _ConfigError(f"cannot read {what} file {path}: {exc}") from exc


def _load_family(path: str):
    try:
        return parse_family(_load_text(path, "family"))
    except (ParseError, DomainError, DimensionError) as exc:
        raise _ConfigError(f"bad family document {path}: {exc}") from exc


def _load_loop(path: str):
    try:
        return parse_loop(_load_text(path, "loop"))
    except (ParseError, DomainError, DimensionError) as exc:
        raise _ConfigError(f"bad loop document {path}: {exc}") from exc


def _parse_box(text: str) -> Rect:
    parts = text.split(",")
    if len(parts) != 4:
        raise _ConfigError(f"box must be xmin,xmax,ymin,ymax, got {text!r}")
    try:
        xmin, xmax, ymin, ymax = (float(p) for p in parts)
    except ValueError as exc:
        raise _ConfigError(f"box coordinates must be numbers, got {text!r}") from exc
    if not (xmin < xmax and ymin < ymax):
        raise _ConfigError(f"box must have positive extent, got {text!r}")
    return Rect(xmin, xmax, ymin, ymax)


def _parse_point(text: str) -> tuple[float, float]:
    parts = text.split(",")
    if len(parts) != 2:
        raise _ConfigError(f"point must be x,y, got {text!r}")
    try:
        return (float(parts[0]), float(parts[1]))
    except ValueError as exc:
        raise _ConfigError(f"point coordinates must be numbers, got {text!r}") from exc


def _gauge(name: str) -> GaugeMode:
    try:
        return GaugeMode(name)
    except ValueError as exc:
        raise _ConfigError(f"unknown gauge {name!r}") from exc


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2) + "\n")


def cmd_scan(args) -> int:
    fam = _load_family(args.family)
    box = _parse_box(args.box)
    if args.samples < 2:
        raise _ConfigError("scan needs at least 2 samples per axis")
    out = _out_dir(args)
    surface = grid_scan(fam, box, args.samples)
    (out / "surface.csv").write_text(surface.to_csv())
    ax, ay, aval = surface.argmin_sigma()
    summary = {
        "family": args.family,
        "box": list(box.as_tuple()),
        "grid": [len(surface.xs), len(surface.ys)],
        "argmin_sigma": {"xy": [ax, ay], "value": aval},
        "min_gap": surface.min_gap(),
    }
    _write_json(out / "scan_summary.json", summary)
    written = ["surface.csv", "scan_summary.json"]
    if not args.no_plots:
        from .plots import save_surface_plot

        save_surface_plot(surface, out / "sigma_surface.png")
        written.append("sigma_surface.png")
    print(f"scanned {len(surface.xs)}x{len(surface.ys)} grid on {args.box}")
    print(f"sigma_min attains {aval:.6e} at ({ax:+.6f}, {ay:+.6f}); min gap {surface.min_gap():.6e}")
    print(f"wrote {', '.join(written)} in {out}")
    return EXIT_OK


def cmd_loop(args) -> int:
    fam = _load_family(args.family)
    loop = _load_loop(args.loop)
    if args.samples is not None:
        if args.samples < 8:
            raise _ConfigError("need at least 8 loop samples")
        loop = with_samples(loop, args.samples)
    gauge = _gauge(args.gauge)
    out = _out_dir(args)
    try:
        trace = continue_loop(fam, loop, gauge, ContinuationOptions())
    except ContinuationFailedError as exc:
        print(f"continuation failed at t = {exc.last_t:.6f}: {exc}", file=sys.stderr)
        return EXIT_CONTINUATION
    report = accrued_phases(trace, class_tol=args.class_tol)

    print(f"gauge {gauge.value}, {trace.num_samples} samples, min gap {trace.min_gap:.3e}")
    print("  column  phase")
    for j, beta in enumerate(report.beta):
        print(f"  {j + 1:6d}  {format_phase(beta)}")
    print(f"     sum  {format_phase(report.sum_mod_2pi)}")
    print(f"classification: {report.classification.name} (residual {report.residual:.2e})")

    (out / "trace.csv").write_text(trace.to_csv())
    payload = {
        "family": args.family,
        "loop": loop_to_dict(loop),
        "gauge": gauge.value,
        "report": report_to_dict(report),
    }
    _write_json(out / "phases.json", payload)
    written = ["trace.csv", "phases.json"]
    if args.frames:
        write_trace_frames(trace, out / "frames.bin")
        written.append("frames.bin")
    if not args.no_plots:
        from .plots import save_loop_plot

        save_loop_plot(trace, report, out / "loop_phases.png")
        written.append("loop_phases.png")
    print(f"wrote {', '.join(written)} in {out}")
    return EXIT_OK


def cmd_detect(args) -> int:
    fam = _load_family(args.family)
    box = _parse_box(args.box)
    try:
        opts = DetectOptions(
            loc_tol=args.loc_tol,
            det_tol=args.det_tol,
            max_cells=args.max_cells,
            loop_samples=args.samples,
            class_tol=args.class_tol,
        )
    except DomainError as exc:
        raise _ConfigError(str(exc)) from exc
    out = _out_dir(args)
    t0 = time.perf_counter()
    result = detect(fam, box, opts)
    elapsed = time.perf_counter() - t0

    _write_json(out / "detection.json", detection_to_dict(result))
    written = ["detection.json"]
    if not args.no_plots:
        from .plots import save_detection_plot

        surface = grid_scan(fam, box, 41)
        save_detection_plot(result, box, out / "detection.png", surface=surface)
        written.append("detection.png")

    print(
        f"{len(result.points)} point(s) in {args.box}; "
        f"{result.cells_tested} cells in {elapsed:.1f} s"
    )
    for p in result.points:
        tag = "generic" if p.genericity.regular else "NOT generic"
        print(
            f"  ({p.location[0]:+.8f}, {p.location[1]:+.8f})  "
            f"|det| = {p.polish_residual:.2e}  {tag}"
        )
    for cell in result.inconclusive:
        print(f"  inconclusive {cell.rect.as_tuple()}: {cell.reason}")
    print(f"wrote {', '.join(written)} in {out}")
    if result.budget_exhausted:
        print(
            f"cell budget ({opts.max_cells}) exhausted; results are partial",
            file=sys.stderr,
        )
        return EXIT_BUDGET
    return EXIT_OK


def _identity_trials(rng: np.random.Generator, trials: int) -> dict:
    """Random-matrix consistency checks of the embedding identities.

    Draws are renormalized to keep the products in the discriminant
    comparison inside double-precision range, and resampled while the
    expected spectrum has a gap or smallest singular value under 1e-6,
    since the closed forms assume simple nonzero spectra.
    """
    worst = {"spectrum": 0.0, "block_offdiag": 0.0, "unitarity": 0.0, "discr_rel": 0.0}
    failures = 0
    resamples = 0
    for _ in range(trials):
        for _attempt in range(64):
            n = int(rng.integers(2, 9))
            a = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
            nrm = float(np.linalg.norm(a))
            if nrm > 3.0:
                a = a * (3.0 / nrm)
            eps = float(rng.uniform(-2.0, 2.0))
            triple = svd_point(a)
            s_plus = np.hypot(triple.sigma, eps)
            expected = np.concatenate([s_plus, -s_plus[::-1]])
            if triple.sigma[-1] >= 1e-6 and float(np.min(np.diff(np.sort(expected)))) >= 1e-6:
                break
            resamples += 1
        m = hermitian_embedding(a, eps)
        eig = herm_eig(m)
        mnorm = float(s_plus[0])

        spect_err = float(np.max(np.abs(eig.lam - expected)))
        emb = embedding_eigendecomposition(triple, eps)
        dm = np.concatenate([emb.s_plus, -emb.s_plus])
        block = emb.w.conj().T @ m @ emb.w - np.diag(dm)
        block_err = float(np.linalg.norm(block))
        unit_err = float(np.linalg.norm(emb.w.conj().T @ emb.w - np.eye(2 * n)))
        d_lam = discriminant(eig.lam)
        d_closed = embedding_discriminant(triple.sigma, eps)
        discr_rel = abs(d_lam - d_closed) / max(abs(d_closed), 1e-300)

        worst["spectrum"] = max(worst["spectrum"], spect_err)
        worst["block_offdiag"] = max(worst["block_offdiag"], block_err)
        worst["unitarity"] = max(worst["unitarity"], unit_err)
        worst["discr_rel"] = max(worst["discr_rel"], discr_rel)
        ok = (
            spect_err <= SPECTRUM_TOL
            and block_err <= BLOCK_TOL * mnorm
            and unit_err <= BLOCK_TOL
            and discr_rel <= DISCR_RTOL
        )
        if not ok:
            failures += 1
    return {
        "trials": trials,
        "failures": failures,
        "resamples": resamples,
        "worst": worst,
        "tolerances": {
            "spectrum": SPECTRUM_TOL,
            "block_offdiag_rel": BLOCK_TOL,
            "unitarity": BLOCK_TOL,
            "discr_rel": DISCR_RTOL,
        },
    }


def cmd_verify(args) -> int:
    fam = _load_family(args.family)
    points: list[tuple[float, float]] = []
    if args.point is not None:
        points.append(_parse_point(args.point))
    if args.detection is not None:
        try:
            doc = json.loads(_load_text(args.detection, "detection"))
            for entry in doc["points"]:
                points.append((float(entry["xy"][0]), float(entry["xy"][1])))
        except (json.JSONDecodeError, KeyError, IndexError, TypeError, ValueError) as exc:
            raise _ConfigError(f"bad detection file {args.detection}: {exc}") from exc
    if not points:
        raise _ConfigError("verify needs --point x,y or --detection FILE")
    out = _out_dir(args)

    point_reports = []
    probe_pairs = []
    for pt in points:
        gen = genericity_det(fam, pt)
        sig_probe = sigma_limit_probe(fam, pt)
        dis_probe = discr_limit_probe(fam, pt)
        probe_pairs.append((sig_probe, dis_probe))
        point_reports.append(
            {
                "point": [pt[0], pt[1]],
                "genericity": gen.to_dict(),
                "sigma_probe": sig_probe.to_dict(),
                "discr_probe": dis_probe.to_dict(),
            }
        )
        print(
            f"point ({pt[0]:+.6f}, {pt[1]:+.6f}): "
            f"{'regular' if gen.regular else 'NOT regular'} determinant zero; "
            f"sigma probe {sig_probe.verdict}, discriminant probe {dis_probe.verdict}"
        )

    rng = np.random.default_rng(args.seed)
    identities = _identity_trials(rng, args.trials)
    print(
        f"embedding identities: {identities['trials']} trials, "
        f"{identities['failures']} failures "
        f"(worst spectrum error {identities['worst']['spectrum']:.2e}, "
        f"worst discriminant mismatch {identities['worst']['discr_rel']:.2e})"
    )

    passed = identities["failures"] == 0
    payload = {
        "family": args.family,
        "seed": args.seed,
        "points": point_reports,
        "identity_checks": identities,
        "pass": passed,
    }
    _write_json(out / "verify.json", payload)
    written = ["verify.json"]
    if not args.no_plots:
        from .plots import save_probe_plot

        save_probe_plot([p for pair in probe_pairs for p in pair], out / "verify_probes.png")
        written.append("verify_probes.png")
    print(f"wrote {', '.join(written)} in {out}")
    if not passed:
        print("verification FAILED: identity checks out of tolerance", file=sys.stderr)
        return EXIT_VERIFY
    print("verification passed")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="svdloop",
        description=(
            "Continue singular value decompositions around parameter loops, "
            "accumulate singular-vector phases, and locate rank-loss points."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    scan = sub.add_parser("scan", help="grid scan of spectral diagnostics over a box")
    scan.add_argument("--family", required=True, help="family JSON document")
    scan.add_argument("--box", required=True, help="xmin,xmax,ymin,ymax")
    scan.add_argument("--samples", type=int, default=41, help="grid nodes per axis")
    scan.add_argument("--out", default=".", help="output directory")
    scan.add_argument("--no-plots", action="store_true", help="skip figure rendering")
    scan.set_defaults(func=cmd_scan)

    loop = sub.add_parser("loop", help="continue around one loop and report phases")
    loop.add_argument("--family", required=True, help="family JSON document")
    loop.add_argument("--loop", required=True, help="loop JSON document")
    loop.add_argument("--gauge", default="joint", choices=["joint", "umvd", "vmvd"])
    loop.add_argument("--samples", type=int, default=None, help="override loop samples")
    loop.add_argument("--class-tol", type=float, default=0.3, help="classification band (rad)")
    loop.add_argument("--out", default=".", help="output directory")
    loop.add_argument("--frames", action="store_true", help="write binary U/V frames")
    loop.add_argument("--no-plots", action="store_true", help="skip figure rendering")
    loop.set_defaults(func=cmd_loop)

    det = sub.add_parser("detect", help="locate rank-loss points inside a box")
    det.add_argument("--family", required=True, help="family JSON document")
    det.add_argument("--box", required=True, help="xmin,xmax,ymin,ymax")
    det.add_argument("--samples", type=int, default=64, help="boundary samples per cell loop")
    det.add_argument("--loc-tol", type=float, default=1e-3, help="localization tolerance")
    det.add_argument("--det-tol", type=float, default=None, help="|det| polish target")
    det.add_argument("--max-cells", type=int, default=4096, help="loop-test budget")
    det.add_argument("--class-tol", type=float, default=0.3, help="classification band (rad)")
    det.add_argument("--out", default=".", help="output directory")
    det.add_argument("--no-plots", action="store_true", help="skip figure rendering")
    det.set_defaults(func=cmd_detect)

    ver = sub.add_parser("verify", help="diagnostics at a candidate point plus identity checks")
    ver.add_argument("--family", required=True, help="family JSON document")
    ver.add_argument("--point", default=None, help="candidate point x,y")
    ver.add_argument("--detection", default=None, help="detection JSON to take points from")
    ver.add_argument("--seed", type=int, default=0, help="seed for the random identity trials")
    ver.add_argument("--trials", type=int, default=200, help="number of identity trials")
    ver.add_argument("--out", default=".", help="output directory")
    ver.add_argument("--no-plots", action="store_true", help="skip figure rendering")
    ver.set_defaults(func=cmd_verify)
    return parser


_SIGNED_VALUE_FLAGS = ("--box", "--point")


def _absorb_signed_values(argv):
    """Join ``--box -1,1,-1,1`` into ``--box=-1,1,-1,1``.

    argparse reads a leading dash as an option prefix, so coordinate
    values that start with a minus sign would otherwise be rejected.
    """
    out = []
    i = 0
    while i < len(argv):
        tok = argv[i]
        nxt = argv[i + 1] if i + 1 < len(argv) else None
        if tok in _SIGNED_VALUE_FLAGS and nxt and len(nxt) > 1 \
                and nxt[0] == "-" and nxt[1] in "0123456789.":
            out.append(f"{tok}={nxt}")
            i += 2
        else:
            out.append(tok)
            i += 1
    return out


def main(argv=None) -> int:
    parser = build_parser()
    if argv is None:
        argv = sys.argv[1:]
    args = parser.parse_args(_absorb_signed_values(list(argv)))
    try:
        return args.func(args)
    except _ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DomainError, DimensionError, ParseError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
