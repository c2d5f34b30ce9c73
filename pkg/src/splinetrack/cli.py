"""``splinetrack`` command line: synth, track, strain, render, check.

Exit codes: 0 success, 1 check failure, 2 usage, 3 I/O or input format,
4 empty structure region.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .boundary import (
    EmptyRegionError,
    MaskFormatError,
    Structure,
    extract_boundary_candidates,
    load_mask_sequence,
    sequence_candidates,
    write_mask_sequence,
)
from .curves import CurvesFormatError, curves_to_json, parse_curves
from .pgm import PGMFormatError
from .render import render_frame_svg
from .strain import circumferential_strain, strain_to_csv
from .synth import PhantomConfig, generate_annulus_phantom
from .tracker import TrackerConfig, track_sequence

EXIT_OK = 0
EXIT_CHECK = 1
EXIT_USAGE = 2
EXIT_IO = 3
EXIT_EMPTY = 4

log = logging.getLogger("splinetrack")


def _err(msg: str) -> None:
    print(f"error: {msg}", file=sys.stderr)


def cmd_synth(args) -> int:
    try:
        cfg = PhantomConfig(
            width=args.size,
            height=args.size,
            n_frames=args.frames,
            amplitude=args.amplitude,
            rv_enabled=args.rv,
            jitter_px=args.jitter,
            seed=args.seed,
        )
    except ValueError as exc:
        _err(str(exc))
        return EXIT_USAGE
    masks, truth = generate_annulus_phantom(cfg)
    out = Path(args.out)
    try:
        write_mask_sequence(out, masks)
        (out / "truth.json").write_text(json.dumps(truth.to_dict(), indent=1) + "\n")
    except OSError as exc:
        _err(f"cannot write phantom: {exc}")
        return EXIT_IO
    print(f"wrote {cfg.n_frames} frames of {cfg.width}x{cfg.height} to {out}; peak strain {truth.peak_strain:.6f}%")
    return EXIT_OK


def cmd_track(args) -> int:
    try:
        cfg = TrackerConfig(
            rho_cf=args.rho_cf,
            rho_ac=args.rho_ac,
            rho_cv=args.rho_cv,
            samples_per_segment=args.samples,
            passes=args.passes,
            initial_control_points=args.cp0,
        )
    except ValueError as exc:
        _err(str(exc))
        return EXIT_USAGE
    structure = Structure(args.structure)
    try:
        masks = load_mask_sequence(args.masks)
        candidates = sequence_candidates(masks, structure)
    except EmptyRegionError as exc:
        _err(str(exc))
        return EXIT_EMPTY
    except (OSError, MaskFormatError) as exc:
        _err(str(exc))
        return EXIT_IO

    seq, report = track_sequence(candidates, cfg)

    print(f"{'pass':>4} {'N':>4} {'outer':>5} {'lm':>4} {'E_cf':>12} {'E_ac':>12} {'E_cv':>12}")
    for k, p in enumerate(report.passes, 1):
        print(
            f"{k:>4} {p.n_control_points:>4} {p.outer_iters:>5} {p.lm_iterations:>4} "
            f"{p.E_cf:>12.4f} {p.E_ac:>12.4f} {p.E_cv:>12.4f}"
        )
    if not report.converged:
        print("WARN: convergence flag", file=sys.stderr)
    try:
        Path(args.out).write_text(curves_to_json(seq, structure.value, masks.pixel_spacing, report))
    except OSError as exc:
        _err(f"cannot write curves: {exc}")
        return EXIT_IO
    return EXIT_OK


def _read_curves(path):
    text = Path(path).read_text()
    return parse_curves(text)


def cmd_strain(args) -> int:
    try:
        curves = _read_curves(args.curves)
    except json.JSONDecodeError as exc:
        _err(f"{args.curves}: malformed JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}")
        return EXIT_IO
    except (OSError, CurvesFormatError) as exc:
        _err(str(exc))
        return EXIT_IO
    F = curves.sequence.n_frames
    if not 0 <= args.reference < F:
        _err(f"--reference {args.reference} outside [0, {F})")
        return EXIT_USAGE
    try:
        curve = circumferential_strain(curves.sequence, args.reference, curves.structure)
    except ValueError as exc:
        _err(str(exc))
        return EXIT_IO
    try:
        Path(args.out).write_text(strain_to_csv(curve))
    except OSError as exc:
        _err(f"cannot write strain: {exc}")
        return EXIT_IO
    print(f"peak {curve.peak:.6f}% @ frame {curve.peak_frame}")
    return EXIT_OK


def cmd_render(args) -> int:
    try:
        masks = load_mask_sequence(args.masks)
        curve_files = [_read_curves(p) for p in args.curves]
    except json.JSONDecodeError as exc:
        _err(f"malformed curves JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}")
        return EXIT_IO
    except (OSError, MaskFormatError, PGMFormatError, CurvesFormatError) as exc:
        _err(str(exc))
        return EXIT_IO
    for path, c in zip(args.curves, curve_files):
        if c.sequence.n_frames != masks.n_frames:
            _err(f"{path} has {c.sequence.n_frames} frames, masks have {masks.n_frames}")
            return EXIT_USAGE
    structures = []
    for c in curve_files:
        try:
            s = Structure(c.structure)
        except ValueError:
            continue
        if s not in structures:
            structures.append(s)

    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        for t, frame in enumerate(masks.frames):
            candidates = [extract_boundary_candidates(frame, s) for s in structures]
            curves = [c.sequence.frame(t) for c in curve_files]
            svg = render_frame_svg(masks.width, masks.height, candidates, curves)
            (out / f"frame_{t:04d}.svg").write_text(svg)
    except OSError as exc:
        _err(f"cannot write SVG: {exc}")
        return EXIT_IO
    print(f"wrote {masks.n_frames} SVG files to {out}")
    return EXIT_OK


def cmd_check(args) -> int:
    from .checks import JACOBIAN_TOL, run_checks

    result = run_checks(args.seed, jacobian_fault=args.inject_jacobian_fault)
    fam = result.jacobian_family_errors
    print(f"jacobian max relative error: {result.jacobian_error:.3e} (threshold {JACOBIAN_TOL:.0e})")
    print(f"  cf {fam['cf']:.3e}  ac {fam['ac']:.3e}  cv {fam['cv']:.3e}")
    print(f"kd-tree vs linear scan mismatches: {result.kdtree_mismatches}")
    print(f"lm step vs dense solve max relative error: {result.lm_relative_error:.3e}")
    print("check: PASS" if result.ok else "check: FAIL")
    return EXIT_OK if result.ok else EXIT_CHECK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="splinetrack", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="write a synthetic annulus phantom")
    p.add_argument("--out", required=True)
    p.add_argument("--frames", type=int, default=25)
    p.add_argument("--size", type=int, default=128)
    p.add_argument("--amplitude", type=float, default=0.25)
    p.add_argument("--rv", action="store_true")
    p.add_argument("--jitter", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=1)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("track", help="track one structure through a mask sequence")
    p.add_argument("--masks", required=True)
    p.add_argument("--structure", required=True, choices=[s.value for s in Structure])
    p.add_argument("--out", required=True)
    p.add_argument("--passes", type=int, default=3)
    p.add_argument("--cp0", type=int, default=8)
    p.add_argument("--samples", type=int, default=8)
    p.add_argument("--rho-cf", type=float, default=10.0)
    p.add_argument("--rho-ac", type=float, default=1.0)
    p.add_argument("--rho-cv", type=float, default=0.1)
    p.set_defaults(func=cmd_track)

    p = sub.add_parser("strain", help="circumferential strain from curves.json")
    p.add_argument("--curves", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--reference", type=int, default=0)
    p.set_defaults(func=cmd_strain)

    p = sub.add_parser("render", help="SVG overlays of candidates and curves")
    p.add_argument("--masks", required=True)
    p.add_argument("--curves", required=True, action="append")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("check", help="verify Jacobians, Kd-tree and LM step against oracles")
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--inject-jacobian-fault", type=float, default=0.0, help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_check)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
