"""Batch command-line front end.

Subcommands cover every pipeline stage: ``segment``, ``preprocess``,
``metrics``, ``phantom`` and ``serve``. Every segment/preprocess run writes a
``params.json`` with all effective parameters; re-running with ``--params``
on that file reproduces the outputs bit-exactly.

Exit codes: 0 success, 1 I/O or parameter errors, 2 no loft found (the
histogram CSV is still written for diagnosis).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time

from . import __version__
from .image_io import PGM16, PNG16, ImageFormatError, read_image, read_mask, write_image
from .loft import LesionSegmentation, NoLoftError
from .metrics import compare
from .phantoms import load_spec, write_set
from .run import MODES, RunParams, run_segmentation

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_NO_LOFT = 2


def _fmt_for_input(path: str) -> str:
    return PNG16 if path.lower().endswith(".png") else PGM16


def _write_json(path: str, payload: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")


def _threshold_payload(result) -> dict:
    return {
        "threshold": result.threshold.threshold,
        "candidates": [[i, c] for i, c in result.threshold.candidates],
        "smoothing_window": result.threshold.smoothing_window,
        "bounds": {"lo": result.bounds.lo, "hi": result.bounds.hi},
    }


def _lesion_payload(result: LesionSegmentation) -> dict:
    return {
        "threshold": result.report.threshold,
        "min_area_applied": result.report.min_area_applied,
        "components": [
            {
                "label": c.label,
                "pixel_count": c.pixel_count,
                "bbox": list(c.bbox),
                "centroid": list(c.centroid),
            }
            for c in result.report.components
        ],
    }


def _collect_params(args, input_path: str) -> RunParams:
    """Merge params file and command-line flags (flags win)."""
    base: dict = {}
    if args.params:
        with open(args.params, "r", encoding="utf-8") as fh:
            base = json.load(fh)
        base.pop("input", None)
        base.pop("format", None)
    overrides = {
        "mode": getattr(args, "mode", None),
        "lo": getattr(args, "lo", None),
        "hi": getattr(args, "hi", None),
        "smooth_window": args.smooth_window,
        "iterations": args.iterations,
        "lambda": args.lam,
        "k": args.k,
        "se_shape": args.se_shape,
        "se_radius": args.se_radius,
        "binarize_threshold": args.binarize_threshold,
        "gain_sigma": args.gain_sigma,
        "final_sigma": args.final_sigma,
        "epsilon": args.epsilon,
        "min_area": getattr(args, "min_area", None),
        "pre_done": True if getattr(args, "pre_done", False) else None,
    }
    merged = dict(base)
    for key, value in overrides.items():
        if value is not None:
            merged[key] = value
    return RunParams.from_dict(merged)


def cmd_segment(args) -> int:
    t_start = time.perf_counter()
    input_path = args.input
    if input_path is None and args.params:
        try:
            with open(args.params, "r", encoding="utf-8") as fh:
                input_path = json.load(fh).get("input")
        except (OSError, json.JSONDecodeError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_ERROR
    if not input_path:
        print("error: no input image (--in or a params file with an input field)", file=sys.stderr)
        return EXIT_ERROR

    try:
        params = _collect_params(args, input_path)
        image = read_image(input_path, args.format)
    except (ImageFormatError, ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR

    os.makedirs(args.out, exist_ok=True)
    fmt = args.format or _fmt_for_input(input_path)
    mask_name = "mask.png" if fmt == PNG16 else "mask.pgm"

    def dump_params(effective: RunParams) -> None:
        payload = {"input": os.path.abspath(input_path), "format": fmt}
        payload.update(effective.to_dict())
        _write_json(os.path.join(args.out, "params.json"), payload)

    try:
        outcome = run_segmentation(image, params)
    except NoLoftError as exc:
        with open(os.path.join(args.out, "histogram.csv"), "w", encoding="utf-8") as fh:
            fh.write(exc.histogram.to_csv())
        dump_params(params)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NO_LOFT
    except (ImageFormatError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR

    result = outcome.result
    write_image(result.mask, os.path.join(args.out, mask_name), fmt)
    _write_json(os.path.join(args.out, "threshold.json"), _threshold_payload(result))
    with open(os.path.join(args.out, "histogram.csv"), "w", encoding="utf-8") as fh:
        fh.write(result.histogram.to_csv())
    if isinstance(result, LesionSegmentation):
        _write_json(os.path.join(args.out, "lesions.json"), _lesion_payload(result))
    dump_params(outcome.params)

    if args.truth:
        try:
            truth = read_mask(args.truth)
            report = compare(result.mask, truth)
        except (ImageFormatError, ValueError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_ERROR
        _write_json(os.path.join(args.out, "metrics.json"), report.to_dict())
        print(f"dsc: {report.dsc:.6f}")
        print(f"ji: {report.ji:.6f}")

    total_ms = int(round((time.perf_counter() - t_start) * 1000))
    print(f"threshold: {result.threshold.threshold}")
    print(f"segment_ms: {outcome.segment_ms}")
    print(f"total_ms: {total_ms}")
    return EXIT_OK


def cmd_preprocess(args) -> int:
    from .preprocess import preprocess_pipeline

    try:
        params = _collect_params(args, args.input)
        image = read_image(args.input, args.format)
        pre = preprocess_pipeline(
            image,
            ghost=params.ghost_params(),
            diffusion=params.diffusion_params(),
            bias=params.bias_params(),
        )
    except NoLoftError:  # pragma: no cover - preprocess never searches the loft
        raise
    except (ImageFormatError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR

    os.makedirs(args.out, exist_ok=True)
    fmt = args.format or _fmt_for_input(args.input)
    ext = "png" if fmt == PNG16 else "pgm"
    write_image(pre.image, os.path.join(args.out, f"preprocessed.{ext}"), fmt)
    write_image(pre.body, os.path.join(args.out, f"body.{ext}"), fmt)
    _write_json(
        os.path.join(args.out, "preprocess.json"),
        {"k": pre.k, "speckle_before": pre.speckle_before, "speckle_after": pre.speckle_after},
    )
    payload = {"input": os.path.abspath(args.input), "format": fmt}
    payload.update(params.to_dict())
    _write_json(os.path.join(args.out, "params.json"), payload)
    print(f"k: {pre.k:.6f}")
    print(f"speckle_before: {pre.speckle_before:.6f}")
    print(f"speckle_after: {pre.speckle_after:.6f}")
    return EXIT_OK


def cmd_metrics(args) -> int:
    try:
        pred = read_mask(args.pred)
        truth = read_mask(args.truth)
        report = compare(pred, truth)
    except (ImageFormatError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    payload = report.to_dict()
    print(json.dumps(payload, indent=2))
    out = args.out or "metrics.json"
    _write_json(out, payload)
    csv_path = os.path.splitext(out)[0] + ".csv"
    with open(csv_path, "w", encoding="utf-8") as fh:
        fh.write("dsc,ji,tp,fp,fn,tn\n")
        fh.write(report.to_csv_line() + "\n")
    return EXIT_OK


def cmd_phantom(args) -> int:
    try:
        spec = load_spec(args.spec)
        manifest = write_set(spec, args.out)
    except (ValueError, OSError, json.JSONDecodeError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    print(f"wrote {len(manifest['files'])} files to {args.out}")
    return EXIT_OK


def cmd_serve(args) -> int:
    import uvicorn

    from .service.app import create_app

    listen = args.listen or os.environ.get("LOFTSEG_LISTEN") or "127.0.0.1:8000"
    host, _, port = listen.rpartition(":")
    if not host or not port.isdigit():
        print(f"error: bad --listen value {listen!r}, expected HOST:PORT", file=sys.stderr)
        return EXIT_ERROR
    app = create_app(store_capacity=args.store_size, static_dir=args.static)
    uvicorn.run(app, host=host, port=int(port), log_level="info")
    return EXIT_OK


def _add_prep_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--smooth-window", dest="smooth_window", type=int, default=None)
    p.add_argument("--iterations", type=int, default=None)
    p.add_argument("--lambda", dest="lam", type=float, default=None)
    p.add_argument("--k", type=float, default=None)
    p.add_argument("--se-shape", dest="se_shape", choices=("disk", "square", "cross"), default=None)
    p.add_argument("--se-radius", dest="se_radius", type=int, default=None)
    p.add_argument("--binarize-threshold", dest="binarize_threshold", type=int, default=None)
    p.add_argument("--gain-sigma", dest="gain_sigma", type=float, default=None)
    p.add_argument("--final-sigma", dest="final_sigma", type=float, default=None)
    p.add_argument("--epsilon", type=float, default=None)
    p.add_argument("--params", help="params.json from a previous run; flags override it")
    p.add_argument("--format", choices=(PGM16, PNG16), default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="loftseg", description=__doc__)
    parser.add_argument("--version", action="version", version=f"loftseg {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("segment", help="segment one image and write mask + reports")
    p.add_argument("--mode", choices=MODES, default=None)
    p.add_argument("--in", dest="input", help="input image (16-bit PGM or PNG)")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--lo", type=int, default=None)
    p.add_argument("--hi", type=int, default=None)
    p.add_argument("--min-area", dest="min_area", type=int, default=None)
    p.add_argument("--truth", help="ground-truth mask for DSC/JI")
    p.add_argument("--pre-done", dest="pre_done", action="store_true", help="input is already preprocessed")
    _add_prep_flags(p)
    p.set_defaults(func=cmd_segment)

    p = sub.add_parser("preprocess", help="run the preprocessing chain only")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)
    _add_prep_flags(p)
    p.set_defaults(func=cmd_preprocess)

    p = sub.add_parser("metrics", help="DSC/JI between two masks")
    p.add_argument("pred")
    p.add_argument("truth")
    p.add_argument("--out", default=None, help="metrics JSON path (default metrics.json)")
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("phantom", help="generate a synthetic test set")
    p.add_argument("--spec", required=True, help="phantom spec JSON (seed required)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_phantom)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--listen", default=None, help="HOST:PORT (env LOFTSEG_LISTEN)")
    p.add_argument("--store-size", dest="store_size", type=int, default=32)
    p.add_argument("--static", default=None, help="directory with the built web console")
    p.set_defaults(func=cmd_serve)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on bad usage; parameter errors are exit 1 here
        return EXIT_OK if exc.code in (0, None) else EXIT_ERROR
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
