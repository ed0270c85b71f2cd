"""Command line interface.

Exit codes: 0 success, 1 configuration error, 2 oracle endpoint error,
3 partial failure (some methods failed, the rest were evaluated and written).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from .errors import ConfigError, HeatbenchError, OracleError
from .heatmaps import POSTPROCESS_MODES, parse_schedule
from .oracle import FILL_STRATEGIES
from .report import REPORT_FORMATS, write_report
from .runner import METRIC_NAMES, load_run_config, run
from .synthgen import SynthConfig, generate_dataset, generate_probe_sets

# Subcommand -> the single metric family it forces; "evaluate" keeps the
# config's own toggles (all families by default).
_FAMILY_COMMANDS = {
    "faithfulness": "faithfulness",
    "modality-importance": "shapley",
    "plausibility": "plausibility",
    "informativeness": "informativeness",
    "agreement": "agreement",
}


def _add_run_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="YAML run config; flags override it")
    parser.add_argument("--manifest", help="dataset manifest path")
    parser.add_argument("--oracle", action="append", metavar="SPEC",
                        help="oracle endpoint (builtin:..., cmd:..., tcp:HOST:PORT);"
                             " repeat for several endpoints")
    parser.add_argument("--methods", help="comma separated heatmap method names")
    parser.add_argument("--seed", type=int, help="run seed (mandatory for faithfulness)")
    parser.add_argument("--out", help="output directory (default heatbench-out)")
    parser.add_argument("--postprocess", choices=POSTPROCESS_MODES)
    parser.add_argument("--removal-schedule", metavar="Q0,Q1,...",
                        help="removal fractions, e.g. 0,0.25,0.5,0.75,1")
    parser.add_argument("--fill", choices=FILL_STRATEGIES)
    parser.add_argument("--repeats", type=int, help="random baseline repeats")
    parser.add_argument("--phi", metavar="V0,V1,...",
                        help="supply modality importance instead of computing it")
    parser.add_argument("--interval", action="store_true",
                        help="treat ratings as interval rather than ordinal")
    parser.add_argument("--format", action="append", choices=REPORT_FORMATS,
                        help="output format; repeat to select several (default all)")
    parser.add_argument("--no-timing", action="store_true",
                        help="leave wall-clock timings out of the report")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="heatbench",
        description="Score heatmap explanations of multi-modal image classifiers.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    descriptions = {
        "evaluate": "run every metric family enabled in the config",
        "faithfulness": "removal curves and diffAUC against the random baseline",
        "modality-importance": "Shapley modality importance and MI correlation",
        "plausibility": "feature portion and MSFI against annotation masks",
        "informativeness": "test whether scores separate correct predictions",
        "agreement": "inter-rater agreement over manifest ratings",
    }
    for name in ("evaluate", *_FAMILY_COMMANDS):
        sp = sub.add_parser(name, help=descriptions[name])
        _add_run_flags(sp)

    sg = sub.add_parser("synth-gen", help="generate a synthetic benchmark dataset")
    sg.add_argument("--n", type=int, required=True, help="number of cases")
    sg.add_argument("--size", type=int, default=256, help="square image side")
    sg.add_argument("--seed", type=int, default=0)
    sg.add_argument("--out", required=True, help="dataset directory")
    sg.add_argument("--mask-fraction", type=float, default=1.0,
                    help="fraction of cases that keep their annotation mask")
    sg.add_argument("--probes", type=int, metavar="N",
                    help="also write single-modality probe sets with N cases each")

    rp = sub.add_parser("report", help="re-render files from a stored report.json")
    rp.add_argument("--from", dest="report_path", required=True,
                    help="path to a report.json produced by a run")
    rp.add_argument("--out", required=True)
    rp.add_argument("--format", action="append", choices=REPORT_FORMATS)
    return parser


def _overrides_from_args(args: argparse.Namespace) -> dict:
    over: dict = {
        "manifest": args.manifest,
        "oracle": args.oracle,
        "methods": args.methods.split(",") if args.methods else None,
        "seed": args.seed,
        "out": args.out,
        "postprocess": args.postprocess,
        "fill": args.fill,
        "baseline_repeats": args.repeats,
        "formats": tuple(args.format) if args.format else None,
    }
    if args.removal_schedule:
        over["schedule"] = parse_schedule(args.removal_schedule)
    if args.phi:
        try:
            over["modality_importance"] = [float(v) for v in args.phi.split(",")]
        except ValueError as exc:
            raise ConfigError(f"bad --phi value: {exc}") from exc
    if args.interval:
        over["agreement_level"] = "interval"
    if args.no_timing:
        over["timing"] = False
    family = _FAMILY_COMMANDS.get(args.command)
    if family:
        over["metrics"] = {m: m == family for m in METRIC_NAMES}
    return over


def _run_command(args: argparse.Namespace) -> int:
    config = load_run_config(args.config, _overrides_from_args(args))
    result = run(config)
    out_dir = Path(config.out or "heatbench-out")
    written = write_report(result.report, out_dir, config.formats, result.failures)
    for path in written:
        print(f"wrote {path}")
    _print_summary(result.report)
    if result.failures:
        for method, err in result.failures.items():
            print(f"method {method!r} failed: {err}", file=sys.stderr)
        return 3
    return 0


def _print_summary(report: dict) -> None:
    for method, block in report.get("methods", {}).items():
        if block.get("status") != "ok":
            continue
        parts = []
        diff = block.get("faithfulness", {}).get("diff_auc", {})
        if diff.get("mean") is not None:
            parts.append(f"diffAUC={diff['mean']:.4f}")
        tau = block.get("mi_correlation", {}).get("pooled", {})
        if tau.get("mean") is not None:
            parts.append(f"mi_tau={tau['mean']:.4f}")
        plaus = block.get("plausibility", {})
        if plaus.get("fp", {}).get("mean") is not None:
            parts.append(f"fp={plaus['fp']['mean']:.4f}")
        msfi = plaus.get("msfi", {}).get("pooled", {})
        if msfi.get("mean") is not None:
            parts.append(f"msfi={msfi['mean']:.4f}")
        print(f"{method}: " + (", ".join(parts) if parts else "no defined metrics"))
    agreement = report.get("agreement")
    if agreement and agreement.get("available"):
        print(f"agreement: alpha={agreement.get('krippendorff_alpha')}"
              f" kappa={agreement.get('fleiss_kappa')}")


def _synth_gen(args: argparse.Namespace) -> int:
    config = SynthConfig(n=args.n, image_size=(args.size, args.size),
                         seed=args.seed, mask_fraction=args.mask_fraction)
    manifest_path = generate_dataset(config, args.out)
    print(f"wrote {manifest_path}")
    if args.probes:
        probe_cfg = SynthConfig(n=args.probes, image_size=(args.size, args.size),
                                seed=args.seed)
        for path in generate_probe_sets(probe_cfg, args.out):
            print(f"wrote {path}")
    return 0


def _report_command(args: argparse.Namespace) -> int:
    path = Path(args.report_path)
    try:
        report = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path} is not valid JSON: {exc}") from exc
    for key in ("provenance", "context"):
        if key not in report:
            raise ConfigError(f"{path} does not look like a run report "
                              f"(missing {key!r})")
    formats = tuple(args.format) if args.format else REPORT_FORMATS
    for out_path in write_report(report, args.out, formats):
        print(f"wrote {out_path}")
    return 0


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "synth-gen":
        return _synth_gen(args)
    if args.command == "report":
        return _report_command(args)
    return _run_command(args)


def entrypoint() -> None:
    try:
        sys.exit(main())
    except OracleError as exc:
        print(f"oracle error: {exc}", file=sys.stderr)
        sys.exit(2)
    except HeatbenchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        sys.exit(1)


if __name__ == "__main__":
    entrypoint()
