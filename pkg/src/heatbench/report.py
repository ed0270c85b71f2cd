"""Report serialization: canonical JSON, CSV grids, markdown summary.

Every emitted file carries the run provenance (config hash, seed, manifest
hash) so results stay traceable after they leave the output directory. The
JSON form is canonical: sorted keys, no NaN tokens (undefined statistics are
null), newline-terminated. Two runs with the same config and seed produce
byte-identical files apart from the "timings" section, which is stripped
before any determinism comparison.
"""

from __future__ import annotations

import json
import re
from pathlib import Path

from .errors import ConfigError

REPORT_FORMATS = ("json", "csv", "markdown", "svg")


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, allow_nan=False,
                      separators=(",", ": "), indent=1) + "\n"


def strip_timings(report: dict) -> dict:
    """The report minus wall-clock data; basis for determinism checks."""
    return {k: v for k, v in report.items() if k != "timings"}


def _method_items(report: dict):
    """Method blocks in context order, the order the run evaluated them.

    canonical_json sorts keys, so a report re-read from disk loses dict
    insertion order; rendering must not depend on it.
    """
    blocks = report.get("methods", {})
    for method in report["context"]["methods"]:
        if method in blocks:
            yield method, blocks[method]


def _slug(name: str) -> str:
    return re.sub(r"[^A-Za-z0-9._-]+", "-", name).strip("-") or "unnamed"


def _fmt(value, digits: int = 4) -> str:
    if value is None:
        return "NaN"
    if isinstance(value, bool):
        return str(value)
    if isinstance(value, int):
        return str(value)
    return f"{value:.{digits}f}"


def _fmt_agg(agg: dict | None) -> str:
    """mean +/- std with its n, or NaN when nothing was defined."""
    if not agg or agg.get("mean") is None:
        return "NaN"
    if agg.get("std") is None:
        return f"{_fmt(agg['mean'])} (n={agg['n']})"
    return f"{_fmt(agg['mean'])} ± {_fmt(agg['std'])} (n={agg['n']})"


def provenance_comment(report: dict, prefix: str = "#") -> list[str]:
    prov = report["provenance"]
    return [
        f"{prefix} config_hash={prov['config_hash']}",
        f"{prefix} manifest_hash={prov['manifest_hash']}",
        f"{prefix} seed={prov['seed']}",
    ]


def provenance_text(report: dict) -> str:
    prov = report["provenance"]
    return (f"config={prov['config_hash']} seed={prov['seed']} "
            f"manifest={prov['manifest_hash']}")


# ---------------------------------------------------------------------------
# CSV emission
# ---------------------------------------------------------------------------

def _write_lines(path: Path, lines: list[str]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_metrics_csv(report: dict, path: Path) -> None:
    """One row per (method, metric, statistic) in long form."""
    lines = provenance_comment(report)
    lines.append("method,family,statistic,value,n,n_undefined")

    def agg_rows(method: str, family: str, agg: dict | None):
        if not agg:
            return
        lines.append(",".join([
            method, family, "mean", _csv_num(agg.get("mean")),
            str(agg.get("n", "")), str(agg.get("n_undefined", "")),
        ]))
        lines.append(",".join([
            method, family, "std", _csv_num(agg.get("std")),
            str(agg.get("n", "")), str(agg.get("n_undefined", "")),
        ]))

    for method, block in _method_items(report):
        if block.get("status") != "ok":
            lines.append(f"{method},status,failed,,,")
            continue
        if "faithfulness" in block:
            agg_rows(method, "diff_auc", block["faithfulness"]["diff_auc"])
        if "mi_correlation" in block:
            agg_rows(method, "mi_correlation", block["mi_correlation"]["pooled"])
        plaus = block.get("plausibility", {})
        if "fp" in plaus:
            agg_rows(method, "fp", plaus["fp"])
        if "msfi" in plaus:
            agg_rows(method, "msfi", plaus["msfi"]["pooled"])
        if "gen_seconds" in block:
            agg_rows(method, "gen_seconds", block["gen_seconds"])
        for entry in block.get("informativeness", {}).get("per_endpoint", []):
            ep = _slug(entry["endpoint"])
            for key in ("pearson_r", "u", "p"):
                if key in entry:
                    lines.append(",".join([
                        method, f"informativeness:{ep}", key,
                        _csv_num(entry.get(key)), str(entry.get("n", "")), ""]))
    _write_lines(path, lines)


def _csv_num(value) -> str:
    if value is None:
        return "NaN"
    return repr(float(value))


def write_curve_csvs(report: dict, out_dir: Path) -> list[Path]:
    """Per method and endpoint: q,performance,series rows for every curve."""
    written = []
    schedule = report["context"]["schedule"]
    for method, block in _method_items(report):
        if block.get("status") != "ok" or "faithfulness" not in block:
            continue
        for entry in block["faithfulness"]["per_endpoint"]:
            lines = provenance_comment(report)
            lines.append("q,performance,series")
            series = (("method", entry["curve"]),
                      ("baseline-mean", entry["baseline_mean"]),
                      ("baseline-ci-lo", entry["baseline_ci_lo"]),
                      ("baseline-ci-hi", entry["baseline_ci_hi"]))
            for name, values in series:
                for q, v in zip(schedule, values):
                    lines.append(f"{repr(float(q))},{_csv_num(v)},{name}")
            path = out_dir / "curves" / f"{_slug(method)}--{_slug(entry['endpoint'])}.csv"
            _write_lines(path, lines)
            written.append(path)
    return written


def write_case_csv(report: dict, path: Path) -> bool:
    """Per-case plausibility values, when any method produced them."""
    lines = provenance_comment(report)
    lines.append("case_id,method,metric,source,value")
    any_rows = False
    for method, block in _method_items(report):
        per_case = block.get("plausibility", {}).get("per_case")
        if not per_case:
            continue
        any_rows = True
        for case_id in sorted(per_case["fp"]):
            lines.append(f"{case_id},{method},fp,,"
                         f"{_csv_num(per_case['fp'][case_id])}")
        for source in sorted(per_case["msfi"]):
            for case_id in sorted(per_case["msfi"][source]):
                lines.append(f"{case_id},{method},msfi,{_slug(source)},"
                             f"{_csv_num(per_case['msfi'][source][case_id])}")
    if any_rows:
        _write_lines(path, lines)
    return any_rows


# ---------------------------------------------------------------------------
# markdown summary
# ---------------------------------------------------------------------------

def render_markdown(report: dict, failures: dict[str, str] | None = None) -> str:
    ctx = report["context"]
    prov = report["provenance"]
    out = [f"# Evaluation report: {ctx['dataset']}", ""]
    out += [
        f"- config hash: `{prov['config_hash']}`",
        f"- manifest hash: `{prov['manifest_hash']}`",
        f"- seed: {prov['seed']}",
        f"- cases: {ctx['n_cases']}, classes: {ctx['n_classes']}, "
        f"task metric: {ctx['task_metric']}",
        f"- modalities: {', '.join(ctx['modalities'])}",
        f"- postprocess: {ctx['postprocess']}, fill: {ctx['fill']}, "
        f"schedule: {len(ctx['schedule'])} points "
        f"({_fmt(ctx['schedule'][0], 2)} to {_fmt(ctx['schedule'][-1], 2)}), "
        f"baseline repeats: {ctx['baseline_repeats']}",
        f"- modality importance source: {ctx['phi_source']}",
        "",
    ]

    if report.get("endpoints"):
        out += ["## Endpoints", "",
                f"| endpoint | {ctx['task_metric']} | cases |",
                "| --- | --- | --- |"]
        for ep in report["endpoints"]:
            out.append(f"| {ep['id']} | {_fmt(ep['performance'])} | {ep['n_cases']} |")
        out.append("")

    mi = report.get("modality_importance")
    if mi:
        out += ["## Modality importance", "",
                "| source | " + " | ".join(ctx["modalities"]) + " |",
                "| --- |" + " --- |" * len(ctx["modalities"])]
        if mi.get("supplied_phi") is not None:
            row = " | ".join(_fmt(v) for v in mi["supplied_phi"])
            out.append(f"| config | {row} |")
        for entry in mi.get("per_endpoint", []):
            row = " | ".join(_fmt(v) for v in entry["phi"])
            out.append(f"| {entry['endpoint']} | {row} |")
        out.append("")

    methods = report.get("methods", {})
    ok = {m: b for m, b in _method_items(report) if b.get("status") == "ok"}
    if ok:
        out += ["## Methods", "",
                "| method | diffAUC | MI corr (tau) | FP | MSFI | gen s |",
                "| --- | --- | --- | --- | --- | --- |"]
        for method, block in ok.items():
            diff = block.get("faithfulness", {}).get("diff_auc")
            tau = block.get("mi_correlation", {}).get("pooled")
            plaus = block.get("plausibility", {})
            out.append("| {} | {} | {} | {} | {} | {} |".format(
                method, _fmt_agg(diff), _fmt_agg(tau), _fmt_agg(plaus.get("fp")),
                _fmt_agg(plaus.get("msfi", {}).get("pooled")),
                _fmt_agg(block.get("gen_seconds"))))
        out.append("")

        rows = [(m, e) for m, b in ok.items()
                for e in b.get("informativeness", {}).get("per_endpoint", [])]
        if rows:
            out += ["## Informativeness (correct vs incorrect predictions)", "",
                    "| method | endpoint | pearson r | U | p | sig | n+/n- |",
                    "| --- | --- | --- | --- | --- | --- | --- |"]
            for method, e in rows:
                if "u" not in e:
                    out.append(f"| {method} | {e['endpoint']} | "
                               f"{e.get('note', 'NaN')} | | | | |")
                    continue
                out.append("| {} | {} | {} | {} | {} | {} | {}/{} |".format(
                    method, e["endpoint"], _fmt(e.get("pearson_r")),
                    _fmt(e.get("u"), 1), _fmt(e.get("p"), 6), e.get("stars", "NS"),
                    e.get("n_correct", 0), e.get("n_incorrect", 0)))
            out.append("")

    agreement = report.get("agreement")
    if agreement:
        out += ["## Rating agreement", ""]
        if not agreement.get("available"):
            out.append(agreement.get("note", "not available"))
        else:
            out += [
                f"- level: {agreement['level']}, items: {agreement['n_items']}, "
                f"raters: {agreement['n_raters']}",
                f"- Krippendorff alpha: {_fmt(agreement.get('krippendorff_alpha'))}"
                + (f" ({agreement['alpha_note']})" if agreement.get("alpha_note") else ""),
                f"- Fleiss kappa: {_fmt(agreement.get('fleiss_kappa'))}"
                + (f" ({agreement['kappa_note']})" if agreement.get("kappa_note") else ""),
            ]
        out.append("")

    failed = failures or {m: b.get("error", "unknown")
                          for m, b in _method_items(report)
                          if b.get("status") == "failed"}
    if failed:
        out += ["## Failed methods", ""]
        for method, err in failed.items():
            out.append(f"- `{method}`: {err}")
        out.append("")

    return "\n".join(out)


# ---------------------------------------------------------------------------
# top-level emission
# ---------------------------------------------------------------------------

def write_report(report: dict, out_dir: str | Path,
                 formats: tuple[str, ...] = REPORT_FORMATS,
                 failures: dict[str, str] | None = None) -> list[Path]:
    """Emit the report in the requested formats; returns written paths."""
    unknown = set(formats) - set(REPORT_FORMATS)
    if unknown:
        raise ConfigError(f"unknown report formats: {sorted(unknown)}")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []

    if "json" in formats:
        path = out / "report.json"
        path.write_text(canonical_json(report), encoding="utf-8")
        written.append(path)
    if "csv" in formats:
        path = out / "metrics.csv"
        write_metrics_csv(report, path)
        written.append(path)
        written.extend(write_curve_csvs(report, out))
        case_path = out / "cases.csv"
        if write_case_csv(report, case_path):
            written.append(case_path)
    if "markdown" in formats:
        path = out / "summary.md"
        path.write_text(render_markdown(report, failures), encoding="utf-8")
        written.append(path)
    if "svg" in formats:
        from .plots import write_curve_plots  # matplotlib import stays lazy
        written.extend(write_curve_plots(report, out))
    return written
