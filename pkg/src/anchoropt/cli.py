"""Command-line entry points: run / resume / report / anchors / kmeans.

Exit codes: 0 ok, 1 usage error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import fields

import numpy as np

from .analysis import kmeans_iou
from .anchors import FrcnnAnchorConfig, anchor_table_csv, ssd_default_config
from .campaign import CampaignConfig, report, resume_campaign, run_campaign
from .objective import load_annotations


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on usage errors; the contract wants 1."""

    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="campaign config JSON file; flags override its values")
    p.add_argument("--space", help="builtin space name (ssd, faster_rcnn) or space JSON path")
    p.add_argument("--optimizer", choices=["cmaes", "bogp", "smac"])
    p.add_argument("--budget", type=int)
    p.add_argument("--sigma", dest="sigma0", type=float)
    p.add_argument("--lambda", dest="lam", type=int)
    p.add_argument("--mean0", help="comma-separated initial scaled vector")
    p.add_argument("--initial-design", dest="initial_design", type=int)
    p.add_argument("--xi", type=float)
    p.add_argument("--acquisition-samples", dest="acquisition_samples", type=int)
    p.add_argument("--objective", choices=["proxy", "external"])
    p.add_argument("--annotations", help="annotations JSONL path (proxy objective)")
    p.add_argument("--evaluator", help="evaluator command (external objective)")
    p.add_argument("--timeout", type=float)
    p.add_argument("--max-parallel", dest="max_parallel", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="campaign log path (JSONL)")


def build_parser() -> _Parser:
    parser = _Parser(prog="anchoropt", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    _add_run_flags(sub.add_parser("run", help="run a campaign to its budget"))

    p_resume = sub.add_parser("resume", help="continue an interrupted campaign")
    p_resume.add_argument("--log", required=True)

    p_report = sub.add_parser("report", help="summarize a campaign log")
    p_report.add_argument("--log", required=True)
    p_report.add_argument("--out-dir", dest="out_dir")

    p_anchors = sub.add_parser("anchors", help="emit the anchor table as CSV")
    p_anchors.add_argument("--config", choices=["ssd", "frcnn"], required=True)
    p_anchors.add_argument("--scales", help="comma-separated scale overrides")
    p_anchors.add_argument("--input-size", dest="input_size", type=float, default=600.0)
    p_anchors.add_argument("--out", help="write CSV here instead of stdout")

    p_kmeans = sub.add_parser("kmeans", help="IoU k-means over annotation shapes")
    p_kmeans.add_argument("--annotations", required=True)
    p_kmeans.add_argument("--k", type=int, required=True)
    p_kmeans.add_argument("--seed", type=int, default=0)
    p_kmeans.add_argument("--restarts", type=int, default=5)
    return parser


def _parse_floats(text: str) -> list[float]:
    return [float(tok) for tok in text.replace(",", " ").split()]


def _campaign_config(args: argparse.Namespace) -> CampaignConfig:
    values: dict = {}
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            values.update(json.load(fh))
    for f in fields(CampaignConfig):
        given = getattr(args, f.name, None)
        if given is not None:
            values[f.name] = given
    if isinstance(values.get("mean0"), str):
        values["mean0"] = _parse_floats(values["mean0"])
    return CampaignConfig(**values)


def _print_best(best) -> None:
    if best is None:
        print("no successful trials")
        return
    print(f"best trial {best.trial_id}: fitness {best.fitness:.6g}")
    print(f"best params: {json.dumps(best.params_physical)}")


def _cmd_run(args) -> int:
    result = run_campaign(_campaign_config(args))
    print(f"campaign complete: {result['n_trials']} trials logged to {result['log']}")
    _print_best(result["best"])
    return 0


def _cmd_resume(args) -> int:
    result = resume_campaign(args.log)
    if "notice" in result:
        print(result["notice"])
        return 0
    print(f"campaign resumed to {result['n_trials']} trials in {result['log']}")
    _print_best(result["best"])
    return 0


def _cmd_report(args) -> int:
    summary = report(args.log, out_dir=args.out_dir)
    csv_text = summary.pop("generations_csv")
    print(json.dumps(summary, indent=2))
    if args.out_dir is None:
        print(csv_text, end="")
    return 0


def _cmd_anchors(args) -> int:
    if args.config == "ssd":
        scales = tuple(_parse_floats(args.scales)) if args.scales else None
        csv_text = anchor_table_csv("ssd", ssd_default_config(scales=scales))
    else:
        kwargs = {"input_size": args.input_size}
        if args.scales:
            kwargs["scales"] = tuple(_parse_floats(args.scales))
        csv_text = anchor_table_csv("frcnn", FrcnnAnchorConfig(**kwargs))
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(csv_text)
    else:
        print(csv_text, end="")
    return 0


def _cmd_kmeans(args) -> int:
    shapes = load_annotations(args.annotations).normalized_shapes()
    best = None
    for r in range(max(1, args.restarts)):
        res = kmeans_iou(shapes, args.k, seed=args.seed + r)
        if best is None or res.objective < best.objective:
            best = res
    order = np.argsort(best.centroids[:, 0] * best.centroids[:, 1])
    print("w,h")
    for c in best.centroids[order]:
        print(f"{c[0]:.6g},{c[1]:.6g}")
    print(f"# total within-cluster distance: {best.objective:.6g}", file=sys.stderr)
    return 0


_COMMANDS = {
    "run": _cmd_run,
    "resume": _cmd_resume,
    "report": _cmd_report,
    "anchors": _cmd_anchors,
    "kmeans": _cmd_kmeans,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except Exception as exc:
        print(f"anchoropt: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
