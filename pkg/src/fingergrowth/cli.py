"""Command-line surface: dataset synthesis, analyses, evaluation and plots.

Every command writes its primary output plus a ``<out>.manifest.json``
sidecar recording the command, flags, seed, input digests and tool version;
outputs contain no timestamps, so identical invocations reproduce identical
bytes.  Exit codes: 0 success, 1 usage error, 2 validation/parse error,
3 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import pathlib
import sys

from . import __version__
from .core_types import (Sex, load_dataset, load_template, save_dataset,
                         save_template)
from .errors import FingergrowthError, NumericalError, ParseError, ValidationError
from .evaluation import (EvalMode, alignment_experiment, identification_setup,
                         run_identification, run_verification)
from .growth import (builtin_chart, factor_set, load_chart, rescale_template,
                     scale_factor)
from .matcher import MatchParams
from .mixed_model import build_observations, fit_ml, relative_effect, residual_table
from .shape import isotropy_report
from .svgplot import box_svg, scatter_svg
from .synth import SynthConfig, distractor_gallery, generate, ground_truth_to_json

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3

_MODES = {"unscaled": EvalMode.UNSCALED, "rescaled": EvalMode.RESCALED,
          "multi-factor": EvalMode.MULTI_FACTOR}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# ---------------------------------------------------------------------------
# Manifest sidecars

def _digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_manifest(args, inputs, outputs, extras=None) -> None:
    flags = {k: str(v) for k, v in sorted(vars(args).items())
             if k not in ("func", "command") and v is not None}
    doc = {
        "command": args.command,
        "flags": flags,
        "seed": getattr(args, "seed", None),
        "inputs": {str(p): _digest(p) for p in inputs},
        "outputs": [str(p) for p in outputs],
        "version": __version__,
    }
    if extras:
        doc["results"] = extras
    path = str(args.out) + ".manifest.json"
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")


def _write_csv(path, header, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(v) if isinstance(v, float) else v for v in row])


def _chart_for(args):
    if getattr(args, "chart", None):
        return load_chart(args.chart), [args.chart]
    return builtin_chart(), []


# ---------------------------------------------------------------------------
# Commands

def cmd_synth(args) -> int:
    cfg = SynthConfig(n_persons=args.persons, sigma_eta=args.sigma_eta,
                      sigma_eps=args.sigma_eps, jitter_mm=args.jitter_mm,
                      dropout_prob=args.dropout_prob, anisotropy=args.anisotropy,
                      seed=args.seed)
    chart, inputs = _chart_for(args)
    dataset, truth = generate(cfg, chart)
    truth_path = str(args.out) + ".truth.json"
    save_dataset(dataset, args.out)
    with open(truth_path, "w", encoding="utf-8") as fh:
        json.dump(ground_truth_to_json(truth), fh, indent=1)
        fh.write("\n")
    _write_manifest(args, inputs, [args.out, truth_path])
    print(f"wrote {args.out} ({len(dataset.persons)} persons) and {truth_path}")
    return EXIT_OK


def cmd_isotropy(args) -> int:
    d = load_dataset(args.dataset)
    report = isotropy_report(d)
    _write_csv(args.out,
               ["person_id", "finger_id", "n_configs", "pc1_fraction_full",
                "size_fraction_full", "pc1_fraction_partial", "size_fraction_partial"],
               [(r.person_id, r.finger_id, r.n_configs, r.pc1_fraction_full,
                 r.size_fraction_full, r.pc1_fraction_partial, r.size_fraction_partial)
                for r in report.rows])
    extras = {"median_size_full": report.median_size_full,
              "median_size_partial": report.median_size_partial,
              "median_pc1_full": report.median_pc1_full,
              "median_pc1_partial": report.median_pc1_partial}
    _write_manifest(args, [args.dataset], [args.out], extras)
    print(f"median size fraction: full {report.median_size_full:.3f}, "
          f"partial {report.median_size_partial:.3f}")
    return EXIT_OK


def cmd_fit_growth(args) -> int:
    d = load_dataset(args.dataset)
    chart, chart_inputs = _chart_for(args)
    fit = fit_ml(build_observations(d, chart))
    _write_csv(args.out, ["parameter", "value"],
               [*((f"mu_{k.value}", v) for k, v in sorted(fit.mu.items(),
                                                          key=lambda kv: kv[0].value)),
                ("sigma_eta", fit.sigma_eta),
                ("sigma_eps", fit.sigma_eps),
                ("relative_eta_pct", relative_effect(fit.sigma_eta)),
                ("relative_eps_pct", relative_effect(fit.sigma_eps)),
                ("loglik", fit.loglik),
                ("n_groups", len(fit.eta_hat))])
    resid_path = str(pathlib.Path(args.out).with_suffix("")) + "_residuals.csv"
    _write_csv(resid_path,
               ["person_id", "co_index", "rank_transformed_age", "eta_hat"],
               [(r.person_id, r.co_index, r.rank_transformed_age, r.eta_hat)
                for r in residual_table(fit, d)])
    _write_manifest(args, [args.dataset, *chart_inputs], [args.out, resid_path],
                    {"sigma_eta": fit.sigma_eta, "sigma_eps": fit.sigma_eps})
    print(f"sigma_eta {fit.sigma_eta:.5f} ({relative_effect(fit.sigma_eta):.2f}%), "
          f"sigma_eps {fit.sigma_eps:.5f} ({relative_effect(fit.sigma_eps):.2f}%)")
    return EXIT_OK


def cmd_align(args) -> int:
    d = load_dataset(args.dataset)
    chart, chart_inputs = _chart_for(args)
    report = alignment_experiment(d, chart)
    _write_csv(args.out,
               ["person_id", "scale_factor", "smsd_unscaled", "smsd_rescaled",
                "smsd_control", "relative_reduction", "excess_reduction"],
               [(r.person_id, r.scale_factor, r.smsd_unscaled, r.smsd_rescaled,
                 r.smsd_control, r.relative_reduction, r.excess_reduction)
                for r in report.rows])
    extras = {"median_unscaled": report.median_unscaled,
              "median_rescaled": report.median_rescaled,
              "median_control": report.median_control}
    _write_manifest(args, [args.dataset, *chart_inputs], [args.out], extras)
    print(f"median SMSD mm: unscaled {report.median_unscaled:.3f}, "
          f"rescaled {report.median_rescaled:.3f}, control {report.median_control:.3f}")
    return EXIT_OK


def cmd_verify(args) -> int:
    d = load_dataset(args.dataset)
    chart, chart_inputs = _chart_for(args)
    params = MatchParams(radius_mm=args.radius_mm)
    report = run_verification(d, chart, _MODES[args.mode], (params,),
                              args.factors, args.spread_pct / 100.0)
    rows = []
    for pid, scores in report.genuine.items():
        rows.extend(("genuine", pid, s) for s in scores)
    for pid, scores in report.impostor.items():
        rows.extend(("impostor", pid, s) for s in scores)
    _write_csv(args.out, ["attempt", "person_id", "score"], rows)
    _write_manifest(args, [args.dataset, *chart_inputs], [args.out],
                    {"eer": report.eer, "mode": args.mode})
    print(f"EER ({args.mode}): {report.eer:.4f}")
    return EXIT_OK


def cmd_identify(args) -> int:
    d = load_dataset(args.dataset)
    chart, chart_inputs = _chart_for(args)
    queries, genuine = identification_setup(d)
    distractors = distractor_gallery(args.gallery_size, SynthConfig(seed=args.seed),
                                     seed=args.seed, chart=chart)
    gallery = genuine + distractors
    params = MatchParams(radius_mm=args.radius_mm, max_hypotheses=args.max_hypotheses)
    report = run_identification(queries, gallery, chart, _MODES[args.mode], params)
    _write_csv(args.out, ["person_id", "rank"],
               [(q.person_id, r) for q, r in zip(queries, report.ranks)])
    _write_manifest(args, [args.dataset, *chart_inputs], [args.out],
                    {"top1_rate": report.top1_rate, "top3_rate": report.top3_rate,
                     "gallery_size": len(gallery), "mode": args.mode})
    print(f"top-1 rate ({args.mode}): {report.top1_rate:.3f}, "
          f"top-3 rate: {report.top3_rate:.3f}")
    return EXIT_OK


def cmd_rescale(args) -> int:
    t = load_template(args.template)
    chart, chart_inputs = _chart_for(args)
    f = scale_factor(chart, args.age_from, args.age_to, Sex(args.sex))
    outputs = []
    if args.factors == 1:
        save_template(rescale_template(t, f), args.out)
        outputs.append(args.out)
    else:
        out = pathlib.Path(args.out)
        for i, fi in enumerate(factor_set(f, args.spread_pct / 100.0, args.factors)):
            path = out.with_name(f"{out.stem}_f{i}{out.suffix}")
            save_template(rescale_template(t, fi), path)
            outputs.append(path)
    _write_manifest(args, [args.template, *chart_inputs], outputs,
                    {"scale_factor": f.value})
    print(f"scale factor {f.value:.5f}; wrote {len(outputs)} file(s)")
    return EXIT_OK


def _read_csv(path):
    try:
        with open(path, "r", encoding="utf-8", newline="") as fh:
            rows = [row for row in csv.reader(fh) if row]
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from None
    if not rows:
        raise ValidationError(f"{path} is empty")
    return rows


def _is_number(s: str) -> bool:
    try:
        float(s)
        return True
    except ValueError:
        return False


def cmd_plot(args) -> int:
    rows = _read_csv(args.csv)
    header = None
    if not all(_is_number(c) for c in rows[0][:2] if c):
        header = rows[0]
        rows = rows[1:]
    if not rows:
        raise ValidationError(f"{args.csv} has no data rows")
    if args.kind == "scatter":
        # first two numeric columns (results CSVs lead with an id column)
        numeric = [i for i, c in enumerate(rows[0]) if _is_number(c)]
        if len(numeric) < 2:
            raise ParseError(f"scatter needs two numeric columns in {args.csv}")
        cx, cy = numeric[0], numeric[1]
        try:
            x = [float(r[cx]) for r in rows]
            y = [float(r[cy]) for r in rows]
        except (ValueError, IndexError) as exc:
            raise ParseError(f"malformed scatter CSV {args.csv}: {exc}") from None
        labels = (header[cx], header[cy]) if header and len(header) > cy else ("", "")
        svg = scatter_svg(x, y, *labels)
    else:
        groups: dict[str, list[float]] = {}
        try:
            for r in rows:
                groups.setdefault(r[0], []).append(float(r[1]))
        except (ValueError, IndexError) as exc:
            raise ParseError(f"malformed box CSV {args.csv}: {exc}") from None
        svg = box_svg(groups, header[1] if header and len(header) >= 2 else "")
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write(svg)
    _write_manifest(args, [args.csv], [args.out])
    print(f"wrote {args.out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# Parser

def _add_mode_flags(p, identify=False):
    p.add_argument("--mode", choices=sorted(_MODES), default="unscaled")
    p.add_argument("--radius-mm", type=float, default=0.8)
    if not identify:
        p.add_argument("--factors", type=int, default=3,
                       help="number of factors in multi-factor mode")
        p.add_argument("--spread-pct", type=float, default=5.0,
                       help="multi-factor spread in percent")


def build_parser() -> _Parser:
    parser = _Parser(prog="fingergrowth", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    defaults = SynthConfig()
    p = sub.add_parser("synth", help="generate a synthetic longitudinal dataset")
    p.add_argument("--persons", type=int, default=defaults.n_persons)
    p.add_argument("--sigma-eta", type=float, default=defaults.sigma_eta)
    p.add_argument("--sigma-eps", type=float, default=defaults.sigma_eps)
    p.add_argument("--jitter-mm", type=float, default=defaults.jitter_mm)
    p.add_argument("--dropout-prob", type=float, default=defaults.dropout_prob)
    p.add_argument("--anisotropy", type=float, default=defaults.anisotropy)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--chart")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("isotropy", help="full/partial GPA size-variance report")
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_isotropy)

    p = sub.add_parser("fit-growth", help="fit the random-intercept size model")
    p.add_argument("--dataset", required=True)
    p.add_argument("--chart")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_fit_growth)

    p = sub.add_parser("align", help="rigid-alignment improvement experiment")
    p.add_argument("--dataset", required=True)
    p.add_argument("--chart")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_align)

    p = sub.add_parser("verify", help="verification protocol and EER")
    p.add_argument("--dataset", required=True)
    p.add_argument("--chart")
    _add_mode_flags(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("identify", help="gallery identification and rank table")
    p.add_argument("--dataset", required=True)
    p.add_argument("--chart")
    _add_mode_flags(p, identify=True)
    p.add_argument("--gallery-size", type=int, default=10_000,
                   help="number of synthetic distractor templates")
    p.add_argument("--max-hypotheses", type=int, default=50)
    p.add_argument("--seed", type=int, default=0, help="distractor generation seed")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_identify)

    p = sub.add_parser("rescale", help="rescale a template between two ages")
    p.add_argument("--template", required=True)
    p.add_argument("--age-from", type=float, required=True)
    p.add_argument("--age-to", type=float, required=True)
    p.add_argument("--sex", choices=[s.value for s in Sex], required=True)
    p.add_argument("--chart")
    p.add_argument("--factors", type=int, default=1)
    p.add_argument("--spread-pct", type=float, default=5.0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_rescale)

    p = sub.add_parser("plot", help="render a CSV as an SVG scatter or box plot")
    p.add_argument("--csv", required=True)
    p.add_argument("--kind", choices=["scatter", "box"], required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_plot)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ParseError, ValidationError, FingergrowthError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
