"""Command-line experiment runner.

Subcommands::

    python -m vacgan train   --config run.cfg [--seed N] [--out DIR]
    python -m vacgan verify  --suite {thm1,thm2,prop1} --out DIR [--seed N] [--cases N] [--steps N]
    python -m vacgan eval    --checkpoint RUN_DIR [--config PATH] [--n-per-class N] [--seed N] [--out DIR]
    python -m vacgan compare RUN_A RUN_B --out DIR

Exit codes: 0 success, 1 configuration or input error, 2 runtime error,
3 a verification case exceeded its tolerance. Every file a command writes
lands inside its output directory.
"""

from __future__ import annotations

import argparse
import csv
import io
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from vacgan import config as configmod
from vacgan.autodiff.tensor import child_seeds, make_rng
from vacgan.data import LabeledBatch, encode_pgm, generate as generate_data, load_external, mosaic, points_to_csv
from vacgan.divergence import empirical_jsd
from vacgan.errors import BadFormat, ConfigError, InvalidConfig, StepError, VacganError
from vacgan.experiments import SUITES, run_suite
from vacgan.metrics import METRICS, OBSERVATIONS, MetricReport, pairwise_report
from vacgan.models import load_model, save_model
from vacgan.training import build_networks, generate, train

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME, EXIT_VERIFY = 0, 1, 2, 3
OBSERVATION_COLOURS = {"intra_class_a": "#1f5fbf", "intra_class_b": "#7b3fa0", "inter_class": "#e0b020"}


class CommandError(Exception):
    """Carries an exit code and a message up to :func:`main`."""

    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def _write(out: Path, name: str, content) -> Path:
    path = out / name
    path.parent.mkdir(parents=True, exist_ok=True)
    if isinstance(content, bytes):
        path.write_bytes(content)
    else:
        path.write_text(content, encoding="utf-8", newline="")
    return path


def _csv(rows) -> str:
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\n").writerows(rows)
    return buf.getvalue()


def load_dataset(cfg: configmod.RunConfig) -> LabeledBatch:
    if cfg.data.kind == "external":
        return load_external(cfg.data.corpus_path, cfg.data.manifest or "manifest.tsv")
    return generate_data(cfg.data, cfg.data_n_per_class)


# -- train -----------------------------------------------------------------------

def cmd_train(args) -> int:
    cfg = configmod.load(args.config)
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    out = Path(args.out or cfg.out)
    try:
        data = load_dataset(cfg)
        nets = build_networks(cfg.train)
    except InvalidConfig as exc:
        raise CommandError(EXIT_CONFIG, f"config error: {exc}") from exc
    try:
        bundle = train(cfg.train, data, nets)
    except InvalidConfig as exc:
        raise CommandError(EXIT_CONFIG, f"config error: {exc}") from exc
    except StepError as exc:
        raise CommandError(EXIT_RUNTIME, f"runtime error at step {exc.step}: {exc.cause}") from exc
    out.mkdir(parents=True, exist_ok=True)
    _write(out, "config.txt", configmod.serialize(cfg))
    _write(out, "losses.csv", bundle.history_csv())
    save_model(bundle.networks.generator, out / "checkpoint" / "generator")
    save_model(bundle.networks.discriminator, out / "checkpoint" / "discriminator")
    if bundle.networks.classifier is not None:
        save_model(bundle.networks.classifier, out / "checkpoint" / "classifier")
    last = bundle.history[-1] if bundle.history else None
    print(f"trained {cfg.train.scheme} for {cfg.train.steps} steps -> {out}")
    if last is not None:
        print(f"final loss_d={last.loss_d:.6g} loss_g={last.loss_g:.6g}")
    return EXIT_OK


# -- verify ----------------------------------------------------------------------

def cmd_verify(args) -> int:
    out = Path(args.out)
    cases = run_suite(args.suite, args.cases, args.seed, args.steps)
    rows = [["case", "analytic", "measured", "deviation"]]
    rows += [[c.case_id, repr(float(c.analytic)), repr(float(c.measured)), repr(float(c.deviation))] for c in cases]
    out.mkdir(parents=True, exist_ok=True)
    _write(out, f"verify_{args.suite}.csv", _csv(rows))
    worst = max(cases, key=lambda c: c.deviation / c.tolerance)
    failed = [c for c in cases if not c.passed]
    print(f"{args.suite}: {len(cases) - len(failed)}/{len(cases)} cases within tolerance; "
          f"max deviation {max(c.deviation for c in cases):.3e}")
    if failed:
        print(f"worst case {worst.case_id}: analytic={worst.analytic!r} measured={worst.measured!r} "
              f"deviation={worst.deviation!r} tolerance={worst.tolerance!r}")
        return EXIT_VERIFY
    return EXIT_OK


# -- eval ------------------------------------------------------------------------

def _checkpoint_dir(path: Path) -> Path:
    return path / "checkpoint" if (path / "checkpoint").is_dir() else path


def principal_projection(a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Project two flattened sample sets onto the first principal axis of their union."""
    pooled = np.concatenate([a, b])
    centre = pooled.mean(axis=0)
    _, _, vt = np.linalg.svd(pooled - centre, full_matrices=False)
    axis = vt[0]
    # fix the sign so the projection does not depend on the SVD's convention
    if axis[np.argmax(np.abs(axis))] < 0:
        axis = -axis
    return (a - centre) @ axis, (b - centre) @ axis


def cmd_eval(args) -> int:
    run_dir = Path(args.checkpoint)
    ckpt = _checkpoint_dir(run_dir)
    cfg_path = Path(args.config) if args.config else ckpt.parent / "config.txt"
    cfg = configmod.load(cfg_path)
    n = args.n_per_class if args.n_per_class is not None else cfg.eval_n_per_class
    out = Path(args.out) if args.out else ckpt.parent
    try:
        nets = build_networks(cfg.train)
    except InvalidConfig as exc:
        raise CommandError(EXIT_CONFIG, f"config error: {exc}") from exc
    try:
        load_model(nets.generator, ckpt / "generator")
    except (BadFormat, OSError, ValueError) as exc:
        raise CommandError(EXIT_RUNTIME, f"checkpoint does not match config: {exc}") from exc

    s = child_seeds(cfg.eval_seed if args.seed is None else args.seed, 2)
    rng = make_rng(s[0])
    samples = {c: generate(nets, cfg.train, c, n, rng) for c in (0, 1)}
    jsd_rng = make_rng(s[1])
    m = cfg.eval_jsd_samples
    pool = {c: generate(nets, cfg.train, c, m, jsd_rng).reshape(m, -1) for c in (0, 1)}

    out.mkdir(parents=True, exist_ok=True)
    image = samples[0].ndim == 4
    if image:
        # generators have a linear output layer; metrics assume pixels in [0, 1]
        samples = {c: np.clip(x, 0.0, 1.0) for c, x in samples.items()}
        report = pairwise_report(list(samples[0]), list(samples[1]))
        _write(out, "report.csv", report.to_csv())
        columns = min(10, n)
        for c in (0, 1):
            _write(out, f"samples_class{c}.pgm", encode_pgm(mosaic(samples[c], columns)))
        a, b = principal_projection(pool[0], pool[1])
        a, b = a.reshape(-1, 1), b.reshape(-1, 1)
        projection = "first_principal_component"
        print(f"report from {report.pair_counts[0]}/{report.pair_counts[1]}/{report.pair_counts[2]} pairs")
    else:
        labels = np.repeat(np.array([0, 1]), n)
        _write(out, "samples.csv", points_to_csv(LabeledBatch(np.concatenate([samples[0], samples[1]]), labels)))
        a, b = pool[0], pool[1]
        projection = "none"
    value = empirical_jsd(a, b)
    _write(out, "jsd.csv", _csv([["quantity", "value"], ["jsd", repr(float(value))],
                                 ["samples_per_class", m], ["projection", projection]]))
    print(f"empirical jsd between generated classes: {value:.6f}")
    return EXIT_OK


# -- compare ---------------------------------------------------------------------

def _read_report(run: Path) -> MetricReport:
    path = run / "report.csv"
    if not path.is_file():
        raise CommandError(EXIT_CONFIG, f"missing report: {path}")
    try:
        return MetricReport.from_csv(path.read_text(encoding="utf-8"))
    except BadFormat as exc:
        raise CommandError(EXIT_CONFIG, f"{path}: {exc}") from exc
    except ValueError as exc:
        raise CommandError(EXIT_CONFIG, f"{path}: unreadable value ({exc})") from exc


def _relation(a: float, b: float) -> str:
    return ">" if a > b else "<" if a < b else "="


def grouped_bar_svg(a: MetricReport, b: MetricReport, label_a: str = "A", label_b: str = "B") -> str:
    """One panel per metric, three observation groups per panel, runs side by side.

    Run A bars are solid, run B bars are drawn at half opacity. Each panel has
    its own vertical scale because the metrics live on different ranges.
    """
    panel_w, panel_h, top, bottom, left = 180, 220, 40, 40, 20
    bar_w, gap = 18, 12
    width = left + panel_w * len(METRICS) + 20
    height = top + panel_h + bottom + 30
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
    ]
    for k, metric in enumerate(METRICS):
        x0 = left + k * panel_w
        vals = [r.get(metric, o) for r in (a, b) for o in OBSERVATIONS]
        lo, hi = min(0.0, *vals), max(0.0, *vals)
        span = (hi - lo) or 1.0
        base_y = top + panel_h * hi / span

        def y_of(v):
            return top + panel_h * (hi - v) / span

        parts.append(f'<text x="{x0 + panel_w / 2:.1f}" y="{top - 15}" text-anchor="middle" '
                     f'font-weight="bold">{metric.upper()}</text>')
        parts.append(f'<line x1="{x0 + 10}" y1="{base_y:.2f}" x2="{x0 + panel_w - 10}" y2="{base_y:.2f}" stroke="#444"/>')
        for j, obs in enumerate(OBSERVATIONS):
            gx = x0 + 15 + j * (2 * bar_w + gap)
            for r_idx, (report, opacity) in enumerate(((a, 1.0), (b, 0.5))):
                v = report.get(metric, obs)
                y1, y2 = sorted((y_of(v), base_y))
                parts.append(
                    f'<rect x="{gx + r_idx * bar_w}" y="{y1:.2f}" width="{bar_w - 2}" height="{max(y2 - y1, 0.5):.2f}" '
                    f'fill="{OBSERVATION_COLOURS[obs]}" fill-opacity="{opacity}">'
                    f'<title>{(label_a, label_b)[r_idx]} {obs} {metric} = {v!r}</title></rect>'
                )
        parts.append(f'<text x="{x0 + panel_w / 2:.1f}" y="{top + panel_h + 15}" text-anchor="middle" fill="#444">'
                     f'{lo:.3g} .. {hi:.3g}</text>')
    ly = top + panel_h + bottom
    for j, obs in enumerate(OBSERVATIONS):
        lx = left + j * 170
        parts.append(f'<rect x="{lx}" y="{ly}" width="12" height="12" fill="{OBSERVATION_COLOURS[obs]}"/>')
        parts.append(f'<text x="{lx + 16}" y="{ly + 10}">{obs}</text>')
    parts.append(f'<text x="{left + 3 * 170}" y="{ly + 10}">solid = {label_a}, faded = {label_b}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def compare_reports(a: MetricReport, b: MetricReport) -> tuple[list[list], list[str]]:
    rows = [["metric", "observation", "run_a", "run_b", "delta"]]
    verdicts = []
    for metric in METRICS:
        for obs in OBSERVATIONS:
            va, vb = a.get(metric, obs), b.get(metric, obs)
            rows.append([metric, obs, repr(va), repr(vb), repr(va - vb)])
            verdicts.append(f"{obs.replace('_', '-')} {metric.upper()}: A {_relation(va, vb)} B")
    return rows, verdicts


def cmd_compare(args) -> int:
    run_a, run_b = Path(args.run_a), Path(args.run_b)
    a, b = _read_report(run_a), _read_report(run_b)
    rows, verdicts = compare_reports(a, b)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write(out, "compare.csv", _csv(rows))
    _write(out, "compare.svg", grouped_bar_svg(a, b, run_a.name or "A", run_b.name or "B"))
    for line in verdicts:
        print(line)
    return EXIT_OK


# -- entry point -----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vacgan", description="VAC+GAN experiment runner")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train one configuration and write losses plus checkpoints")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="output directory (defaults to run.out from the config)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("verify", help="numerically check one of the theoretical results")
    p.add_argument("--suite", required=True, choices=SUITES)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--cases", type=int, help="number of cases (suite-specific default)")
    p.add_argument("--steps", type=int, default=5000, help="classifier training steps for prop1")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("eval", help="sample a trained generator and compute the diversity report")
    p.add_argument("--checkpoint", required=True, help="run directory written by train, or its checkpoint/ folder")
    p.add_argument("--config", help="config file (defaults to config.txt in the run directory)")
    p.add_argument("--n-per-class", type=int, dest="n_per_class")
    p.add_argument("--seed", type=int, help="sampling seed (overrides eval.seed)")
    p.add_argument("--out", help="output directory (defaults to the run directory)")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("compare", help="compare the reports of two evaluated runs")
    p.add_argument("run_a")
    p.add_argument("run_b")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_compare)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CommandError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except StepError as exc:
        print(f"runtime error at step {exc.step}: {exc.cause}", file=sys.stderr)
        return EXIT_RUNTIME
    except VacganError as exc:
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
