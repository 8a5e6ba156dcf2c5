"""Command-line entry point: ``polluters {detect,graph,gini,eval,synth}``.

Exit codes: 0 success, 2 I/O or parse fatal, 64 usage error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

from . import community, detector, diversity, event_graph, stats_eval, synth
from .ingest import (
    CalendarError,
    ConfigError,
    IngestConfig,
    InvalidURL,
    canonicalize_url,
    SourceError,
    load_calendar,
    parse_stream,
    parse_timestamp,
    resolve_tz,
)
from .pipeline import PipelineConfig, precision_recall, run

logger = logging.getLogger("polluters")

EXIT_OK = 0
EXIT_FATAL = 2
EXIT_USAGE = 64


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


@dataclass
class RunConfig:
    input: str = ""
    calendar: str = ""
    tz: str = "UTC"
    top_k: int = 20
    gini_threshold: float = 0.4
    r2_threshold: float = 0.5
    min_users: int = 5
    seed: int = 0
    resolution: float = 1.0
    dense_min_size: int = 3
    dense_min_multiplicity: float = 2.0
    media_percentile: float = 99.0
    burst_min_count: int = 10
    since: str = ""
    until: str = ""
    as_of: str = ""
    out: str = "out"

    def pipeline(self) -> PipelineConfig:
        return PipelineConfig(
            tz=self.tz,
            top_k=self.top_k,
            thresholds=diversity.DiversityThresholds(self.gini_threshold, self.r2_threshold, self.min_users),
            seed=self.seed,
            resolution=self.resolution,
            dense_min_size=self.dense_min_size,
            dense_min_multiplicity=self.dense_min_multiplicity,
            detector=detector.DetectorConfig(
                cluster_min_multiplicity=self.dense_min_multiplicity,
                media_follower_percentile=self.media_percentile,
                burst_min_count=self.burst_min_count,
            ),
        )

    def write(self, path: Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for f in fields(self):
                fh.write(f"{f.name} = {getattr(self, f.name)}\n")


_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _coerce(key: str, raw: str):
    kind = _TYPES[key]
    try:
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
    except ValueError:
        raise UsageError(f"config key {key}: expected {kind}, got {raw!r}")
    return raw


def read_config_file(path: str) -> dict:
    """Flat ``key = value`` lines; ``#`` starts a comment."""
    values = {}
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise SourceError(f"cannot read config {path}: {exc}") from exc
    for n, line in enumerate(lines, start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip().replace("-", "_")
        if not sep or key not in _TYPES:
            raise UsageError(f"{path}:{n}: unknown or malformed config line")
        values[key] = _coerce(key, value.strip())
    return values


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    d = RunConfig()
    g = p.add_argument_group("run configuration")
    g.add_argument("--config", help="flat key = value file; flags override it")
    g.add_argument("--input", help="line-delimited JSON tweet records")
    g.add_argument("--calendar", help="event calendar CSV (city,date)")
    g.add_argument("--tz", help=f"timezone for day bucketing (default {d.tz})")
    g.add_argument("--top-k", type=int, help=f"number of top URLs (default {d.top_k})")
    g.add_argument("--gini-threshold", type=float, help=f"default {d.gini_threshold}")
    g.add_argument("--r2-threshold", type=float, help=f"default {d.r2_threshold}")
    g.add_argument("--min-users", type=int, help=f"default {d.min_users}")
    g.add_argument("--seed", type=int, help=f"Louvain / synth seed (default {d.seed})")
    g.add_argument("--resolution", type=float, help=f"Louvain resolution (default {d.resolution})")
    g.add_argument("--dense-min-size", type=int, help=f"default {d.dense_min_size}")
    g.add_argument("--dense-min-multiplicity", type=float, help=f"default {d.dense_min_multiplicity}")
    g.add_argument("--media-percentile", type=float, help=f"default {d.media_percentile}")
    g.add_argument("--burst-min-count", type=int, help=f"default {d.burst_min_count}")
    g.add_argument("--since", help="ISO-8601 lower bound on tweet time (inclusive)")
    g.add_argument("--until", help="ISO-8601 upper bound on tweet time (exclusive)")
    g.add_argument("--as-of", help="reference time for account ages (default: last tweet)")
    g.add_argument("--out", help=f"output directory (default {d.out})")


def resolve_config(args: argparse.Namespace) -> RunConfig:
    values = asdict(RunConfig())
    if getattr(args, "config", None):
        values.update(read_config_file(args.config))
    for key in values:
        v = getattr(args, key, None)
        if v is not None:
            values[key] = v
    cfg = RunConfig(**values)
    if cfg.top_k < 1 or cfg.min_users < 0 or cfg.dense_min_size < 1 or cfg.burst_min_count < 2:
        raise UsageError("top-k, dense-min-size must be >= 1 and burst-min-count >= 2")
    if cfg.resolution <= 0:
        raise UsageError("resolution must be positive")
    return cfg


def _load(cfg: RunConfig):
    if not cfg.input:
        raise UsageError("--input is required")
    resolve_tz(cfg.tz)
    ingest = IngestConfig(tz=cfg.tz)
    try:
        if cfg.since:
            ingest.since = parse_timestamp(cfg.since)
        if cfg.until:
            ingest.until = parse_timestamp(cfg.until)
    except ValueError as exc:
        raise UsageError(str(exc))
    if not Path(cfg.input).is_file():
        raise SourceError(f"input not found: {cfg.input}")
    records, errors = parse_stream(cfg.input, ingest)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    errors.write(out / "parse_errors.txt")
    cfg.write(out / "config.txt")
    return records, errors, out


def cmd_detect(args) -> int:
    cfg = resolve_config(args)
    records, errors, out = _load(cfg)
    as_of = parse_timestamp(cfg.as_of) if cfg.as_of else None
    res = run(records, cfg.pipeline(), as_of=as_of)

    diversity.write_verdicts(res.verdicts, out / "verdicts.csv")
    diversity.write_distribution((res.tables[u] for u in res.urls), out / "diversity.csv")
    detector.write_report(res.report, out / "report.csv", out / "summary.json")
    _write_clusters(res.clusters, out / "dense_components.csv")
    comparison = detector.population_stats(res.report.flagged_ids, records, as_of)
    detector.write_histograms(comparison, out)
    stats_eval.write_dataset_stats(stats_eval.dataset_stats(records), out / "corpus_stats.csv")

    s = res.report.corpus_summary
    print(f"tweets: {s.total_tweets}  parse errors: {len(errors)}")
    print(f"bot URLs: {sum(v.label == diversity.BOT_URL for v in res.verdicts)} of {len(res.verdicts)} top URLs")
    print(f"flagged accounts: {len(res.report.flagged)}")
    print(f"flagged tweet fraction: {s.flagged_tweet_fraction:.4f} ({s.flagged_tweet_count}/{s.total_tweets})")
    if args.truth:
        truth = synth.load_truth(args.truth)
        p, r = precision_recall(res.report.flagged_ids, truth)
        print(f"precision: {p:.4f}  recall: {r:.4f}")
    return EXIT_OK


def _write_clusters(clusters, path: Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["community", "size", "mean_multiplicity", "members"])
        for c in clusters:
            w.writerow([c.community, c.size, f"{c.mean_multiplicity:.6f}", ";".join(c.members)])


def cmd_graph(args) -> int:
    cfg = resolve_config(args)
    records, _, out = _load(cfg)
    modes = [event_graph.ALL_DAYS]
    calendar = None
    if cfg.calendar:
        calendar = load_calendar(cfg.calendar)
        modes.append(event_graph.EVENT_DAYS)
    else:
        logger.warning("no calendar given; writing the all-days projection only")
    for mode in modes:
        g = event_graph.project(event_graph.build_bipartite(records, mode, calendar, cfg.tz))
        part = community.louvain(g, seed=cfg.seed, resolution=cfg.resolution)
        event_graph.export_dot(g, part, out / f"{mode}.dot", name=mode)
        event_graph.write_snapshot(g, part, out / f"{mode}_edges.csv", out / f"{mode}_nodes.csv")
        print(f"{mode}: {len(g.nodes)} users, {len(g.edges)} linked pairs, "
              f"{len(part)} communities, modularity {part.modularity:.4f}")
    return EXIT_OK


def cmd_gini(args) -> int:
    cfg = resolve_config(args)
    records, _, out = _load(cfg)
    urls = args.url or diversity.top_k_urls(records, cfg.top_k)
    if args.url:
        try:
            urls = [canonicalize_url(u) for u in urls]
        except InvalidURL as exc:
            raise UsageError(str(exc))
    tables = diversity.diversity_tables(records, urls)
    thresholds = cfg.pipeline().thresholds
    verdicts = [diversity.classify_url(tables[u], thresholds) for u in urls]
    diversity.write_verdicts(verdicts, out / "verdicts.csv")
    print("url,n,gini,r_squared,label")
    for v in verdicts:
        print(f"{v.url},{v.n},{v.gini:.4f},{v.r_squared:.4f},{v.label}")
    return EXIT_OK


def _flagged_from_report(path: str) -> set[str]:
    with open(path, encoding="utf-8", newline="") as fh:
        return {row["user_id"] for row in csv.DictReader(fh)}


def cmd_eval(args) -> int:
    out = Path(args.out or "out")
    out.mkdir(parents=True, exist_ok=True)
    flagged = _flagged_from_report(args.report) if args.report else None
    labelled = []
    emitted = 0

    if args.labelled:
        labelled, dropped = stats_eval.load_labelled(args.labelled)
        with open(out / "eval_accuracy.csv", "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["n", "dropped_no_majority", "correct", "accuracy", "binomial_p", "t_test_p"])
            if labelled:
                acc = stats_eval.accuracy(labelled)
                correct = sum(a.human_label == a.predicted_label for a in labelled)
                p_bin = stats_eval.binomial_significance(correct, len(labelled), 0.5)
                try:
                    p_t = f"{stats_eval.proportion_t_test(correct, len(labelled), 0.5).p_value:.6g}"
                except ValueError:
                    p_t = ""
                w.writerow([len(labelled), dropped, correct, f"{acc:.6f}", f"{p_bin:.6g}", p_t])
                print(f"accuracy: {acc:.4f} on {len(labelled)} labelled accounts "
                      f"({dropped} dropped without majority); exact binomial p = {p_bin:.3g}")
            else:
                w.writerow([0, dropped, 0, "", "", ""])
                print(f"accuracy: no labelled accounts ({dropped} dropped without majority)")
        emitted += 1

    if args.status:
        statuses = stats_eval.load_statuses(args.status)
        target = flagged if flagged is not None else set(statuses)
        s = stats_eval.account_status_report(statuses, target)
        with open(out / "eval_status.csv", "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["flagged", "suspended_count", "deleted_count", "active_count", "unmatched_count"])
            w.writerow([len(target), s.suspended_count, s.deleted_count, s.active_count, s.unmatched_count])
        print(f"status: {s.suspended_count} suspended, {s.deleted_count} deleted, "
              f"{s.active_count} active of {len(target)} flagged")
        emitted += 1

    if args.scores:
        scores, rejected = stats_eval.load_scores(args.scores)
        target = flagged if flagged is not None else set(scores)
        s = stats_eval.summarize_external_scores(scores, target, labelled)

        def fmt(x):
            return "" if x is None else f"{x:.6f}"

        with open(out / "eval_scores.csv", "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["group", "count", "fraction_above_half", "mean", "sd"])
            w.writerow(["flagged", s.coverage, "", fmt(s.mean), fmt(s.sd)])
            for name, g in (("true_positives", s.true_positives), ("false_positives", s.false_positives)):
                w.writerow([name, g.count, fmt(g.fraction_above_half), fmt(g.mean), fmt(g.sd)])
        if s.zero_coverage:
            print("external scores: zero coverage of flagged accounts")
        else:
            print(f"external scores: mean {s.mean:.3f} sd {s.sd:.3f} over {s.coverage} flagged "
                  f"({len(rejected)} rows rejected)")
        emitted += 1

    if not emitted:
        print("nothing to evaluate: pass --labelled, --status and/or --scores")
    return EXIT_OK


def cmd_synth(args) -> int:
    overrides = {
        "seed": args.seed, "n_legit_users": args.n_legit, "n_bots": args.n_bots,
        "n_bot_urls": args.n_bot_urls, "days": args.days,
    }
    cfg = replace(synth.SynthConfig(), **{k: v for k, v in overrides.items() if v is not None})
    try:
        paths = synth.generate(cfg, args.out)
    except ValueError as exc:
        raise UsageError(str(exc))
    with open(Path(args.out) / "synth_config.json", "w", encoding="utf-8") as fh:
        json.dump(synth.config_dict(cfg), fh, indent=2, sort_keys=True)
        fh.write("\n")
    for name, p in paths.items():
        print(f"{name}: {p}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="polluters", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("detect", help="full pipeline: diversity + co-tweet graph + flags")
    _add_run_flags(p)
    p.add_argument("--truth", help="ground-truth CSV (user_id,label) to score against")
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("graph", help="export co-tweet projections (DOT + CSV)")
    _add_run_flags(p)
    p.set_defaults(func=cmd_graph)

    p = sub.add_parser("gini", help="per-URL Gini / rank-size verdicts")
    _add_run_flags(p)
    p.add_argument("--url", action="append", help="restrict to this URL (repeatable)")
    p.set_defaults(func=cmd_gini)

    p = sub.add_parser("eval", help="accuracy, account status and external score summaries")
    p.add_argument("--labelled", help="CSV user_id,label_1,label_2,label_3,predicted")
    p.add_argument("--status", help="CSV user_id,code")
    p.add_argument("--scores", help="CSV user_id,score")
    p.add_argument("--report", help="report.csv from detect; defines the flagged set")
    p.add_argument("--out")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("synth", help="generate a labelled synthetic stream")
    p.add_argument("--seed", type=int)
    p.add_argument("--n-legit", type=int)
    p.add_argument("--n-bots", type=int)
    p.add_argument("--n-bot-urls", type=int)
    p.add_argument("--days", type=int)
    p.add_argument("--out", default="synth_out")
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # --help exits 0, parse errors exit EXIT_USAGE
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"polluters: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ConfigError as exc:
        print(f"polluters: configuration error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (SourceError, CalendarError, OSError, stats_eval.EvalFileError) as exc:
        print(f"polluters: {exc}", file=sys.stderr)
        return EXIT_FATAL


if __name__ == "__main__":
    sys.exit(main())
