"""End-to-end detection over an in-memory corpus."""

from __future__ import annotations

from dataclasses import dataclass
from datetime import datetime
from typing import Sequence

from . import community, detector, diversity, event_graph
from .ingest import TweetRecord


@dataclass(frozen=True)
class PipelineConfig:
    tz: str = "UTC"
    top_k: int = 20
    thresholds: diversity.DiversityThresholds = diversity.DiversityThresholds()
    seed: int = 0
    resolution: float = 1.0
    dense_min_size: int = 3
    dense_min_multiplicity: float = 2.0
    detector: detector.DetectorConfig = detector.DetectorConfig()


@dataclass
class PipelineResult:
    urls: list[str]
    tables: dict[str, diversity.UrlDiversityTable]
    verdicts: list[diversity.UrlVerdict]
    graph: event_graph.CoTweetMultigraph
    partition: community.Partition
    clusters: list[event_graph.DenseComponent]
    report: detector.DetectionReport


def run(records: Sequence[TweetRecord], config: PipelineConfig | None = None,
        as_of: datetime | None = None) -> PipelineResult:
    config = config or PipelineConfig()
    urls = diversity.top_k_urls(records, config.top_k)
    tables = diversity.diversity_tables(records, urls)
    verdicts = [diversity.classify_url(tables[u], config.thresholds) for u in urls]
    graph = event_graph.project(event_graph.build_bipartite(records, event_graph.ALL_DAYS, tz=config.tz))
    partition = community.louvain(graph, seed=config.seed, resolution=config.resolution)
    clusters = event_graph.dense_components(graph, partition, config.dense_min_size, config.dense_min_multiplicity)
    report = detector.flag_accounts(verdicts, tables, clusters, records, config.detector, as_of=as_of)
    return PipelineResult(urls, tables, verdicts, graph, partition, clusters, report)


def precision_recall(flagged: set[str], truth: dict[str, str]) -> tuple[float, float]:
    bots = {u for u, label in truth.items() if label == "bot"}
    tp = len(flagged & bots)
    precision = tp / len(flagged) if flagged else 1.0
    recall = tp / len(bots) if bots else 1.0
    return precision, recall
