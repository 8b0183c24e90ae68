"""Run reports: one JSON object per line, stable key order, stable line order.

The line order is header, results, counters, transports, incidents, events.
Results are sorted before the report is built, so two runs with the same seed
and transport mode produce byte-identical files.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

REPORT_VERSION = "1"

COUNTER_KEYS = (
    "issued", "enqueued", "deduplicated", "already_computed",
    "computed", "requeued", "failed", "warehouse_hits", "warehouse_misses",
)


def aggregate_stats(stats_list) -> dict[str, int]:
    total = {key: 0 for key in COUNTER_KEYS}
    for stats in stats_list:
        for key in COUNTER_KEYS:
            total[key] += stats.get(key, 0)
    return total


def counter_identities_ok(counters: dict) -> bool:
    """issued counts every demand verb received; enqueued only the ones that
    created a record. The difference is exactly the deduplicated ones."""
    if counters["issued"] != counters["deduplicated"] + counters["enqueued"]:
        return False
    return counters["computed"] <= counters["enqueued"]


@dataclass
class RunReport:
    workload: str
    seed: int
    transport: str
    replication: bool
    results: list[dict] = field(default_factory=list)
    counters: dict = field(default_factory=dict)
    transports: list[dict] = field(default_factory=list)
    incidents: list[dict] = field(default_factory=list)
    events: list[dict] = field(default_factory=list)

    def header(self) -> dict:
        return {
            "type": "header",
            "version": REPORT_VERSION,
            "workload": self.workload,
            "seed": self.seed,
            "transport": self.transport,
            "replication": self.replication,
        }

    def lines(self) -> list[dict]:
        out = [self.header()]
        out.extend({"type": "result", **result} for result in self.results)
        out.append({"type": "counters", **self.counters})
        out.extend({"type": "transport", **entry} for entry in self.transports)
        out.extend({"type": "incident", **entry} for entry in self.incidents)
        out.extend({"type": "event", **entry} for entry in self.events)
        return out

    def dumps(self) -> str:
        return "".join(json.dumps(line, sort_keys=True) + "\n"
                       for line in self.lines())

    def write(self, path) -> None:
        with open(path, "w", encoding="utf-8") as handle:
            handle.write(self.dumps())


def parse_report(text: str) -> list[dict]:
    lines = []
    for raw in text.splitlines():
        raw = raw.strip()
        if raw:
            lines.append(json.loads(raw))
    return lines
