"""Flat ``key=value`` run manifests.

A manifest records the command line, the parsed configuration, the seed,
every output file and the summary metrics of one CLI run. Metric values are
written with ``repr`` so that floats round-trip exactly; keys starting with
``time.`` hold wall-clock timings and are never compared on replay.
"""
from __future__ import annotations

import csv
import os

import numpy as np
from dataclasses import dataclass, field

__all__ = ["RunManifest", "compare_outputs"]

TIMING_COLUMN = "time"


def _format(value) -> str:
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, np.integer):
        return str(int(value))
    text = str(value)
    if "\n" in text:
        raise ValueError("manifest values must be single-line")
    return text


@dataclass
class RunManifest:
    command: str
    argv: str
    cwd: str
    seed: int
    config: dict = field(default_factory=dict)
    outputs: dict = field(default_factory=dict)
    metrics: dict = field(default_factory=dict)
    timings: dict = field(default_factory=dict)

    def to_text(self) -> str:
        lines = [f"command={self.command}", f"argv={self.argv}", f"cwd={self.cwd}",
                 f"seed={self.seed}"]
        lines += [f"config.{k}={_format(v)}" for k, v in sorted(self.config.items())]
        lines += [f"output.{k}={v}" for k, v in sorted(self.outputs.items())]
        lines += [f"metric.{k}={_format(v)}" for k, v in sorted(self.metrics.items())]
        lines += [f"time.{k}={_format(v)}" for k, v in sorted(self.timings.items())]
        return "\n".join(lines) + "\n"

    def write(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_text())

    @classmethod
    def read(cls, path) -> "RunManifest":
        flat = {}
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.rstrip("\n")
                if not line or line.startswith("#"):
                    continue
                key, sep, value = line.partition("=")
                if not sep:
                    raise ValueError(f"{path}:{lineno}: expected key=value")
                flat[key] = value
        try:
            man = cls(command=flat["command"], argv=flat["argv"], cwd=flat["cwd"],
                      seed=int(flat["seed"]))
        except KeyError as exc:
            raise ValueError(f"{path}: missing manifest key {exc.args[0]!r}") from None
        for key, value in flat.items():
            group, _, name = key.partition(".")
            target = {"config": man.config, "output": man.outputs,
                      "metric": man.metrics, "time": man.timings}.get(group)
            if target is not None and name:
                target[name] = value
        return man


def _norm(value):
    if value is None or isinstance(value, str):
        return value
    return _format(value)


def _read_csv_without_timing(path):
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        return rows
    keep = [i for i, name in enumerate(rows[0]) if name != TIMING_COLUMN]
    return [[row[i] for i in keep] for row in rows]


def compare_outputs(original: RunManifest, replay: RunManifest):
    """List of human-readable differences between two runs (empty if identical).

    Metrics are compared as strings. CSV outputs are compared cell by cell
    except for the timing column; other outputs byte for byte.
    """
    diffs = []
    for key in sorted(set(original.metrics) | set(replay.metrics)):
        a, b = _norm(original.metrics.get(key)), _norm(replay.metrics.get(key))
        if a != b:
            diffs.append(f"metric.{key}: {a} != {b}")
    for key in sorted(set(original.outputs) | set(replay.outputs)):
        pa, pb = original.outputs.get(key), replay.outputs.get(key)
        if pa is None or pb is None:
            diffs.append(f"output.{key}: present in only one run")
            continue
        if not (os.path.exists(pa) and os.path.exists(pb)):
            diffs.append(f"output.{key}: missing file")
            continue
        if pa.endswith(".csv"):
            same = _read_csv_without_timing(pa) == _read_csv_without_timing(pb)
        else:
            with open(pa, "rb") as fa, open(pb, "rb") as fb:
                same = fa.read() == fb.read()
        if not same:
            diffs.append(f"output.{key}: {pa} and {pb} differ")
    return diffs
