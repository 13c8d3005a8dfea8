"""Run reports: a flat ``key=value`` record plus a human-readable table.

Record grammar: one ``key=value`` pair per line, keys are dotted lowercase
identifiers, list values are comma-separated, matrices are written one row
per key (``test.confusion.03=...``).  Lines starting with ``#`` are comments.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .wavelet import SUBBAND_NAMES


def _num(x) -> str:
    return format(float(x), ".10g")


def _list(values) -> str:
    return ",".join(_num(v) for v in values)


@dataclass
class ReportRecord:
    kind: str
    n_classes: int
    weights: np.ndarray
    # split name -> metrics for that split, e.g. "train", "test"
    splits: dict = field(default_factory=dict)
    pretrain_seconds: np.ndarray | None = None
    finetune_seconds: np.ndarray | None = None
    total_wall_seconds: float | None = None
    config: dict[str, str] = field(default_factory=dict)
    extra: dict[str, str] = field(default_factory=dict)

    @property
    def member_seconds(self) -> np.ndarray | None:
        if self.pretrain_seconds is None:
            return None
        return self.pretrain_seconds + self.finetune_seconds

    def items(self) -> list[tuple[str, str]]:
        out = [("kind", self.kind), ("n_classes", str(self.n_classes)),
               ("ensemble.weights", _list(self.weights))]
        if self.pretrain_seconds is not None:
            out += [
                ("member.pretrain_seconds", _list(self.pretrain_seconds)),
                ("member.finetune_seconds", _list(self.finetune_seconds)),
                ("member.total_seconds", _list(self.member_seconds)),
                ("member.mean_seconds", _num(self.member_seconds.mean())),
            ]
        if self.total_wall_seconds is not None:
            out.append(("total_wall_seconds", _num(self.total_wall_seconds)))
        for name, m in self.splits.items():
            out += [
                (f"{name}.n", str(m.predictions.size)),
                (f"{name}.accuracy", repr(m.accuracy)),
                (f"{name}.error_percent", repr(m.error_percent)),
                (f"{name}.member_accuracy", _list(m.member_accuracy)),
                (f"{name}.per_class_accuracy", _list(m.per_class_accuracy)),
            ]
            out += [(f"{name}.confusion.{i:02d}", ",".join(map(str, row)))
                    for i, row in enumerate(m.confusion)]
        out += sorted(self.extra.items())
        out += [(f"config.{k}", v) for k, v in self.config.items()]
        return out

    def to_text(self) -> str:
        return "".join(f"{k}={v}\n" for k, v in self.items())

    def table(self) -> str:
        lines = []
        header = f"{'DBN':>4} {'band':>6} {'weight':>8}"
        names = list(self.splits)
        header += "".join(f" {n + ' acc':>10}" for n in names)
        if self.pretrain_seconds is not None:
            header += f" {'pretrain s':>11} {'finetune s':>11} {'total s':>9}"
        lines.append(header)
        for j in range(len(self.weights)):
            row = f"{j:>4} {SUBBAND_NAMES[j]:>6} {self.weights[j]:>8.4f}"
            row += "".join(f" {100 * self.splits[n].member_accuracy[j]:>9.2f}%" for n in names)
            if self.pretrain_seconds is not None:
                row += (f" {self.pretrain_seconds[j]:>11.2f} {self.finetune_seconds[j]:>11.2f}"
                        f" {self.member_seconds[j]:>9.2f}")
            lines.append(row)
        lines.append("")
        for n in names:
            m = self.splits[n]
            lines.append(f"ensemble {n} accuracy: {100 * m.accuracy:.2f}%  "
                         f"(error {m.error_percent:.2f}%, n={m.predictions.size})")
        if self.pretrain_seconds is not None:
            lines.append(f"mean time per DBN: {self.member_seconds.mean():.2f} s")
        if self.total_wall_seconds is not None:
            lines.append(f"total wall time: {self.total_wall_seconds:.2f} s")
        for k, v in sorted(self.extra.items()):
            lines.append(f"{k}: {v}")
        return "\n".join(lines) + "\n"


def confusion_text(confusion: np.ndarray) -> str:
    width = max(3, len(str(confusion.max(initial=0))))
    head = "true\\pred " + " ".join(f"{j:>{width}}" for j in range(confusion.shape[1]))
    rows = [f"{i:>9} " + " ".join(f"{v:>{width}}" for v in row) for i, row in enumerate(confusion)]
    return "\n".join([head, *rows]) + "\n"


def parse_report(text: str) -> dict[str, str]:
    out = {}
    for line in text.splitlines():
        if line and not line.startswith("#"):
            key, _, value = line.partition("=")
            out[key] = value
    return out
