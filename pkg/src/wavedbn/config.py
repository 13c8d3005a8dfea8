"""Run configuration: an INI-style ``key = value`` file with section headers.

Every key has a default; unknown sections or keys are rejected, and every
value is checked against the library's preconditions before any work starts.
``wavedbn --print-defaults`` prints the full default file.
"""
from __future__ import annotations

import configparser
import hashlib
import os
from dataclasses import dataclass
from pathlib import Path

from .dataset import SplitSpec
from .dbn import DbnTrainConfig
from .errors import ValidationError
from .rbm import VISIBLE_KINDS, RbmTrainConfig
from .wavelet import FILTERS

DATASET_KINDS = ("coil20", "usps", "pgm-dir")


def _ints(text: str) -> tuple[int, ...]:
    return tuple(int(t) for t in text.replace(",", " ").split())


def _bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _optional_int(text: str) -> int | None:
    return int(text) if text.strip() else None


# (section, key) -> (attribute, parser, formatter)
_SCHEMA = {
    ("data", "kind"): ("dataset_kind", str, str),
    ("data", "path"): ("data_path", str, str),
    ("data", "train_path"): ("train_path", str, str),
    ("data", "test_path"): ("test_path", str, str),
    ("data", "classes"): ("classes", _ints, lambda v: ",".join(map(str, v))),
    ("preprocess", "downsample"): ("downsample", int, str),
    ("preprocess", "wavelet"): ("wavelet", str, str),
    ("model", "hidden"): ("hidden", _ints, lambda v: ",".join(map(str, v))),
    ("model", "visible_kind"): ("visible_kind", str, str),
    ("pretrain", "learning_rate"): ("pretrain_learning_rate", float, repr),
    ("pretrain", "epochs"): ("pretrain_epochs", int, str),
    ("pretrain", "batch_size"): ("pretrain_batch_size", int, str),
    ("pretrain", "cd_steps"): ("cd_steps", int, str),
    ("pretrain", "momentum_initial"): ("momentum_initial", float, repr),
    ("pretrain", "momentum_final"): ("momentum_final", float, repr),
    ("pretrain", "momentum_switch_epoch"): ("momentum_switch_epoch", int, str),
    ("pretrain", "weight_decay"): ("weight_decay", float, repr),
    ("finetune", "learning_rate"): ("finetune_learning_rate", float, repr),
    ("finetune", "epochs"): ("finetune_epochs", int, str),
    ("finetune", "batch_size"): ("finetune_batch_size", _optional_int,
                                 lambda v: "" if v is None else str(v)),
    ("split", "train_fraction"): ("train_fraction", float, repr),
    ("split", "stratified"): ("stratified", _bool, lambda v: "true" if v else "false"),
    ("split", "seed"): ("split_seed", _optional_int, lambda v: "" if v is None else str(v)),
    ("run", "seed"): ("seed", int, str),
    ("run", "workers"): ("workers", int, str),
    ("run", "out"): ("out_dir", str, str),
}


@dataclass
class RunConfig:
    dataset_kind: str = "coil20"
    data_path: str = "data/coil-20-proc"
    train_path: str = ""
    test_path: str = ""
    classes: tuple[int, ...] = ()
    downsample: int = 2
    wavelet: str = "haar"
    hidden: tuple[int, ...] = (40, 20, 20)
    visible_kind: str = "bernoulli_real"
    pretrain_learning_rate: float = 0.1
    pretrain_epochs: int = 50
    pretrain_batch_size: int = 10
    cd_steps: int = 1
    momentum_initial: float = 0.5
    momentum_final: float = 0.9
    momentum_switch_epoch: int = 5
    weight_decay: float = 2e-4
    finetune_learning_rate: float = 0.1
    finetune_epochs: int = 100
    finetune_batch_size: int | None = None
    train_fraction: float = 0.7
    stratified: bool = True
    # None: derive from the master seed.
    split_seed: int | None = None
    seed: int = 0
    # 0: one worker per available core.
    workers: int = 0
    out_dir: str = "runs/default"

    # ------------------------------------------------------------ parsing

    @classmethod
    def from_text(cls, text: str) -> "RunConfig":
        parser = configparser.ConfigParser(interpolation=None, strict=True,
                                           default_section="__no_default__")
        parser.optionxform = str
        try:
            parser.read_string(text)
        except configparser.Error as exc:
            raise ValidationError(f"config syntax error: {exc.message}") from None
        values = {}
        for section in parser.sections():
            for key, raw in parser.items(section):
                if (section, key) not in _SCHEMA:
                    known = sorted(k for s, k in _SCHEMA if s == section)
                    where = f"known keys: {', '.join(known)}" if known else "unknown section"
                    raise ValidationError(f"unknown config key [{section}] {key} ({where})")
                attr, parse, _ = _SCHEMA[section, key]
                try:
                    values[attr] = parse(raw.strip())
                except ValueError as exc:
                    raise ValidationError(f"[{section}] {key}: {exc}") from None
        cfg = cls(**values)
        cfg.validate()
        return cfg

    @classmethod
    def from_file(cls, path) -> "RunConfig":
        path = Path(path)
        try:
            text = path.read_text()
        except OSError as exc:
            raise ValidationError(f"cannot read config {path}: {exc.strerror}") from exc
        return cls.from_text(text)

    def to_text(self) -> str:
        """Canonical rendering; parsing it back yields an equal config."""
        lines, current = [], None
        for (section, key), (attr, _, fmt) in _SCHEMA.items():
            if section != current:
                if current is not None:
                    lines.append("")
                lines.append(f"[{section}]")
                current = section
            lines.append(f"{key} = {fmt(getattr(self, attr))}".rstrip())
        return "\n".join(lines) + "\n"

    def echo(self) -> dict[str, str]:
        return {f"{s}.{k}": fmt(getattr(self, attr)) for (s, k), (attr, _, fmt) in _SCHEMA.items()}

    def digest(self) -> str:
        """Hash of the settings that determine the trained model.

        ``run.out`` and ``run.workers`` are left out: they change where and
        how fast a model is written, not its contents.
        """
        ignored = {"run.out", "run.workers"}
        text = "".join(f"{k}={v}\n" for k, v in self.echo().items() if k not in ignored)
        return hashlib.sha256(text.encode()).hexdigest()[:16]

    # --------------------------------------------------------- validation

    def validate(self):
        if self.dataset_kind not in DATASET_KINDS:
            raise ValidationError(f"[data] kind must be one of {DATASET_KINDS}")
        if self.dataset_kind == "usps" and not (self.train_path and self.test_path):
            raise ValidationError("[data] usps needs train_path and test_path")
        if self.dataset_kind != "usps" and not self.data_path:
            raise ValidationError("[data] path is required")
        if self.downsample not in (1, 2):
            raise ValidationError("[preprocess] downsample must be 1 or 2")
        if self.wavelet.lower() not in FILTERS:
            raise ValidationError(f"[preprocess] wavelet must be one of {sorted(FILTERS)}")
        if not self.hidden or any(h < 1 for h in self.hidden):
            raise ValidationError("[model] hidden must list positive layer sizes")
        if self.visible_kind not in VISIBLE_KINDS:
            raise ValidationError(f"[model] visible_kind must be one of {VISIBLE_KINDS}")
        if self.workers < 0:
            raise ValidationError("[run] workers must be >= 0 (0 = all cores)")
        if not 0 <= self.seed <= 2**64 - 1 - 16:
            raise ValidationError("[run] seed must be a 64-bit unsigned integer")
        try:
            self.dbn_config()
            self.split_spec()
        except ValidationError as exc:
            raise ValidationError(f"invalid training settings: {exc}") from None

    # --------------------------------------------------------- accessors

    def rbm_config(self) -> RbmTrainConfig:
        return RbmTrainConfig(
            learning_rate=self.pretrain_learning_rate,
            epochs=self.pretrain_epochs,
            batch_size=self.pretrain_batch_size,
            cd_steps=self.cd_steps,
            momentum_initial=self.momentum_initial,
            momentum_final=self.momentum_final,
            momentum_switch_epoch=self.momentum_switch_epoch,
            weight_decay=self.weight_decay,
            seed=self.seed,
        )

    def dbn_config(self) -> DbnTrainConfig:
        return DbnTrainConfig(
            pretrain=self.rbm_config(),
            finetune_learning_rate=self.finetune_learning_rate,
            finetune_epochs=self.finetune_epochs,
            finetune_batch_size=self.finetune_batch_size,
            seed=self.seed,
        )

    def split_spec(self) -> SplitSpec:
        seed = self.seed if self.split_seed is None else self.split_seed
        return SplitSpec(self.train_fraction, seed, self.stratified)

    def effective_workers(self) -> int:
        if self.workers:
            return self.workers
        if hasattr(os, "sched_getaffinity"):
            return len(os.sched_getaffinity(0))
        return os.cpu_count() or 1


def default_text() -> str:
    return RunConfig().to_text()
