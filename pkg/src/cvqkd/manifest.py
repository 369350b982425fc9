"""Run manifests: what ran, with which settings, and what it wrote."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from . import __version__
from .csvio import sha256_file


def utc_now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


@dataclass
class RunManifest:
    tool_version: str
    command: str
    config: dict
    seed: int
    workers: int
    started: str
    finished: str = ""
    outputs: dict = field(default_factory=dict)  # file name -> sha256

    def record(self, *paths) -> None:
        for p in paths:
            self.outputs[Path(p).name] = sha256_file(p)

    def write(self, path) -> Path:
        path = Path(path)
        self.finished = self.finished or utc_now()
        path.write_text(json.dumps(asdict(self), indent=2, sort_keys=True) + "\n", encoding="utf-8")
        return path

    @classmethod
    def start(cls, command: str, config: dict, seed: int, workers: int) -> RunManifest:
        return cls(__version__, command, config, seed, workers, utc_now())

    @classmethod
    def load(cls, path) -> RunManifest:
        return cls(**json.loads(Path(path).read_text(encoding="utf-8")))
