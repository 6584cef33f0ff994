"""Text serialization of run records and trajectories.

Record layout (UTF-8):

    key=value                      header lines (mode, seed, config.*, mask, metrics)
    tau,pre_mse,post_mse,energy_first,energy_last   one line per outer iteration
    v0,v1,...                      final signal

Reals are written with ``repr`` so they round-trip exactly.
"""

from __future__ import annotations

import math
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Optional

import numpy as np

from .config import echo_lines
from .pipeline import RunRecord

SNAPSHOT_FIELDS = ("tau", "pre_mse", "post_mse", "energy_first", "energy_last")
TRAJECTORY_FIELDS = ("step", "tau", "k", "h", "energy", "mse_to_source")


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def atomic_write(path, text: str) -> None:
    """Write ``text`` to a sibling temp file, then rename over ``path``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def record_text(rec: RunRecord, cfg: Optional[Mapping[str, Any]] = None) -> str:
    lines = [f"mode={rec.mode}", f"seed={rec.seed}"]
    if cfg is not None:
        lines += [f"config.{line}" for line in echo_lines(cfg)]
    lines.append(f"operator={rec.operator.kind}")
    lines.append("operator.kept_indices=" + " ".join(str(i) for i in rec.operator.kept_indices))
    if rec.report is not None:
        lines.append(f"metric.mse={_fmt(rec.report.mse)}")
        lines.append(f"metric.psnr={_fmt(rec.report.psnr)}")
        if rec.report.ssim is not None:
            lines.append(f"metric.ssim={_fmt(rec.report.ssim)}")
    lines.append(f"metric.measured_mse={_fmt(rec.measured_mse)}")
    lines.append("snapshot_fields=" + ",".join(SNAPSHOT_FIELDS))
    for s in rec.snapshots:
        lines.append(",".join(_fmt(v) for v in
                              (s.tau, s.pre_mse, s.post_mse, s.energy_first, s.energy_last)))
    lines.append(",".join(_fmt(v) for v in rec.output))
    return "\n".join(lines) + "\n"


def trajectory_text(rec: RunRecord) -> str:
    lines = [",".join(TRAJECTORY_FIELDS)]
    lines += [",".join(_fmt(v) for v in row) for row in rec.trajectory]
    return "\n".join(lines) + "\n"


@dataclass
class ParsedRecord:
    header: dict[str, str]
    snapshots: list[tuple[float, ...]]
    signal: np.ndarray
    config: dict[str, str] = field(default_factory=dict)

    @property
    def kept_indices(self) -> tuple[int, ...]:
        return tuple(int(v) for v in self.header.get("operator.kept_indices", "").split())


def parse_record(text: str) -> ParsedRecord:
    header: dict[str, str] = {}
    body: list[str] = []
    for line in text.splitlines():
        if not line.strip():
            continue
        if "=" in line:
            key, value = line.split("=", 1)
            header[key] = value
        else:
            body.append(line)
    if not body:
        raise ValueError("record has no signal line")
    snaps = [tuple(float(v) for v in line.split(",")) for line in body[:-1]]
    signal = np.array([float(v) for v in body[-1].split(",")])
    config = {k[len("config."):]: v for k, v in header.items() if k.startswith("config.")}
    return ParsedRecord(header, snaps, signal, config)


def metric_value(text: str) -> float:
    return math.inf if text == "inf" else float(text)
