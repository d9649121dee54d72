"""Shared setup for the experiment scripts."""

import argparse
from pathlib import Path

from crossmodal_il.tasks import generate_tasks
from crossmodal_il.trainer import TrainConfig, collect_demos, train_bc


def parser(doc: str, out: str) -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(description=doc)
    ap.add_argument("--seeds", default="0,1,2,3,4")
    ap.add_argument("--out", default=out)
    ap.add_argument("--demo-tasks", type=int, default=60)
    return ap


def seeds(text: str) -> list[int]:
    return [int(s) for s in text.split(",") if s.strip()]


def reference(n_demo: int, config: TrainConfig | None = None):
    demos = collect_demos(generate_tasks(n_demo, seed=999), n_demo)
    return train_bc(demos, config or TrainConfig())


def outdir(path: str) -> Path:
    p = Path(path)
    p.mkdir(parents=True, exist_ok=True)
    return p
