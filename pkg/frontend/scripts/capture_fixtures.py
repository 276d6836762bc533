"""Regenerate the frontend test fixtures from a real coordinator run.

Runs the full networked pipeline twice (density and scatterplot modes)
against in-process runners and saves the exact response bodies the
browser client would consume.  Run from the repository root:

    python3 frontend/scripts/capture_fixtures.py
"""

import json
import logging
import pathlib

import numpy as np

from mptsne import protocol as proto
from mptsne.embedding import TsneConfig
from mptsne.netplane import CoordinatorService, TaskRegistry
from mptsne.netplane.runners import (CollaboratorSRunner, CollaboratorTRunner,
                                     CoordinatorClient, ParticipantRunner)

FIXTURE_DIR = pathlib.Path(__file__).resolve().parent.parent / "fixtures"


def capture(mode: str, prefix: str) -> None:
    registry = TaskRegistry()
    coordinator = CoordinatorService(registry)
    coordinator.start()
    url = coordinator.url
    s = CollaboratorSRunner(url, poll_interval=0.05)
    t = CollaboratorTRunner(url, poll_interval=0.05)
    s.start()
    t.start()

    rng = np.random.default_rng(17)
    centers = {"alpha": (-3.0, 0.0), "beta": (3.0, 0.0)}
    datasets = {}
    for pid, center in centers.items():
        pts = rng.normal(loc=[center[0], center[1], 0.0], scale=1.0, size=(8, 3))
        labels = [f"c{i % 2}" for i in range(8)] if mode == "scatterplot" else None
        datasets[pid] = proto.Dataset(pts, pid, labels)

    config = proto.TaskConfig(
        participants=[proto.ParticipantSpec("alpha", 8),
                      proto.ParticipantSpec("beta", 8)],
        dimensions=3,
        perplexity=3.0,
        tsne=TsneConfig(perplexity=3.0, iterations=150, exaggeration_iters=50,
                        momentum_switch_iter=50, init_seed=17),
        key_bits=512,
        scale_bits=16,
        max_abs_value=10.0,
        seed=17,
        visualization_mode=mode,
    )
    client = CoordinatorClient(url)
    record = client.propose(config, title=f"{mode} demo",
                            description="fixture capture", proposer="alpha")
    task_id = record["task_id"]

    runners = {}
    for pid in ("alpha", "beta"):
        runner = ParticipantRunner(url, pid, datasets[pid],
                                   columns=["height", "weight", "score"],
                                   poll_interval=0.05)
        runner.start()
        runner.join_task(task_id)
        runners[pid] = runner
    runners["alpha"].wait_complete(task_id, timeout=120)

    fixtures = {
        "tasks": client.list_tasks(),
        "task": client.get_task(task_id),
        "artifact_alpha": client.artifact(task_id, "alpha"),
        "density_alpha": client.density(task_id, "alpha"),
    }
    FIXTURE_DIR.mkdir(exist_ok=True)
    for name, payload in fixtures.items():
        path = FIXTURE_DIR / f"{prefix}_{name}.json"
        path.write_text(json.dumps(payload))
        print("wrote", path)

    for runner in runners.values():
        runner.stop()
    s.stop()
    t.stop()
    coordinator.stop()


if __name__ == "__main__":
    logging.basicConfig(level=logging.ERROR)
    capture("density", "density")
    capture("scatterplot", "scatter")
