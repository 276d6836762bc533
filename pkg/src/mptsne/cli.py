"""Operator entry points: role processes, task management, oracle, bench.

Every failure path exits non-zero with one machine-parsable line on
stderr of the form `error=<category> <detail>`.  Exit codes: 0 ok,
2 config, 3 network, 4 protocol, 5 data.  Environment variables
MPTSNE_COORDINATOR, MPTSNE_LISTEN, MPTSNE_KEY_BITS, MPTSNE_SCALE_BITS
override the corresponding flags.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import os
import sys
import urllib.error

import numpy as np

from . import bench as bench_mod
from .embedding import TsneConfig
from .netplane import CoordinatorService, TaskRegistry
from .netplane.runners import (CollaboratorSRunner, CollaboratorTRunner,
                               CoordinatorClient, CoordinatorHTTPError,
                               ParticipantRunner)
from .protocol import (ConfigError, Dataset, FaultInjection, ParticipantSpec,
                       ProtocolError, TaskConfig, assert_views,
                       run_joint_task, run_plaintext_oracle)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NETWORK = 3
EXIT_PROTOCOL = 4
EXIT_DATA = 5

MODE_ALIASES = {"scatter": "scatterplot", "scatterplot": "scatterplot",
                "density": "density"}

log = logging.getLogger(__name__)


class CliError(Exception):
    def __init__(self, category: str, exit_code: int, message: str):
        super().__init__(message)
        self.category = category
        self.exit_code = exit_code


def config_error(msg):
    return CliError("config", EXIT_CONFIG, msg)


def network_error(msg):
    return CliError("network", EXIT_NETWORK, msg)


def protocol_error(msg):
    return CliError("protocol", EXIT_PROTOCOL, msg)


def data_error(msg):
    return CliError("data", EXIT_DATA, msg)


def load_csv_dataset(path: str, owner_id: str) -> tuple[Dataset, list[str]]:
    """One point per row; numeric columns are dimensions; a final `label`
    column is optional; a header row is required."""
    try:
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            try:
                header = next(reader)
            except StopIteration:
                raise data_error(f"{path}: empty file, header row required")
            has_labels = header and header[-1].strip().lower() == "label"
            columns = header[:-1] if has_labels else header
            points, labels = [], []
            for lineno, row in enumerate(reader, start=2):
                if not row:
                    continue
                values = row[:-1] if has_labels else row
                if len(values) != len(columns):
                    raise data_error(f"{path}:{lineno}: expected {len(columns)} "
                                     f"numeric columns, got {len(values)}")
                try:
                    points.append([float(v) for v in values])
                except ValueError as err:
                    raise data_error(f"{path}:{lineno}: {err}")
                if has_labels:
                    labels.append(row[-1].strip())
    except OSError as err:
        raise data_error(f"{path}: {err}")
    if not points:
        raise data_error(f"{path}: no data rows")
    return Dataset(np.array(points), owner_id, labels if has_labels else None), columns


def parse_participants(spec: str) -> list[ParticipantSpec]:
    out = []
    for part in spec.split(","):
        part = part.strip()
        if not part:
            continue
        try:
            pid, count = part.rsplit(":", 1)
            out.append(ParticipantSpec(pid.strip(), int(count)))
        except ValueError:
            raise config_error(f"--participants: expected ID:COUNT, got {part!r}")
    if not out:
        raise config_error("--participants: at least one ID:COUNT required")
    return out


def parse_listen(value: str) -> tuple[str, int]:
    try:
        host, port = value.rsplit(":", 1)
        return host or "127.0.0.1", int(port)
    except ValueError:
        raise config_error(f"--listen: expected HOST:PORT, got {value!r}")


def apply_env_overrides(args: argparse.Namespace) -> None:
    env = os.environ
    if "MPTSNE_COORDINATOR" in env and hasattr(args, "coordinator"):
        args.coordinator = env["MPTSNE_COORDINATOR"]
    if "MPTSNE_LISTEN" in env and hasattr(args, "listen"):
        args.listen = env["MPTSNE_LISTEN"]
    if "MPTSNE_KEY_BITS" in env and hasattr(args, "key_bits"):
        args.key_bits = int(env["MPTSNE_KEY_BITS"])
    if "MPTSNE_SCALE_BITS" in env and hasattr(args, "scale_bits"):
        args.scale_bits = int(env["MPTSNE_SCALE_BITS"])


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mptsne",
        description="Joint t-SNE over private multi-party data")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a long-lived role process")
    run.add_argument("--role", required=True,
                     choices=["coordinator", "collab-s", "collab-t", "participant"])
    run.add_argument("--coordinator", help="coordinator base URL")
    run.add_argument("--listen", default="127.0.0.1:0", help="HOST:PORT to bind")
    run.add_argument("--journal", help="coordinator journal path (JSON lines)")
    run.add_argument("--id", help="participant id")
    run.add_argument("--data", help="participant CSV data file")
    run.add_argument("--task", help="task id to join (participant role)")
    run.add_argument("--audit", help="directory for audit transcripts (JSON lines)")
    run.add_argument("--poll-interval", type=float, default=0.2)

    task = sub.add_parser("task", help="manage joint embedding tasks")
    task_sub = task.add_subparsers(dest="task_command", required=True)

    propose = task_sub.add_parser("propose")
    propose.add_argument("--coordinator", required=False)
    propose.add_argument("--title", default="")
    propose.add_argument("--description", default="")
    propose.add_argument("--proposer", default="")
    propose.add_argument("--participants", required=True,
                         help="comma-separated ID:COUNT entries")
    propose.add_argument("--dimensions", type=int, required=True)
    propose.add_argument("--perplexity", type=float, default=30.0)
    propose.add_argument("--iterations", type=int, default=1000)
    propose.add_argument("--key-bits", type=int, default=2048)
    propose.add_argument("--scale-bits", type=int, default=24)
    propose.add_argument("--max-abs-value", type=float, default=100.0)
    propose.add_argument("--mode", choices=sorted(MODE_ALIASES), default="scatter")
    propose.add_argument("--seed", type=int)
    propose.add_argument("--normalize", action="store_true")
    propose.add_argument("--workers", type=int, default=1)
    propose.add_argument("--json", action="store_true")

    for name in ("list", "status", "result"):
        cmd = task_sub.add_parser(name)
        cmd.add_argument("--coordinator", required=False)
        cmd.add_argument("--json", action="store_true")
        if name in ("status", "result"):
            cmd.add_argument("task_id")
        if name == "result":
            cmd.add_argument("--participant", required=True)
            cmd.add_argument("--out", help="write artifact JSON to a file")

    oracle = sub.add_parser("oracle", help="run the plaintext reference pipeline")
    oracle.add_argument("--data", nargs="+", required=True, help="one CSV per participant")
    oracle.add_argument("--perplexity", type=float, default=30.0)
    oracle.add_argument("--iterations", type=int, default=1000)
    oracle.add_argument("--scale-bits", type=int, default=24)
    oracle.add_argument("--seed", type=int, default=0)
    oracle.add_argument("--json", action="store_true")

    audit = sub.add_parser("audit", help="run the protocol locally and audit role views")
    audit.add_argument("--data", nargs="+", required=True, help="one CSV per participant")
    audit.add_argument("--perplexity", type=float, default=30.0)
    audit.add_argument("--iterations", type=int, default=500)
    audit.add_argument("--key-bits", type=int, default=512)
    audit.add_argument("--scale-bits", type=int, default=16)
    audit.add_argument("--seed", type=int, default=0)
    audit.add_argument("--fault", choices=["skip-entry-noise", "identity-permutation"],
                       action="append", default=[])
    audit.add_argument("--json", action="store_true")

    bench = sub.add_parser("bench", help="time each protocol step")
    bench.add_argument("--n", type=int, default=546)
    bench.add_argument("--m", type=int, default=9)
    bench.add_argument("--key-bits", type=int, default=512)
    bench.add_argument("--scale-bits", type=int, default=16)
    bench.add_argument("--iterations", type=int, default=1000)
    bench.add_argument("--seed", type=int, default=0)
    bench.add_argument("--workers", type=int, default=1)
    bench.add_argument("--out", help="CSV output path (default: stdout)")

    return parser


def require_coordinator(args) -> str:
    url = getattr(args, "coordinator", None)
    if not url:
        raise config_error("--coordinator (or MPTSNE_COORDINATOR) is required")
    return url


def cmd_run(args) -> int:
    host, port = parse_listen(args.listen)
    if args.role == "coordinator":
        registry = TaskRegistry(journal_path=args.journal)
        service = CoordinatorService(registry, host, port)
        service.start()
        print(f"coordinator listening on {service.url}", flush=True)
        try:
            while True:
                import time
                time.sleep(1)
        except KeyboardInterrupt:
            service.stop()
        return EXIT_OK

    url = require_coordinator(args)
    common = dict(host=host, port=port, poll_interval=args.poll_interval,
                  audit_dir=args.audit)
    if args.role == "collab-s":
        runner = CollaboratorSRunner(url, **common)
        _client_call(runner.start)
    elif args.role == "collab-t":
        runner = CollaboratorTRunner(url, **common)
        _client_call(runner.start)
    else:
        if not args.id or not args.data:
            raise config_error("participant role requires --id and --data")
        if not args.task:
            raise config_error("participant role requires --task")
        dataset, columns = load_csv_dataset(args.data, args.id)
        runner = ParticipantRunner(url, args.id, dataset, columns=columns, **common)
        client = CoordinatorClient(url)
        record = _client_call(lambda: client.get_task(args.task))
        expected_m = record["config"]["dimensions"]
        if dataset.dimensions != expected_m:
            raise data_error(
                f"{args.data}: data has dimension {dataset.dimensions}, "
                f"task {args.task} expects dimension {expected_m}"
            )
        _client_call(runner.start)
        print(f"participant {args.id} on frames={runner.endpoint} "
              f"artifact={runner.artifact_endpoint}", flush=True)
        _client_call(lambda: runner.join_task(args.task))
        runner.run_forever()
        return EXIT_OK
    print(f"{args.role} on {runner.endpoint}", flush=True)
    runner.run_forever()
    return EXIT_OK


def _client_call(fn):
    try:
        return fn()
    except CoordinatorHTTPError as err:
        if err.status == 404:
            raise config_error(err.detail)
        if err.status == 409:
            raise protocol_error(err.detail)
        if err.status >= 500:
            raise network_error(err.detail)
        raise config_error(err.detail)
    except (urllib.error.URLError, ConnectionError, OSError) as err:
        raise network_error(f"coordinator unreachable: {err}")


def _print_task_line(record: dict) -> None:
    roster = ",".join(f"{pid}:{e['state']}" for pid, e in record["roster"].items())
    print(f"{record['task_id']}  {record['state_label']:<14} "
          f"{record['title'] or '-':<20} [{roster}]")


def cmd_task(args) -> int:
    url = require_coordinator(args)
    client = CoordinatorClient(url)
    if args.task_command == "propose":
        config = TaskConfig(
            participants=parse_participants(args.participants),
            dimensions=args.dimensions,
            perplexity=args.perplexity,
            tsne=TsneConfig(perplexity=args.perplexity, iterations=args.iterations,
                            init_seed=args.seed or 0),
            key_bits=args.key_bits,
            scale_bits=args.scale_bits,
            max_abs_value=args.max_abs_value,
            seed=args.seed,
            visualization_mode=MODE_ALIASES[args.mode],
            normalize=args.normalize,
            workers=args.workers,
        )
        record = _client_call(lambda: client.propose(
            config, title=args.title, description=args.description,
            proposer=args.proposer))
        if args.json:
            print(json.dumps(record))
        else:
            print(record["task_id"])
        return EXIT_OK
    if args.task_command == "list":
        records = _client_call(client.list_tasks)
        if args.json:
            print(json.dumps(records))
        else:
            for record in records:
                _print_task_line(record)
        return EXIT_OK
    if args.task_command == "status":
        record = _client_call(lambda: client.get_task(args.task_id))
        if args.json:
            print(json.dumps(record))
        else:
            print(record["state_label"])
        return EXIT_OK
    # result
    artifact = _client_call(lambda: client.artifact(args.task_id, args.participant))
    if args.out:
        with open(args.out, "w") as fh:
            json.dump(artifact, fh)
    if args.json:
        print(json.dumps(artifact))
    else:
        print(f"task {artifact['task_id']} mode={artifact['mode']} "
              f"points={len(artifact['points'])} owners={artifact['owner_counts']}")
    return EXIT_OK


def _digest(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def _load_oracle_inputs(args):
    datasets = []
    for path in args.data:
        owner = os.path.splitext(os.path.basename(path))[0]
        dataset, _ = load_csv_dataset(path, owner)
        datasets.append(dataset)
    dims = {d.dimensions for d in datasets}
    if len(dims) > 1:
        raise data_error(f"datasets disagree on dimension: {sorted(dims)}")
    config = TaskConfig(
        participants=[ParticipantSpec(d.owner_id, d.count) for d in datasets],
        dimensions=dims.pop(),
        perplexity=args.perplexity,
        tsne=TsneConfig(perplexity=args.perplexity, iterations=args.iterations,
                        init_seed=args.seed),
        key_bits=getattr(args, "key_bits", 512),
        scale_bits=args.scale_bits,
        max_abs_value=float(max(np.abs(d.points).max() for d in datasets) + 1),
        seed=args.seed,
    )
    return datasets, config


def cmd_oracle(args) -> int:
    datasets, config = _load_oracle_inputs(args)
    config.validate()
    result = run_plaintext_oracle(datasets, config)
    report = {
        "n": config.total_points,
        "m": config.dimensions,
        "seed": config.seed,
        "perplexity": config.perplexity,
        "distance_digest": _digest(json.dumps(result.d2_int).encode()),
        "affinity_digest": _digest(result.P.astype(">f8").tobytes()),
        "embedding_digest": _digest(result.tsne_result.Y.astype(">f8").tobytes()),
        "final_kl": float(result.tsne_result.kl_trace[-1]),
    }
    if args.json:
        print(json.dumps(report))
    else:
        for key, value in report.items():
            print(f"{key}: {value}")
    return EXIT_OK


def cmd_audit(args) -> int:
    datasets, config = _load_oracle_inputs(args)
    config.validate()
    faults = FaultInjection(
        skip_entry_noise="skip-entry-noise" in args.fault,
        identity_permutation="identity-permutation" in args.fault,
    )
    run = run_joint_task(datasets, config, audit=True, faults=faults)
    report = assert_views(run.transcripts, run.t.ledger, datasets, config)
    payload = {
        "passed": report.passed,
        "checks": [{"name": c.name, "passed": c.passed, "detail": c.detail}
                   for c in report.checks],
        "warnings": report.warnings,
    }
    if args.json:
        print(json.dumps(payload))
    else:
        for check in report.checks:
            print(f"[{'PASS' if check.passed else 'FAIL'}] {check.name}: {check.detail}")
        for warning in report.warnings:
            print(f"[WARN] {warning}")
    if not report.passed:
        raise protocol_error("view-security audit failed: "
                             + "; ".join(report.failures))
    return EXIT_OK


def cmd_bench(args) -> int:
    report = bench_mod.run_bench(n=args.n, m=args.m, key_bits=args.key_bits,
                                 scale_bits=args.scale_bits, seed=args.seed,
                                 workers=args.workers, iterations=args.iterations)
    csv_text = report.to_csv()
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(csv_text)
    else:
        print(csv_text, end="")
    print(f"# n={report.n} m={report.m} key_bits={report.key_bits} "
          f"workers={report.workers}", file=sys.stderr)
    print(f"# keygen {report.keygen_seconds:.3f}s, total {report.total_seconds:.3f}s",
          file=sys.stderr)
    reference = " ".join(f"{s}:{t}s" for s, t in
                         bench_mod.REFERENCE_CLUSTER_SECONDS.items())
    print(f"# reference cluster deployment (context only): {reference}",
          file=sys.stderr)
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=os.environ.get("MPTSNE_LOG", "WARNING"))
    parser = build_parser()
    args = parser.parse_args(argv)
    apply_env_overrides(args)
    try:
        if args.command == "run":
            return cmd_run(args)
        if args.command == "task":
            return cmd_task(args)
        if args.command == "oracle":
            return cmd_oracle(args)
        if args.command == "audit":
            return cmd_audit(args)
        if args.command == "bench":
            return cmd_bench(args)
        raise config_error(f"unknown command {args.command!r}")
    except CliError as err:
        print(f"error={err.category} {err}", file=sys.stderr)
        return err.exit_code
    except ConfigError as err:
        print(f"error=config {err}", file=sys.stderr)
        return EXIT_CONFIG
    except ProtocolError as err:
        print(f"error=protocol {err}", file=sys.stderr)
        return EXIT_PROTOCOL
    except (ConnectionError, urllib.error.URLError) as err:
        print(f"error=network {err}", file=sys.stderr)
        return EXIT_NETWORK


if __name__ == "__main__":
    sys.exit(main())
