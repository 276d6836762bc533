"""Networked role runners: coordinator-driven execution of the protocol.

Each runner registers with the coordinator, listens for framed messages
from its peers, and reports step completion so the task record advances
monotonically.  Bulk ciphertext traffic never touches the coordinator.
"""

from __future__ import annotations

import json
import logging
import queue
import socketserver
import threading
import time
import urllib.error
import urllib.parse
import urllib.request
from dataclasses import dataclass, field
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import numpy as np

from ..aggregate import EmbeddingArtifact
from ..protocol import messages
from ..protocol.config import Dataset, TaskConfig
from ..protocol.roles import CollaboratorS, CollaboratorT, Participant
from ..protocol.transcript import ViewTranscript
from .framing import Frame, recv_frame, send_message
from .registry import STATE_COMPLETE, STATE_FAILED, STATE_RUNNING

log = logging.getLogger(__name__)

DEFAULT_POLL_INTERVAL = 0.1
ADVANCE_WAIT_TIMEOUT = 120.0


class CoordinatorHTTPError(RuntimeError):
    def __init__(self, status: int, detail: str):
        super().__init__(f"coordinator returned {status}: {detail}")
        self.status = status
        self.detail = detail


class CoordinatorClient:
    """Thin JSON client for the coordinator API."""

    def __init__(self, base_url: str, timeout: float = 30.0):
        self.base_url = base_url.rstrip("/")
        self.timeout = timeout

    def _request(self, method: str, path: str, body: dict | None = None):
        url = self.base_url + path
        data = json.dumps(body).encode() if body is not None else None
        req = urllib.request.Request(url, data=data, method=method,
                                     headers={"Content-Type": "application/json"})
        try:
            with urllib.request.urlopen(req, timeout=self.timeout) as resp:
                return resp.status, json.loads(resp.read())
        except urllib.error.HTTPError as err:
            payload = err.read()
            try:
                detail = json.loads(payload).get("error", payload.decode())
            except json.JSONDecodeError:
                detail = payload.decode(errors="replace")
            raise CoordinatorHTTPError(err.code, detail) from None

    def list_tasks(self) -> list[dict]:
        return self._request("GET", "/tasks")[1]

    def get_task(self, task_id: str) -> dict:
        return self._request("GET", f"/tasks/{task_id}")[1]

    def propose(self, config: TaskConfig, title: str = "", description: str = "",
                proposer: str = "") -> dict:
        return self._request("POST", "/tasks", {
            "config": config.to_dict(), "title": title,
            "description": description, "proposer": proposer,
        })[1]

    def join(self, task_id: str, participant_id: str, endpoint: dict) -> dict:
        return self._request("POST", f"/tasks/{task_id}/join",
                             {"participant_id": participant_id, "endpoint": endpoint})[1]

    def staged(self, task_id: str, participant_id: str, point_count: int,
               dim_range: list | None = None) -> dict:
        return self._request("POST", f"/tasks/{task_id}/staged",
                             {"participant_id": participant_id,
                              "point_count": point_count,
                              "dim_range": dim_range})[1]

    def advance(self, task_id: str, step: int, role: str,
                participant_id: str | None = None, evidence: dict | None = None) -> dict:
        return self._request("POST", f"/tasks/{task_id}/advance",
                             {"step": step, "role": role,
                              "participant_id": participant_id,
                              "evidence": evidence or {}})[1]

    def fail(self, task_id: str, reason: str) -> dict:
        return self._request("POST", f"/tasks/{task_id}/fail", {"reason": reason})[1]

    def register_collaborator(self, role: str, endpoint: str) -> dict:
        return self._request("POST", "/collaborators",
                             {"role": role, "endpoint": endpoint})[1]

    def artifact(self, task_id: str, participant_id: str) -> dict:
        return self._request(
            "GET", f"/tasks/{task_id}/artifact?participant={urllib.parse.quote(participant_id)}")[1]

    def density(self, task_id: str, participant_id: str) -> dict:
        return self._request(
            "GET", f"/tasks/{task_id}/density?participant={urllib.parse.quote(participant_id)}")[1]


class _FrameInbox(socketserver.ThreadingTCPServer):
    allow_reuse_address = True
    daemon_threads = True

    def __init__(self, host: str, port: int, sink: queue.Queue):
        self.sink = sink
        super().__init__((host, port), _FrameReceiver)


class _FrameReceiver(socketserver.BaseRequestHandler):
    def handle(self):
        self.request.settimeout(60.0)
        try:
            frame = recv_frame(self.request)
        except (ConnectionError, OSError) as err:
            log.warning("dropping bad frame connection: %s", err)
            return
        self.server.sink.put(frame)


def message_frame(msg) -> Frame:
    return Frame(msg.tag, bytes.fromhex(msg.task_id), msg.encode())


def _split_endpoint(endpoint: str) -> tuple[str, int]:
    host, port = endpoint.rsplit(":", 1)
    return host, int(port)


class _BaseRunner:
    role_name = "?"

    def __init__(self, coordinator_url: str, host: str = "127.0.0.1", port: int = 0,
                 poll_interval: float = DEFAULT_POLL_INTERVAL,
                 audit_dir: str | None = None):
        self.client = CoordinatorClient(coordinator_url)
        self.inbox: queue.Queue = queue.Queue()
        self._listener = _FrameInbox(host, port, self.inbox)
        self.endpoint = "%s:%d" % self._listener.server_address[:2]
        self.poll_interval = poll_interval
        self.audit_dir = audit_dir
        self._stop = threading.Event()
        self._threads: list[threading.Thread] = []
        self._failed_tasks: set[str] = set()

    def start(self) -> None:
        if self._threads:
            return  # already running
        self.register()
        for name, target in (("frames", self._listener.serve_forever),
                             ("poll", self._poll_loop)):
            thread = threading.Thread(target=target,
                                      name=f"{self.role_name}-{name}", daemon=True)
            thread.start()
            self._threads.append(thread)
        log.info("%s runner on %s", self.role_name, self.endpoint)

    def stop(self) -> None:
        self._stop.set()
        self._listener.shutdown()
        self._listener.server_close()
        for thread in self._threads:
            thread.join(timeout=5)

    def run_forever(self) -> None:
        self.start()
        try:
            while not self._stop.is_set():
                time.sleep(0.5)
        except KeyboardInterrupt:
            self.stop()

    def register(self) -> None:
        pass

    def _poll_loop(self) -> None:
        while not self._stop.is_set():
            try:
                self._drain_inbox()
                self._poll_once()
            except Exception:
                log.exception("%s poll iteration failed", self.role_name)
            self._stop.wait(self.poll_interval)

    def _drain_inbox(self) -> None:
        while True:
            try:
                frame = self.inbox.get_nowait()
            except queue.Empty:
                return
            task_id = frame.task_id.hex()
            if task_id in self._failed_tasks:
                continue
            try:
                self._handle_frame(task_id, frame)
            except Exception as err:
                log.exception("%s failed handling frame 0x%02x for %s",
                              self.role_name, frame.type_tag, task_id)
                self._fail_task(task_id, f"{self.role_name}: {err}")

    def _fail_task(self, task_id: str, reason: str) -> None:
        self._failed_tasks.add(task_id)
        try:
            self.client.fail(task_id, reason)
        except (CoordinatorHTTPError, OSError):
            log.warning("could not report failure for %s", task_id)

    def _advance_when_in_progress(self, task_id: str, step: int,
                                  participant_id: str | None = None,
                                  evidence: dict | None = None) -> None:
        """Report step completion once the record shows it in progress."""
        deadline = time.monotonic() + ADVANCE_WAIT_TIMEOUT
        while time.monotonic() < deadline and not self._stop.is_set():
            record = self.client.get_task(task_id)
            if record["state"] in (STATE_FAILED, STATE_COMPLETE):
                raise RuntimeError(f"task moved to {record['state_label']} before "
                                   f"step {step} could be reported")
            if record["step"] == step:
                self.client.advance(task_id, step, self.role_name,
                                    participant_id, evidence)
                return
            time.sleep(self.poll_interval)
        raise TimeoutError(f"step {step} never became reportable for {task_id}")

    def _handle_frame(self, task_id: str, frame: Frame) -> None:
        raise NotImplementedError

    def _poll_once(self) -> None:
        pass

    def write_audit(self, task_id: str, transcript: ViewTranscript | None) -> None:
        if self.audit_dir is None or transcript is None:
            return
        path = f"{self.audit_dir}/audit-{transcript.role_id}-{task_id}.jsonl"
        with open(path, "w") as fh:
            fh.write(transcript.to_jsonl())


@dataclass
class _STaskState:
    config: TaskConfig
    worker: CollaboratorS
    broadcast_done: bool = False


class CollaboratorSRunner(_BaseRunner):
    role_name = "S"

    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)
        self.tasks: dict[str, _STaskState] = {}

    def register(self) -> None:
        self.client.register_collaborator("S", self.endpoint)

    def _state_for(self, record: dict) -> _STaskState:
        task_id = record["task_id"]
        if task_id not in self.tasks:
            config = TaskConfig.from_dict(record["config"])
            transcript = ViewTranscript("S") if self.audit_dir else None
            self.tasks[task_id] = _STaskState(config, CollaboratorS(config, transcript))
        return self.tasks[task_id]

    def _poll_once(self) -> None:
        for record in self.client.list_tasks():
            if record["state"] != STATE_RUNNING or record["task_id"] in self._failed_tasks:
                continue
            state = self._state_for(record)
            if record["step"] == 1 and not state.broadcast_done:
                self._broadcast_key(record, state)

    def _broadcast_key(self, record: dict, state: _STaskState) -> None:
        task_id = record["task_id"]
        collaborators = record["collaborators"]
        if "T" not in collaborators:
            return  # T has not registered yet; retry next poll
        try:
            key_msg = state.worker.step1_keygen()
            frame = message_frame(key_msg)
            targets = [collaborators["T"]]
            targets += [e["endpoint"]["frames"] for e in record["roster"].values()]
            for endpoint in targets:
                send_message(*_split_endpoint(endpoint), frame)
            state.broadcast_done = True
            self.client.advance(task_id, 1, "S", evidence={"key_bits": state.config.key_bits})
        except Exception as err:
            log.exception("key broadcast failed for %s", task_id)
            self._fail_task(task_id, f"S: key distribution failed: {err}")

    def _handle_frame(self, task_id: str, frame: Frame) -> None:
        state = self.tasks.get(task_id)
        if state is None:
            log.warning("S got frame for unknown task %s", task_id)
            return
        record = self.client.get_task(task_id)
        t_endpoint = record["collaborators"]["T"]
        if frame.type_tag == messages.TAG_NOISED_DATA:
            msg = messages.NoisedData.decode(task_id, frame.payload,
                                             state.worker.keypair.public_key.key_id)
            z_msg = state.worker.step4_noised_distance(msg)
            send_message(*_split_endpoint(t_endpoint), message_frame(z_msg))
            self._advance_when_in_progress(task_id, 4,
                                           evidence={"rows": len(z_msg.matrix)})
        elif frame.type_tag == messages.TAG_BLINDED_DISTANCES:
            msg = messages.BlindedDistances.decode(task_id, frame.payload,
                                                   state.worker.keypair.public_key.key_id)
            prob_msg = state.worker.step7_probabilities(msg)
            send_message(*_split_endpoint(t_endpoint), message_frame(prob_msg))
            self._advance_when_in_progress(task_id, 7,
                                           evidence={"rows": int(prob_msg.values.shape[0])})
            self.write_audit(task_id, state.worker.transcript)
        else:
            raise ValueError(f"S cannot handle frame type 0x{frame.type_tag:02x}")


@dataclass
class _TTaskState:
    config: TaskConfig
    worker: CollaboratorT
    z_msg: messages.NoisedDistances | None = None
    prob_msg: messages.ProbMatrix | None = None
    pending: list[Frame] = field(default_factory=list)
    distances_done: bool = False
    artifact: EmbeddingArtifact | None = None


class CollaboratorTRunner(_BaseRunner):
    role_name = "T"

    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)
        self.tasks: dict[str, _TTaskState] = {}

    def register(self) -> None:
        self.client.register_collaborator("T", self.endpoint)

    def _state_for(self, task_id: str) -> _TTaskState:
        if task_id not in self.tasks:
            record = self.client.get_task(task_id)
            config = TaskConfig.from_dict(record["config"])
            transcript = ViewTranscript("T") if self.audit_dir else None
            self.tasks[task_id] = _TTaskState(config, CollaboratorT(config, transcript))
        return self.tasks[task_id]

    def _handle_frame(self, task_id: str, frame: Frame) -> None:
        state = self._state_for(task_id)
        worker = state.worker
        if frame.type_tag == messages.TAG_KEY_BROADCAST:
            worker.receive_key(messages.KeyBroadcast.decode(task_id, frame.payload))
            for queued in state.pending:
                self._handle_frame(task_id, queued)
            state.pending.clear()
            return
        if worker.public_key is None:
            # uploads can race the key broadcast; hold them until it lands
            state.pending.append(frame)
            return
        key_id = worker.public_key.key_id
        if frame.type_tag == messages.TAG_DATA_UPLOAD:
            worker.receive_upload(messages.DataUpload.decode(task_id, frame.payload, key_id))
        elif frame.type_tag == messages.TAG_NOISED_DISTANCES:
            state.z_msg = messages.NoisedDistances.decode(task_id, frame.payload, key_id)
        elif frame.type_tag == messages.TAG_PROB_MATRIX:
            state.prob_msg = messages.ProbMatrix.decode(task_id, frame.payload)
        else:
            raise ValueError(f"T cannot handle frame type 0x{frame.type_tag:02x}")

    def _poll_once(self) -> None:
        for record in self.client.list_tasks():
            task_id = record["task_id"]
            if record["state"] != STATE_RUNNING or task_id in self._failed_tasks:
                continue
            state = self.tasks.get(task_id)
            if state is None:
                continue
            try:
                self._advance_task(record, state)
            except Exception as err:
                log.exception("T step failed for %s", task_id)
                self._fail_task(task_id, f"T: {err}")

    def _advance_task(self, record: dict, state: _TTaskState) -> None:
        task_id = record["task_id"]
        step = record["step"]
        s_endpoint = record["collaborators"]["S"]
        if step == 3 and state.worker.all_uploaded():
            noised = state.worker.step3_add_noise()
            send_message(*_split_endpoint(s_endpoint), message_frame(noised))
            self.client.advance(task_id, 3, "T",
                                evidence={"rows": len(noised.matrix)})
        elif step == 5 and state.z_msg is not None and not state.distances_done:
            state.worker.step5_encrypted_distance(state.z_msg)
            state.distances_done = True
            self.client.advance(task_id, 5, "T",
                                evidence={"rows": len(state.z_msg.matrix)})
        elif step == 6 and state.distances_done:
            blinded = state.worker.step6_blind()
            send_message(*_split_endpoint(s_endpoint), message_frame(blinded))
            self.client.advance(task_id, 6, "T",
                                evidence={"rows": len(blinded.matrix)})
        elif step == 8 and state.prob_msg is not None:
            results = state.worker.step8_embed(state.prob_msg)
            for pid, msg in results.items():
                endpoint = record["roster"][pid]["endpoint"]["frames"]
                send_message(*_split_endpoint(endpoint), message_frame(msg))
            state.artifact = EmbeddingArtifact.from_json_bytes(
                results[next(iter(results))].artifact_bytes)
            self.write_audit(task_id, state.worker.transcript)
            self.client.advance(task_id, 8, "T",
                                evidence={"result_ref": f"t/{task_id}"})


class ParticipantRunner(_BaseRunner):
    """A data owner's runner: joins, uploads, then serves its artifact view."""

    def __init__(self, coordinator_url: str, participant_id: str, dataset: Dataset,
                 columns: list[str] | None = None, **kwargs):
        super().__init__(coordinator_url, **kwargs)
        self.role_name = "P"
        self.participant_id = participant_id
        self.dataset = dataset
        self.columns = columns or [f"dim{i}" for i in range(dataset.dimensions)]
        self.artifacts: dict[str, dict] = {}
        self.tasks: dict[str, Participant] = {}
        self._uploaded: set[str] = set()
        self._artifact_server = _ArtifactServer(self)
        self.artifact_endpoint = "%s:%d" % self._artifact_server.server_address[:2]

    def start(self) -> None:
        if self._threads:
            return
        super().start()
        thread = threading.Thread(target=self._artifact_server.serve_forever,
                                  name="P-artifact", daemon=True)
        thread.start()
        self._threads.append(thread)

    def stop(self) -> None:
        self._artifact_server.shutdown()
        self._artifact_server.server_close()
        super().stop()

    def join_task(self, task_id: str) -> None:
        endpoint = {"frames": self.endpoint, "artifact": self.artifact_endpoint}
        self.client.join(task_id, self.participant_id, endpoint)
        dim_range = None
        record = self.client.get_task(task_id)
        if record["config"].get("normalize"):
            dim_range = [self.dataset.points.min(axis=0).tolist(),
                         self.dataset.points.max(axis=0).tolist()]
        self.client.staged(task_id, self.participant_id, self.dataset.count, dim_range)

    def _participant_for(self, task_id: str) -> Participant:
        if task_id not in self.tasks:
            record = self.client.get_task(task_id)
            config = TaskConfig.from_dict(record["config"])
            dataset = self.dataset
            ranges = record.get("global_ranges")
            if config.normalize and ranges:
                lo, hi = np.array(ranges[0]), np.array(ranges[1])
                span = np.where(hi > lo, hi - lo, 1.0)
                dataset = Dataset((dataset.points - lo) / span, dataset.owner_id,
                                  dataset.labels)
            transcript = ViewTranscript(self.participant_id) if self.audit_dir else None
            self.tasks[task_id] = Participant(dataset, config, transcript)
        return self.tasks[task_id]

    def _handle_frame(self, task_id: str, frame: Frame) -> None:
        if frame.type_tag == messages.TAG_KEY_BROADCAST:
            if task_id in self._uploaded:
                log.info("ignoring repeated key broadcast for %s", task_id)
                return
            participant = self._participant_for(task_id)
            participant.receive_key(messages.KeyBroadcast.decode(task_id, frame.payload))
            record = self.client.get_task(task_id)
            upload = participant.upload()
            t_endpoint = record["collaborators"]["T"]
            send_message(*_split_endpoint(t_endpoint), message_frame(upload))
            self._uploaded.add(task_id)
            self._advance_when_in_progress(task_id, 2, self.participant_id,
                                           evidence={"rows": len(upload.rows)})
        elif frame.type_tag == messages.TAG_EMBEDDING_RESULT:
            participant = self.tasks.get(task_id)
            if participant is None:
                raise ValueError("result for a task this participant never keyed")
            raw = participant.receive_result(
                messages.EmbeddingResult.decode(task_id, frame.payload))
            self.artifacts[task_id] = self._enrich_artifact(task_id, raw)
            self.write_audit(task_id, participant.transcript)
        else:
            raise ValueError(f"P cannot handle frame type 0x{frame.type_tag:02x}")

    def _enrich_artifact(self, task_id: str, raw: bytes) -> dict:
        """Join own raw attribute rows onto the received artifact."""
        artifact = json.loads(raw)
        record = self.client.get_task(task_id)
        config = TaskConfig.from_dict(record["config"])
        offset = 0
        for spec in config.participants:
            if spec.participant_id == self.participant_id:
                break
            offset += spec.point_count
        attributes = {
            str(offset + i): [float(v) for v in row]
            for i, row in enumerate(self.dataset.points)
        }
        artifact["attributes"] = attributes
        artifact["attribute_columns"] = self.columns
        artifact["viewer"] = self.participant_id
        return artifact

    def wait_complete(self, task_id: str, timeout: float = 300.0) -> dict:
        deadline = time.monotonic() + timeout
        while time.monotonic() < deadline:
            record = self.client.get_task(task_id)
            if record["state"] == STATE_COMPLETE and task_id in self.artifacts:
                return record
            if record["state"] == STATE_FAILED:
                raise RuntimeError(f"task failed: {record['failure_reason']}")
            time.sleep(self.poll_interval)
        raise TimeoutError(f"task {task_id} did not complete in {timeout}s")


class _ArtifactServer(ThreadingHTTPServer):
    daemon_threads = True
    allow_reuse_address = True

    def __init__(self, runner: ParticipantRunner):
        self.runner = runner
        super().__init__(("127.0.0.1", 0), _ArtifactHandler)


class _ArtifactHandler(BaseHTTPRequestHandler):
    def log_message(self, fmt, *args):
        log.debug("participant http: " + fmt, *args)

    def _reply(self, status: int, payload):
        body = json.dumps(payload).encode()
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.send_header("Access-Control-Allow-Origin", "*")
        self.end_headers()
        self.wfile.write(body)

    def do_GET(self):
        parsed = urllib.parse.urlparse(self.path)
        query = urllib.parse.parse_qs(parsed.query)
        task_id = (query.get("task") or [None])[0]
        artifact = self.server.runner.artifacts.get(task_id)
        if artifact is None:
            self._reply(404, {"error": "no artifact stored for this task"})
            return
        if parsed.path == "/artifact":
            self._reply(200, artifact)
        elif parsed.path == "/density":
            self._reply(200, {
                "task_id": artifact["task_id"],
                "mode": artifact["mode"],
                "bounds": artifact["bounds"],
                "rasters": artifact["rasters"],
                "grid_counts": artifact["grid_counts"],
                "owner_counts": artifact["owner_counts"],
            })
        else:
            self._reply(404, {"error": f"no such resource {parsed.path!r}"})
