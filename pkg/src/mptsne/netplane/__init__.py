from .coordinator import CoordinatorService
from .framing import Frame, FrameError, decode_frame, encode_frame, recv_frame, send_frame
from .registry import RegistryError, TaskRecord, TaskRegistry
from .runners import (CollaboratorSRunner, CollaboratorTRunner, CoordinatorClient,
                      CoordinatorHTTPError, ParticipantRunner)

__all__ = [
    "CoordinatorService", "Frame", "FrameError", "decode_frame", "encode_frame",
    "recv_frame", "send_frame", "RegistryError", "TaskRecord", "TaskRegistry",
    "CollaboratorSRunner", "CollaboratorTRunner", "CoordinatorClient",
    "CoordinatorHTTPError", "ParticipantRunner",
]
