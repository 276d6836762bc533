from .audit import AuditReport, assert_views
from .config import (MODE_DENSITY, MODE_SCATTERPLOT, ConfigError, Dataset,
                     ParticipantSpec, TaskConfig)
from .driver import ProtocolRunResult, normalize_datasets, run_joint_task
from .oracle import OracleResult, run_plaintext_oracle
from .roles import (CollaboratorS, CollaboratorT, FaultInjection, NoiseLedger,
                    Participant, ProtocolError)
from .transcript import ViewTranscript

__all__ = [
    "AuditReport", "assert_views", "ConfigError", "Dataset", "ParticipantSpec",
    "TaskConfig", "MODE_DENSITY", "MODE_SCATTERPLOT", "ProtocolRunResult",
    "normalize_datasets", "run_joint_task", "OracleResult", "run_plaintext_oracle",
    "CollaboratorS", "CollaboratorT", "FaultInjection", "NoiseLedger",
    "Participant", "ProtocolError", "ViewTranscript",
]
