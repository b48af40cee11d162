"""Byzantine fault-tolerant append-only logs with fork detection.

Per-author logs are state-based CRDTs over a signed hash graph: they grow
while the author behaves, and once two signed siblings prove a fork they
shrink to the earliest known branch point and stay there. Frontiers bundle
one log per author; the sim subpackage replays the whole protocol between
simulated replicas deterministically.
"""
from . import frontier, lattice, log, sim
from .crypto import (
    AUTHOR_LEN,
    DIGEST_LEN,
    SIGNATURE_LEN,
    KeyPair,
    canonical_encode,
    message_digest,
    sign,
    vector_line,
    verify_fields,
)
from .frontier import Frontier, FrontierValidityReport, UpdateResult
from .lattice import LatticeReport, run_checks
from .log import Log, LogValidityReport
from .messages import (
    MISSING_DEPENDENCY,
    InsertResult,
    InsertStatus,
    Message,
    MessageStore,
    StoreFormatError,
    StoreValidationError,
    make_message,
    msg_id,
    verify,
)

__version__ = "0.1.0"
