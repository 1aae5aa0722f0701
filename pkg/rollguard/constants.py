import os

DIGEST_SIZE = 32
HASH_ALGORITHM = "sha256"
HASH_ALGORITHM_ID = 1

# Merkle domain separation (RFC 6962 style)
LEAF_PREFIX = b"\x00"
NODE_PREFIX = b"\x01"

# Authoritative root / sealing encodings
ROOT_TAG = b"ROOT"
SEAL_TAG = b"SEAL"
COUNTER_TAG = b"CTR!"

# PAD leaf files
PAD_MAGIC = b"RGPADLOG"
PAD_FORMAT_VERSION = 1
PAD_HEADER_SIZE = 16
PAD_LENGTH_PREFIX = 4

CATALOG = "catalog"
REGISTRY = "registry"
AUDIT_LOG = "log"
PAD_NAMES = (CATALOG, REGISTRY, AUDIT_LOG)

# Checkpoint files (two slots selected by counter parity)
CHECKPOINT_MAGIC = b"RGCKPT01"
CHECKPOINT_FORMAT_VERSION = 1
CHECKPOINT_SLOTS = ("checkpoint-0.bin", "checkpoint-1.bin")

# Trusted-module private files
COUNTER_FILE = "counter.bin"
KEY_FILE = "seal.key"
COUNTER_LOCK_FILE = "counter.lock"
KEY_SIZE = 32

CONTENT_DIR = "content"
PAD_DIR = "pads"
CHECKPOINT_DIR = "checkpoints"

OBJECT_ID_MAX_BYTES = 256
TAG_MAX_BYTES = 128

# Highest distance a legitimately produced checkpoint may sit above the hardware
# counter: +1 after a crash between persist and increment, +2 during recovery.
MAX_CHECKPOINT_LEAD = 2

# Protocol step boundaries passed by every state-changing operation.
HOOK_INTENT_LOGGED = "intent_logged"
HOOK_VALIDATED = "validated"
HOOK_TARGETS_RESOLVED = "targets_resolved"
HOOK_CATALOG_EXTENDED = "catalog_extended"
HOOK_REGISTRY_EXTENDED = "registry_extended"
HOOK_COMPLETION_LOGGED = "completion_logged"
HOOK_ROOTS_COMPUTED = "roots_computed"
HOOK_SEALED = "sealed"
HOOK_CHECKPOINT_STAGED = "checkpoint_staged"
HOOK_CHECKPOINT_PERSISTED = "checkpoint_persisted"
HOOK_COUNTER_ADVANCED = "counter_advanced"
HOOK_PUBLISHED = "published"

PROTOCOL_HOOKS = (
    HOOK_INTENT_LOGGED,
    HOOK_VALIDATED,
    HOOK_TARGETS_RESOLVED,
    HOOK_CATALOG_EXTENDED,
    HOOK_REGISTRY_EXTENDED,
    HOOK_COMPLETION_LOGGED,
    HOOK_ROOTS_COMPUTED,
    HOOK_SEALED,
    HOOK_CHECKPOINT_STAGED,
    HOOK_CHECKPOINT_PERSISTED,
    HOOK_COUNTER_ADVANCED,
    HOOK_PUBLISHED,
)

# Durability points below the protocol steps.
HOOK_CATALOG_LEAF_APPENDED = "catalog_leaf_appended"
HOOK_COUNTER_STAGED = "counter_staged"
HOOK_RECOVERY_SEALED = "recovery_sealed"

ALL_HOOKS = PROTOCOL_HOOKS + (
    HOOK_CATALOG_LEAF_APPENDED,
    HOOK_COUNTER_STAGED,
    HOOK_RECOVERY_SEALED,
)

CRASH_HOOK_ENV = "ROLLGUARD_CRASH_HOOK"
CRASH_MODE_ENV = "ROLLGUARD_CRASH_MODE"
CRASH_EXIT_CODE = 86

CONFIG_ENV = "ROLLGUARD_CONFIG"
LOG_FILE_ENV = "ROLLGUARD_LOG_FILE"

API_SCHEMA_VERSION = 1
IDEMPOTENCY_NAMESPACE = "6f0d8c2e-2b7a-4c55-9a43-6c1d2f3e4b5a"

SCENARIO_FILE = os.path.join("data", "scenarios.json")
