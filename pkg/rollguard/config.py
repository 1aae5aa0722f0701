import os
from typing import Dict, List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from rollguard.constants import CONFIG_ENV
from rollguard.models.checkpoint import RecoveryPolicy
from rollguard.models.leaves import Operation
from rollguard.utils import load_json

HeadTracking = Literal["leaf", "inline"]
ClockMode = Literal["wall", "counter"]


class AccessPolicy(BaseModel):
    """Actor allow-list per operation. `"*"` admits every actor."""

    model_config = ConfigDict(extra="forbid")

    allow: Dict[Operation, List[str]] = Field(
        default_factory=lambda: {op: ["*"] for op in Operation}
    )

    @field_validator("allow")
    @classmethod
    def fill_missing_operations(cls, allow):
        return {op: list(allow.get(op, ["*"])) for op in Operation}

    def permits(self, op: Operation, actor: str) -> bool:
        actors = self.allow.get(op, [])
        return "*" in actors or actor in actors


class MonitorConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    data_dir: str
    trusted_dir: Optional[str] = None
    untrusted_dir: Optional[str] = None
    head_tracking: HeadTracking = "leaf"
    policy: AccessPolicy = Field(default_factory=AccessPolicy)
    recovery_policy: RecoveryPolicy = RecoveryPolicy.LATEST_PAIRED
    retention_snapshots: Optional[int] = Field(default=None, ge=1)
    reclaim_on_prune: bool = True
    verify_content_on_rollback: bool = True
    clock: ClockMode = "wall"
    actor_tokens: Optional[Dict[str, str]] = Field(
        default=None, description="Static bearer token -> actor name for the service."
    )
    log_level: Literal["DEBUG", "INFO", "WARNING", "ERROR"] = "INFO"
    log_file: Optional[str] = None

    @model_validator(mode="after")
    def derive_directories(self):
        if self.trusted_dir is None:
            self.trusted_dir = os.path.join(self.data_dir, "trusted")
        if self.untrusted_dir is None:
            self.untrusted_dir = os.path.join(self.data_dir, "untrusted")
        if os.path.abspath(self.trusted_dir) == os.path.abspath(self.untrusted_dir):
            raise ValueError("trusted_dir and untrusted_dir must be distinct.")
        return self

    @classmethod
    def for_directory(cls, data_dir: str, **overrides) -> "MonitorConfig":
        return cls(data_dir=data_dir, **overrides)


def load_config(path: Optional[str] = None) -> MonitorConfig:
    """Read a JSON config file; falls back to `$ROLLGUARD_CONFIG`."""
    path = path or os.getenv(CONFIG_ENV)
    if not path:
        raise FileNotFoundError(
            f"No config file given and {CONFIG_ENV} is not set."
        )
    data = load_json(path)
    if "data_dir" in data and not os.path.isabs(data["data_dir"]):
        base = os.path.dirname(os.path.abspath(path))
        data["data_dir"] = os.path.join(base, data["data_dir"])
    return MonitorConfig(**data)
