import re
from typing import Optional

from rollguard.constants import OBJECT_ID_MAX_BYTES, TAG_MAX_BYTES

HEX_DIGEST = re.compile(r"^[0-9a-f]{64}$")
HEX_TXID = re.compile(r"^[0-9a-f]{32}$")


def validate_object_id(field_name: str, value: Optional[str]) -> str:
    if not value or not value.strip():
        raise ValueError(f"'{field_name}' cannot be None, empty, or blank.")
    if len(value.encode("utf-8")) > OBJECT_ID_MAX_BYTES:
        raise ValueError(
            f"'{field_name}' must be at most {OBJECT_ID_MAX_BYTES} bytes of UTF-8."
        )
    return value


def validate_tag(field_name: str, value: Optional[str]) -> str:
    if not value or not value.strip():
        raise ValueError(f"'{field_name}' cannot be None, empty, or blank.")
    if len(value.encode("utf-8")) > TAG_MAX_BYTES:
        raise ValueError(f"'{field_name}' must be at most {TAG_MAX_BYTES} bytes of UTF-8.")
    return value


def validate_digest(field_name: str, value: Optional[str]) -> str:
    if not isinstance(value, str) or not HEX_DIGEST.match(value):
        raise ValueError(
            f"Invalid digest. '{field_name}' must be 64 lowercase hex characters."
        )
    return value


def validate_txid(field_name: str, value: Optional[str]) -> str:
    if not isinstance(value, str) or not HEX_TXID.match(value):
        raise ValueError(
            f"Invalid txid. '{field_name}' must be 32 lowercase hex characters."
        )
    return value
