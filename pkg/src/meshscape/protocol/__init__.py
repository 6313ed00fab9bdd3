"""Directory wire protocol: entries, filters, framing and the blocking client."""

from .client import client_ping, client_register, client_search, next_msg_id
from .errors import OversizeMessage, ProtocolViolation, RemoteError, Timeout, Unreachable
from .filters import (
    And,
    Equality,
    Filter,
    FilterSyntaxError,
    GreaterOrEqual,
    LessOrEqual,
    Not,
    Or,
    Presence,
    Substring,
    match_entry,
    parse_filter,
    render_filter,
)
from .types import Dn, Entry, Scope, valid_attr_name
from .wire import (
    CODE_NO_SUCH_BASE,
    CODE_OK,
    CODE_PROTOCOL,
    MAX_BODY,
    ErrorMessage,
    FrameDecoder,
    Message,
    Ping,
    Pong,
    Register,
    RegisterAck,
    SearchDone,
    SearchEntry,
    SearchRequest,
    decode_frames,
    encode_frame,
    message_from_body,
    message_to_body,
)

__all__ = [
    "And", "CODE_NO_SUCH_BASE", "CODE_OK", "CODE_PROTOCOL", "Dn", "Entry",
    "Equality", "ErrorMessage", "Filter", "FilterSyntaxError", "FrameDecoder",
    "GreaterOrEqual", "LessOrEqual", "MAX_BODY", "Message", "Not", "Or",
    "OversizeMessage", "Ping", "Pong", "Presence", "ProtocolViolation",
    "Register", "RegisterAck", "RemoteError", "Scope", "SearchDone",
    "SearchEntry", "SearchRequest", "Substring", "Timeout", "Unreachable",
    "client_ping", "client_register", "client_search", "decode_frames",
    "encode_frame", "match_entry", "message_from_body", "message_to_body",
    "next_msg_id", "parse_filter", "render_filter", "valid_attr_name",
]
