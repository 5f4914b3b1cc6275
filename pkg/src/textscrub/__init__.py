"""textscrub: offline text anonymisation with an evaluation harness."""

from .anonymize import (
    AnonymizationMode,
    AnonymizedDocument,
    Mode,
    PlaceholderStyle,
    anonymize,
    restore,
    strip_placeholders,
)
from .model import (
    AnnotatedDocument,
    Document,
    EntityLabel,
    ReplacementMap,
    Span,
    validate_annotations,
)
from .recognition import Recognizer, RecognizerConfig, recognize, resolve_spans
from .tokenize import Token, TokenKind, count_word_tokens, tokenize

__version__ = "0.1.0"

__all__ = [
    "AnnotatedDocument",
    "AnonymizationMode",
    "AnonymizedDocument",
    "Document",
    "EntityLabel",
    "Mode",
    "PlaceholderStyle",
    "Recognizer",
    "RecognizerConfig",
    "ReplacementMap",
    "Span",
    "Token",
    "TokenKind",
    "anonymize",
    "count_word_tokens",
    "recognize",
    "resolve_spans",
    "restore",
    "strip_placeholders",
    "tokenize",
    "validate_annotations",
    "__version__",
]
