"""Line-delimited JSON protocol with external sidecar processes.

The engine spawns the configured command and writes one request per line to
the child's standard input; the child answers one response per line on its
standard output and flushes after every response. Unknown fields in responses
are ignored. A malformed or missing line invalidates the whole batch.
"""

from __future__ import annotations

import json
import queue
import subprocess
import threading
import time
from typing import Iterable, Sequence

from .model import ANNOTATION_LABELS, Document, EntityLabel, Span, SOURCE_TAGGER


class SidecarUnavailable(RuntimeError):
    """The sidecar failed to start, respond in time, or speak the protocol."""


class LineProtocolClient:
    """Owns one sidecar subprocess and its request/response stream.

    A background thread drains the child's stdout into a queue so reads can
    honour the batch deadline without blocking forever.
    """

    def __init__(self, command: Sequence[str] | str, timeout: float = 30.0):
        self.command = command
        self.timeout = timeout
        self._lines: queue.Queue[str | None] = queue.Queue()
        try:
            self._proc = subprocess.Popen(
                command,
                shell=isinstance(command, str),
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                stderr=subprocess.DEVNULL,
                text=True,
                encoding="utf-8",
            )
        except OSError as exc:
            raise SidecarUnavailable(f"failed to start sidecar {command!r}: {exc}") from exc
        self._reader = threading.Thread(target=self._drain, daemon=True)
        self._reader.start()

    def _drain(self) -> None:
        assert self._proc.stdout is not None
        for line in self._proc.stdout:
            self._lines.put(line)
        self._lines.put(None)  # EOF marker

    def request_many(self, records: Iterable[dict]) -> list[dict]:
        """Send records as JSON lines and collect one response per record."""
        records = list(records)
        if self._proc.poll() is not None:
            raise SidecarUnavailable(f"sidecar exited with status {self._proc.returncode}")
        try:
            assert self._proc.stdin is not None
            for record in records:
                self._proc.stdin.write(json.dumps(record, ensure_ascii=False) + "\n")
            self._proc.stdin.flush()
        except (BrokenPipeError, OSError) as exc:
            raise SidecarUnavailable(f"sidecar pipe closed: {exc}") from exc
        deadline = time.monotonic() + self.timeout
        responses = []
        for _ in records:
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                raise SidecarUnavailable(f"sidecar timed out after {self.timeout}s")
            try:
                line = self._lines.get(timeout=remaining)
            except queue.Empty:
                raise SidecarUnavailable(f"sidecar timed out after {self.timeout}s") from None
            if line is None:
                raise SidecarUnavailable("sidecar closed its output stream")
            try:
                response = json.loads(line)
            except json.JSONDecodeError as exc:
                raise SidecarUnavailable(f"malformed sidecar response line: {exc}") from exc
            if not isinstance(response, dict):
                raise SidecarUnavailable("sidecar response is not a JSON object")
            responses.append(response)
        return responses

    def close(self) -> None:
        proc = self._proc
        if proc.poll() is None:
            try:
                if proc.stdin is not None:
                    proc.stdin.close()
                proc.wait(timeout=2.0)
            except (OSError, subprocess.TimeoutExpired):
                proc.kill()
                proc.wait()

    def __enter__(self) -> "LineProtocolClient":
        return self

    def __exit__(self, *exc_info) -> None:
        self.close()


def _parse_entities(response: dict, text: str) -> list[Span]:
    entities = response.get("entities")
    if not isinstance(entities, list):
        raise SidecarUnavailable("tagger response missing entities list")
    spans = []
    for ent in entities:
        try:
            start, end = int(ent["start"]), int(ent["end"])
            label = EntityLabel(ent["label"])
            score = float(ent.get("score", 1.0))
        except (KeyError, TypeError, ValueError) as exc:
            raise SidecarUnavailable(f"malformed tagger entity {ent!r}: {exc}") from exc
        if label not in ANNOTATION_LABELS:
            raise SidecarUnavailable(f"tagger emitted out-of-scheme label {label.value}")
        if label is EntityLabel.NONE:
            continue
        if not (0 <= start < end <= len(text)):
            raise SidecarUnavailable(f"tagger span [{start},{end}) outside text")
        if not (0.0 <= score <= 1.0):
            raise SidecarUnavailable(f"tagger score {score} outside [0,1]")
        spans.append(Span(start, end, label, score, SOURCE_TAGGER))
    return spans


class TaggerClient:
    """Tagger sidecar: {"id","text"} in, {"id","entities":[...]} out."""

    def __init__(self, command: Sequence[str] | str, timeout: float = 30.0):
        self._client = LineProtocolClient(command, timeout=timeout)

    def annotate(self, docs: Sequence[Document]) -> list[list[Span]]:
        requests = [{"id": doc.id, "text": doc.text} for doc in docs]
        responses = self._client.request_many(requests)
        out = []
        for doc, response in zip(docs, responses):
            if response.get("id") != doc.id:
                raise SidecarUnavailable(
                    f"tagger response id {response.get('id')!r} does not match request {doc.id!r}"
                )
            out.append(_parse_entities(response, doc.text))
        return out

    def close(self) -> None:
        self._client.close()


def check_tagger_protocol(
    command: Sequence[str] | str,
    texts: Sequence[str],
    timeout: float = 30.0,
) -> list[str]:
    """Exercise a tagger command against the wire protocol; return problems.

    An empty list means the sidecar is conformant for the given texts: one
    response per request, matching ids in order, entity offsets valid for the
    request text, labels within the annotation scheme.
    """
    problems: list[str] = []
    docs = [Document(id=f"probe-{i}", text=text) for i, text in enumerate(texts)]
    try:
        with LineProtocolClient(command, timeout=timeout) as client:
            responses = client.request_many({"id": d.id, "text": d.text} for d in docs)
    except SidecarUnavailable as exc:
        return [str(exc)]
    for doc, response in zip(docs, responses):
        if response.get("id") != doc.id:
            problems.append(f"{doc.id}: response id {response.get('id')!r} out of order or wrong")
            continue
        extra = set(response) - {"id", "entities", "error"}
        if extra:
            problems.append(f"{doc.id}: unexpected response fields {sorted(extra)}")
        try:
            _parse_entities(response, doc.text)
        except SidecarUnavailable as exc:
            problems.append(f"{doc.id}: {exc}")
    return problems
