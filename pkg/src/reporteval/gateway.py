"""Chat-completions client for binary judgments: templates, cache, retries.

Every question is rendered from a versioned few-shot template, fingerprinted
(model, template id + version, rendered prompt, temperature), and served from a
content-addressed disk cache when possible. A fully warm cache therefore
answers without a network (or even an API key). Unparseable model output
triggers exactly one stricter reprompt before conservatively defaulting to NO
with a ``defaulted`` flag.
"""

from __future__ import annotations

import hashlib
import json
import os
import random
import re
import threading
import time
from dataclasses import dataclass
from datetime import datetime, timezone
from importlib import resources
from pathlib import Path
from typing import Mapping

import httpx

from .judging import JudgmentKind

#: Verdict strings used at the gateway level (the log only ever sees YES/NO).
YES = "YES"
NO = "NO"
UNPARSEABLE = "UNPARSEABLE"

_PLACEHOLDER_NAMES = ("sentence", "document", "question", "answer",
                      "problem_statement", "user_story")
_PLACEHOLDER_RE = re.compile(r"\{(" + "|".join(_PLACEHOLDER_NAMES) + r")\}")

_STRICT_SUFFIX = "Respond with exactly one word: YES or NO."


class TemplateError(ValueError):
    pass


class GatewayError(Exception):
    """Endpoint or configuration failure; carries the fingerprint for resume."""

    def __init__(self, message: str, prompt_fingerprint: str | None = None):
        super().__init__(message)
        self.prompt_fingerprint = prompt_fingerprint


@dataclass(frozen=True)
class FewShotExample:
    variables: Mapping[str, str]
    verdict: str  # YES or NO


@dataclass(frozen=True)
class PromptTemplate:
    template_id: str
    version: str
    kind: JudgmentKind
    body: str
    few_shot: tuple[FewShotExample, ...]
    system: str | None = None

    def render(self, variables: Mapping[str, str]) -> str:
        """Few-shot blocks, each closed with its verdict, then the open query."""
        blocks = [
            _fill(self.body, example.variables) + f"\nAnswer: {example.verdict}"
            for example in self.few_shot
        ]
        blocks.append(_fill(self.body, variables) + "\nAnswer:")
        return "\n\n".join(blocks)


def _fill(body: str, variables: Mapping[str, str]) -> str:
    def substitute(match: re.Match) -> str:
        name = match.group(1)
        if name not in variables:
            raise TemplateError(f"unbound placeholder: {name}")
        return str(variables[name])

    return _PLACEHOLDER_RE.sub(substitute, body)


def load_templates(directory: str | Path | None = None) -> dict[JudgmentKind, PromptTemplate]:
    """Load one template per judgment kind from JSON files.

    Defaults to the templates shipped with the package; a directory override
    replaces the whole set.
    """
    templates: dict[JudgmentKind, PromptTemplate] = {}
    if directory is None:
        root = resources.files("reporteval").joinpath("prompts")
        entries = [entry for entry in root.iterdir() if entry.name.endswith(".json")]
    else:
        entries = sorted(Path(directory).glob("*.json"))
    for entry in entries:
        obj = json.loads(entry.read_text(encoding="utf-8"))
        try:
            kind = JudgmentKind(obj["kind"])
            template = PromptTemplate(
                template_id=obj["template_id"],
                version=str(obj["version"]),
                kind=kind,
                body=obj["body"],
                few_shot=tuple(
                    FewShotExample(variables=ex["variables"], verdict=ex["verdict"])
                    for ex in obj.get("few_shot", [])
                ),
                system=obj.get("system"),
            )
        except (KeyError, ValueError) as exc:
            raise TemplateError(f"invalid template file {entry.name}: {exc}") from exc
        if kind in templates:
            raise TemplateError(f"duplicate template for kind {kind.value}")
        templates[kind] = template
    return templates


def parse_verdict(raw_response: str) -> str:
    """First YES/NO token on the final non-empty line; UNPARSEABLE otherwise."""
    lines = [line for line in raw_response.splitlines() if line.strip()]
    if not lines:
        return UNPARSEABLE
    for token in re.findall(r"[A-Za-z]+", lines[-1]):
        lowered = token.lower()
        if lowered == "yes":
            return YES
        if lowered == "no":
            return NO
    return UNPARSEABLE


def fingerprint(model: str, template_id: str, version: str, rendered_prompt: str,
                temperature: float) -> str:
    payload = json.dumps(
        {
            "model": model,
            "template_id": template_id,
            "version": version,
            "prompt": rendered_prompt,
            "temperature": temperature,
        },
        sort_keys=True,
        ensure_ascii=False,
    )
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class CacheEntry:
    fingerprint: str
    raw_response: str
    verdict: str  # YES | NO | UNPARSEABLE
    timestamp: str

    def to_json_obj(self) -> dict:
        return {
            "fingerprint": self.fingerprint,
            "raw_response": self.raw_response,
            "verdict": self.verdict,
            "timestamp": self.timestamp,
        }


class ResponseCache:
    """One file per response under the cache directory, named by fingerprint.

    Writes are atomic (temp file + rename) and idempotent for identical
    fingerprints, so concurrent writers of the same entry are safe.
    """

    def __init__(self, directory: str | Path):
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)

    def _path(self, fp: str) -> Path:
        return self.directory / fp

    def get(self, fp: str) -> CacheEntry | None:
        path = self._path(fp)
        try:
            obj = json.loads(path.read_text(encoding="utf-8"))
            return CacheEntry(
                fingerprint=obj["fingerprint"],
                raw_response=obj["raw_response"],
                verdict=obj["verdict"],
                timestamp=obj["timestamp"],
            )
        except FileNotFoundError:
            return None
        except (json.JSONDecodeError, KeyError, TypeError):
            # A corrupt entry is a miss; the next put overwrites it.
            return None

    def put(self, entry: CacheEntry) -> None:
        path = self._path(entry.fingerprint)
        tmp = path.with_name(f"{entry.fingerprint}.{os.getpid()}.{threading.get_ident()}.tmp")
        tmp.write_text(json.dumps(entry.to_json_obj(), ensure_ascii=False), encoding="utf-8")
        os.replace(tmp, path)


@dataclass
class GatewayConfig:
    cache_dir: str | Path
    endpoint: str | None = None
    model: str = ""
    api_key_env: str | None = None
    temperature: float = 0.0
    max_tokens: int = 64
    attempts: int = 5
    backoff_base: float = 0.5
    timeout: float = 30.0


@dataclass(frozen=True)
class GatewayAnswer:
    verdict: str  # YES or NO (post-default)
    raw_response: str
    fingerprint: str
    defaulted: bool


_RETRYABLE_STATUS = {429}


class ChatCompletionsGateway:
    """Thread-safe binary-question client over a chat-completions endpoint.

    The HTTP client (and hence the API key) is materialized only on the first
    cache miss: a fully warm cache needs neither endpoint nor key.
    """

    def __init__(self, config: GatewayConfig,
                 templates: Mapping[JudgmentKind, PromptTemplate] | None = None):
        self.config = config
        self.templates = dict(templates) if templates is not None else load_templates()
        self.cache = ResponseCache(config.cache_dir)
        self._client: httpx.Client | None = None
        self._client_lock = threading.Lock()

    def close(self) -> None:
        with self._client_lock:
            if self._client is not None:
                self._client.close()
                self._client = None

    # -- public API ---------------------------------------------------------

    def ask_binary(self, kind: JudgmentKind, variables: Mapping[str, str]) -> GatewayAnswer:
        template = self.templates.get(kind)
        if template is None:
            raise GatewayError(f"no prompt template for kind {kind.value}")
        prompt = template.render(variables)
        entry = self._lookup_or_fetch(template, prompt)
        if entry.verdict != UNPARSEABLE:
            return GatewayAnswer(entry.verdict, entry.raw_response, entry.fingerprint, False)

        strict_prompt = prompt + "\n\n" + _STRICT_SUFFIX
        strict_entry = self._lookup_or_fetch(template, strict_prompt)
        if strict_entry.verdict != UNPARSEABLE:
            return GatewayAnswer(
                strict_entry.verdict, strict_entry.raw_response, strict_entry.fingerprint, False
            )
        return GatewayAnswer(NO, strict_entry.raw_response, strict_entry.fingerprint, True)

    # -- internals ------------------------------------------------------------

    def _lookup_or_fetch(self, template: PromptTemplate, prompt: str) -> CacheEntry:
        fp = fingerprint(
            self.config.model, template.template_id, template.version, prompt,
            self.config.temperature,
        )
        cached = self.cache.get(fp)
        if cached is not None:
            return cached
        raw = self._post(template, prompt, fp)
        entry = CacheEntry(
            fingerprint=fp,
            raw_response=raw,
            verdict=parse_verdict(raw),
            timestamp=datetime.now(timezone.utc).isoformat(),
        )
        self.cache.put(entry)
        return entry

    def _ensure_client(self) -> httpx.Client:
        with self._client_lock:
            if self._client is None:
                if not self.config.endpoint:
                    raise GatewayError("no endpoint configured and cache is cold")
                headers = {}
                if self.config.api_key_env:
                    key = os.environ.get(self.config.api_key_env)
                    if not key:
                        raise GatewayError(
                            f"environment variable {self.config.api_key_env} is not set"
                        )
                    headers["Authorization"] = f"Bearer {key}"
                self._client = httpx.Client(
                    base_url=self.config.endpoint,
                    headers=headers,
                    timeout=self.config.timeout,
                )
            return self._client

    def _post(self, template: PromptTemplate, prompt: str, fp: str) -> str:
        client = self._ensure_client()
        messages = []
        if template.system:
            messages.append({"role": "system", "content": template.system})
        messages.append({"role": "user", "content": prompt})
        body = {
            "model": self.config.model,
            "messages": messages,
            "temperature": self.config.temperature,
            "max_tokens": self.config.max_tokens,
        }
        last_error = "exhausted retries"
        for attempt in range(self.config.attempts):
            if attempt:
                delay = self.config.backoff_base * (2 ** (attempt - 1))
                time.sleep(delay * (0.5 + random.random()))
            try:
                response = client.post("/chat/completions", json=body)
            except httpx.HTTPError as exc:
                last_error = f"transport error: {exc.__class__.__name__}"
                continue
            if response.status_code in _RETRYABLE_STATUS or response.status_code >= 500:
                last_error = f"status {response.status_code}"
                continue
            if response.status_code != 200:
                raise GatewayError(
                    f"endpoint returned status {response.status_code}", prompt_fingerprint=fp
                )
            try:
                return response.json()["choices"][0]["message"]["content"]
            except (json.JSONDecodeError, KeyError, IndexError, TypeError) as exc:
                raise GatewayError(
                    f"malformed endpoint response: {exc.__class__.__name__}",
                    prompt_fingerprint=fp,
                ) from exc
        raise GatewayError(
            f"request failed after {self.config.attempts} attempts ({last_error})",
            prompt_fingerprint=fp,
        )
