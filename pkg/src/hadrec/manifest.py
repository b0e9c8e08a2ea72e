"""Run manifests and the line-oriented `key = value` config format.

A manifest records the fully resolved configuration of a run plus provenance
(seeds, corpus checksums, timestamps, artifact checksums). Provenance lines
are namespaced with `meta.` / `artifact.` so a manifest can be fed straight
back as a --config file: the plain keys ARE the resolved configuration, which
makes byte-identical re-runs a one-liner.
"""

from __future__ import annotations

import datetime
import os

from .reports import checksum_file


class ConfigError(ValueError):
    """Malformed config file or unknown/invalid keys."""


def parse_config_text(text: str) -> dict[str, str]:
    """Parse `key = value` lines; '#' starts a comment; blanks ignored."""
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.split("\n"), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        out[key] = value
    return out


def load_config(path) -> dict[str, str]:
    with open(path, "r", encoding="utf-8") as fh:
        values = parse_config_text(fh.read())
    # provenance lines from a reused manifest are not configuration
    return {
        k: v
        for k, v in values.items()
        if not (k.startswith("meta.") or k.startswith("artifact."))
    }


def resolve(schema: dict[str, str | None], flags: dict, config: dict[str, str]) -> dict[str, str]:
    """Precedence: flags > config file > defaults. Unknown config keys error."""
    unknown = sorted(set(config) - set(schema))
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    resolved: dict[str, str] = {}
    for key, default in schema.items():
        flag = flags.get(key)
        if flag is not None:
            resolved[key] = str(flag)
        elif key in config:
            resolved[key] = config[key]
        elif default is not None:
            resolved[key] = default
    return resolved


class RunManifest:
    """Collects resolved config and provenance for one subcommand invocation."""

    def __init__(self, subcommand: str, resolved: dict[str, str]):
        self.subcommand = subcommand
        self.resolved = dict(resolved)
        self.meta: dict[str, str] = {
            "subcommand": subcommand,
            "start": _now(),
        }
        self.artifacts: dict[str, str] = {}

    def add_corpus_checksums(self, paths) -> None:
        for p in paths:
            self.meta[f"corpus.{os.path.basename(os.path.dirname(p))}/{os.path.basename(p)}"] = (
                checksum_file(p)
            )

    def add_artifact(self, path) -> None:
        self.artifacts[str(path)] = checksum_file(path)

    def write(self, path) -> None:
        self.meta["end"] = _now()
        lines = [f"{k} = {v}" for k, v in self.resolved.items()]
        lines += [f"meta.{k} = {v}" for k, v in sorted(self.meta.items())]
        lines += [f"artifact.{k} = {v}" for k, v in sorted(self.artifacts.items())]
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("\n".join(lines) + "\n")


def _now() -> str:
    return datetime.datetime.now(datetime.timezone.utc).isoformat(timespec="seconds")
