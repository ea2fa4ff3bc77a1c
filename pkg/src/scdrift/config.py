"""Flat ``key = value`` run configuration.

Example::

    # synthetic.cfg
    stream = data/apigraph.csv, data/androzoo.csv
    scores = msp_u, external:hcc_loss
    rho = 100, 200, 400
    method = cutoff
    method_id = deepdrebin
    monthly_budget = 200
    initial_budget = 4800
    out = results
    orientation:hcc_loss = higher

Relative paths are resolved against the config file's directory. List values
are comma separated. CLI flags override file values.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Mapping

from .errors import ConfigError
from .simulation import DEFAULT_COVERAGE_GRID, METHOD_ALIASES

KNOWN_KEYS = {
    "stream", "format", "embeddings", "hyperplane", "cade_train", "scores", "rho",
    "method", "coverage_grid", "seed", "out", "formats", "method_id",
    "monthly_budget", "initial_budget", "window", "tau_variant",
}
FORMATS = {"csv", "json", "svg"}


@dataclass(frozen=True)
class RunConfig:
    streams: tuple[Path, ...]
    scores: tuple[str, ...] = ("msp_u",)
    rhos: tuple[int, ...] = (100,)
    sc_method: str = "cutoff"
    coverage_grid: tuple[float, ...] = DEFAULT_COVERAGE_GRID
    stream_format: str | None = None
    embeddings: Path | None = None
    hyperplane: Path | None = None
    cade_train: Path | None = None
    seed: int = 0
    out_dir: Path = Path("out")
    formats: tuple[str, ...] = ("csv", "json", "svg")
    method_id: str = "method"
    monthly_budget: int | None = None
    initial_budget: int | None = None
    window: int | None = None
    tau_variant: str = "a"
    orientations: Mapping[str, bool] = field(default_factory=dict)

    def check(self) -> RunConfig:
        if not self.streams:
            raise ConfigError("no input stream given")
        for p in (*self.streams, self.embeddings, self.hyperplane, self.cade_train):
            if p is not None and not Path(p).exists():
                raise ConfigError(f"path does not exist: {p}")
        if not self.rhos or any(r < 1 for r in self.rhos):
            raise ConfigError("rho values must be positive")
        if self.sc_method not in METHOD_ALIASES:
            raise ConfigError(f"unknown method {self.sc_method!r}")
        if self.tau_variant not in ("a", "b"):
            raise ConfigError("tau_variant must be 'a' or 'b'")
        bad = set(self.formats) - FORMATS
        if bad:
            raise ConfigError(f"unknown report formats {sorted(bad)}")
        return self


def _split(value: str) -> list[str]:
    return [v.strip() for v in value.split(",") if v.strip()]


def _int(key: str, value: str) -> int:
    try:
        return int(value)
    except ValueError:
        raise ConfigError(f"{key}: expected an integer, got {value!r}") from None


def parse_config(text: str) -> dict[str, str]:
    entries: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip()
        if not sep or not key:
            raise ConfigError(f"config line {lineno}: expected 'key = value'")
        if key not in KNOWN_KEYS and not key.startswith("orientation:"):
            raise ConfigError(f"config line {lineno}: unknown key {key!r}")
        entries[key] = value.strip()
    return entries


def build_config(entries: Mapping[str, str], base_dir: Path = Path(".")) -> RunConfig:
    def path(v: str) -> Path:
        p = Path(v)
        return p if p.is_absolute() else base_dir / p

    kw: dict[str, object] = {"streams": tuple(path(v) for v in _split(entries.get("stream", "")))}
    if "scores" in entries:
        kw["scores"] = tuple(_split(entries["scores"]))
    if "rho" in entries:
        kw["rhos"] = tuple(_int("rho", v) for v in _split(entries["rho"]))
    if "method" in entries:
        kw["sc_method"] = entries["method"]
    if "coverage_grid" in entries:
        try:
            kw["coverage_grid"] = tuple(float(v) for v in _split(entries["coverage_grid"]))
        except ValueError:
            raise ConfigError("coverage_grid: expected numbers") from None
    for key in ("embeddings", "hyperplane", "cade_train"):
        if entries.get(key):
            kw[key] = path(entries[key])
    if entries.get("format"):
        kw["stream_format"] = entries["format"]
    if "seed" in entries:
        kw["seed"] = _int("seed", entries["seed"])
    if "out" in entries:
        kw["out_dir"] = path(entries["out"])
    if "formats" in entries:
        kw["formats"] = tuple(_split(entries["formats"]))
    if "tau_variant" in entries:
        kw["tau_variant"] = entries["tau_variant"]
    if "method_id" in entries:
        kw["method_id"] = entries["method_id"]
    for key in ("monthly_budget", "initial_budget", "window"):
        if entries.get(key):
            kw[key] = _int(key, entries[key])
    orient = {}
    for key, value in entries.items():
        if key.startswith("orientation:"):
            if value not in ("higher", "lower"):
                raise ConfigError(f"{key}: expected 'higher' or 'lower'")
            orient[key.split(":", 1)[1]] = value == "higher"
    kw["orientations"] = orient
    return RunConfig(**kw)  # type: ignore[arg-type]


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return build_config(parse_config(text), path.parent)


def with_overrides(cfg: RunConfig, **changes: object) -> RunConfig:
    return replace(cfg, **{k: v for k, v in changes.items() if v is not None})
