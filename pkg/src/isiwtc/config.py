"""Run configuration (YAML or JSON) and provenance manifests."""
from __future__ import annotations

import json
import platform
import time
from contextlib import contextmanager
from importlib import metadata
from pathlib import Path
from typing import Literal, Optional

import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .errors import ConfigError
from .trellis import Alphabet, IsiWtcSpec, TransferPolynomial, build_joint_trellis, normalize, snr_db_to_variance

CONFIG_VERSION = 1
MANIFEST_NAME = "manifest.json"

PosFloat = Field(gt=0)


class SweepGrid(BaseModel):
    model_config = ConfigDict(extra="forbid")

    snr_bob_db: list[float] = Field(min_length=1)
    snr_eve_db: Optional[list[float]] = None  # defaults to the Bob grid, paired cell by cell
    pairing: Literal["zip", "product"] = "zip"
    hist_bins: int = Field(default=20, ge=1)

    @model_validator(mode="after")
    def _lengths(self):
        if self.pairing == "zip" and self.snr_eve_db is not None \
                and len(self.snr_eve_db) != len(self.snr_bob_db):
            raise ValueError("snr_eve_db must have the same length as snr_bob_db when pairing is 'zip'")
        return self

    def cells(self) -> list[tuple[float, float]]:
        eve = self.snr_eve_db if self.snr_eve_db is not None else self.snr_bob_db
        if self.pairing == "zip":
            return list(zip(self.snr_bob_db, eve))
        return [(b, e) for b in self.snr_bob_db for e in eve]


class WaterpourGrid(BaseModel):
    model_config = ConfigDict(extra="forbid")

    w_min: float = Field(default=0.05, gt=0)
    w_max: float = Field(default=10.0, gt=0)
    w_points: int = Field(default=40, ge=1)
    spacing: Literal["log", "linear"] = "log"
    ratio_W: float = Field(default=0.5, gt=0)
    f_points: int = Field(default=201, ge=2)

    @model_validator(mode="after")
    def _width(self):
        if not self.w_max > self.w_min and self.w_points > 1:
            raise ValueError("w_max must exceed w_min (zero-width bandwidth grid)")
        if self.w_points == 1 and self.w_max != self.w_min:
            raise ValueError("a single-point grid needs w_min == w_max")
        return self

    def bandwidths(self) -> np.ndarray:
        if self.w_points == 1:
            return np.array([self.w_min])
        if self.spacing == "log":
            return np.geomspace(self.w_min, self.w_max, self.w_points)
        return np.linspace(self.w_min, self.w_max, self.w_points)


class RunConfig(BaseModel):
    """Parameters for every command; unused sections are ignored by a command."""

    model_config = ConfigDict(extra="forbid")

    version: int = CONFIG_VERSION
    bob_taps: list[float] = Field(min_length=1)
    eve_taps: list[float] = Field(min_length=1)
    Es: float = Field(default=1.0, gt=0)
    snr_bob_db: Optional[float] = None
    snr_eve_db: Optional[float] = None
    sigma2_bob: Optional[float] = Field(default=None, gt=0)
    sigma2_eve: Optional[float] = Field(default=None, gt=0)
    nu: int = Field(default=3, ge=1, le=12)
    n: int = Field(default=100_000, ge=2)
    source: Literal["iud", "weyl", "file"] = "iud"
    init_index: int = Field(default=0, ge=0)
    source_file: Optional[str] = None
    kappa: float = Field(default=0.8, gt=0, le=1)
    kappa_prime: float = Field(default=5.0, gt=0)
    tol: float = Field(default=1e-4, gt=0)
    patience: int = Field(default=3, ge=1)
    max_iter: int = Field(default=60, ge=0)
    init_count: int = Field(default=10, ge=1)
    weyl_seed: int = Field(default=0, ge=0)
    seed: int = Field(default=0, ge=0, lt=2 ** 64)
    sweep: Optional[SweepGrid] = None
    waterpour: WaterpourGrid = WaterpourGrid()

    @model_validator(mode="after")
    def _consistency(self):
        if self.version != CONFIG_VERSION:
            raise ValueError(f"unsupported config version {self.version}; expected {CONFIG_VERSION}")
        for who in ("bob", "eve"):
            snr, s2 = getattr(self, f"snr_{who}_db"), getattr(self, f"sigma2_{who}")
            if (snr is None) == (s2 is None):
                raise ValueError(f"give exactly one of snr_{who}_db and sigma2_{who}")
        for name in ("bob_taps", "eve_taps"):
            taps = getattr(self, name)
            if not any(t != 0 for t in taps):
                raise ValueError(f"{name} must contain a nonzero tap")
        m = max(TransferPolynomial(tuple(self.bob_taps)).memory,
                TransferPolynomial(tuple(self.eve_taps)).memory)
        if self.nu < m:
            raise ValueError(f"memory too small: nu={self.nu} < max channel memory {m}")
        if self.source == "file" and not self.source_file:
            raise ValueError("source 'file' needs source_file")
        if self.source == "weyl" and self.init_index >= self.init_count:
            raise ValueError("init_index must be below init_count")
        return self

    # derived quantities -------------------------------------------------
    @property
    def gB(self) -> TransferPolynomial:
        return normalize(TransferPolynomial(tuple(self.bob_taps)))

    @property
    def gE(self) -> TransferPolynomial:
        return normalize(TransferPolynomial(tuple(self.eve_taps)))

    def variances(self, snr_bob_db=None, snr_eve_db=None) -> tuple[float, float]:
        sB = snr_db_to_variance(snr_bob_db, self.Es) if snr_bob_db is not None else (
            self.sigma2_bob if self.sigma2_bob is not None else snr_db_to_variance(self.snr_bob_db, self.Es))
        sE = snr_db_to_variance(snr_eve_db, self.Es) if snr_eve_db is not None else (
            self.sigma2_eve if self.sigma2_eve is not None else snr_db_to_variance(self.snr_eve_db, self.Es))
        return sB, sE

    def channel_spec(self) -> IsiWtcSpec:
        return IsiWtcSpec(self.gB, self.gE, *self.variances())

    def trellis(self):
        return build_joint_trellis(Alphabet.bpsk(self.Es), self.nu, self.channel_spec())


def _format_errors(exc: ValidationError, source: str) -> str:
    lines = []
    for err in exc.errors():
        loc = ".".join(str(p) for p in err["loc"]) or "<root>"
        lines.append(f"{source}: field '{loc}': {err['msg']}")
    return "\n".join(lines)


def parse_config(data, source: str = "<config>") -> RunConfig:
    if not isinstance(data, dict):
        raise ConfigError(f"{source}: top level must be a mapping")
    if "config" in data and "manifest_version" in data:
        data = data["config"]  # re-run straight from a manifest
    try:
        return RunConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(_format_errors(exc, source)) from None


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f" at line {mark.line + 1}" if mark is not None else ""
        raise ConfigError(f"{path}: malformed document{where}") from None
    return parse_config(data, str(path))


def package_version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "unknown"


class Manifest:
    """Collects everything needed to rerun a command bit for bit."""

    def __init__(self, command: str, config: RunConfig):
        self.command = command
        self.config = config
        self.derived: dict = {}
        self.seeds: dict = {}
        self.timings: dict[str, float] = {}
        self.outputs: list[str] = []

    @contextmanager
    def stage(self, name: str):
        t0 = time.perf_counter()
        try:
            yield
        finally:
            self.timings[name] = self.timings.get(name, 0.0) + time.perf_counter() - t0

    def as_dict(self) -> dict:
        return {
            "manifest_version": 1,
            "command": self.command,
            "config": self.config.model_dump(mode="json"),
            "derived": self.derived,
            "seeds": self.seeds,
            "timings_s": self.timings,
            "outputs": sorted(self.outputs),
            "version": package_version(),
            "python": platform.python_version(),
            "numpy": np.__version__,
        }

    def write(self, out_dir) -> Path:
        path = Path(out_dir) / MANIFEST_NAME
        path.write_text(json.dumps(self.as_dict(), indent=1) + "\n")
        return path
