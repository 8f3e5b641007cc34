"""Run configuration (INI key-value files) and the replay manifest."""

from __future__ import annotations

import configparser
import dataclasses
import hashlib
import json
import subprocess
import typing
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError
from .floquet import ModelParams
from .statevector import MAX_REDUCED_SITES

# (figure, L) -> (M, K, R)
PRESETS = {
    ("fig1", 5): (1000, 5000, 20),
    ("fig1", 7): (1000, 5000, 20),
    ("fig2", 5): (1000, 10000, 30),
    ("fig2", 7): (1000, 10000, 30),
    ("fig2", 9): (1000, 10000, 20),
    ("fig2", 11): (1000, 10000, 20),
    ("fig3", 9): (1000, 10000, 20),
    ("fig4", 7): (1000, 5000, 20),
}


@dataclass(frozen=True)
class RunConfig:
    L: int = 7
    tau: int = 7
    taus: tuple[int, ...] = ()  # scan list for dynamics / design certification
    R: int = 30
    M: int = 1000
    K: int | None = None  # shots per basis; None is exact-probability mode
    B: int = 20
    e01: float = 0.0
    e10: float = 0.0
    calibration_shots: int | None = None  # None uses the true confusion matrices
    readout_correction: bool = True
    depolarizing: float = 0.0  # global channel applied once to each prepared state
    mitigation: bool = False
    n_placements: int = 1
    J: float = 1.0
    T: float = 3.0
    seed: int = 0
    out_dir: str = "runs/default"

    def __post_init__(self):
        if not 1 <= self.L <= MAX_REDUCED_SITES:
            raise ConfigError(f"L must be in 1..{MAX_REDUCED_SITES}, got {self.L}")
        if self.tau < 0 or any(t < 0 for t in self.taus):
            raise ConfigError("cycle counts must be non-negative")
        if self.R < 1 or self.M < 1:
            raise ConfigError(f"need R >= 1 and M >= 1, got R={self.R}, M={self.M}")
        if self.K is not None and self.K < 1:
            raise ConfigError(f"K must be >= 1 or exact, got {self.K}")
        if self.M >= 2 and not 2 <= self.B <= self.M:
            raise ConfigError(f"need 2 <= B <= M, got B={self.B}, M={self.M}")
        for name in ("e01", "e10"):
            if not 0 <= getattr(self, name) < 0.5:
                raise ConfigError(f"{name} must lie in [0, 0.5)")
        if not 0 <= self.depolarizing < 1:
            raise ConfigError(f"depolarizing strength must lie in [0, 1), got {self.depolarizing}")
        if self.calibration_shots is not None and self.calibration_shots < 1:
            raise ConfigError("calibration_shots must be >= 1")
        if self.n_placements < 1:
            raise ConfigError("n_placements must be >= 1")
        if self.mitigation and self.R < 2:
            raise ConfigError("mitigation splits the ensemble and needs R >= 2")

    @classmethod
    def preset(cls, figure: str, L: int, **overrides) -> "RunConfig":
        try:
            M, K, R = PRESETS[(figure, L)]
        except KeyError:
            raise ConfigError(f"no preset for {figure} at L={L}; known: {sorted(PRESETS)}") from None
        return cls(**{"L": L, "M": M, "K": K, "R": R, **overrides})

    def replace(self, **changes) -> "RunConfig":
        return dataclasses.replace(self, **changes)

    @property
    def model(self) -> ModelParams:
        return ModelParams(self.L, self.J, self.T, self.seed)

    @property
    def has_readout_error(self) -> bool:
        return self.e01 > 0 or self.e10 > 0

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["taus"] = list(self.taus)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        d = dict(d)
        if "taus" in d:
            d["taus"] = tuple(d["taus"])
        return cls(**d)

    # INI files: one [run] section, "K = exact" for exact mode, taus comma separated

    def save(self, path) -> None:
        cp = _parser()
        cp["run"] = {k: _format(v) for k, v in self.to_dict().items()}
        with open(path, "w") as fh:
            cp.write(fh)

    @classmethod
    def load(cls, path) -> "RunConfig":
        cp = _parser()
        if not cp.read(path):
            raise ConfigError(f"cannot read config file {path}")
        if "run" not in cp:
            raise ConfigError(f"{path}: missing [run] section")
        hints = typing.get_type_hints(cls)
        values = {}
        for key, raw in cp["run"].items():
            if key not in hints:
                raise ConfigError(f"{path}: unknown key {key!r}")
            values[key] = _parse(raw, hints[key], key)
        return cls(**values)


def _parser() -> configparser.ConfigParser:
    cp = configparser.ConfigParser()
    cp.optionxform = str  # field names are case sensitive (L, K, J, T)
    return cp


def _format(v) -> str:
    if v is None:
        return "exact"
    if isinstance(v, (list, tuple)):
        return ", ".join(str(x) for x in v)
    return str(v)


def _parse(raw: str, hint, key: str):
    raw = raw.strip()
    try:
        if hint in (int | None,):
            return None if raw.lower() in ("exact", "none", "") else int(raw)
        if hint is bool:
            if raw.lower() in ("1", "true", "yes", "on"):
                return True
            if raw.lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if hint == tuple[int, ...]:
            return tuple(int(x) for x in raw.replace(",", " ").split())
        if hint is int:
            return int(raw)
        if hint is float:
            return float(raw)
        return raw
    except ValueError:
        raise ConfigError(f"bad value for {key}: {raw!r}") from None


def build_id() -> str:
    """Git commit of the source tree if available, else the package version."""
    try:
        out = subprocess.run(
            ["git", "rev-parse", "--short", "HEAD"],
            cwd=Path(__file__).parent,
            capture_output=True,
            text=True,
            timeout=5,
        )
        if out.returncode == 0:
            return out.stdout.strip()
    except (OSError, subprocess.SubprocessError):
        pass
    from . import __version__

    return f"v{__version__}"


def sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


@dataclass
class RunManifest:
    config: dict
    build: str = ""
    states: list = field(default_factory=list)  # {state_id, disorder, basis_seeds, file}
    confusion: list | None = None  # calibrated per-qubit matrices
    eps_fit: dict | None = None
    checksums: dict = field(default_factory=dict)

    @property
    def run_config(self) -> RunConfig:
        return RunConfig.from_dict(self.config)

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(dataclasses.asdict(self), indent=1))

    @classmethod
    def load(cls, path) -> "RunManifest":
        try:
            d = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read manifest {path}: {exc}") from None
        return cls(**d)

    def verify(self, root) -> list[str]:
        """Files whose checksum no longer matches."""
        root = Path(root)
        return [name for name, digest in self.checksums.items() if sha256(root / name) != digest]
