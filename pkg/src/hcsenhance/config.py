"""Run configuration: one YAML document drives every pipeline stage.

A config names the run (run_id), where artifacts go (output_root, which
the HCSENHANCE_OUTPUT_ROOT environment variable overrides), and the single
global seed all named random substreams derive from. Optional per-stage
sections add stage parameters. Validation is strict: unknown keys and
wrong types are field-level errors.

Every run writes under output_root/run_id, stores the config verbatim
there, and stamps each artifact directory with a provenance record
(config hash, seed, package version).
"""

import hashlib
import json
import os
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from . import __version__
from .errors import ConfigError

OUTPUT_ROOT_ENV = "HCSENHANCE_OUTPUT_ROOT"
PROVENANCE_NAME = "provenance.json"
INCOMPLETE_MARKER = ".incomplete"

_MISSING = object()

# key -> allowed types; None marks nested mappings validated separately
_SECTION_SCHEMAS = {
    "ingest": {
        "input_dir": (str,),
        "out": (str,),
        "patch_size": (int,),
        "nucleus_suffix": (str,),
        "tubule_suffix": (str,),
        "min_nucleus_area": (int,),
        "split_ratios": (list,),
    },
    "simulate": {
        "dataset": (str,),
        "out": (str,),
        "cases": (list,),
        "target_side": (int, type(None)),
    },
    "train": {
        "lambda_cyc": (int, float),
        "lr0": (int, float),
        "epochs_const": (int,),
        "epochs_decay": (int,),
        "batch_size": (int,),
        "crop": (int,),
        "target_side": (int,),
        "gan_mode": (str,),
        "lambda_identity": (int, float),
        "fake_pool_size": (int,),
        "adam_betas": (list,),
        "split": (str, type(None)),
        "generator": (dict,),
        "discriminator": (dict,),
    },
    "restore": {
        "method": (str,),
        "iterations": (int,),
        "psf_sigma": (int, float),
        "direction": (str,),
        "split": (str, type(None)),
    },
    "evaluate": {
        "split": (str, type(None)),
    },
    "quantify": {
        "radius_px": (int,),
        "per_combo_n": (int,),
        "baseline_n": (int,),
        "split": (str, type(None)),
    },
}
_GENERATOR_KEYS = {"in_channels": (int,), "out_channels": (int,),
                   "base_width": (int,), "n_res_blocks": (int,)}
_DISCRIMINATOR_KEYS = {"in_channels": (int,), "n_layers": (int,),
                       "base_width": (int,)}
_TOP_KEYS = {"run_id", "output_root", "seed"} | set(_SECTION_SCHEMAS)


@dataclass
class RunConfig:
    run_id: str
    output_root: Path
    seed: int
    sections: dict = field(default_factory=dict)
    text: str = ""

    @property
    def config_sha256(self) -> str:
        return hashlib.sha256(self.text.encode()).hexdigest()

    @property
    def run_dir(self) -> Path:
        return Path(self.output_root) / self.run_id

    def section(self, name: str) -> dict:
        return self.sections.get(name, {})

    def get(self, section: str, key: str, default=None):
        return self.section(section).get(key, default)

    def resolve(self, path_like) -> Path:
        """Interpret a possibly relative path against the run directory."""
        p = Path(path_like)
        return p if p.is_absolute() else self.run_dir / p


def _check_keys(mapping: dict, schema: dict, where: str) -> None:
    unknown = set(mapping) - set(schema)
    if unknown:
        raise ConfigError(f"{where}: unknown fields {sorted(unknown)}")
    for key, value in mapping.items():
        if not isinstance(value, schema[key]) or isinstance(value, bool):
            names = "/".join(t.__name__ for t in schema[key])
            raise ConfigError(f"{where}.{key}: expected {names}, got "
                              f"{type(value).__name__}")


def _validate_sections(doc: dict) -> dict:
    sections = {}
    for name, schema in _SECTION_SCHEMAS.items():
        if name not in doc:
            continue
        sec = doc[name]
        if not isinstance(sec, dict):
            raise ConfigError(f"{name}: expected a mapping, got "
                              f"{type(sec).__name__}")
        _check_keys(sec, schema, name)
        if name == "train":
            if "generator" in sec:
                _check_keys(sec["generator"], _GENERATOR_KEYS,
                            "train.generator")
            if "discriminator" in sec:
                _check_keys(sec["discriminator"], _DISCRIMINATOR_KEYS,
                            "train.discriminator")
        sections[name] = sec
    return sections


def load_config(path: Path, seed_override: int | None = None) -> RunConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    text = path.read_text()
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"config is not valid YAML: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("config must be a YAML mapping at top level")
    unknown = set(doc) - _TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown top-level fields {sorted(unknown)}")
    for key in ("run_id", "output_root", "seed"):
        if key not in doc:
            raise ConfigError(f"{key}: required field is missing")
    if not isinstance(doc["run_id"], str) or not doc["run_id"]:
        raise ConfigError("run_id: expected a non-empty string")
    if not isinstance(doc["output_root"], str) or not doc["output_root"]:
        raise ConfigError("output_root: expected a non-empty string")
    if not isinstance(doc["seed"], int) or isinstance(doc["seed"], bool):
        raise ConfigError("seed: expected an integer")

    output_root = os.environ.get(OUTPUT_ROOT_ENV) or doc["output_root"]
    seed = doc["seed"] if seed_override is None else seed_override
    return RunConfig(doc["run_id"], Path(output_root), seed,
                     _validate_sections(doc), text)


def train_config_from(cfg: RunConfig):
    """Build a training configuration from the config's train section."""
    from .neural.train import TrainConfig
    from .neural.networks import DiscriminatorSpec, GeneratorSpec

    sec = dict(cfg.section("train"))
    sec.pop("split", None)
    gen = GeneratorSpec(**sec.pop("generator", {}))
    disc = DiscriminatorSpec(**sec.pop("discriminator", {}))
    if "adam_betas" in sec:
        sec["adam_betas"] = tuple(sec["adam_betas"])
    tc = TrainConfig(seed=cfg.seed, generator=gen, discriminator=disc,
                     **{k: v for k, v in sec.items()})
    try:
        tc.validate()
    except ValueError as exc:
        raise ConfigError(f"train: {exc}") from exc
    return tc


def snapshot_config(cfg: RunConfig) -> Path:
    """Persist the config verbatim under the run directory.

    A run_id is write-once: re-running with the same config is fine,
    pointing an existing run_id at a different config is an error.
    """
    cfg.run_dir.mkdir(parents=True, exist_ok=True)
    snap = cfg.run_dir / "config.yaml"
    if snap.exists():
        if snap.read_text() != cfg.text:
            raise ConfigError(
                f"run_id {cfg.run_id!r} already exists with a different "
                f"config ({snap})")
    else:
        snap.write_text(cfg.text)
    return snap


def write_provenance(cfg: RunConfig, artifact_dir: Path,
                     subcommand: str) -> Path:
    """Stamp an artifact directory with how it was produced."""
    artifact_dir = Path(artifact_dir)
    artifact_dir.mkdir(parents=True, exist_ok=True)
    record = {
        "run_id": cfg.run_id,
        "subcommand": subcommand,
        "config_sha256": cfg.config_sha256,
        "seed": cfg.seed,
        "version": __version__,
    }
    path = artifact_dir / PROVENANCE_NAME
    path.write_text(json.dumps(record, indent=2, sort_keys=True) + "\n")
    return path


class incomplete_guard:
    """Context manager marking an output directory until success.

    The marker file stays behind if the command dies mid-write, so a
    partial artifact directory is recognizable.
    """

    def __init__(self, artifact_dir: Path):
        self.marker = Path(artifact_dir) / INCOMPLETE_MARKER

    def __enter__(self):
        self.marker.parent.mkdir(parents=True, exist_ok=True)
        self.marker.touch()
        return self

    def __exit__(self, exc_type, exc, tb):
        if exc_type is None:
            self.marker.unlink(missing_ok=True)
        return False
