"""Run configuration: JSON schema, validation, presets, and assembly into
the dataclasses the pipeline consumes.
"""
from __future__ import annotations

import json
from pathlib import Path

import jsonschema

from .data import DatasetManifest, SbmSpec, generate_sbm, load_graph
from .errors import ConfigError
from .graph import DistortionConfig
from .losses import ABLATIONS, LossWeights
from .model import ModelConfig
from .optim import TrainConfig

SBM_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["n_clusters", "nodes_per_cluster", "p_in", "p_out",
                 "feature_dim", "center_separation", "feature_noise_std"],
    "properties": {
        "n_clusters": {"type": "integer", "minimum": 1},
        "nodes_per_cluster": {"type": "integer", "minimum": 1},
        "p_in": {"type": "number", "minimum": 0, "maximum": 1},
        "p_out": {"type": "number", "minimum": 0, "maximum": 1},
        "feature_dim": {"type": "integer", "minimum": 1},
        "center_separation": {"type": "number"},
        "feature_noise_std": {"type": "number", "minimum": 0},
        "seed": {"type": "integer"},
    },
}

RUN_CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["dataset"],
    "properties": {
        "dataset": {
            "type": "object",
            "additionalProperties": False,
            "minProperties": 1,
            "maxProperties": 1,
            "properties": {
                "manifest": {"type": "string"},
                "sbm": SBM_SCHEMA,
            },
        },
        "out_dir": {"type": "string"},
        "runs": {"type": "integer", "minimum": 1},
        "seed": {"type": "integer"},
        "serial": {"type": "boolean"},
        "train": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "lr": {"type": "number", "exclusiveMinimum": 0},
                "pretrain_epochs": {"type": "integer", "minimum": 0},
                "init_epochs": {"type": "integer", "minimum": 0},
                "train_epochs": {"type": "integer", "minimum": 0},
                "ablation": {"enum": sorted(ABLATIONS)},
                "gamma": {"type": "number", "minimum": 0},
                "lambda": {"type": "number", "minimum": 0},
                "noise_mean": {"type": "number"},
                "noise_std": {"type": "number", "minimum": 0},
                "mask_fraction": {"type": "number", "minimum": 0,
                                  "exclusiveMaximum": 1},
                "teleport_alpha": {"type": "number", "exclusiveMinimum": 0,
                                   "exclusiveMaximum": 1},
                "freeze_noise": {"type": "boolean"},
                "hidden_dim": {"type": "integer", "minimum": 1},
                "latent_dim": {"type": "integer", "minimum": 1},
                "readout_k": {"type": ["integer", "null"], "minimum": 1},
                "normalize_embedding": {"type": "boolean"},
            },
        },
    },
}

# learning-rate presets per benchmark; the diffusion teleport probability
# drops to 0.1 for pubmed
PRESETS = {
    "amap": {"lr": 1e-3},
    "dblp": {"lr": 1e-4},
    "acm": {"lr": 5e-5},
    "cite": {"lr": 1e-5},
    "pubmed": {"lr": 1e-5, "teleport_alpha": 0.1},
    "corafull": {"lr": 1e-5},
}

DEFAULT_RUNS = 10


def validate_run_config(doc) -> None:
    try:
        jsonschema.validate(doc, RUN_CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        raise ConfigError(f"config invalid at {exc.json_path}: {exc.message}") from None


def validate_sbm_spec(doc) -> None:
    try:
        jsonschema.validate(doc, SBM_SCHEMA)
    except jsonschema.ValidationError as exc:
        raise ConfigError(f"sbm spec invalid at {exc.json_path}: {exc.message}") from None


def load_json(path, what: str = "config"):
    path = Path(path)
    try:
        text = path.read_text()
    except FileNotFoundError:
        raise ConfigError(f"{what} file {path} does not exist") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{what} file {path} is not valid JSON: {exc}") from None


def load_run_config(path, preset: str | None = None) -> dict:
    """Load, validate, and apply a preset to a run configuration document."""
    doc = load_json(path, "config")
    validate_run_config(doc)
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError(f"unknown preset {preset!r}, expected one of {sorted(PRESETS)}")
        train = dict(doc.get("train", {}))
        train.update(PRESETS[preset])
        doc = {**doc, "train": train}
        validate_run_config(doc)
    return doc


def resolve_dataset(doc, config_dir: Path):
    """Load the manifest dataset or generate the inline block model."""
    dataset = doc["dataset"]
    if "manifest" in dataset:
        manifest_path = Path(dataset["manifest"])
        if not manifest_path.is_absolute():
            manifest_path = config_dir / manifest_path
        return load_graph(DatasetManifest.from_json(manifest_path))
    spec = SbmSpec(**dataset["sbm"])
    return generate_sbm(spec)


def build_train_config(doc, input_dim: int, n_clusters: int,
                       seed: int, ablation: str | None = None) -> TrainConfig:
    """Assemble a TrainConfig from the validated document's train section."""
    section = dict(doc.get("train", {}))
    if ablation is not None:
        section["ablation"] = ablation
    model = ModelConfig(
        input_dim=input_dim,
        n_clusters=n_clusters,
        hidden_dim=section.get("hidden_dim", 256),
        latent_dim=section.get("latent_dim", 20),
        readout_k=section.get("readout_k"),
        normalize_embedding=section.get("normalize_embedding", False),
    )
    weights = LossWeights(gamma=section.get("gamma", 1000.0),
                          lam=section.get("lambda", 10.0))
    distortion = DistortionConfig(
        noise_mean=section.get("noise_mean", 1.0),
        noise_std=section.get("noise_std", 0.1),
        mask_fraction=section.get("mask_fraction", 0.10),
        teleport_alpha=section.get("teleport_alpha", 0.2),
        freeze_noise=section.get("freeze_noise", False),
    )
    return TrainConfig(
        model=model,
        lr=section.get("lr", 1e-3),
        pretrain_epochs=section.get("pretrain_epochs", 30),
        init_epochs=section.get("init_epochs", 100),
        train_epochs=section.get("train_epochs", 400),
        weights=weights,
        distortion=distortion,
        seed=seed,
        ablation=section.get("ablation", "P-D"),
    )
