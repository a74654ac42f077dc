"""Full potential-outcome model: assembly, training, and prediction.

A ConvLSTM digests the current treatment/covariate pair, the latent
factor autoencoder digests their history, and the attention U-Net maps
the concatenated features to the outcome at lag l. Training minimizes
the weighted sum of reconstruction and prediction error under a
region-emphasis weight map; prediction runs the trained model twice per
timestep, once with observed and once with intervened treatment.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field, replace

import numpy as np
import torch
import torch.nn.functional as F

from .attn_unet import AttnUNet
from .convlstm import ConvLSTM
from .core import (
    ConfigError,
    DivergenceError,
    MissingFileError,
    PersistenceError,
    SchemaError,
    TruncationError,
    ValidationError,
    check_region,
)
from .datagen import apply_intervention
from .lfm import LatentDecoder, LatentEncoder, reconstruction_loss

CHECKPOINT_VERSION = 1

VARIANTS = ("full", "dagger", "na", "sa", "ag")

_VARIANT_PARTS = {
    "full": (True, True, True),
    "dagger": (False, False, False),
    "na": (True, False, False),
    "sa": (True, True, False),
    "ag": (True, False, True),
}


@dataclass(frozen=True)
class ModelConfig:
    variant: str = "full"
    history_len: int = 4
    lag: int = 1
    lambda1: float = 0.25
    lambda2: float = 0.75
    treated_weight: float = 2.0
    base_channels: int = 16
    c_lat: int = 32
    convlstm_hidden: int = 16
    dropout: float = 0.2
    learning_rate: float = 1e-3
    epochs: int = 60
    decay_start_epoch: int = 10
    batch_size: int = 64
    early_stop_patience: int = 10
    min_delta: float = 1e-4
    seed: int = 0

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ConfigError(f"unknown variant {self.variant!r}; choose from {VARIANTS}")
        if not (0.0 <= self.lambda1 <= 1.0 and 0.0 <= self.lambda2 <= 1.0):
            raise ConfigError("lambda1 and lambda2 must lie in [0, 1]")
        if abs(self.lambda1 + self.lambda2 - 1.0) > 1e-9:
            raise ConfigError("lambda1 + lambda2 must equal 1")
        if self.treated_weight <= 0:
            raise ConfigError("treated_weight must be positive")
        if self.history_len < 1 or self.lag < 1:
            raise ConfigError("history_len and lag must be >= 1")
        if self.epochs < 1 or self.batch_size < 1:
            raise ConfigError("epochs and batch_size must be >= 1")

    @property
    def parts(self):
        """(use_lfm, use_sa, use_ag) for this variant."""
        return _VARIANT_PARTS[self.variant]

    def to_dict(self):
        return {k: getattr(self, k) for k in self.__dataclass_fields__}

    @staticmethod
    def from_dict(d):
        return ModelConfig(**d)


def build_weight_map(region, treated_weight):
    """Region-emphasis map normalized to mean 1 over the grid."""
    region = check_region(region)
    if treated_weight <= 0:
        raise ValidationError("treated_weight must be positive")
    raw = np.where(region, float(treated_weight), 1.0)
    return raw / raw.mean()


def total_loss(y_pred, y_true, window, reconstructed, weight, lambda1, lambda2):
    """Weighted per-pixel combination of reconstruction and prediction error.

    The reconstruction term is a scalar broadcast over pixels; the
    prediction term is per-pixel squared error. Their weighted sum is
    multiplied by the emphasis map and averaged. Without a
    reconstruction (variants with no latent path) only the prediction
    term remains.
    """
    if y_pred.shape != y_true.shape:
        raise ValidationError(
            f"prediction shape {tuple(y_pred.shape)} != target {tuple(y_true.shape)}"
        )
    l_unet = (y_pred - y_true) ** 2
    if reconstructed is not None:
        l_lfm = reconstruction_loss(window, reconstructed)
        per_pixel = lambda1 * l_lfm + lambda2 * l_unet
    else:
        per_pixel = lambda2 * l_unet
    return torch.mean(per_pixel * weight)


class STCINet(torch.nn.Module):
    """ConvLSTM current path + optional latent history path + U-Net head."""

    def __init__(self, config):
        super().__init__()
        self.config = config
        use_lfm, use_sa, use_ag = config.parts
        self.current_path = ConvLSTM(2, config.convlstm_hidden)
        if use_lfm:
            self.encoder = LatentEncoder(
                hidden_channels=config.convlstm_hidden,
                c_lat=config.c_lat,
                dropout=config.dropout,
            )
            self.decoder = LatentDecoder(
                history_len=config.history_len, c_lat=config.c_lat
            )
        else:
            self.encoder = None
            self.decoder = None
        in_channels = config.convlstm_hidden + (config.c_lat if use_lfm else 0)
        self.unet = AttnUNet(
            in_channels,
            base_channels=config.base_channels,
            use_sa=use_sa,
            use_ag=use_ag,
        )

    def forward(self, current, history):
        """current: [B, 2, N, M]; history: [B, h, 2, N, M].

        Returns (predicted outcome [B, N, M], reconstruction or None).
        """
        if current.dim() != 4 or current.shape[1] != 2:
            raise ConfigError(
                f"expected current [B, 2, N, M], got {tuple(current.shape)}"
            )
        if history.dim() != 5 or history.shape[1:3] != (self.config.history_len, 2):
            raise ConfigError(
                f"expected history [B, {self.config.history_len}, 2, N, M], "
                f"got {tuple(history.shape)}"
            )
        feat = self.current_path(current.unsqueeze(1))
        recon = None
        if self.encoder is not None:
            code = self.encoder(history)
            phi = F.interpolate(code, size=current.shape[-2:], mode="nearest")
            feat = torch.cat([feat, phi], dim=1)
            recon = self.decoder(code)
        return self.unet(feat), recon


def make_variant(config):
    """Build the model for config.variant (seeded, reproducible init)."""
    torch.manual_seed(config.seed)
    return STCINet(config)


@dataclass
class TrainedModel:
    model: STCINet
    config: ModelConfig
    training_log: list = field(default_factory=list)
    norm: dict = field(default_factory=dict)
    grid_shape: tuple = None

    def parameter_count(self):
        return sum(p.numel() for p in self.model.parameters() if p.requires_grad)


class _Standardizer:
    """Per-variable affine scaling fitted on the factual fields."""

    def __init__(self, stats):
        self.stats = stats

    @staticmethod
    def fit(dataset):
        stats = {}
        for name, arr in (("x", dataset.x), ("z", dataset.z), ("y", dataset.y)):
            stats[name] = {
                "mean": float(arr.mean()),
                "std": max(float(arr.std()), 1e-8),
            }
        return _Standardizer(stats)

    def scale(self, name, arr):
        s = self.stats[name]
        return (arr - s["mean"]) / s["std"]

    def unscale_y(self, arr):
        s = self.stats["y"]
        return arr * s["std"] + s["mean"]


def _build_samples(dataset, norm, history_len, lag):
    """Standardized tensors for every valid timestep t in [h, T - lag)."""
    x = norm.scale("x", dataset.x.astype(np.float32))
    z = norm.scale("z", dataset.z.astype(np.float32))
    y = norm.scale("y", dataset.y.astype(np.float32))
    n_steps = dataset.grid.n_steps
    ts = np.arange(history_len, n_steps - lag)
    if ts.size == 0:
        raise ValidationError(
            f"no training samples: T={n_steps} too short for h={history_len}, lag={lag}"
        )
    xz = np.stack([x, z], axis=1)  # [T, 2, N, M]
    current = xz[ts]
    history = np.stack([xz[t - history_len : t] for t in ts])  # [n, h, 2, N, M]
    targets = y[ts + lag]
    return (
        torch.from_numpy(current.astype(np.float32)),
        torch.from_numpy(history.astype(np.float32)),
        torch.from_numpy(targets.astype(np.float32)),
        ts,
    )


def learning_rate_at(epoch, config):
    """lr for a 1-based epoch index: flat, then exponential decay."""
    excess = max(0, epoch - config.decay_start_epoch)
    return config.learning_rate * math.exp(-0.1 * excess)


def train(dataset, config):
    """Fit the configured variant on the factual trajectory.

    Samples are (current pair, history window) -> outcome at t + lag,
    optimized with Adam under the custom weighted loss. The learning
    rate decays exponentially after decay_start_epoch; training stops
    early when the epoch loss stops improving. Deterministic for a
    fixed config.seed.
    """
    if dataset.intervention is None:
        raise ValidationError("dataset lacks an intervention region")
    model = make_variant(config)
    norm = _Standardizer.fit(dataset)
    current, history, targets, _ = _build_samples(
        dataset, norm, config.history_len, config.lag
    )
    weight = torch.from_numpy(
        build_weight_map(dataset.intervention.region, config.treated_weight).astype(
            np.float32
        )
    )
    n_samples = current.shape[0]
    optimizer = torch.optim.Adam(model.parameters(), lr=config.learning_rate)
    order_rng = np.random.default_rng(config.seed)

    log = []
    best = math.inf
    stale = 0
    model.train()
    for epoch in range(1, config.epochs + 1):
        lr = learning_rate_at(epoch, config)
        for group in optimizer.param_groups:
            group["lr"] = lr
        order = order_rng.permutation(n_samples)
        total = 0.0
        for start in range(0, n_samples, config.batch_size):
            idx = torch.from_numpy(order[start : start + config.batch_size])
            optimizer.zero_grad()
            y_pred, recon = model(current[idx], history[idx])
            loss = total_loss(
                y_pred,
                targets[idx],
                history[idx],
                recon,
                weight,
                config.lambda1,
                config.lambda2,
            )
            if not torch.isfinite(loss):
                raise DivergenceError(
                    f"training loss diverged at epoch {epoch}", step=epoch
                )
            loss.backward()
            optimizer.step()
            total += loss.item() * idx.shape[0]
        epoch_loss = total / n_samples
        log.append({"epoch": epoch, "lr": lr, "loss": epoch_loss})
        if best - epoch_loss > config.min_delta:
            best = epoch_loss
            stale = 0
        else:
            stale += 1
            if stale >= config.early_stop_patience:
                break
    model.eval()
    return TrainedModel(
        model=model,
        config=config,
        training_log=log,
        norm=norm.stats,
        grid_shape=(dataset.grid.n_rows, dataset.grid.n_cols),
    )


def predict_counterfactual(trained, dataset, spec=None, batch_size=128):
    """Factual and counterfactual outcome predictions for every valid t.

    Both passes share the observed history; only the current treatment
    differs (rewritten by the intervention at each t). Returns two raw-
    unit arrays shaped [T - h - lag, N, M], aligned to targets t + lag.
    """
    if spec is None:
        spec = dataset.intervention
    if spec is None:
        raise ValidationError("no intervention to predict against")
    config = trained.config
    grid_shape = (dataset.grid.n_rows, dataset.grid.n_cols)
    if trained.grid_shape is not None and tuple(trained.grid_shape) != grid_shape:
        raise ValidationError(
            f"model trained on grid {tuple(trained.grid_shape)}, dataset is {grid_shape}"
        )
    if (dataset.grid.n_rows % 4) or (dataset.grid.n_cols % 4):
        raise ValidationError("grid must be divisible by 4 for the two-level model")
    if spec.region.shape != grid_shape:
        raise ValidationError("intervention region does not match the dataset grid")

    norm = _Standardizer(trained.norm)
    current, history, _, ts = _build_samples(
        dataset, norm, config.history_len, config.lag
    )
    x_cf_raw = np.stack(
        [apply_intervention(dataset.x[t], spec, t) for t in ts]
    ).astype(np.float32)
    x_cf = norm.scale("x", x_cf_raw).astype(np.float32)
    current_cf = current.clone()
    current_cf[:, 0] = torch.from_numpy(x_cf)

    model = trained.model
    model.eval()
    outs_f, outs_cf = [], []
    with torch.no_grad():
        for start in range(0, current.shape[0], batch_size):
            sl = slice(start, start + batch_size)
            pred_f, _ = model(current[sl], history[sl])
            pred_cf, _ = model(current_cf[sl], history[sl])
            outs_f.append(pred_f.numpy())
            outs_cf.append(pred_cf.numpy())
    y_hat_f = norm.unscale_y(np.concatenate(outs_f).astype(np.float64))
    y_hat_cf = norm.unscale_y(np.concatenate(outs_cf).astype(np.float64))
    return y_hat_f, y_hat_cf


def _collection_of(name):
    if name.startswith(("encoder.", "decoder.")):
        return "lfm"
    if name.startswith("current_path."):
        return "convlstm"
    return "unet"


def save_checkpoint(trained, path):
    """Persist config, log, scaling stats, and per-collection f32 blobs."""
    try:
        os.makedirs(path, exist_ok=True)
        state = trained.model.state_dict()
        collections = {"lfm": [], "convlstm": [], "unet": []}
        blobs = {k: [] for k in collections}
        for name, tensor in state.items():
            coll = _collection_of(name)
            arr = tensor.detach().numpy()
            collections[coll].append(
                {"name": name, "shape": list(arr.shape), "dtype": str(arr.dtype)}
            )
            blobs[coll].append(arr.astype("<f4").ravel())
        manifest = {
            "checkpoint_version": CHECKPOINT_VERSION,
            "config": trained.config.to_dict(),
            "training_log": trained.training_log,
            "norm": trained.norm,
            "grid_shape": list(trained.grid_shape) if trained.grid_shape else None,
            "collections": collections,
        }
        with open(os.path.join(path, "model.json"), "w") as fh:
            json.dump(manifest, fh, indent=2)
        for coll, parts in blobs.items():
            flat = (
                np.concatenate(parts) if parts else np.empty(0, dtype="<f4")
            )
            flat.astype("<f4").tofile(os.path.join(path, f"params_{coll}.f32"))
    except OSError as exc:
        raise PersistenceError(f"cannot write checkpoint to {path}: {exc}") from exc


def load_checkpoint(path):
    """Rebuild a TrainedModel from a checkpoint directory, bit-exact."""
    manifest_path = os.path.join(path, "model.json")
    if not os.path.isfile(manifest_path):
        raise MissingFileError(f"no model.json in {path}")
    try:
        with open(manifest_path) as fh:
            manifest = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise SchemaError(f"unreadable checkpoint manifest: {exc}") from exc
    if manifest.get("checkpoint_version") != CHECKPOINT_VERSION:
        raise SchemaError(
            f"unsupported checkpoint_version {manifest.get('checkpoint_version')!r}"
        )
    config = ModelConfig.from_dict(manifest["config"])
    model = STCINet(config)
    state = {}
    for coll, entries in manifest["collections"].items():
        blob_path = os.path.join(path, f"params_{coll}.f32")
        if not os.path.isfile(blob_path):
            raise MissingFileError(f"parameter file missing: {blob_path}")
        flat = np.fromfile(blob_path, dtype="<f4")
        expected = sum(int(np.prod(e["shape"])) for e in entries)
        if flat.size != expected:
            raise TruncationError(
                f"{blob_path} holds {flat.size} values, expected {expected}"
            )
        offset = 0
        for entry in entries:
            size = int(np.prod(entry["shape"]))
            arr = flat[offset : offset + size].reshape(entry["shape"])
            state[entry["name"]] = torch.from_numpy(
                arr.astype(entry["dtype"], copy=True)
            )
            offset += size
    model.load_state_dict(state)
    model.eval()
    return TrainedModel(
        model=model,
        config=config,
        training_log=manifest["training_log"],
        norm=manifest["norm"],
        grid_shape=tuple(manifest["grid_shape"]) if manifest.get("grid_shape") else None,
    )
