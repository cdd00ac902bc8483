import logging
import math
from typing import List, Optional, Sequence, Tuple

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F
from sklearn.model_selection import train_test_split

from ..dsp.spatial_cues import fold_bins, mirror_bins
from ..errors import DegenerateDatasetError, DivergenceError, ModelFormatError, ShapeMismatchError
from ..integrations.checkpoint import read_checkpoint, write_checkpoint
from ..integrations.report_writer import write_training_log
from ..models.audio_models import InterauralSpectrogram, TfMask
from ..models.learning_models import (
    EpochRecord,
    MaskClass,
    MaskImage,
    NetConfig,
    TrainHyper,
    TrainingMetadata,
)

logger = logging.getLogger(__name__)

ILD_CLIP_DB = 30.0


def conv_block(in_channels: int, out_channels: int) -> nn.Sequential:
    return nn.Sequential(
        nn.Conv2d(in_channels, out_channels, 3, padding=1),
        nn.ReLU(),
        nn.Conv2d(out_channels, out_channels, 3, padding=1),
        nn.ReLU(),
    )


class LevelUNet(nn.Module):
    """
    Encoder-depth-1 segmentation net over ILD images.

    Input N x 1 x H x W, output N x 2 x H x W class probabilities
    (channel order follows MaskClass).
    """

    def __init__(self, config: NetConfig):
        super().__init__()
        narrow, wide = config.channels
        self.config = config
        self.metadata = TrainingMetadata()
        self.encoder = conv_block(config.in_channels, narrow)
        self.pool = nn.MaxPool2d(2)
        self.bottleneck = conv_block(narrow, wide)
        self.dropout = nn.Dropout(config.dropout)
        self.up = nn.ConvTranspose2d(wide, narrow, kernel_size=2, stride=2)
        self.decoder = conv_block(2 * narrow, narrow)
        self.classifier = nn.Conv2d(narrow, config.num_classes, kernel_size=1)

    def logits(self, x: torch.Tensor) -> torch.Tensor:
        skip = self.encoder(x)
        deep = self.dropout(self.bottleneck(self.pool(skip)))
        up = F.relu(self.up(deep))
        return self.classifier(self.decoder(torch.cat([up, skip], dim=1)))

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return torch.softmax(self.logits(x), dim=1)


def build_net(config: NetConfig, seed: int = 0) -> LevelUNet:
    """Fresh network with He-initialized kernels and zero biases, reproducible from seed"""
    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(seed)
        model = LevelUNet(config)
        for module in model.modules():
            if isinstance(module, (nn.Conv2d, nn.ConvTranspose2d)):
                nn.init.kaiming_normal_(module.weight, nonlinearity="relu")
                nn.init.zeros_(module.bias)
    model.metadata = TrainingMetadata(seed=seed)
    return model


def normalize_ild(ild_db: np.ndarray) -> np.ndarray:
    """Clip to +-30 dB and map affinely onto [0, 1]"""
    clipped = np.clip(ild_db, -ILD_CLIP_DB, ILD_CLIP_DB)
    return ((clipped + ILD_CLIP_DB) / (2.0 * ILD_CLIP_DB)).astype(np.float32)


def ild_image(cues: InterauralSpectrogram) -> np.ndarray:
    """Network input for an interaural spectrogram: mirrored to fft_len rows, normalized"""
    return normalize_ild(mirror_bins(cues.ild_db))


def make_ground_truth(mask_class: MaskClass, dims: Tuple[int, int]) -> MaskImage:
    return MaskImage(labels=np.full(dims, int(mask_class), dtype=np.int64), mask_class=MaskClass(mask_class))


def make_optimizer(model: nn.Module, hyper: TrainHyper) -> torch.optim.SGD:
    return torch.optim.SGD(
        model.parameters(),
        lr=hyper.learning_rate,
        momentum=hyper.momentum,
        weight_decay=hyper.l2,
    )


def _split(num_samples: int, labels: np.ndarray, hyper: TrainHyper, seed: int):
    indices = np.arange(num_samples)
    num_val = int(round(num_samples * (1.0 - hyper.train_fraction)))
    if num_val < len(MaskClass) or num_samples - num_val < len(MaskClass):
        return indices, np.array([], dtype=int)
    train_idx, val_idx = train_test_split(
        indices, test_size=num_val, stratify=labels, random_state=seed
    )
    return np.sort(train_idx), np.sort(val_idx)


def _pixel_accuracy(model: LevelUNet, images: torch.Tensor, targets: torch.Tensor, batch_size: int) -> float:
    model.eval()
    correct = 0
    with torch.no_grad():
        for start in range(0, len(images), batch_size):
            predicted = model.logits(images[start:start + batch_size]).argmax(dim=1)
            correct += int((predicted == targets[start:start + batch_size]).sum())
    return correct / targets.numel()


def train(model: LevelUNet, images: Sequence[np.ndarray], masks: Sequence[MaskImage],
          hyper: TrainHyper, seed: int = 0) -> LevelUNet:
    """
    Per-pixel cross-entropy with L2 weight decay, minimized by momentum SGD.

    Runs hyper.epochs epochs, stopping early once pixel accuracy stops
    improving by plateau_threshold for plateau_patience epochs.
    """
    if len(images) != len(masks) or not images:
        raise DegenerateDatasetError(f"Got {len(images)} images for {len(masks)} ground truths")
    shapes = {np.shape(image) for image in images} | {mask.labels.shape for mask in masks}
    if len(shapes) != 1:
        raise ShapeMismatchError(f"Training images and masks must share one size, got {sorted(shapes)}")
    labels = np.array([int(mask.mask_class) for mask in masks])
    if len(np.unique(labels)) < len(MaskClass):
        raise DegenerateDatasetError("Training set must contain both DP and REV images")
    height, width = next(iter(shapes))
    if (height, width) != (model.config.height, model.config.width):
        logger.warning(f"Training on {height}x{width} images; net configured for "
                       f"{model.config.height}x{model.config.width}")

    train_idx, val_idx = _split(len(images), labels, hyper, seed)
    data = torch.from_numpy(np.stack(images).astype(np.float32)).unsqueeze(1)
    targets = torch.from_numpy(np.stack([mask.labels for mask in masks]).astype(np.int64))

    optimizer = make_optimizer(model, hyper)
    generator = torch.Generator().manual_seed(seed)
    history: List[EpochRecord] = []
    best_accuracy = -math.inf
    stale_epochs = 0
    logger.info(f"Training level U-Net on {len(train_idx)} images ({len(val_idx)} held out), "
                f"up to {hyper.epochs} epochs")

    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(seed)
        for epoch in range(1, hyper.epochs + 1):
            model.train()
            order = torch.from_numpy(train_idx)[torch.randperm(len(train_idx), generator=generator)]
            total_loss, total_correct, total_pixels = 0.0, 0, 0
            for batch_no, start in enumerate(range(0, len(order), hyper.batch_size)):
                batch = order[start:start + hyper.batch_size]
                optimizer.zero_grad()
                logits = model.logits(data[batch])
                loss = F.cross_entropy(logits, targets[batch])
                if not torch.isfinite(loss):
                    logger.error(f"Non-finite loss at epoch {epoch}, batch {batch_no}")
                    raise DivergenceError(
                        f"Loss became {loss.item()} at epoch {epoch}, batch {batch_no}; "
                        f"lower the learning rate or check the inputs"
                    )
                loss.backward()
                optimizer.step()
                total_loss += loss.item() * len(batch)
                total_correct += int((logits.argmax(dim=1) == targets[batch]).sum())
                total_pixels += targets[batch].numel()

            accuracy = total_correct / total_pixels
            val_accuracy = (
                _pixel_accuracy(model, data[torch.from_numpy(val_idx)], targets[torch.from_numpy(val_idx)],
                                hyper.batch_size)
                if len(val_idx) else None
            )
            history.append(EpochRecord(epoch=epoch, loss=total_loss / len(order),
                                       accuracy=accuracy, validation_accuracy=val_accuracy))
            logger.info(f"Epoch {epoch}: loss {total_loss / len(order):.4f}, accuracy {accuracy:.4f}")

            if hyper.plateau_patience is not None:
                if accuracy > best_accuracy + hyper.plateau_threshold:
                    best_accuracy, stale_epochs = accuracy, 0
                else:
                    stale_epochs += 1
                    if stale_epochs >= hyper.plateau_patience:
                        logger.info(f"Accuracy levelled off after epoch {epoch}")
                        break

    model.eval()
    model.metadata = TrainingMetadata(seed=seed, epochs_run=len(history),
                                      final_accuracy=history[-1].accuracy, history=history)
    logger.info(f"Training completed - accuracy: {history[-1].accuracy:.4f}")
    return model


def predict_ild_mask(model: LevelUNet, image: np.ndarray) -> TfMask:
    """DP-class probability per pixel of a normalized ILD image of any even-compatible width"""
    image = np.asarray(image, dtype=np.float32)
    if image.ndim != 2 or image.shape[0] != model.config.height:
        raise ShapeMismatchError(
            f"ILD image of shape {image.shape} incompatible with net height {model.config.height}"
        )
    width = image.shape[1]
    if width < 1:
        raise ShapeMismatchError("ILD image has no frames")
    padded_width = max(2, width + (width % 2))
    if padded_width != width:
        image = np.pad(image, ((0, 0), (0, padded_width - width)), mode="edge")

    model.eval()
    with torch.no_grad():
        probs = model(torch.from_numpy(image)[None, None])[0, int(MaskClass.DP)]
    return TfMask(np.clip(probs.numpy()[:, :width].astype(np.float64), 0.0, 1.0))


def save_model(model: LevelUNet, path: str) -> None:
    header = {"config": model.config.model_dump(mode="json"),
              "metadata": model.metadata.model_dump(mode="json")}
    tensors = {name: tensor.detach().cpu().numpy() for name, tensor in model.state_dict().items()}
    write_checkpoint(path, header, tensors)


def load_model(path: str) -> LevelUNet:
    header, tensors = read_checkpoint(path)
    try:
        model = LevelUNet(NetConfig.model_validate(header["config"]))
        model.metadata = TrainingMetadata.model_validate(header.get("metadata", {}))
        model.load_state_dict({name: torch.from_numpy(array) for name, array in tensors.items()})
    except (KeyError, ValueError, RuntimeError) as e:
        raise ModelFormatError(f"Checkpoint {path} does not describe a level U-Net: {e}")
    model.eval()
    return model


class IldMaskAgent:
    """
    ILD Mask Agent - level U-Net training and inference

    Responsibilities:
    - Build and train the level network on paired DP/REV ILD images
    - Persist checkpoints and per-epoch training logs
    - Turn an interaural spectrogram into a one-sided DP probability mask
    """

    def __init__(self, model: Optional[LevelUNet] = None):
        self.model = model
        self.name = "ILD Mask Agent"

    @classmethod
    def from_checkpoint(cls, path: str) -> "IldMaskAgent":
        logger.info(f"Loading level U-Net from {path}")
        return cls(load_model(path))

    def fit(self, images: Sequence[np.ndarray], masks: Sequence[MaskImage], config: NetConfig,
            hyper: TrainHyper, seed: int = 0, checkpoint_path: Optional[str] = None,
            log_path: Optional[str] = None) -> LevelUNet:
        try:
            self.model = train(build_net(config, seed), images, masks, hyper, seed)
        except Exception as e:
            logger.error(f"Error training level U-Net: {str(e)}")
            raise
        if checkpoint_path:
            save_model(self.model, checkpoint_path)
        if log_path:
            write_training_log(self.model.metadata.history, log_path)
        return self.model

    def mask_for(self, cues: InterauralSpectrogram) -> TfMask:
        """One-sided DP mask aligned with the interaural spectrogram"""
        if self.model is None:
            raise ModelFormatError("No level U-Net loaded")
        full = predict_ild_mask(self.model, ild_image(cues))
        return TfMask(fold_bins(full.values))
