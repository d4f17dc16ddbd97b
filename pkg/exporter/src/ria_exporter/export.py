"""Run a frozen vision transformer over images and dump dense patch
features as RIAF files.

This script performs no aggregation, projection, or normalization; the
descriptor pipeline owns all the math. The only contract with it is the
RIAF binary format (magic "RIAF", u16 LE version 1, u32 LE n_patches,
u32 LE dim_in, float32 LE row-major payload).

Features default to the token outputs of the 31st transformer layer;
the query/key/value attention facets are available behind a flag.
"""

import os
import struct
import sys
import tempfile
from dataclasses import dataclass, field

import numpy as np
import torch
from PIL import Image, UnidentifiedImageError

RIAF_MAGIC = b"RIAF"
RIAF_VERSION = 1

# standard ImageNet statistics used by the DINOv2 preprocessing
IMAGENET_MEAN = (0.485, 0.456, 0.406)
IMAGENET_STD = (0.229, 0.224, 0.225)

FACETS = ("output", "query", "key", "value")

# offline testing model: random weights, seeded, built from config alone
RANDOM_TINY = "random-tiny"


class ExportError(Exception):
    pass


@dataclass
class ExportConfig:
    model: str = "facebook/dinov2-giant"
    layer: int = 31
    facet: str = "output"
    output_dir: str = "features"
    images: list = field(default_factory=list)
    seed: int = 0  # weight init seed, only used by the random-tiny model

    def validate(self):
        if self.facet not in FACETS:
            raise ExportError(f"unknown facet {self.facet!r}, expected one of {FACETS}")
        if self.layer < 0:
            raise ExportError(f"layer index must be >= 0, got {self.layer}")
        if self.facet != "output" and self.layer < 1:
            raise ExportError("attention facets need a layer index >= 1")
        return self


def load_backbone(cfg):
    """Load the frozen backbone. random-tiny builds a small seeded model
    from config alone (no downloads), for offline runs and tests."""
    from transformers import Dinov2Config, Dinov2Model

    if cfg.model == RANDOM_TINY:
        torch.manual_seed(cfg.seed)
        model = Dinov2Model(
            Dinov2Config(
                hidden_size=32,
                num_hidden_layers=2,
                num_attention_heads=2,
                intermediate_size=64,
                patch_size=14,
                image_size=224,
            )
        )
    else:
        model = Dinov2Model.from_pretrained(cfg.model)
    model.eval()
    for p in model.parameters():
        p.requires_grad_(False)
    depth = model.config.num_hidden_layers
    if cfg.layer > depth:
        raise ExportError(
            f"layer {cfg.layer} out of range for {cfg.model} ({depth} layers)"
        )
    return model


def resize_to_patch_multiple(image, patch):
    """Resize so both sides are multiples of the patch size (nearest
    multiple, at least one patch)."""
    w, h = image.size
    new_w = max(patch, round(w / patch) * patch)
    new_h = max(patch, round(h / patch) * patch)
    if (new_w, new_h) != (w, h):
        image = image.resize((new_w, new_h), Image.BICUBIC)
    return image


def preprocess(image, patch):
    image = resize_to_patch_multiple(image.convert("RGB"), patch)
    arr = np.asarray(image, dtype=np.float32) / 255.0
    arr = (arr - np.array(IMAGENET_MEAN, dtype=np.float32)) / np.array(
        IMAGENET_STD, dtype=np.float32
    )
    return torch.from_numpy(arr.transpose(2, 0, 1)).unsqueeze(0)


def _skip_prefix_tokens(model):
    # CLS token plus any register tokens precede the patch grid
    return 1 + getattr(model.config, "num_register_tokens", 0)


def extract_patch_features(model, pixel_tensor, layer, facet="output"):
    """Dense patch features (n_patches x width) from one preprocessed image."""
    captured = {}
    hook = None
    if facet != "output":
        attention = model.encoder.layer[layer - 1].attention.attention
        projection = getattr(attention, facet)
        hook = projection.register_forward_hook(
            lambda _mod, _inp, out: captured.__setitem__("tokens", out)
        )
    try:
        with torch.no_grad():
            outputs = model(pixel_tensor, output_hidden_states=True)
    finally:
        if hook is not None:
            hook.remove()
    if facet == "output":
        tokens = outputs.hidden_states[layer]
    else:
        tokens = captured["tokens"]
    return tokens[0, _skip_prefix_tokens(model) :].cpu().numpy().astype(np.float32)


def write_riaf(path, features):
    """Write an n x d float32 matrix in the RIAF format, atomically."""
    arr = np.ascontiguousarray(features, dtype="<f4")
    if arr.ndim != 2:
        raise ExportError(f"features must be 2-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ExportError("features contain non-finite values")
    header = struct.pack("<4sHII", RIAF_MAGIC, RIAF_VERSION, arr.shape[0], arr.shape[1])
    directory = os.path.dirname(os.path.abspath(os.fspath(path)))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".riaf-tmp-")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(header + arr.tobytes())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def export_images(cfg, log=print):
    """Export every image in cfg.images to <output_dir>/<stem>.riaf.

    Undecodable images are skipped with a warning; returns the list of
    written paths."""
    cfg.validate()
    model = load_backbone(cfg)
    patch = model.config.patch_size
    os.makedirs(cfg.output_dir, exist_ok=True)
    written = []
    for image_path in cfg.images:
        try:
            image = Image.open(image_path)
        except (UnidentifiedImageError, OSError) as exc:
            log(f"warning: skipping {image_path}: {exc}", file=sys.stderr)
            continue
        tensor = preprocess(image, patch)
        features = extract_patch_features(model, tensor, cfg.layer, cfg.facet)
        stem = os.path.splitext(os.path.basename(image_path))[0]
        out_path = os.path.join(cfg.output_dir, f"{stem}.riaf")
        write_riaf(out_path, features)
        written.append(out_path)
    return written
