"""Backbone registry: each model id maps to batch encode callables.

Image features come back unnormalized (the harness applies its own
normalization), one row per input, float32. Loading with
``pretrained=False`` builds the architecture with random weights, which
needs no network access and is enough for shape and plumbing tests.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .preprocess import CLIP_POLICY, IMAGENET_POLICY, imagenet_batch, pad_to_square

MODEL_IDS = ("clip-visual", "clip-text", "resnet50-s", "resnet50-g", "alexnet-s")
DEFAULT_CLIP_VARIANT = "openai/clip-vit-base-patch32"


class ModelUnavailable(RuntimeError):
    """Pretrained weights could not be loaded (typically: no network)."""


@dataclass
class Encoder:
    model_id: str
    preprocessing: str
    encode_images: Callable[[list], np.ndarray] | None = None
    encode_texts: Callable[[list[str]], np.ndarray] | None = None


def _to_numpy(t) -> np.ndarray:
    return t.detach().cpu().numpy().astype(np.float32)


def _torchvision_encoder(model_id: str, pretrained: bool) -> Encoder:
    import torch
    from torchvision import models as tvm

    if model_id in ("resnet50-s", "resnet50-g"):
        try:
            weights = tvm.ResNet50_Weights.IMAGENET1K_V1 if pretrained else None
            net = tvm.resnet50(weights=weights)
        except Exception as err:  # weight download failed
            raise ModelUnavailable(f"resnet50 weights: {err}") from err
        net.eval()

        def run(images):
            batch = imagenet_batch(images)
            with torch.no_grad():
                x = net.conv1(batch)
                x = net.bn1(x)
                x = net.relu(x)
                x = net.maxpool(x)
                x = net.layer1(x)
                x = net.layer2(x)
                x = net.layer3(x)
                x = net.layer4(x)          # spatial: (B, 2048, 7, 7)
                if model_id == "resnet50-g":
                    x = net.avgpool(x)     # global: (B, 2048, 1, 1)
            return _to_numpy(x.flatten(1))  # row-major flatten

        return Encoder(model_id, IMAGENET_POLICY, encode_images=run)

    if model_id == "alexnet-s":
        try:
            weights = tvm.AlexNet_Weights.IMAGENET1K_V1 if pretrained else None
            net = tvm.alexnet(weights=weights)
        except Exception as err:
            raise ModelUnavailable(f"alexnet weights: {err}") from err
        net.eval()
        conv3 = net.features[:7]  # through the third conv block

        def run(images):
            batch = imagenet_batch(images)
            with torch.no_grad():
                x = conv3(batch)  # (B, 384, 13, 13)
            return _to_numpy(x.flatten(1))

        return Encoder(model_id, IMAGENET_POLICY, encode_images=run)

    raise ValueError(f"not a torchvision model id: {model_id}")


def _clip_encoder(model_id: str, variant: str, pretrained: bool, config=None) -> Encoder:
    import torch
    from transformers import CLIPImageProcessor, CLIPModel

    if pretrained:
        try:
            from transformers import CLIPProcessor

            model = CLIPModel.from_pretrained(variant)
            processor = CLIPProcessor.from_pretrained(variant)
            image_processor = processor.image_processor
            tokenizer = processor.tokenizer
        except Exception as err:
            raise ModelUnavailable(f"CLIP {variant}: {err}") from err
    else:
        from transformers import CLIPConfig

        model = CLIPModel(config if config is not None else CLIPConfig())
        image_processor = CLIPImageProcessor()
        tokenizer = None  # tokenizer vocab cannot be materialized offline
    model.eval()

    def projected(out):
        # transformers >= 5 returns the encoder output with pooler_output
        # swapped for the projected features; older versions return a tensor
        return out.pooler_output if hasattr(out, "pooler_output") else out

    def run_images(images):
        inputs = image_processor(
            images=[pad_to_square(im) for im in images], return_tensors="pt"
        )
        with torch.no_grad():
            feats = projected(model.get_image_features(**inputs))
        return _to_numpy(feats)

    def run_texts(texts):
        if tokenizer is None:
            raise ModelUnavailable("text encoding needs pretrained tokenizer files")
        inputs = tokenizer(list(texts), padding=True, truncation=True,
                           return_tensors="pt")
        with torch.no_grad():
            feats = projected(model.get_text_features(**inputs))
        return _to_numpy(feats)

    if model_id == "clip-visual":
        return Encoder(model_id, CLIP_POLICY, encode_images=run_images)
    return Encoder(model_id, CLIP_POLICY, encode_texts=run_texts)


def load_encoder(
    model_id: str,
    variant: str = DEFAULT_CLIP_VARIANT,
    pretrained: bool = True,
    clip_config=None,
) -> Encoder:
    if model_id not in MODEL_IDS:
        raise ValueError(f"unknown model id {model_id!r}; choose from {MODEL_IDS}")
    if model_id.startswith("clip"):
        return _clip_encoder(model_id, variant, pretrained, config=clip_config)
    return _torchvision_encoder(model_id, pretrained)
