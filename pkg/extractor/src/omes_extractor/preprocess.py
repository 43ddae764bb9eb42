"""Crop preprocessing shared by all backbones.

Crops are padded to square with edge replication before any resize, so
aspect-ratio distortion stays bounded regardless of bounding-box shape.
After padding, each model applies its published inference transform.
"""

from __future__ import annotations

import numpy as np
from PIL import Image

IMAGENET_MEAN = (0.485, 0.456, 0.406)
IMAGENET_STD = (0.229, 0.224, 0.225)

# descriptor strings recorded in the output's meta sidecar
IMAGENET_POLICY = "pad=edge,resize=256,center_crop=224,norm=imagenet"
CLIP_POLICY = "pad=edge,processor=clip-default"


def pad_to_square(img: Image.Image) -> Image.Image:
    """Edge-replicate the shorter sides until the crop is square."""
    arr = np.asarray(img.convert("RGB"))
    h, w = arr.shape[:2]
    if h == w:
        return Image.fromarray(arr)
    side = max(h, w)
    top = (side - h) // 2
    bottom = side - h - top
    left = (side - w) // 2
    right = side - w - left
    padded = np.pad(arr, ((top, bottom), (left, right), (0, 0)), mode="edge")
    return Image.fromarray(padded)


def imagenet_batch(images: list[Image.Image]) -> "torch.Tensor":
    """Pad, resize 256, center-crop 224, normalize; stacked NCHW tensor."""
    import torch
    from torchvision import transforms

    tf = transforms.Compose([
        transforms.Resize(256),
        transforms.CenterCrop(224),
        transforms.ToTensor(),
        transforms.Normalize(IMAGENET_MEAN, IMAGENET_STD),
    ])
    return torch.stack([tf(pad_to_square(im)) for im in images])


def load_crop(image_path, bbox) -> Image.Image:
    """Cut the bbox region (x, y, w, h) out of an image file."""
    with Image.open(image_path) as img:
        rgb = img.convert("RGB")
        x, y, w, h = (int(v) for v in bbox)
        return rgb.crop((x, y, x + w, y + h))
