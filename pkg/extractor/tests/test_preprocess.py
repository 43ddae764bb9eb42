import numpy as np
from PIL import Image

from omes_extractor.preprocess import imagenet_batch, load_crop, pad_to_square


def test_pad_to_square_wide():
    arr = np.zeros((10, 30, 3), np.uint8)
    arr[:, 0] = (255, 0, 0)
    out = np.asarray(pad_to_square(Image.fromarray(arr)))
    assert out.shape == (30, 30, 3)
    # vertical padding replicates the edge rows
    assert (out[0] == out[10]).all()
    assert (out[-1] == out[19]).all()


def test_pad_to_square_tall_and_square():
    tall = np.zeros((21, 7, 3), np.uint8)
    out = np.asarray(pad_to_square(Image.fromarray(tall)))
    assert out.shape == (21, 21, 3)
    square = np.zeros((9, 9, 3), np.uint8)
    assert np.asarray(pad_to_square(Image.fromarray(square))).shape == (9, 9, 3)


def test_imagenet_batch_shape():
    imgs = [Image.fromarray(np.zeros((50, 80, 3), np.uint8)) for _ in range(3)]
    batch = imagenet_batch(imgs)
    assert tuple(batch.shape) == (3, 3, 224, 224)


def test_load_crop_bbox(tmp_path):
    arr = np.zeros((20, 20, 3), np.uint8)
    arr[5:9, 3:10] = (0, 255, 0)
    path = tmp_path / "img.png"
    Image.fromarray(arr).save(path)
    crop = load_crop(path, (3, 5, 7, 4))
    got = np.asarray(crop)
    assert got.shape == (4, 7, 3)
    assert (got == (0, 255, 0)).all()
