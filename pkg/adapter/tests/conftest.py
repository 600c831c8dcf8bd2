"""Deterministic fixture images drawn with PIL."""

import pytest
from PIL import Image, ImageDraw


def _two_region_image(path):
    img = Image.new("RGB", (160, 120), (255, 255, 255))
    draw = ImageDraw.Draw(img)
    draw.ellipse([20, 30, 60, 70], fill=(220, 40, 40))
    draw.rectangle([90, 20, 140, 90], fill=(40, 40, 220))
    img.save(path)
    return path


def _one_region_image(path):
    img = Image.new("RGB", (120, 100), (255, 255, 255))
    draw = ImageDraw.Draw(img)
    draw.rectangle([30, 30, 90, 70], fill=(40, 180, 60))
    img.save(path)
    return path


@pytest.fixture
def two_region_image(tmp_path):
    return str(_two_region_image(tmp_path / "two.png"))


@pytest.fixture
def one_region_image(tmp_path):
    return str(_one_region_image(tmp_path / "one.png"))


@pytest.fixture
def fixture_images(two_region_image, one_region_image):
    return [two_region_image, one_region_image]
