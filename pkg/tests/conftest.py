"""
Test configuration
"""

import sys
from pathlib import Path

import numpy as np
import pytest
from PIL import Image

# Allow running the suite from a source checkout without installing
SRC = Path(__file__).resolve().parent.parent / 'src'
if str(SRC) not in sys.path:
    sys.path.insert(0, str(SRC))


def pytest_configure(config):
    """Configure pytest markers"""
    config.addinivalue_line(
        "markers", "slow: marks Monte-Carlo and multi-image tests"
    )
    config.addinivalue_line(
        "markers", "integration: marks end-to-end CLI tests"
    )


def step_image(height: int = 24, width: int = 24, column: int = 12,
               low: float = 0.0, high: float = 200.0) -> np.ndarray:
    """Vertical step: columns left of `column` are low, the rest high"""
    image = np.full((height, width), low, dtype=np.float64)
    image[:, column:] = high
    return image


def save_gray(array: np.ndarray, path: Path):
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(np.clip(array, 0, 255).astype(np.uint8)).save(path)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def tiny_dataset(tmp_path):
    """Three step images with vertical-line ground truth, plus the folder path"""
    root = tmp_path / 'steps'
    for index, column in enumerate((10, 14, 18)):
        image = step_image(height=24, width=32, column=column)
        gt = np.zeros_like(image)
        gt[:, column] = 255
        save_gray(image, root / 'images' / f"img{index}.png")
        save_gray(gt, root / 'gt' / f"img{index}.png")
    return root
