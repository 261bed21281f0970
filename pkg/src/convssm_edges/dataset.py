"""
Dataset Ingestion
Image/ground-truth pairing and grayscale image loading
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional

import numpy as np
from PIL import Image

logger = logging.getLogger(__name__)

IMAGE_EXTENSIONS = ('.png', '.jpg', '.jpeg', '.bmp', '.tif', '.tiff')
LUMA_WEIGHTS = np.array([0.299, 0.587, 0.114])


class DatasetError(ValueError):
    """Inconsistent dataset contents"""
    pass


@dataclass
class ImagePair:
    stem: str
    image_path: Path
    gt_path: Optional[Path] = None

    @property
    def has_gt(self) -> bool:
        return self.gt_path is not None


@dataclass
class DatasetManifest:
    name: str
    pairs: List[ImagePair] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.pairs)

    @property
    def has_gt(self) -> bool:
        return bool(self.pairs) and all(p.has_gt for p in self.pairs)

    def with_gt(self) -> List[ImagePair]:
        return [p for p in self.pairs if p.has_gt]


def load_image(path: Path) -> np.ndarray:
    """Grayscale float image on [0, 255]"""
    with Image.open(path) as img:
        if img.mode == 'L':
            return np.asarray(img, dtype=np.float64)
        if img.mode in ('I', 'I;16', 'F'):
            values = np.asarray(img, dtype=np.float64)
            peak = values.max()
            return values * (255.0 / peak) if peak > 255 else values
        rgb = np.asarray(img.convert('RGB'), dtype=np.float64)
    return rgb @ LUMA_WEIGHTS


def load_ground_truth(path: Path) -> np.ndarray:
    """Binary {0, 255} map; pixels above mid-gray are edges"""
    return np.where(load_image(path) > 127, 255, 0).astype(np.uint8)


def _images_in(directory: Path) -> List[Path]:
    return sorted(p for p in directory.iterdir() if p.is_file() and p.suffix.lower() in IMAGE_EXTENSIONS)


def _size(path: Path):
    with Image.open(path) as img:
        return img.size


def load_dataset(directory: str, name: Optional[str] = None) -> DatasetManifest:
    """
    Pair images with ground truth by file stem

    Args:
        directory: Folder containing images/ and optionally gt/
        name: Dataset name (folder name by default)

    Returns:
        DatasetManifest sorted by stem
    """
    root = Path(directory)
    if not root.is_dir():
        raise FileNotFoundError(f"Dataset directory not found: {directory}")

    image_dir = root / 'images'
    if not image_dir.is_dir():
        raise FileNotFoundError(f"Dataset has no images/ directory: {image_dir}")

    gt_dir = root / 'gt'
    gt_by_stem = {p.stem: p for p in _images_in(gt_dir)} if gt_dir.is_dir() else {}

    manifest = DatasetManifest(name=name or root.name)
    for image_path in _images_in(image_dir):
        gt_path = gt_by_stem.get(image_path.stem)
        if gt_path is not None and _size(gt_path) != _size(image_path):
            raise DatasetError(
                f"Ground truth {gt_path} has size {_size(gt_path)}, "
                f"expected {_size(image_path)} from {image_path}"
            )
        manifest.pairs.append(ImagePair(stem=image_path.stem, image_path=image_path, gt_path=gt_path))

    orphans = set(gt_by_stem) - {p.stem for p in manifest.pairs}
    if orphans:
        logger.warning(f"Ground truth without image: {sorted(orphans)}")

    logger.info(f"Loaded dataset {manifest.name}: {len(manifest)} images, "
                f"{len(manifest.with_gt())} with ground truth")
    return manifest


def iter_samples(manifest: DatasetManifest, require_gt: bool = False):
    """
    Yield (stem, image, ground truth or None) one image at a time

    Args:
        manifest: Dataset manifest
        require_gt: Skip images without ground truth
    """
    for pair in manifest.pairs:
        if require_gt and not pair.has_gt:
            continue
        gt = load_ground_truth(pair.gt_path) if pair.has_gt else None
        yield pair.stem, load_image(pair.image_path), gt
