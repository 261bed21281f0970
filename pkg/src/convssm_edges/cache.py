"""
Caching module for gradient fields
"""

import hashlib
import json
import logging
import os
from pathlib import Path
from typing import Dict, Optional

import numpy as np

from .saim import GradientField, ScanConfig

logger = logging.getLogger(__name__)

DEFAULT_CACHE_DIR = './.cache/convssm_edges'


class GradientCache:
    """Cache of scanned gradient fields keyed by image content and scan config"""

    def __init__(self, cache_dir: Optional[str] = None):
        """
        Args:
            cache_dir: Directory to store cache files
        """
        self.cache_dir = Path(cache_dir or os.getenv('CONVSSM_EDGES_CACHE_DIR', DEFAULT_CACHE_DIR))
        self.cache_dir.mkdir(parents=True, exist_ok=True)

        self.gradient_cache_dir = self.cache_dir / 'gradients'
        self.gradient_cache_dir.mkdir(exist_ok=True)

    def _get_cache_key(self, image: np.ndarray, scan: ScanConfig) -> str:
        """Generate cache key from image bytes and scan settings"""
        image = np.ascontiguousarray(image, dtype=np.float64)
        digest = hashlib.md5()
        digest.update(str(image.shape).encode())
        digest.update(image.tobytes())
        digest.update(json.dumps(scan.to_dict(), sort_keys=True).encode())
        return digest.hexdigest()

    def get_gradients(self, image: np.ndarray, scan: ScanConfig) -> Optional[GradientField]:
        """
        Get a cached gradient field

        Args:
            image: Grayscale image that was scanned
            scan: Scan configuration used

        Returns:
            Cached GradientField or None
        """
        cache_file = self.gradient_cache_dir / f"{self._get_cache_key(image, scan)}.npz"
        if not cache_file.exists():
            return None

        try:
            with np.load(cache_file) as data:
                field = GradientField(gx=data['gx'], gy=data['gy'])
            logger.debug(f"Using cached gradients {cache_file.name}")
            return field
        except Exception as e:
            logger.warning(f"Invalid cache file {cache_file}: {e}")
            return None

    def set_gradients(self, image: np.ndarray, scan: ScanConfig, field: GradientField):
        """Cache a gradient field"""
        cache_file = self.gradient_cache_dir / f"{self._get_cache_key(image, scan)}.npz"

        try:
            with open(cache_file, 'wb') as f:
                np.savez(f, gx=field.gx, gy=field.gy)
            logger.debug(f"Cached gradients {cache_file.name}")
        except Exception as e:
            logger.warning(f"Failed to cache gradients: {e}")

    def clear_cache(self):
        for file in self.gradient_cache_dir.glob('*.npz'):
            file.unlink()
        logger.info("Cleared gradient cache")

    def get_cache_stats(self) -> Dict:
        """Get cache statistics"""
        files = list(self.gradient_cache_dir.glob('*.npz'))
        return {
            'gradients': len(files),
            'size_bytes': sum(f.stat().st_size for f in files),
            'cache_dir': str(self.cache_dir),
        }
