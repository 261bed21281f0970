"""
Report Emission
Edge-map images plus metrics and sweep tables as CSV/JSON
"""

import csv
import json
import logging
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np
from PIL import Image

from .config import PipelineConfig
from .metrics import MetricsReport

logger = logging.getLogger(__name__)

METRIC_COLUMNS = ['stem', 'edge_pixels', 'acl', 'thickness', 'tp', 'fp', 'fn', 'f', 'ssim', 'ac']
SWEEP_COLUMNS = ['stem', 'threshold', 'tp', 'fp', 'fn', 'f']


def write_edge_map(edge_map: np.ndarray, path: Path):
    """8-bit single-channel {0, 255} image"""
    path.parent.mkdir(parents=True, exist_ok=True)
    binary = np.where(np.asarray(edge_map) > 0, 255, 0).astype(np.uint8)
    Image.fromarray(binary).save(path)


def read_edge_map(path: Path) -> np.ndarray:
    with Image.open(path) as img:
        return np.asarray(img.convert('L'), dtype=np.uint8)


def write_csv(path: Path, rows: Sequence[Dict], columns: List[str]):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', newline='') as f:
        writer = csv.DictWriter(f, fieldnames=columns, extrasaction='ignore', restval='')
        writer.writeheader()
        for row in rows:
            writer.writerow(row)


def write_json(path: Path, data: Dict):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w') as f:
        json.dump(data, f, indent=2, default=str)


def emit_reports(out_dir: str, config: PipelineConfig,
                 edge_maps: Optional[Dict[str, np.ndarray]] = None,
                 report: Optional[MetricsReport] = None,
                 sweep_rows: Optional[Sequence[Dict]] = None,
                 extra: Optional[Dict] = None) -> Dict[str, str]:
    """
    Write the run's artifacts

    Args:
        out_dir: Output directory
        config: Configuration echoed into metrics.json
        edge_maps: stem -> edge map, written to edges/<stem>.png
        report: Metrics written to metrics.csv and metrics.json
        sweep_rows: Threshold sweep rows written to sweep.csv
        extra: Additional sections for metrics.json

    Returns:
        Mapping of artifact name to written path
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = {}

    for stem, edge_map in (edge_maps or {}).items():
        path = out / 'edges' / f"{stem}.png"
        write_edge_map(edge_map, path)
    if edge_maps:
        written['edges'] = str(out / 'edges')

    if report is not None:
        write_csv(out / 'metrics.csv', report.per_image, METRIC_COLUMNS)
        written['metrics.csv'] = str(out / 'metrics.csv')

    if sweep_rows is not None:
        write_csv(out / 'sweep.csv', sweep_rows, SWEEP_COLUMNS)
        written['sweep.csv'] = str(out / 'sweep.csv')

    summary = {'config': config.to_dict()}
    if report is not None:
        summary['metrics'] = report.to_dict()
    summary.update(extra or {})
    write_json(out / 'metrics.json', summary)
    written['metrics.json'] = str(out / 'metrics.json')

    logger.info(f"Reports written to {out}")
    return written
