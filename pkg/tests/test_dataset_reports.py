"""
Test suite for dataset ingestion and report emission
"""

import csv
import json

import numpy as np
import pytest
from PIL import Image

from conftest import save_gray, step_image
from convssm_edges.config import PipelineConfig
from convssm_edges.dataset import DatasetError, iter_samples, load_dataset, load_ground_truth, load_image
from convssm_edges.metrics import evaluate_edge_map, summarize
from convssm_edges.reports import emit_reports, read_edge_map, write_edge_map


class TestDataset:

    def test_pairs_by_stem(self, tiny_dataset):
        manifest = load_dataset(str(tiny_dataset))

        assert manifest.name == 'steps'
        assert len(manifest) == 3
        assert [p.stem for p in manifest.pairs] == ['img0', 'img1', 'img2']
        assert manifest.has_gt

    def test_images_only(self, tmp_path):
        save_gray(step_image(), tmp_path / 'data' / 'images' / 'a.png')
        manifest = load_dataset(str(tmp_path / 'data'), name='plain')

        assert manifest.name == 'plain'
        assert len(manifest) == 1
        assert not manifest.pairs[0].has_gt
        assert manifest.with_gt() == []

    def test_dimension_mismatch_names_file(self, tmp_path):
        root = tmp_path / 'data'
        save_gray(step_image(24, 24), root / 'images' / 'a.png')
        save_gray(np.zeros((20, 24)), root / 'gt' / 'a.png')

        with pytest.raises(DatasetError, match='a.png'):
            load_dataset(str(root))

    def test_missing_directories(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_dataset(str(tmp_path / 'absent'))
        (tmp_path / 'empty').mkdir()
        with pytest.raises(FileNotFoundError):
            load_dataset(str(tmp_path / 'empty'))

    def test_iter_samples(self, tiny_dataset, tmp_path):
        stems = [stem for stem, _, gt in iter_samples(load_dataset(str(tiny_dataset)), require_gt=True)]
        assert stems == ['img0', 'img1', 'img2']

        save_gray(step_image(), tmp_path / 'mixed' / 'images' / 'a.png')
        save_gray(step_image(), tmp_path / 'mixed' / 'images' / 'b.png')
        save_gray(np.zeros((24, 24)), tmp_path / 'mixed' / 'gt' / 'b.png')
        manifest = load_dataset(str(tmp_path / 'mixed'))

        assert [s for s, _, _ in iter_samples(manifest, require_gt=True)] == ['b']
        assert [gt is None for _, _, gt in iter_samples(manifest)] == [True, False]

    def test_rgb_to_luma(self, tmp_path):
        rgb = np.zeros((4, 4, 3), dtype=np.uint8)
        rgb[..., 0] = 100
        rgb[..., 1] = 200
        Image.fromarray(rgb).save(tmp_path / 'rgb.png')

        np.testing.assert_allclose(load_image(tmp_path / 'rgb.png'), 0.299 * 100 + 0.587 * 200)

    def test_ground_truth_binarized(self, tmp_path):
        save_gray(np.array([[0, 100, 128, 255]]), tmp_path / 'gt.png')
        np.testing.assert_array_equal(load_ground_truth(tmp_path / 'gt.png'), [[0, 0, 255, 255]])


class TestReports:

    def setup_method(self):
        self.edge_map = np.zeros((16, 16), dtype=np.uint8)
        self.edge_map[:, 5] = 255

    def test_edge_map_round_trip(self, tmp_path):
        path = tmp_path / 'edges' / 'a.png'
        write_edge_map(self.edge_map, path)

        with Image.open(path) as img:
            assert img.mode == 'L'
        np.testing.assert_array_equal(read_edge_map(path), self.edge_map)

    def test_emit_reports(self, tmp_path):
        rows = [{'stem': s, **evaluate_edge_map(self.edge_map, self.edge_map)} for s in ('a', 'b', 'c')]
        config = PipelineConfig()
        written = emit_reports(str(tmp_path / 'out'), config, edge_maps={'a': self.edge_map},
                               report=summarize(rows), sweep_rows=[{'stem': 'a', 'threshold': 0.0, 'f': 1.0}])

        assert set(written) == {'edges', 'metrics.csv', 'sweep.csv', 'metrics.json'}
        assert (tmp_path / 'out' / 'edges' / 'a.png').exists()

        with open(written['metrics.csv']) as f:
            table = list(csv.DictReader(f))
        assert len(table) == 3
        assert table[0]['stem'] == 'a'
        assert float(table[0]['f']) == 1.0

        with open(written['metrics.json']) as f:
            summary = json.load(f)
        assert summary['config'] == json.loads(json.dumps(config.to_dict()))
        assert summary['metrics']['ods'] == 1.0

    def test_emit_reports_is_deterministic(self, tmp_path):
        rows = [{'stem': 'a', **evaluate_edge_map(self.edge_map)}]
        for name in ('first', 'second'):
            emit_reports(str(tmp_path / name), PipelineConfig(), report=summarize(rows), extra={'note': {'x': 1}})

        assert (tmp_path / 'first' / 'metrics.json').read_bytes() == (tmp_path / 'second' / 'metrics.json').read_bytes()
        assert (tmp_path / 'first' / 'metrics.csv').read_bytes() == (tmp_path / 'second' / 'metrics.csv').read_bytes()


if __name__ == '__main__':
    pytest.main([__file__, '-v'])
