"""
Test suite for the dataset orchestrator
"""

import json

import numpy as np
import pytest

from conftest import save_gray
from convssm_edges.config import PipelineConfig
from convssm_edges.dataset import DatasetError, load_dataset
from convssm_edges.orchestrator import EdgeDetectionOrchestrator, evaluate_directory
from convssm_edges.saim import ScanConfig, degenerate_kernel_set


def fixed_config(out_dir, **kwargs):
    return PipelineConfig(scan=ScanConfig(kernels=degenerate_kernel_set()), out_dir=str(out_dir), **kwargs)


class TestDetect:

    def test_writes_edge_maps_and_reports(self, tiny_dataset, tmp_path):
        out = tmp_path / 'out'
        outcome = EdgeDetectionOrchestrator(fixed_config(out), use_cache=False).detect(str(tiny_dataset))

        assert sorted(p.name for p in (out / 'edges').iterdir()) == ['img0.png', 'img1.png', 'img2.png']
        assert (out / 'metrics.csv').exists()

        report = outcome['report']
        assert len(report.per_image) == 3
        assert [row['stem'] for row in report.per_image] == ['img0', 'img1', 'img2']

        summary = json.loads((out / 'metrics.json').read_text())
        assert summary['config']['out_dir'] == str(out)
        assert set(summary['erosion_traces']) == {'img0', 'img1', 'img2'}

    def test_uses_cache(self, tiny_dataset, tmp_path):
        orchestrator = EdgeDetectionOrchestrator(fixed_config(tmp_path / 'out'), cache_dir=str(tmp_path / 'cache'))
        orchestrator.detect(str(tiny_dataset))
        assert orchestrator.cache.get_cache_stats()['gradients'] == 3

    def test_crossbar_disables_cache(self, tmp_path):
        config = fixed_config(tmp_path / 'out', crossbar_enabled=True)
        assert EdgeDetectionOrchestrator(config, cache_dir=str(tmp_path / 'cache')).cache is None

    def test_repeat_runs_identical(self, tiny_dataset, tmp_path):
        for name in ('first', 'second'):
            config = fixed_config(tmp_path / 'shared', crossbar_enabled=True)
            EdgeDetectionOrchestrator(config).detect(str(tiny_dataset))
            (tmp_path / 'shared').rename(tmp_path / name)

        for artifact in ('metrics.json', 'metrics.csv', 'edges/img1.png'):
            assert (tmp_path / 'first' / artifact).read_bytes() == (tmp_path / 'second' / artifact).read_bytes()

    @pytest.mark.slow
    def test_workers_keep_manifest_order(self, tiny_dataset, tmp_path):
        EdgeDetectionOrchestrator(fixed_config(tmp_path / 'serial'), use_cache=False).detect(str(tiny_dataset))
        EdgeDetectionOrchestrator(fixed_config(tmp_path / 'pool', workers=2), use_cache=False).detect(str(tiny_dataset))

        assert (tmp_path / 'serial' / 'metrics.csv').read_bytes() == (tmp_path / 'pool' / 'metrics.csv').read_bytes()
        for stem in ('img0', 'img1', 'img2'):
            serial = (tmp_path / 'serial' / 'edges' / f"{stem}.png").read_bytes()
            assert serial == (tmp_path / 'pool' / 'edges' / f"{stem}.png").read_bytes()


class TestSweepsAndEvaluation:

    def test_sweep_thresholds(self, tiny_dataset, tmp_path):
        out = tmp_path / 'sweep'
        outcome = EdgeDetectionOrchestrator(fixed_config(out), use_cache=False).sweep_thresholds(str(tiny_dataset))

        lines = (out / 'sweep.csv').read_text().strip().splitlines()
        assert len(lines) == 1 + 4 * 101
        summary = json.loads((out / 'metrics.json').read_text())
        assert summary['sweep']['ods'] == outcome['sweep'].ods

    def test_sweep_without_ground_truth(self, tmp_path):
        save_gray(np.zeros((16, 16)), tmp_path / 'nogt' / 'images' / 'a.png')
        with pytest.raises(DatasetError):
            EdgeDetectionOrchestrator(fixed_config(tmp_path / 'out'), use_cache=False).sweep_thresholds(
                str(tmp_path / 'nogt'))

    def test_evaluate_written_maps(self, tiny_dataset, tmp_path):
        out = tmp_path / 'out'
        detected = EdgeDetectionOrchestrator(fixed_config(out), use_cache=False).detect(str(tiny_dataset))
        report = evaluate_directory(str(out), load_dataset(str(tiny_dataset)))

        assert report.ods == pytest.approx(detected['report'].ods)
        assert report.acl == pytest.approx(detected['report'].acl)

    def test_evaluate_missing_predictions(self, tiny_dataset, tmp_path):
        (tmp_path / 'empty').mkdir()
        with pytest.raises(DatasetError):
            evaluate_directory(str(tmp_path / 'empty'), load_dataset(str(tiny_dataset)))
        with pytest.raises(FileNotFoundError):
            evaluate_directory(str(tmp_path / 'absent'), load_dataset(str(tiny_dataset)))

    def test_ablate(self, tiny_dataset, tmp_path):
        outcome = EdgeDetectionOrchestrator(fixed_config(tmp_path / 'out'), use_cache=False).ablate(str(tiny_dataset))
        assert [r['variant'] for r in outcome['rows']] == ['no_flip', 'h_flip', 'v_flip', 'hv_flip', 'fixed_kernels']


if __name__ == '__main__':
    pytest.main([__file__, '-v'])
