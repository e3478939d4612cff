import datetime as dt
import json

import numpy as np
import pytest

from sitegauge.analytics import site_change, yearly_trend
from sitegauge.errors import SceneGenerationError
from sitegauge.masks import InstanceMask, MaskSet, average_precision, structural_area
from sitegauge.synth import (
    GrowthSpec,
    SceneSpec,
    generate_scene,
    growth_series,
    perimeter_pixels,
    perturb_masks,
    write_fleet,
)


class TestGenerateScene:
    def test_single_aligned_rectangle_exact(self):
        spec = SceneSpec(grid_h=128, grid_w=128, pixel_size_m=1.0,
                         n_structures=(1, 1), rect_size_m=(100.0, 100.0), seed=0)
        raster, masks, exact = generate_scene(spec)
        assert exact == pytest.approx(10_000.0)
        extent = 128 * 128 * 1.0
        assert structural_area(masks, extent_m2=extent) == pytest.approx(10_000.0)

    def test_zero_structures(self):
        spec = SceneSpec(n_structures=(0, 0), seed=1)
        _, masks, exact = generate_scene(spec)
        assert len(masks) == 0 and exact == 0.0

    def test_deterministic_per_seed(self):
        spec = SceneSpec(seed=7)
        r1, m1, a1 = generate_scene(spec)
        r2, m2, a2 = generate_scene(spec)
        np.testing.assert_array_equal(r1.values, r2.values)
        assert m1 == m2 and a1 == a2

    def test_aligned_scenes_always_exact(self):
        for seed in range(20):
            spec = SceneSpec(seed=seed)
            _, masks, exact = generate_scene(spec)
            extent = spec.grid_h * spec.grid_w * spec.pixel_size_m**2
            assert structural_area(masks, extent_m2=extent) == pytest.approx(exact)

    def test_subpixel_scenes_meet_quantization_bound(self):
        for seed in range(20):
            spec = SceneSpec(subpixel=True, seed=seed)
            _, masks, exact = generate_scene(spec)
            extent = spec.grid_h * spec.grid_w * spec.pixel_size_m**2
            if len(masks) == 0:
                continue
            bound = extent * perimeter_pixels(masks) / (spec.grid_h * spec.grid_w)
            err = abs(structural_area(masks, extent_m2=extent) - exact)
            assert err <= bound

    def test_exact_area_is_sum_of_rectangles(self):
        spec = SceneSpec(n_structures=(4, 4), seed=3)
        _, masks, exact = generate_scene(spec)
        # rectangles never overlap, so the union equals the sum of pixel counts
        assert sum(m.pixel_count for m in masks.instances) == \
            pytest.approx(exact / spec.pixel_size_m**2)

    def test_noise_never_alters_masks(self):
        quiet = SceneSpec(noise_sd=0.0, seed=4)
        noisy = SceneSpec(noise_sd=0.1, seed=4)
        _, m_quiet, _ = generate_scene(quiet)
        _, m_noisy, _ = generate_scene(noisy)
        assert m_quiet == m_noisy

    def test_raster_values_in_unit_interval(self):
        raster, _, _ = generate_scene(SceneSpec(noise_sd=0.3, seed=5))
        assert raster.values.min() >= 0.0 and raster.values.max() <= 1.0

    def test_impossible_packing_raises(self):
        spec = SceneSpec(grid_h=16, grid_w=16, pixel_size_m=10.0,
                         n_structures=(30, 30), rect_size_m=(80.0, 150.0), seed=6)
        with pytest.raises(SceneGenerationError):
            generate_scene(spec)


class TestPerturbMasks:
    def _scene_masks(self, seed=0):
        spec = SceneSpec(grid_h=96, grid_w=96, pixel_size_m=1.0,
                         n_structures=(5, 5), rect_size_m=(12.0, 30.0), seed=seed)
        _, masks, _ = generate_scene(spec)
        return masks

    def test_target_one_is_identity(self):
        truths = self._scene_masks()
        preds, achieved = perturb_masks(truths, 1.0)
        assert preds.instances == truths.instances
        assert all(a == 1.0 for a in achieved)
        assert average_precision(preds, truths, 0.99) == 1.0

    def test_achieved_within_tolerance(self):
        truths = self._scene_masks(seed=1)
        for target in (0.3, 0.5, 0.7, 0.9):
            _, achieved = perturb_masks(truths, target)
            assert all(abs(a - target) <= 0.05 for a in achieved)

    def test_low_target_gives_zero_ap_at_half(self):
        truths = self._scene_masks(seed=2)
        preds, achieved = perturb_masks(truths, 0.4)
        assert all(a < 0.5 for a in achieved)
        assert average_precision(preds, truths, 0.5) == 0.0

    def test_mixed_targets_constructed_ap(self):
        high = self._scene_masks(seed=3)
        low = self._scene_masks(seed=4)
        p_high, a_high = perturb_masks(high, 0.8)
        p_low, a_low = perturb_masks(low, 0.2)
        assert all(a >= 0.5 for a in a_high)
        assert all(a < 0.5 for a in a_low)
        k, m = len(p_high), len(p_low)
        # disjoint grids would be cleaner, but stacking onto one grid works:
        # high truths matched by their perturbations, low ones missed
        preds = MaskSet(grid_h=96, grid_w=96,
                        instances=p_high.instances + p_low.instances)
        truths = MaskSet(grid_h=96, grid_w=96,
                         instances=high.instances + low.instances)
        assert average_precision(preds, truths, 0.5) == pytest.approx(k / (k + m))

    def test_instance_count_preserved(self):
        truths = self._scene_masks(seed=5)
        preds, _ = perturb_masks(truths, 0.6)
        assert len(preds) == len(truths)

    def test_degenerate_mask_unattainable(self):
        one_px = MaskSet(grid_h=8, grid_w=8,
                         instances=(InstanceMask(grid_h=8, grid_w=8, runs=((9, 1),)),))
        with pytest.raises(SceneGenerationError):
            perturb_masks(one_px, 0.5)


class TestGrowthSeries:
    def test_flat_series(self):
        g = GrowthSpec(years=(2018, 2019, 2020, 2021), base_area_m2=100_000.0,
                       growth_m2_per_year=0.0)
        series = growth_series(g, SceneSpec(seed=0))
        assert len(set(series.exact_areas)) == 1
        report = yearly_trend(list(zip(series.years, series.exact_areas)))
        assert report.pct_change_per_year == pytest.approx(0.0, abs=1e-9)

    def test_recovers_injected_decline(self):
        base = 200_000.0
        g = GrowthSpec(years=(2018, 2019, 2020, 2021), base_area_m2=base,
                       growth_m2_per_year=-0.075 * base)
        series = growth_series(g, SceneSpec(seed=1))
        report = yearly_trend(list(zip(series.years, series.exact_areas)))
        assert report.pct_change_per_year == pytest.approx(-7.5, abs=1.0)
        assert report.pct_change_total == pytest.approx(report.pct_change_per_year * 3)

    def test_area_out_of_range(self):
        g = GrowthSpec(years=(2018, 2019), base_area_m2=100.0,
                       growth_m2_per_year=-200.0)
        with pytest.raises(SceneGenerationError):
            growth_series(g, SceneSpec(seed=2))

    def test_masks_match_recorded_area(self):
        g = GrowthSpec(years=(2018, 2020, 2021), base_area_m2=80_000.0,
                       growth_m2_per_year=5_000.0)
        series = growth_series(g, SceneSpec(seed=3))
        for ysc in series.scenes:
            extent = 64 * 64 * 12.5**2
            assert structural_area(ysc.masks, extent_m2=extent) == \
                pytest.approx(ysc.exact_area_m2)

    def test_fleet_mean_change_tracks_generator(self, tmp_path):
        n = 50
        truth = write_fleet(tmp_path, n_sites=n, years=(2018, 2021), seed=9,
                            growth_mean_m2=4_000.0, growth_sd_m2=2_000.0)
        from sitegauge.dataset import load_observations, attach_labels, ingest_catalog

        sites = ingest_catalog(tmp_path / "sites.csv")
        obs = load_observations(tmp_path / "observations.jsonl")
        labeled, _ = attach_labels(obs, sites, tmp_path)
        changes = []
        by_site = {}
        for o in labeled:
            by_site.setdefault(o.site_id, []).append((o.acquired, o.area_label_m2))
        for sid, items in by_site.items():
            changes.append(site_change(items))
        injected = [3 * t["injected_growth_m2_per_year"] for t in truth["sites"].values()]
        sd = np.std(injected, ddof=1)
        assert np.mean(changes) == pytest.approx(np.mean(injected),
                                                 abs=2 * sd / np.sqrt(n) + 200)

    def test_fleet_determinism(self, tmp_path):
        a_dir, b_dir = tmp_path / "a", tmp_path / "b"
        write_fleet(a_dir, n_sites=3, years=(2019, 2020), seed=11, with_ntl=True)
        write_fleet(b_dir, n_sites=3, years=(2019, 2020), seed=11, with_ntl=True)
        for rel in sorted(p.relative_to(a_dir) for p in a_dir.rglob("*") if p.is_file()):
            assert (a_dir / rel).read_bytes() == (b_dir / rel).read_bytes(), rel
