import math

import numpy as np
import pytest

from demforge import (DynamicRange, OcclusionMask, dynamic_range,
                      occluded_errors, psnr_occ, ssim)
from demforge.metrics import MetricsReport, report

from conftest import make_grid, random_grid


def naive_ssim(x, y, L):
    """Direct per-pixel SSIM: explicit 11x11 Gaussian window, renormalized at
    borders, three comparison terms with unit exponents. Deliberately slow and
    loop-based so it shares no code with the library implementation."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    rows, cols = x.shape
    half = 5
    ax = np.arange(-half, half + 1)
    k1d = np.exp(-(ax ** 2) / (2 * 1.5 ** 2))
    kernel = np.outer(k1d, k1d)
    c1 = (0.01 * L) ** 2
    c2 = (0.03 * L) ** 2
    c3 = c2 / 2.0
    total = 0.0
    for i in range(rows):
        for j in range(cols):
            i0, i1 = max(0, i - half), min(rows, i + half + 1)
            j0, j1 = max(0, j - half), min(cols, j + half + 1)
            w = kernel[i0 - i + half:i1 - i + half, j0 - j + half:j1 - j + half]
            w = w / w.sum()
            px = x[i0:i1, j0:j1]
            py = y[i0:i1, j0:j1]
            mx = (w * px).sum()
            my = (w * py).sum()
            vx = max((w * px * px).sum() - mx * mx, 0.0)
            vy = max((w * py * py).sum() - my * my, 0.0)
            cov = (w * px * py).sum() - mx * my
            lum = (2 * mx * my + c1) / (mx * mx + my * my + c1)
            con = (2 * math.sqrt(vx) * math.sqrt(vy) + c2) / (vx + vy + c2)
            stru = (cov + c3) / (math.sqrt(vx) * math.sqrt(vy) + c3)
            total += lum * con * stru
    return total / (rows * cols)


class TestDynamicRange:
    def test_constant_split(self):
        g = make_grid(np.full((4, 4), 1.0))
        assert dynamic_range([g]).L == 0.0

    def test_extremes(self):
        a = make_grid(np.full((2, 2), 2.0))
        b = make_grid(np.full((2, 2), -1.0))
        assert dynamic_range([a, b]).L == 3.0

    def test_ignores_missing(self):
        cells = np.array([[1.0, np.nan], [2.0, np.nan]])
        assert dynamic_range([make_grid(cells)]).L == 1.0

    def test_empty_split(self):
        with pytest.raises(ValueError):
            dynamic_range([])
        with pytest.raises(ValueError):
            dynamic_range([make_grid(np.full((2, 2), np.nan))])


class TestOccludedErrors:
    def test_perfect_reconstruction(self, rng):
        g = random_grid(rng)
        mask = OcclusionMask(g.geometry, np.ones(g.geometry.shape, dtype=np.uint8))
        assert occluded_errors(g, g, mask) == (0.0, 0.0)

    def test_single_cell(self):
        gt = make_grid([[1.0, 2.0]])
        rec = make_grid([[1.0, 3.0]])
        mask = OcclusionMask(gt.geometry, np.array([[0, 1]]))
        l1, mse = occluded_errors(gt, rec, mask)
        assert l1 == 1.0
        assert mse == 1.0

    def test_random_matches_direct_summation(self, rng):
        for _ in range(10):
            gt = random_grid(rng, 16, 16)
            rec = random_grid(rng, 16, 16)
            bits = (rng.random((16, 16)) < 0.4).astype(np.uint8)
            if not bits.any():
                continue
            mask = OcclusionMask(gt.geometry, bits)
            l1, mse = occluded_errors(gt, rec, mask)
            d = gt.cells.astype(np.float64) - rec.cells.astype(np.float64)
            sel = bits.astype(bool)
            assert l1 == pytest.approx(np.abs(d[sel]).mean(), rel=1e-12)
            assert mse == pytest.approx((d[sel] ** 2).mean(), rel=1e-12)

    def test_ignores_missing_ground_truth(self):
        gt = make_grid([[np.nan, 2.0]])
        rec = make_grid([[9.0, 2.5]])
        mask = OcclusionMask(gt.geometry, np.array([[1, 1]]))
        l1, mse = occluded_errors(gt, rec, mask)
        assert l1 == pytest.approx(0.5)

    def test_empty_selection(self):
        gt = make_grid([[np.nan, 1.0]])
        rec = make_grid([[1.0, 1.0]])
        mask = OcclusionMask(gt.geometry, np.array([[1, 0]]))
        with pytest.raises(ValueError):
            occluded_errors(gt, rec, mask)


class TestPsnr:
    def test_analytic_cases(self):
        assert psnr_occ(4.0, 2.0) == 0.0
        assert psnr_occ(0.04, 2.0) == pytest.approx(20.0, abs=1e-12)

    def test_zero_mse_infinite(self):
        assert psnr_occ(0.0, 1.0) == math.inf

    def test_monotone_in_mse(self):
        assert psnr_occ(0.1, 1.0) > psnr_occ(0.2, 1.0)

    def test_bad_range(self):
        with pytest.raises(ValueError):
            psnr_occ(1.0, 0.0)


class TestSsim:
    def test_identity(self, rng):
        g = random_grid(rng, 64, 64)
        assert ssim(g, g, 1.0) == pytest.approx(1.0, abs=1e-9)

    def test_constant_shift_decomposition(self, rng):
        L = 1.0
        a = random_grid(rng, 32, 32)
        b = make_grid(a.cells + np.float32(L))
        v = ssim(a, b, L)
        assert v < 1.0  # luminance penalized
        assert v > 0.0  # structure unchanged

    def test_symmetry(self, rng):
        a = random_grid(rng, 32, 32)
        b = random_grid(rng, 32, 32)
        assert ssim(a, b, 1.0) == pytest.approx(ssim(b, a, 1.0), abs=1e-12)

    def test_missing_cells_rejected(self, rng):
        a = random_grid(rng, 8, 8, nan_prob=0.2)
        b = random_grid(rng, 8, 8)
        with pytest.raises(ValueError):
            ssim(a, b, 1.0)

    def test_matches_naive_oracle(self, rng):
        for _ in range(3):
            a = random_grid(rng, 32, 32)
            b = make_grid(a.cells + rng.normal(0, 0.1, (32, 32)).astype(np.float32))
            expected = naive_ssim(a.cells, b.cells, 1.0)
            assert ssim(a, b, 1.0) == pytest.approx(expected, abs=1e-6)


class TestReport:
    def test_report_fields(self, rng):
        gt = random_grid(rng, 16, 16)
        rec = random_grid(rng, 16, 16)
        bits = np.zeros((16, 16), dtype=np.uint8)
        bits[4:8, 4:8] = 1
        mask = OcclusionMask(gt.geometry, bits)
        rep = report(gt, rec, mask, L=1.0, comp=rec)
        assert rep.n_occluded_cells == 16
        assert rep.mse_occ >= 0.0
        assert -1.0 <= rep.ssim_rec <= 1.0

    def test_infinite_psnr_serialization(self):
        rep = MetricsReport(0.0, 0.0, math.inf, 1.0, 1.0, 4)
        d = rep.to_dict()
        assert d["psnr_occ"] is None
        assert d["psnr_occ_infinite"] is True
