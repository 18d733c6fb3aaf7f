import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gustvqa.beaufort import DEFAULT_TABLE, GROUPS
from gustvqa.grid import Blob, SyntheticSpec, WindGrid, synth_grid
from gustvqa.raster import RasterImage, geo_to_pixel, pixel_to_geo
from gustvqa.render import RenderConfig, render
from gustvqa.spot import (
    DEFAULT_HSV,
    SpotConfig,
    SpotResult,
    allocate_points,
    annotate,
    color_mask,
    find_contours,
    kmeans,
    kmeans_fit,
    representative_points,
    run_spot,
)

RGB = {lv: DEFAULT_TABLE.bands[lv].rgb for lv in range(13)}


def image_of(levels):
    levels = np.asarray(levels)
    return RasterImage(DEFAULT_TABLE.colors[levels])


def test_mask_uniform():
    img = image_of(np.full((4, 6), 10))
    assert color_mask(img, "red").all()
    assert not color_mask(image_of(np.zeros((4, 6), int)), "red").any()


def test_mask_half_and_half():
    lv = np.full((4, 8), 4)
    lv[:, 4:] = 11
    m = color_mask(image_of(lv), "red")
    assert m[:, 4:].all() and not m[:, :4].any()


def test_mask_unknown_color():
    with pytest.raises(ValueError):
        color_mask(image_of(np.zeros((2, 2), int)), "blue")


def test_exact_masks_partition_palette_pixels():
    lv = np.arange(13).reshape(1, 13).repeat(3, axis=0)
    img = image_of(lv)
    masks = [color_mask(img, g) for g in GROUPS]
    assert np.all(sum(m.astype(int) for m in masks) == 1)


def test_hsv_mode_separates_group_representatives():
    cfg = SpotConfig(match_mode="hsv")
    reps = {"white": 0, "green": 3, "yellow": 6, "red": 9}
    for group, level in reps.items():
        img = image_of(np.full((2, 2), level))
        hits = [g for g in GROUPS if color_mask(img, g, cfg).all()]
        assert hits == [group], (group, hits)


def test_hsv_red_hue_wraps():
    r = DEFAULT_HSV["red"]
    h = np.array([350.0, 5.0, 100.0])
    s = v = np.full(3, 80.0)
    assert r.contains(h, s, v).tolist() == [True, True, False]


def test_contours_empty():
    assert find_contours(np.zeros((10, 10), bool)) == []


def test_contour_square():
    m = np.zeros((20, 20), bool)
    m[5:15, 3:13] = True
    (c,) = find_contours(m)
    assert c.area_px == 100
    b = set(c.boundary)
    expected = {(x, y) for x in range(3, 13) for y in (5, 14)} | {(x, y) for y in range(5, 15) for x in (3, 12)}
    assert b == expected
    assert c.boundary[0] == (3, 5)
    assert all(m[y, x] for x, y in c.boundary)
    # closed: last boundary pixel is 8-adjacent to the first
    (x0, y0), (x1, y1) = c.boundary[0], c.boundary[-1]
    assert max(abs(x0 - x1), abs(y0 - y1)) == 1


def test_contours_below_min_area_dropped():
    m = np.zeros((20, 20), bool)
    m[0:5, 0:5] = True
    m[10:15, 10:15] = True
    assert find_contours(m, min_area=30) == []
    assert [c.area_px for c in find_contours(m, min_area=25)] == [25, 25]


def test_diagonal_pixels_are_one_component():
    m = np.eye(12, dtype=bool)
    (c,) = find_contours(m, min_area=1)
    assert c.area_px == 12


def test_ring_hole_not_a_contour():
    m = np.zeros((12, 12), bool)
    m[1:11, 1:11] = True
    m[4:8, 4:8] = False
    (c,) = find_contours(m, min_area=1)
    assert c.area_px == 84
    assert all(not (4 <= x < 8 and 4 <= y < 8) for x, y in c.boundary)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_contours_cover_components(seed):
    rng = np.random.default_rng(seed)
    m = rng.random((25, 25)) < 0.45
    from scipy import ndimage

    labels, n = ndimage.label(m, structure=np.ones((3, 3)))
    sizes = sorted(int((labels == i).sum()) for i in range(1, n + 1) if (labels == i).sum() >= 3)
    cs = find_contours(m, min_area=3)
    assert sorted(c.area_px for c in cs) == sizes
    for c in cs:
        assert all(m[y, x] for x, y in c.boundary)


class _C:
    def __init__(self, area):
        self.area_px = area


@pytest.mark.parametrize(
    "areas,budget,expected",
    [([500], 20, [10]), ([100, 100], 8, [4, 4]), ([10, 990], 10, [1, 10])],
)
def test_allocate(areas, budget, expected):
    cfg = SpotConfig(point_budget_per_color=budget, max_points_per_region=10)
    assert allocate_points([_C(a) for a in areas], cfg) == expected


@given(st.lists(st.integers(1, 10_000), min_size=1, max_size=30), st.integers(1, 50), st.integers(1, 12))
def test_allocate_bounds(areas, budget, cap):
    out = allocate_points([_C(a) for a in areas], SpotConfig(point_budget_per_color=budget, max_points_per_region=cap))
    assert all(1 <= k <= cap for k in out)


def test_kmeans_identity_and_constant():
    pts = [(1, 2), (5, 5), (9, 0)]
    assert sorted(map(tuple, kmeans(pts, 3).tolist())) == sorted(map(lambda p: (float(p[0]), float(p[1])), pts))
    assert kmeans([(3, 4)] * 7, 1).tolist() == [[3.0, 4.0]]


def test_kmeans_two_clusters():
    c = kmeans([(0, 0), (0, 2), (10, 0), (10, 2)], 2, seed=5)
    assert sorted(map(tuple, c.tolist())) == [(0.0, 1.0), (10.0, 1.0)]


def test_kmeans_errors():
    with pytest.raises(ValueError):
        kmeans([(0, 0)], 2)
    with pytest.raises(ValueError):
        kmeans([(0, 0)], 0)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 6))
def test_kmeans_inertia_non_increasing_and_deterministic(seed, k):
    pts = np.random.default_rng(seed).normal(size=(60, 2)) * 10
    r = kmeans_fit(pts, k, seed=seed)
    h = r.inertia_history
    assert all(b <= a + 1e-9 * max(1.0, a) for a, b in zip(h, h[1:]))
    assert np.array_equal(r.centroids, kmeans_fit(pts, k, seed=seed).centroids)


def test_kmeans_empty_cluster_reseeded():
    # duplicate points force k-means++ to fall back, and Lloyd must still give k distinct centroids
    pts = [(0, 0)] * 5 + [(10, 10)] * 5 + [(20, 0)]
    c = kmeans(pts, 3, seed=1)
    assert len({tuple(x) for x in c.tolist()}) == 3


def test_rep_points_small_region():
    m = np.zeros((5, 5), bool)
    m[2, 1:4] = True
    (c,) = find_contours(m, min_area=1)
    assert sorted(representative_points(m, c, 5)) == [(1, 2), (2, 2), (3, 2)]


def test_rep_points_disc_centre():
    yy, xx = np.mgrid[0:41, 0:41]
    m = (xx - 20) ** 2 + (yy - 20) ** 2 <= 15**2
    (c,) = find_contours(m)
    (p,) = representative_points(m, c, 1)
    assert p == (20, 20) and m[p[1], p[0]]


def test_rep_points_concave_snapped():
    m = np.zeros((30, 30), bool)
    m[5:25, 5:10] = True
    m[5:25, 20:25] = True
    m[20:25, 5:25] = True  # U open at the top
    (c,) = find_contours(m)
    (p,) = representative_points(m, c, 1)
    assert m[p[1], p[0]]
    # oracle: the rounded centroid of the eroded region, snapped to the nearest region pixel
    from scipy import ndimage

    er = ndimage.binary_erosion(m, structure=np.ones((3, 3)))
    ys, xs = np.nonzero(er)
    cx, cy = math.floor(xs.mean() + 0.5), math.floor(ys.mean() + 0.5)
    assert not m[cy, cx]
    ry, rx = np.nonzero(m)
    d = (rx - cx) ** 2 + (ry - cy) ** 2
    best = min(zip(d, ry, rx))
    assert p == (int(best[2]), int(best[1]))


def test_rep_points_thin_region_falls_back():
    m = np.zeros((10, 60), bool)
    m[5, 2:58] = True  # erosion would remove everything
    (c,) = find_contours(m)
    pts = representative_points(m, c, 4)
    assert len(pts) == 4 and all(m[y, x] for x, y in pts)


def test_rep_points_rejects_k_zero():
    m = np.ones((3, 3), bool)
    (c,) = find_contours(m, min_area=1)
    with pytest.raises(ValueError):
        representative_points(m, c, 0)


def one_storm_image(w=180, h=90):
    spec = SyntheticSpec(nlat=45, nlon=90, blobs=[Blob(10.0, 30.0, 35.0, 8.0)], background_speed=1.0)
    return render(synth_grid(spec), RenderConfig(width=w, height=h, overlay_coastlines=False))


def test_run_spot_blank():
    r = run_spot(image_of(np.zeros((20, 40), int)), ["red", "yellow"])
    assert r.colors == {"red": [], "yellow": []}


def test_run_spot_one_storm():
    img = one_storm_image()
    r = run_spot(img, ["red"])
    assert len(r.colors["red"]) == 1
    region = r.colors["red"][0]
    mask = color_mask(img, "red")
    assert region.pixel_points and all(mask[y, x] for x, y in region.pixel_points)
    assert len(region.pixel_points) == len(region.geo_points)
    for (x, y), g in zip(region.pixel_points, region.geo_points):
        assert g == pytest.approx(pixel_to_geo((x, y), img.width, img.height))


def test_run_spot_deterministic_and_json_round_trip():
    img = one_storm_image()
    a = run_spot(img, GROUPS, SpotConfig(), image_ref="x.png")
    b = run_spot(img, GROUPS, SpotConfig(), image_ref="x.png")
    assert a.to_json() == b.to_json()
    import json

    d = json.loads(a.to_json())
    assert set(d) >= {"image", "width", "height", "colors"}
    assert SpotResult.from_dict(d).to_json() == a.to_json()
    for regions in d["colors"].values():
        for r in regions:
            for lat, lon in r["geo_points"]:
                assert round(lat, 4) == lat and round(lon, 4) == lon


def test_coverage_every_component_gets_a_point():
    lv = np.zeros((60, 120), int)
    lv[5:15, 5:15] = 10
    lv[30:50, 60:100] = 9
    lv[52:59, 2:12] = 12
    img = image_of(lv)
    r = run_spot(img, ["red"])
    assert len(r.colors["red"]) == 3 and all(len(x.pixel_points) >= 1 for x in r.colors["red"])


def test_annotate():
    img = one_storm_image()
    empty = SpotResult("x", img.width, img.height, (90, -90, -180, 180), {})
    assert annotate(img, empty) == img
    r = run_spot(img, ["red"])
    r.colors["red"][0].pixel_points = r.colors["red"][0].pixel_points[:1]
    (x, y) = r.colors["red"][0].pixel_points[0]
    out = annotate(img, r, radius=2, rgb=(1, 2, 3))
    changed = np.argwhere(np.any(out.pixels != img.pixels, axis=-1))
    disc = {(y + dy, x + dx) for dy in range(-2, 3) for dx in range(-2, 3) if dx * dx + dy * dy <= 4}
    assert {tuple(p) for p in changed} == disc


def test_annotate_clips_at_frame_edge():
    img = image_of(np.zeros((10, 10), int))
    from gustvqa.spot import SpotRegion

    res = SpotResult("x", 10, 10, (90, -90, -180, 180), {"red": [SpotRegion(0, 1, None, [(0, 0), (9, 9)], [(0, 0), (0, 0)])]})
    out = annotate(img, res, radius=3)
    assert out.pixels.shape == img.pixels.shape
    assert tuple(out.pixels[0, 0]) == (128, 0, 128) and tuple(out.pixels[9, 9]) == (128, 0, 128)


def test_geo_points_map_back_into_mask():
    img = one_storm_image(360, 180)
    r = run_spot(img, ["red", "yellow"])
    for color, regions in r.colors.items():
        mask = color_mask(img, color)
        for region in regions:
            for lat, lon in region.geo_points:
                x, y = geo_to_pixel((round(lat, 4), round(lon, 4)), img.width, img.height)
                assert mask[y, x]
