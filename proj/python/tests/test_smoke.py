import json
import math
import pathlib

import numpy as np
import pytest

import gaussrt

DATA = pathlib.Path(__file__).resolve().parents[2] / "data"


def test_ray_integral_through_center():
    s = 0.3
    g = gaussrt.Gaussian(scales=(s, s, s), magnitude=4 * math.pi * s * s)
    # half the line integral through the center is one
    assert gaussrt.ray_integral(g, (0, 0, -5), (0, 0, 1)) == pytest.approx(2, rel=1e-12)


def test_scene_json_round_trip():
    scene = gaussrt.random_gaussian_scene(10, seed=3)
    back = gaussrt.scene_from_json(scene.to_json())
    assert len(back) == 10
    assert back.primitives[4].mu == scene.primitives[4].mu
    assert json.loads(back.to_json())["version"] == 1


def test_render_and_transmittance():
    scene = gaussrt.load_scene(str(DATA / "small_scene.json"))
    img = gaussrt.render(scene, width=12, height=8, spp=2, seed=1)
    assert img.shape == (8, 12, 3)
    assert img.dtype == np.float32
    assert np.isfinite(img).all()
    t = gaussrt.render_transmittance(scene, width=12, height=8)
    c = gaussrt.relaxed_cdf_image(scene, width=12, height=8)
    assert t.shape == (8, 12)
    assert np.array_equal(t, np.maximum(0, 1 - c))
    assert t.min() < 1


def test_free_flight_and_transmittance():
    scene = gaussrt.load_scene(str(DATA / "small_scene.json"))
    origin, direction = (0.4, 0.1, 3), (0, 0, -1)
    t = gaussrt.transmittance(scene, origin, direction)
    assert 0 < t < 1
    # u beyond the accumulated CDF escapes
    assert gaussrt.sample_free_flight(scene, origin, direction, 1 - t / 2) is None
    hit = gaussrt.sample_free_flight(scene, origin, direction, 0.01)
    assert hit is not None and hit[0] in (0, 1) and hit[1] > 0


def test_convert_mesh():
    scene = gaussrt.convert_mesh(str(DATA / "square.obj"), count=40, samples=32)
    assert len(scene) > 0
    assert scene.material_count >= 1


def test_optimize_reduces_loss():
    scene = gaussrt.random_gaussian_scene(5, seed=4)
    cam = gaussrt.Camera(position=(0, 0, 4))
    target = gaussrt.render_transmittance(scene, cam, 16, 16)
    prims = scene.primitives
    for p in prims:
        p.scales = tuple(0.9 * s for s in p.scales)
    scene.primitives = prims
    fitted, history = gaussrt.optimize(scene, [(cam, target)], iterations=10, lr=2e-3,
                                       jitter=False)
    assert len(history) == 11
    assert history[-1] < history[0]
    assert len(fitted) == 5


def test_validate_gradients():
    passed, report = gaussrt.validate("gradients", samples=1000)
    assert passed
    assert json.loads(report)["checks"]


def test_errors():
    with pytest.raises(OSError):
        gaussrt.load_scene("/nonexistent/scene.json")
    with pytest.raises(ValueError):
        gaussrt.scene_from_json('{"version": 1}')
    with pytest.raises(ValueError):
        gaussrt.render(gaussrt.random_gaussian_scene(1), mode="sideways")
