import json
import math

import numpy as np
import pytest

from loftseg import GrayImage16, LesionBlob, PhantomSpec, generate
from loftseg.phantoms import load_spec, spec_from_dict, spec_to_dict, write_set


def test_flat_two_class_histogram():
    spec = PhantomSpec(seed=1, dark_sigma=0.0, bright_sigma=0.0, noise=0.0, texture_scale=0.0)
    ph = generate(spec)
    counts = np.bincount(ph.image.pixels.ravel(), minlength=65536)
    nonzero = set(np.flatnonzero(counts[1:]) + 1)  # intensities > 0 present
    assert nonzero == {450, 1100}


def test_fixed_seed_bit_identical():
    spec = PhantomSpec(seed=77, noise=0.25)
    a = generate(spec)
    b = generate(spec)
    assert np.array_equal(a.image.pixels, b.image.pixels)
    assert np.array_equal(a.dark_class.bits, b.dark_class.bits)


def test_different_seeds_differ():
    a = generate(PhantomSpec(seed=1, noise=0.2))
    b = generate(PhantomSpec(seed=2, noise=0.2))
    assert not np.array_equal(a.image.pixels, b.image.pixels)


def test_truth_masks_nested():
    blob = LesionBlob(cx=224.0, cy=224.0, r=10.0, intensity=1500)
    ph = generate(PhantomSpec(seed=4, lesions=(blob,), noise=0.1))
    assert not (ph.dark_class.bits & ~ph.body.bits).any()
    assert not (ph.lesions.bits & ~ph.body.bits).any()
    assert not (ph.lesions.bits & ph.dark_class.bits).any()
    assert ph.lesions.count() > 0


def test_gain_ramp_applied():
    spec = PhantomSpec(seed=6, dark_sigma=0.0, bright_sigma=0.0, blob_count=0, noise=0.0,
                       texture_scale=0.0, gain=(0.7, 1.3))
    ph = generate(spec)
    body = ph.body.bits
    left = ph.image.pixels[body & (np.arange(spec.width) < 160)]
    right = ph.image.pixels[body & (np.arange(spec.width) > 288)]
    assert left.mean() < right.mean()


def test_spec_validation():
    with pytest.raises(ValueError, match="separated"):
        PhantomSpec(seed=1, dark_mean=500, bright_mean=700, dark_sigma=60, bright_sigma=80)
    with pytest.raises(ValueError):
        PhantomSpec(seed=1, noise=1.5)
    with pytest.raises(ValueError):
        PhantomSpec(seed=1, band=(600.0, 300.0))
    with pytest.raises(ValueError):
        LesionBlob(cx=0, cy=0, r=-1, intensity=100)


def test_spec_requires_seed():
    with pytest.raises(ValueError, match="seed"):
        spec_from_dict({"width": 64, "height": 64})


def test_spec_json_round_trip():
    spec = PhantomSpec(
        seed=9,
        band=(300.0, 600.0),
        lesions=(LesionBlob(cx=100.0, cy=120.0, r=8.0, intensity=850),),
        noise=0.1,
    )
    back = spec_from_dict(json.loads(json.dumps(spec_to_dict(spec))))
    assert back == spec


def test_write_set_and_reload(tmp_path):
    from loftseg import read_image, read_mask

    spec = PhantomSpec(seed=13, noise=0.15)
    manifest = write_set(spec, str(tmp_path))
    assert (tmp_path / "manifest.json").exists()
    ph = generate(spec)
    img = read_image(str(tmp_path / manifest["files"]["image"]))
    assert np.array_equal(img.pixels, ph.image.pixels)
    body = read_mask(str(tmp_path / manifest["files"]["body"]))
    assert np.array_equal(body.bits, ph.body.bits)
    reloaded = load_spec_path(tmp_path)
    assert reloaded == spec


def load_spec_path(tmp_path):
    with open(tmp_path / "manifest.json") as fh:
        return spec_from_dict(json.load(fh)["spec"])


def mixture_pdf(xs, wd, m1, s1, m2, s2):
    a = wd * np.exp(-0.5 * ((xs - m1) / s1) ** 2) / (s1 * math.sqrt(2 * math.pi))
    b = (1 - wd) * np.exp(-0.5 * ((xs - m2) / s2) ** 2) / (s2 * math.sqrt(2 * math.pi))
    return a + b


def test_histogram_valley_matches_mixture_pdf():
    # Overlapping classes keep the valley populated, so the smoothed-histogram
    # argmin is a meaningful estimator of the pdf valley on a large sample.
    m1, s1, m2, s2 = 400.0, 90.0, 1000.0, 95.0
    spec = PhantomSpec(
        seed=17, width=1024, height=1024,
        dark_mean=m1, dark_sigma=s1, bright_mean=m2, bright_sigma=s2,
        blob_count=160, blob_radius=(10.0, 24.0), noise=0.0, texture_scale=0.0,
    )
    ph = generate(spec)
    wd = ph.dark_class.count() / ph.body.count()
    xs = np.arange(int(m1), int(m2) + 1, dtype=np.float64)
    pdf_valley = float(xs[np.argmin(mixture_pdf(xs, wd, m1, s1, m2, s2))])

    counts = np.bincount(ph.image.pixels[ph.body.bits], minlength=65536).astype(np.int64)
    kernel = np.ones(5) / 5.0
    smoothed = np.convolve(counts.astype(float), kernel, mode="same")
    window = (xs >= m1 + 2 * s1) & (xs <= m2 - 2 * s2)
    hist_valley = float(xs[window][np.argmin(smoothed[int(m1) : int(m2) + 1][window])])
    assert abs(hist_valley - pdf_valley) <= 15
