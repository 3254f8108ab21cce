import numpy as np

from mfcontract import rng


def test_rows_do_not_depend_on_total_or_workers():
    full = rng.normals(7, "equilibrium", 10_000, 5)
    threaded = rng.normals(7, "equilibrium", 10_000, 5, workers=3)
    part = rng.normals(7, "equilibrium", 3000, 5, start=4000)
    assert np.array_equal(full, threaded)
    assert np.array_equal(full[4000:7000], part)


def test_streams_and_seeds_differ():
    a = rng.normals(1, "agent", 100, 3)
    assert not np.array_equal(a, rng.normals(1, "equilibrium", 100, 3))
    assert not np.array_equal(a, rng.normals(2, "agent", 100, 3))


def test_moments_and_empty():
    z = rng.normals(42, "reference", 200_000, 1)[:, 0]
    assert abs(z.mean()) < 4 / np.sqrt(z.size)
    assert abs(z.var() - 1) < 4 * np.sqrt(2 / z.size)
    assert rng.normals(0, 1, 0, 4).shape == (0, 4)
