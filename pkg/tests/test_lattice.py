import numpy as np
import pytest

from lattice_additive.lattice import (
    FOUR_NEIGHBORS,
    LatticeField,
    NeighborScheme,
    NoInteriorSitesError,
    RegressionSample,
    checkerboard_coding,
    extract_samples,
    read_csv_field,
    read_field,
    read_pgm,
    write_csv_field,
)


def test_one_based_indexing(ramp_field):
    assert ramp_field[1, 1] == 0.0
    assert ramp_field[3, 4] == 11.0
    assert ramp_field.shape == (3, 4)


def test_field_rejects_bad_values():
    with pytest.raises(ValueError):
        LatticeField(np.array([1.0, 2.0]))
    with pytest.raises(ValueError):
        LatticeField(np.array([[1.0, np.nan]]))


def test_window(ramp_field):
    w = ramp_field.window(2, 2, 2, 3)
    np.testing.assert_array_equal(w.values, [[5, 6, 7], [9, 10, 11]])
    with pytest.raises(ValueError):
        ramp_field.window(2, 2, 3, 3)


def test_scheme_parse_roundtrip():
    s = NeighborScheme.parse("-1,0;0,-1;1,0;0,1")
    assert s.d == 4
    assert NeighborScheme.parse(s.format()) == s
    with pytest.raises(ValueError):
        NeighborScheme.parse("1,0;1,0")
    with pytest.raises(ValueError):
        NeighborScheme.parse("0,0")
    with pytest.raises(ValueError):
        NeighborScheme.parse("1,0,2")


def test_extract_single_interior_site():
    field = LatticeField(np.arange(9, dtype=float).reshape(3, 3))
    sample = extract_samples(field, FOUR_NEIGHBORS)
    assert sample.n == 1
    assert sample.responses[0] == 4.0
    # north, west, south, east of the centre
    np.testing.assert_array_equal(sample.designs[0], [1, 3, 7, 5])
    np.testing.assert_array_equal(sample.sites[0], [2, 2])


def test_extract_unilateral_scheme(ramp_field):
    sample = extract_samples(ramp_field, NeighborScheme(((1, 0), (0, 1))))
    assert sample.n == 2 * 3
    v = ramp_field.values
    for (u, c), y, x in zip(sample.sites, sample.responses, sample.designs):
        assert y == v[u - 1, c - 1]
        assert x[0] == v[u - 2, c - 1] and x[1] == v[u - 1, c - 2]
    # raster order
    assert [tuple(s) for s in sample.sites] == sorted(tuple(s) for s in sample.sites)


def test_no_interior_sites():
    with pytest.raises(NoInteriorSitesError):
        extract_samples(LatticeField(np.zeros((2, 5))), FOUR_NEIGHBORS)


def test_checkerboard_codes_are_independent_sets():
    part = checkerboard_coding(LatticeField(np.zeros((6, 7))))
    a = {tuple(s) for s in part.code_a}
    b = {tuple(s) for s in part.code_b}
    assert len(a) + len(b) == 4 * 5 and not a & b
    for u, v in a:
        for du, dv in FOUR_NEIGHBORS.offsets:
            assert (u + du, v + dv) not in a


def test_sample_without():
    s = RegressionSample.from_arrays(np.arange(10.0).reshape(5, 2), np.arange(5.0))
    t = s.without([1, 3])
    np.testing.assert_array_equal(t.responses, [0, 2, 4])
    assert t.d == 2


def test_csv_roundtrip_is_exact(tmp_path, rng):
    field = LatticeField(rng.normal(size=(4, 5)))
    path = tmp_path / "f.csv"
    write_csv_field(field, path)
    back = read_csv_field(path)
    np.testing.assert_array_equal(back.values, field.values)


def test_csv_ragged_rows_rejected(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("1,2\n3\n")
    with pytest.raises(ValueError):
        read_csv_field(path)


def test_pgm_ascii_and_binary(tmp_path):
    img = np.array([[0, 10, 255], [7, 8, 9]])
    p2 = tmp_path / "a.pgm"
    p2.write_text("P2\n# comment\n3 2\n255\n" + " ".join(map(str, img.ravel())) + "\n")
    np.testing.assert_array_equal(read_pgm(p2).values, img)

    p5 = tmp_path / "b.pgm"
    p5.write_bytes(b"P5\n3 2\n255\n" + img.astype("u1").tobytes())
    np.testing.assert_array_equal(read_field(p5).values, img)

    wide = np.array([[0, 300, 65535], [1, 2, 3]])
    p16 = tmp_path / "c.pgm"
    p16.write_bytes(b"P5 3 2 65535\n" + wide.astype(">u2").tobytes())
    np.testing.assert_array_equal(read_pgm(p16).values, wide)


def test_pgm_truncated(tmp_path):
    p = tmp_path / "t.pgm"
    p.write_bytes(b"P5\n3 2\n255\n\x00\x01")
    with pytest.raises(ValueError):
        read_pgm(p)
