import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from multibaker.errors import InvalidDimensionError, InvalidParameterError
from multibaker.hilbert import (
    MapParams,
    apply_operator,
    build_aft,
    build_baker,
    is_unitary,
    reflect_position,
    unitarity_error,
)
from oracles import aft_reference, baker_reference, bvs_symmetric_baker


def test_aft_dim_one():
    assert np.allclose(build_aft(1), [[-1j]], atol=1e-15)


def test_aft_dim_two():
    e = lambda x: cmath.exp(-1j * math.pi * x)
    expected = np.array([[e(1 / 4), e(3 / 4)], [e(3 / 4), e(9 / 4)]]) / math.sqrt(2)
    assert np.allclose(build_aft(2), expected, atol=1e-15)
    # 9/4 reduces to 1/4
    assert build_aft(2)[1, 1] == pytest.approx(build_aft(2)[0, 0], abs=1e-15)


@pytest.mark.parametrize("dim", [1, 2, 3, 4, 7, 8, 16, 32, 64])
def test_aft_matches_loop_reference(dim):
    assert np.max(np.abs(build_aft(dim) - aft_reference(dim))) < 1e-13


@pytest.mark.parametrize("dim", [2, 4, 8, 16, 32, 64])
def test_aft_unitary(dim):
    g = build_aft(dim)
    assert np.max(np.abs(g @ g.conj().T - np.eye(dim))) <= 1e-12
    assert unitarity_error(g) <= 1e-12


@pytest.mark.parametrize("dim", [1, 5, 16, 64])
def test_aft_symmetric(dim):
    g = build_aft(dim)
    assert np.array_equal(g, g.T)


@pytest.mark.parametrize("bad", [0, -3, 2.0, True, "4"])
def test_aft_rejects_bad_dimension(bad):
    with pytest.raises(InvalidDimensionError):
        build_aft(bad)


def test_params_derived_fields():
    p = MapParams(32, 17)
    assert (p.d2, p.s) == (15, 17 / 32)
    assert p.mirrored() == MapParams(32, 15)


@pytest.mark.parametrize("dim,d1", [(3, 1), (0, 1), (-2, 1), (8, 0), (8, 8), (8, -1)])
def test_params_rejects(dim, d1):
    with pytest.raises(InvalidParameterError):
        MapParams(dim, d1)


def test_params_rejects_odd_as_dimension_error():
    with pytest.raises(InvalidDimensionError):
        MapParams(31, 17)


def test_baker_two_one():
    assert np.allclose(build_baker(MapParams(2, 1)), -1j * build_aft(2).conj().T, atol=1e-15)


@pytest.mark.parametrize("dim,d1", [(32, 16), (32, 17), (32, 30), (64, 63), (16, 1)])
def test_baker_unitary(dim, d1):
    assert is_unitary(build_baker(MapParams(dim, d1)), 1e-12)


def test_baker_symmetric_bvs_dim_four():
    assert np.max(np.abs(build_baker(MapParams(4, 2)) - bvs_symmetric_baker(4))) < 1e-13


@pytest.mark.parametrize("dim,d1", [(4, 1), (4, 3), (6, 4), (8, 5), (10, 9)])
def test_baker_matches_loop_reference(dim, d1):
    assert np.max(np.abs(build_baker(MapParams(dim, d1)) - baker_reference(dim, d1))) < 1e-13


def test_baker_is_read_only():
    b = build_baker(MapParams(8, 5))
    with pytest.raises(ValueError):
        b[0, 0] = 0


@pytest.mark.parametrize("dim,d1", [(8, 5), (16, 9), (32, 30)])
def test_baker_block_structure(dim, d1):
    g = build_aft(dim)
    b = build_baker(MapParams(dim, d1))
    gb = g @ b
    assert np.max(np.abs(gb[:d1, :d1] - build_aft(d1))) <= 1e-12
    assert np.max(np.abs(gb[d1:, d1:] - build_aft(dim - d1))) <= 1e-12
    assert np.max(np.abs(gb[:d1, d1:])) <= 1e-12
    assert np.max(np.abs(gb[d1:, :d1])) <= 1e-12


@pytest.mark.parametrize("dim,d1", [(8, 3), (16, 11), (32, 30)])
def test_position_reflection_maps_s_to_one_minus_s(dim, d1):
    r = np.eye(dim)[::-1]
    b = build_baker(MapParams(dim, d1))
    assert np.max(np.abs(r @ b @ r - build_baker(MapParams(dim, dim - d1)))) <= 1e-12


def test_apply_identity():
    v = np.arange(4) + 1j
    assert np.array_equal(apply_operator(np.eye(4), v), v)


@settings(max_examples=30, deadline=None)
@given(st.sampled_from([2, 4, 8, 16, 32]), st.integers(0, 2**32 - 1))
def test_apply_round_trip_and_norm(dim, seed):
    rng = np.random.default_rng(seed)
    v = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    v /= np.linalg.norm(v)
    g = build_aft(dim)
    back = apply_operator(g.conj().T, apply_operator(g, v))
    assert np.max(np.abs(back - v)) <= 1e-12
    b = build_baker(MapParams(dim, max(1, dim // 3)))
    assert abs(np.linalg.norm(apply_operator(b, v)) - 1) <= 1e-12


def test_apply_dimension_mismatch():
    with pytest.raises(InvalidDimensionError):
        apply_operator(np.eye(4), np.ones(3))
    with pytest.raises(InvalidDimensionError):
        apply_operator(np.ones((2, 3)), np.ones(3))


def test_reflect_position():
    assert list(reflect_position(np.arange(4))) == [3, 2, 1, 0]
