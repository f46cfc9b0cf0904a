import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from kalmanflow.errors import ControlOutOfSet, DimensionError, ParseError, ValidationError
from kalmanflow.model import (
    ControlSet,
    ExtendedState,
    LinearSystem,
    PiecewiseConstantControl,
    format_control,
    membership,
    parse_control,
    parse_system,
    serialize_system,
)

DI_TEXT = "n=2 m=1 A=[0 1; 0 0] B=[0; 1] control_set=box 1.0"


def test_parse_double_integrator(double_integrator):
    assert parse_system(DI_TEXT) == double_integrator


def test_parse_multiline_with_comments():
    text = """
    # a comment
    A = [1 2; 3 4]   # trailing
    B = [1 0; 0 1]
    control_set = ball 0.5
    """
    sys = parse_system(text)
    assert (sys.n, sys.m) == (2, 2)
    assert sys.control_set == ControlSet.ball(0.5, 2)


def test_zero_B_is_a_validation_error():
    with pytest.raises(ValidationError):
        parse_system("n=1 m=1 A=[0] B=[0] control_set=box 1")


def test_row_count_mismatch_is_a_parse_error():
    with pytest.raises(ParseError, match="2 rows expected") as info:
        parse_system("n=2 m=1 A=[0 1] B=[0; 1] control_set=box 1")
    assert info.value.line == 1 and info.value.column is not None


@pytest.mark.parametrize("text, exc", [
    ("A=[1 2; 3] B=[1; 1] control_set=box 1", ParseError),
    ("A=[1] B=[1] control_set=cube 1", ParseError),
    ("A=[1] B=[1]", ParseError),
    ("A=[1] A=[2] B=[1] control_set=box 1", ParseError),
    ("A=[1] B=[1] C=[1] control_set=box 1", ParseError),
    ("A=[1] B=[1] control_set=box -1", ValidationError),
    ("m=2 A=[1] B=[1 1] control_set=box 1 2 3", ValidationError),
    ("n=0 A=[1] B=[1] control_set=box 1", ValidationError),
    ("m=1 A=[1 0; 0 1] B=[1 1; 0 1] control_set=box 1", ParseError),
])
def test_malformed_inputs(text, exc):
    with pytest.raises(exc):
        parse_system(text)


def test_parse_error_position_on_later_line():
    with pytest.raises(ParseError) as info:
        parse_system("A = [1]\nB = [1]\ncontrol_set = box @")
    assert info.value.line == 3


finite = st.floats(-1e6, 1e6, allow_nan=False, allow_infinity=False)


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, (3, 3), elements=finite), arrays(np.float64, (3, 2), elements=finite),
       st.floats(1e-3, 1e3))
def test_serialize_round_trip(A, B, r):
    if not np.any(B):
        B[0, 0] = 1.0
    sys = LinearSystem(A, B, ControlSet.box([r, 2 * r], 2))
    back = parse_system(serialize_system(sys))
    assert back == sys
    assert np.array_equal(back.A, sys.A) and np.array_equal(back.B, sys.B)


def test_membership_examples():
    assert membership(ControlSet.box(1.0, 1), [0.5])
    assert membership(ControlSet.box(1.0, 1), [-1.0])
    assert not membership(ControlSet.ball(1.0, 2), [1.0, 1.0])
    with pytest.raises(DimensionError):
        membership(ControlSet.box(1.0, 2), [0.0])


@settings(max_examples=100, deadline=None)
@given(arrays(np.float64, 2, elements=st.floats(-3, 3)), st.sampled_from(["box", "ball"]))
def test_membership_is_symmetric(u, kind):
    K = ControlSet.box([1.0, 2.0], 2) if kind == "box" else ControlSet.ball(1.5, 2)
    assert membership(K, u) == membership(K, -u)


def test_control_set_sampling_stays_inside():
    rng = np.random.default_rng(0)
    for K in (ControlSet.box([0.5, 2.0], 2), ControlSet.ball(1.5, 3)):
        pts = K.sample(rng, 500)
        assert pts.shape == (500, K.dim)
        assert all(K.contains(p) for p in pts)
    assert ControlSet.box([0.5, 2.0], 2).inradius() == 0.5


def test_system_validation():
    K = ControlSet.box(1.0, 1)
    with pytest.raises(ValidationError):
        LinearSystem(np.ones((2, 3)), np.ones((2, 1)), K)
    with pytest.raises(ValidationError):
        LinearSystem(np.eye(2), np.array([[np.inf], [0.0]]), K)
    with pytest.raises(ValidationError):
        LinearSystem(np.eye(2), np.ones((2, 2)), K)
    sys = LinearSystem(np.eye(2), np.ones((2, 1)), K)
    with pytest.raises(ValueError):
        sys.A[0, 0] = 5.0


def test_extended_state():
    x = ExtendedState.origin(2, 1)
    assert np.array_equal(x.as_vector(), np.zeros(4))
    with pytest.raises(ValidationError):
        ExtendedState(np.nan, [0.0], [0.0])


def test_piecewise_control_operations():
    u = PiecewiseConstantControl([0.25, 0.75], [[1.0], [-0.5]])
    assert u.horizon == 1.0
    assert np.allclose(u.breakpoints, [0.0, 0.25, 1.0])
    assert u.value_at(0.1)[0] == 1.0 and u.value_at(1.0)[0] == -0.5
    r = u.reversed()
    assert np.allclose(r.durations, [0.75, 0.25]) and r.values[0, 0] == -0.5
    fine = u.refine([0.5])
    assert len(fine) == 3 and np.allclose(fine.values.ravel(), [1.0, -0.5, -0.5])
    assert len(fine.merged()) == 2
    assert not u.is_valid(ControlSet.box(0.8, 1))
    with pytest.raises(ControlOutOfSet):
        u.check(ControlSet.box(0.8, 1))
    with pytest.raises(ValidationError):
        PiecewiseConstantControl([0.0], [[1.0]])


def test_control_file_round_trip():
    u = PiecewiseConstantControl([0.1, 0.9], [[0.25, -1.0], [0.0, 1.0 / 3.0]])
    back = parse_control(format_control(u, header=["two inputs"]), m=2)
    assert np.array_equal(back.durations, u.durations)
    assert np.array_equal(back.values, u.values)


@pytest.mark.parametrize("text", ["", "0.5", "0.5 x", "-1 0.0", "0.5 1 2\n0.5 1"])
def test_control_file_errors(text):
    with pytest.raises(ParseError):
        parse_control(text)
