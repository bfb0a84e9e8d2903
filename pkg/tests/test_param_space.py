import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from accel_dse.param_space import (
    CAT,
    FLOAT,
    INT,
    Configuration,
    InvalidConfiguration,
    ParameterSpace,
    ParameterSpec,
    configs_from_csv,
    configs_to_csv,
    decode_unit,
    encode,
    encode_many,
    validate,
)

SPACE = ParameterSpace(
    (
        ParameterSpec("lanes", INT, low=4, high=8),
        ParameterSpec("size", INT, low=5, high=60),
        ParameterSpec("f", FLOAT, low=0.4, high=2.2),
        ParameterSpec("bw", FLOAT, low=1.0, high=64.0, log_scale=True),
        ParameterSpec("bench", CAT, choices=("svm", "linreg", "logreg", "reco")),
    )
)
unit = st.floats(0.0, 1.0, allow_nan=False, exclude_max=True)


def test_validate_examples():
    space = ParameterSpace((ParameterSpec("lanes", INT, low=4, high=8), ParameterSpec("util", FLOAT, low=0.4, high=0.9)))
    assert validate(space, {"lanes": 8, "util": 0.5}) == []
    (msg,) = validate(space, {"lanes": 9, "util": 0.5})
    assert "out of range" in msg
    (msg,) = validate(space, {"lanes": 4})
    assert "util" in msg and "missing parameter" in msg
    (msg,) = validate(space, {"lanes": 4, "util": 0.5, "extra": 1})
    assert "unknown parameter" in msg
    assert len(validate(space, {"lanes": 4.5, "util": "x"})) == 2


def test_encode_examples():
    space = ParameterSpace((ParameterSpec("lanes", INT, low=4, high=8), ParameterSpec("b", CAT, choices=("svm", "linreg"))))
    assert encode(space, {"lanes": 4, "b": "linreg"}).tolist() == [0.0, 0.0, 1.0]
    assert encode(space, {"lanes": 6, "b": "svm"}).tolist() == [0.5, 1.0, 0.0]
    assert space.encoded_columns() == ["lanes", "b=svm", "b=linreg"]
    with pytest.raises(InvalidConfiguration) as err:
        encode(space, {"lanes": 9, "b": "svm"})
    assert err.value.violations
    assert encode_many(space, []).shape == (0, 3)


def test_log_scale_encodes_in_log_domain():
    assert encode(SPACE, {"lanes": 4, "size": 5, "f": 0.4, "bw": 8.0, "bench": "svm"})[3] == pytest.approx(0.5)


def test_decode_unit_examples():
    assert ParameterSpec("n", INT, low=5, high=60).from_unit(0.0) == 5
    assert ParameterSpec("f", FLOAT, low=0.4, high=2.2).from_unit(0.5) == pytest.approx(1.3)
    cat = ParameterSpec("c", CAT, choices=("a", "b", "c", "d"))
    assert cat.from_unit(0.74) == "c"
    # half-up rounding: 4 + 0.5 * 1 = 4.5 -> 5
    assert ParameterSpec("k", INT, low=4, high=5).from_unit(0.5) == 5
    with pytest.raises(ValueError):
        decode_unit(SPACE, [0.1, 0.2])
    with pytest.raises(ValueError):
        decode_unit(SPACE, [0.1, 0.2, 0.3, 0.4, 1.5])


@given(st.lists(unit, min_size=5, max_size=5))
def test_decode_always_valid(point):
    assert validate(SPACE, decode_unit(SPACE, point)) == []


@given(st.lists(unit, min_size=5, max_size=5))
def test_encode_decode_round_trip(point):
    cfg = decode_unit(SPACE, point)
    x = encode(SPACE, cfg)
    ranges = [x[0], x[1], x[2], x[3]]
    back = decode_unit(SPACE, ranges + [point[4]])
    assert back["lanes"] == cfg["lanes"] and back["size"] == cfg["size"]
    assert back["f"] == pytest.approx(cfg["f"], rel=1e-12)
    assert back["bw"] == pytest.approx(cfg["bw"], rel=1e-12)
    assert back["bench"] == cfg["bench"]


@given(st.lists(unit, min_size=5, max_size=5), st.lists(unit, min_size=5, max_size=5))
def test_encode_injective(p, q):
    a, b = decode_unit(SPACE, p), decode_unit(SPACE, q)
    if a != b:
        assert not np.array_equal(encode(SPACE, a), encode(SPACE, b))


def test_spec_invariants():
    with pytest.raises(ValueError):
        ParameterSpec("x", INT, low=4, high=4)
    with pytest.raises(ValueError):
        ParameterSpec("x", INT, low=4.5, high=8)
    with pytest.raises(ValueError):
        ParameterSpec("x", CAT, choices=())
    with pytest.raises(ValueError):
        ParameterSpec("x", CAT, choices=("a", "a"))
    with pytest.raises(ValueError):
        ParameterSpec("x", FLOAT, low=0.0, high=1.0, log_scale=True)
    with pytest.raises(ValueError):
        ParameterSpec("x", "bool")
    with pytest.raises(ValueError):
        ParameterSpace((ParameterSpec("x", INT, low=0, high=1), ParameterSpec("x", INT, low=0, high=1)))


def test_json_and_csv_round_trip(tmp_path):
    path = tmp_path / "space.json"
    path.write_text(json.dumps(SPACE.to_json()))
    again = ParameterSpace.load(path)
    assert again == SPACE
    assert again.schema_hash() == SPACE.schema_hash()
    other = ParameterSpace(SPACE.specs[:-1])
    assert other.schema_hash() != SPACE.schema_hash()
    rng = np.random.default_rng(0)
    cfgs = [decode_unit(SPACE, rng.random(5) * 0.999) for _ in range(10)]
    assert configs_from_csv(SPACE, configs_to_csv(SPACE, cfgs)) == cfgs
    assert Configuration({"a": 1}).merged({"b": 2}) == Configuration({"a": 1, "b": 2})
