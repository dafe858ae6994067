import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stepscat import io


class TestCanonicalJson:
    @given(st.floats(allow_nan=True, allow_infinity=True))
    @settings(max_examples=300, deadline=None)
    def test_float_round_trip(self, x):
        text = io.dumps({"v": x})
        back = io._decode_float(json.loads(text)["v"])
        if np.isnan(x):
            assert np.isnan(back)
        else:
            assert back == x

    def test_keys_sorted_and_newline(self):
        text = io.dumps({"b": 1, "a": [1.5, 2.0], "c": {"z": None, "y": True}})
        assert text.endswith("}\n")
        assert text.index('"a"') < text.index('"b"') < text.index('"c"')
        assert text.index('"y"') < text.index('"z"')
        assert json.loads(text)["a"] == [1.5, 2.0]

    def test_non_finite_as_strings(self):
        assert json.loads(io.dumps([np.inf, -np.inf, np.nan])) == ["inf", "-inf", "nan"]

    def test_rejects_unknown_types(self):
        with pytest.raises(TypeError):
            io.dumps({"x": object()})


class TestScatteringDataFiles:
    @pytest.mark.parametrize("name", ["sech2", "lame_bump"])
    def test_byte_identical_round_trip(self, cache, name, tmp_path):
        a = io.save_data(cache.data(name), tmp_path / "a.json")
        b = io.save_data(io.load_data(a), tmp_path / "b.json")
        assert a.read_bytes() == b.read_bytes()

    def test_values_survive(self, cache, tmp_path):
        d = cache.data("step")
        back = io.load_data(io.save_data(d, tmp_path / "d.json"))
        for side in (1, -1):
            for x, y in zip(d.nodes(side), back.nodes(side)):
                assert np.array_equal(x, y)
        assert back.partition.sigma == pytest.approx(d.partition.sigma)

    @pytest.mark.parametrize("key", ["bands_plus", "eigenvalues", "partition"])
    def test_missing_key_raises(self, cache, key):
        raw = io.data_to_dict(cache.data("sech2"))
        del raw[key]
        with pytest.raises(ValueError, match=key):
            io.data_from_dict(json.loads(io.dumps(raw)))

    def test_ragged_segment_raises(self, cache):
        raw = json.loads(io.dumps(io.data_to_dict(cache.data("sech2"))))
        raw["bands_plus"][0]["re_R"].pop()
        with pytest.raises(ValueError):
            io.data_from_dict(raw)


class TestCsv:
    def test_header_and_line_endings(self, tmp_path):
        p = io.write_csv(tmp_path / "o.csv", ["x", "u"], [np.array([0.0, 0.1]), np.array([1 / 3, np.nan])])
        raw = p.read_bytes()
        assert b"\r" not in raw and raw.endswith(b"\n")
        lines = raw.decode().splitlines()
        assert lines[0] == "x,u" and len(lines) == 3
        back = io.read_csv(p)
        assert back["u"][0] == 1 / 3 and np.isnan(back["u"][1])

    def test_columns_must_be_parallel(self, tmp_path):
        with pytest.raises(ValueError):
            io.write_csv(tmp_path / "o.csv", ["x", "u"], [np.zeros(2), np.zeros(3)])
