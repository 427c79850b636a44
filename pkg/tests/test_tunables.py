import math

import pytest
from hypothesis import given, strategies as st

from tunekit.tunables import (
    AssignmentError,
    ComponentSpec,
    MetricDef,
    SpecError,
    TunableAssignment,
    TunableDef,
    decode_unit,
    encode_unit,
    validate_assignment,
)


def spec_of(*tunables, metrics=(MetricDef(1, "m", ""),)):
    return ComponentSpec(7, "comp", tuple(tunables), tuple(metrics))


INT_1_64 = TunableDef("n", 1, "integer", 1, 64, default=8)
LOG_1_1024 = TunableDef("buf", 2, "real", 1.0, 1024.0, scale="log", default=32.0)
ABC = TunableDef("mode", 3, "categorical", categories=("a", "b", "c"), default="a")
FLAG = TunableDef("on", 4, "boolean", default=False)
MIXED = spec_of(INT_1_64, LOG_1_1024, ABC, FLAG)


def assign(spec, **values):
    return TunableAssignment(spec.component_id, values)


class TestDeclarations:
    def test_lower_above_upper(self):
        with pytest.raises(SpecError):
            TunableDef("x", 1, "integer", 5, 1, default=3)

    def test_log_needs_positive_lower(self):
        with pytest.raises(SpecError):
            TunableDef("x", 1, "real", 0.0, 1.0, scale="log", default=0.5)

    def test_default_must_be_in_bounds(self):
        with pytest.raises(SpecError):
            TunableDef("x", 1, "integer", 0, 3, default=4)
        with pytest.raises(SpecError):
            TunableDef("c", 1, "categorical", categories=("a",), default="z")

    def test_duplicate_param_id(self):
        with pytest.raises(SpecError):
            spec_of(TunableDef("a", 1, "boolean", default=True), TunableDef("b", 1, "boolean", default=True))

    def test_duplicate_tunable_name(self):
        with pytest.raises(SpecError):
            spec_of(TunableDef("a", 1, "boolean", default=True), TunableDef("a", 2, "boolean", default=True))

    def test_duplicate_metric_id(self):
        with pytest.raises(SpecError):
            spec_of(INT_1_64, metrics=(MetricDef(1, "x", ""), MetricDef(1, "y", "")))

    def test_document_round_trip(self):
        again = ComponentSpec.from_json(MIXED.to_json())
        assert again == MIXED

    def test_document_field_names(self):
        doc = MIXED.to_doc()
        assert set(doc) == {"component_id", "name", "tunables", "metrics"}
        assert set(doc["metrics"][0]) == {"metric_id", "name", "unit"}
        assert {"name", "param_id", "kind", "lower", "upper", "scale", "default"} <= set(doc["tunables"][0])


class TestValidate:
    def test_in_range(self):
        spec = spec_of(INT_1_64)
        assert validate_assignment(spec, assign(spec, n=32)) == []

    def test_boundary_plus_one(self):
        spec = spec_of(INT_1_64)
        [issue] = validate_assignment(spec, assign(spec, n=65))
        assert issue.code == "out of bounds"

    def test_unknown_parameter(self):
        spec = spec_of(INT_1_64)
        [issue] = validate_assignment(spec, assign(spec, n=3, bogus=1))
        assert (issue.name, issue.code) == ("bogus", "unknown parameter")

    def test_missing_and_kind_mismatch(self):
        issues = validate_assignment(MIXED, assign(MIXED, n=2.5, buf=2.0, mode="b"))
        assert {(i.name, i.code) for i in issues} == {("n", "kind mismatch"), ("on", "missing parameter")}

    def test_bool_is_not_an_integer(self):
        spec = spec_of(INT_1_64)
        [issue] = validate_assignment(spec, assign(spec, n=True))
        assert issue.code == "kind mismatch"

    @given(st.sets(st.sampled_from(["n", "buf", "mode", "on", "extra"]), min_size=1))
    def test_complete_violation_set(self, broken):
        """Each broken field contributes exactly one issue; fixing one removes exactly that one."""
        good = {"n": 3, "buf": 4.0, "mode": "c", "on": True}
        bad = {"n": 0, "buf": 2048.0, "mode": "z", "on": 1}
        values = {k: (bad[k] if k in broken else v) for k, v in good.items()}
        if "extra" in broken:
            values["extra"] = 1
        issues = validate_assignment(MIXED, assign(MIXED, **values))
        assert sorted(i.name for i in issues) == sorted(broken)
        for fixed in broken:
            repaired = dict(values)
            if fixed == "extra":
                del repaired["extra"]
            else:
                repaired[fixed] = good[fixed]
            remaining = validate_assignment(MIXED, assign(MIXED, **repaired))
            assert sorted(i.name for i in remaining) == sorted(broken - {fixed})


class TestEncode:
    def test_linear_endpoints(self):
        spec = spec_of(TunableDef("x", 1, "integer", 0, 10, default=5))
        assert encode_unit(spec, assign(spec, x=0)) == [0.0]
        assert encode_unit(spec, assign(spec, x=10)) == [1.0]

    def test_log_midpoint(self):
        spec = spec_of(TunableDef("x", 1, "integer", 1, 1024, scale="log", default=1))
        assert encode_unit(spec, assign(spec, x=32)) == [pytest.approx(0.5, abs=1e-15)]

    def test_categorical_index(self):
        spec = spec_of(ABC)
        assert encode_unit(spec, assign(spec, mode="b")) == [0.5]

    def test_degenerate_coordinates_fixed_at_zero(self):
        spec = spec_of(
            TunableDef("one", 1, "categorical", categories=("only",), default="only"),
            TunableDef("pin", 2, "integer", 4, 4, default=4),
        )
        assert encode_unit(spec, assign(spec, one="only", pin=4)) == [0.0, 0.0]

    def test_declaration_order(self):
        u = encode_unit(MIXED, assign(MIXED, on=True, mode="c", buf=1.0, n=1))
        assert u == [0.0, 0.0, 1.0, 1.0]

    def test_rejects_invalid(self):
        with pytest.raises(AssignmentError):
            encode_unit(MIXED, assign(MIXED, n=1))

    @given(
        st.integers(-1000, 1000),
        st.integers(0, 1000),
        st.booleans(),
        st.data(),
    )
    def test_monotone(self, lo, width, log, data):
        if log:
            lo = abs(lo) + 1
        t = TunableDef("x", 1, "integer", lo, lo + width, scale="log" if log else "linear", default=lo)
        spec = spec_of(t)
        a = data.draw(st.integers(lo, lo + width))
        b = data.draw(st.integers(a, lo + width))
        ua = encode_unit(spec, assign(spec, x=a))[0]
        ub = encode_unit(spec, assign(spec, x=b))[0]
        assert 0.0 <= ua <= ub <= 1.0


class TestDecode:
    def test_integer_midpoint(self):
        spec = spec_of(TunableDef("x", 1, "integer", 1, 5, default=1))
        assert decode_unit(spec, [0.5]).values == {"x": 3}

    def test_categorical_nearest(self):
        spec = spec_of(ABC)
        assert decode_unit(spec, [0.55]).values == {"mode": "b"}

    def test_categorical_grid_against_nearest_index(self):
        spec = spec_of(ABC)
        for i in range(101):
            u = i / 100
            expected = ABC.categories[math.floor(u * 2 + 0.5)]
            assert decode_unit(spec, [u])["mode"] == expected, u

    def test_boolean_threshold(self):
        spec = spec_of(FLAG)
        assert decode_unit(spec, [0.49])["on"] is False
        assert decode_unit(spec, [0.5])["on"] is True

    def test_outside_unit_cube(self):
        with pytest.raises(ValueError):
            decode_unit(spec_of(INT_1_64), [1.01])
        with pytest.raises(ValueError):
            decode_unit(spec_of(INT_1_64), [-1e-9])

    def test_integer_bins_equal_width(self):
        """Every integer in [1, 10] owns a tenth of the unit interval."""
        spec = spec_of(TunableDef("x", 1, "integer", 1, 10, default=1))
        counts = {}
        for i in range(10_000):
            v = decode_unit(spec, [(i + 0.5) / 10_000])["x"]
            counts[v] = counts.get(v, 0) + 1
        assert counts == {v: 1000 for v in range(1, 11)}

    @given(st.integers(-50, 50), st.integers(0, 60), st.booleans(), st.data())
    def test_integer_round_trip(self, lo, width, log, data):
        if log:
            lo = abs(lo) + 1
        t = TunableDef("x", 1, "integer", lo, lo + width, scale="log" if log else "linear", default=lo)
        spec = spec_of(t)
        for v in range(lo, lo + width + 1):
            a = assign(spec, x=v)
            assert decode_unit(spec, encode_unit(spec, a)) == a

    @given(st.sampled_from(["a", "b", "c"]), st.booleans(), st.integers(1, 64))
    def test_mixed_round_trip(self, mode, on, n):
        a = assign(MIXED, n=n, buf=32.0, mode=mode, on=on)
        back = decode_unit(MIXED, encode_unit(MIXED, a))
        assert back.values["buf"] == pytest.approx(32.0, rel=1e-12)
        assert {k: v for k, v in back.values.items() if k != "buf"} == {"n": n, "mode": mode, "on": on}

    @given(st.lists(st.floats(0.0, 1.0), min_size=4, max_size=4))
    def test_decoded_always_valid(self, u):
        assert validate_assignment(MIXED, decode_unit(MIXED, u)) == []
