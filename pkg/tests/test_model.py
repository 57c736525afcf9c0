import json
import math

import numpy as np
import pytest

from drmco.ambiguity import FullSimplex, Singleton
from drmco.instances import gen_random_small, t2_tiny
from drmco.model import (DimensionTooLarge, Instance, ParseError, SchemaError, StageNodeProblem,
                         TooLarge, ValidationError, extensive_cost_to_go, extensive_form,
                         instance_from_json, instance_to_json, load_instance, save_instance,
                         solve_extensive, validate, vertices_to_dr)
from drmco.lp_core import GE, solve_lp


def test_t2_tiny_extensive_values():
    v, x = solve_extensive(t2_tiny("simplex"))
    assert v == pytest.approx(2 / 3, abs=1e-9)
    assert x[0] == pytest.approx(1 / 3, abs=1e-9)
    v, x = solve_extensive(t2_tiny("singleton"))
    assert v == pytest.approx(0.5, abs=1e-9)
    assert x[0] == pytest.approx(0.0, abs=1e-9)


def test_cost_to_go_matches_closed_form():
    inst = t2_tiny("simplex")
    for x in np.linspace(0, 1, 7):
        expected = max(max(0.0, 1 - 2 * x), x)
        assert extensive_cost_to_go(inst, 1, [x], regularized=False) == pytest.approx(expected)


def test_json_round_trip(tmp_path):
    inst = gen_random_small(3)
    path = tmp_path / "inst.json"
    save_instance(inst, path)
    back = load_instance(path)
    assert json.dumps(instance_to_json(back)) == json.dumps(instance_to_json(inst))
    assert solve_extensive(back)[0] == pytest.approx(solve_extensive(inst)[0])


def test_schema_errors(tmp_path):
    data = instance_to_json(t2_tiny())
    bad = dict(data, extra=1)
    with pytest.raises(SchemaError):
        instance_from_json(bad)
    node = data["stages"][1][0]
    broken = json.loads(json.dumps(data))
    broken["stages"][1][0]["rows"][0]["sense"] = "~"
    with pytest.raises(SchemaError):
        instance_from_json(broken)
    p = tmp_path / "x.json"
    p.write_text("{not json")
    with pytest.raises(ParseError):
        load_instance(p)
    assert node["rows"][0]["sense"] == ">="


def test_negative_cost_rejected():
    inst = t2_tiny()
    node = StageNodeProblem.build(1, 1, 0, [([0.0], [1.0], [], GE, -1.0)], cost_y=[1.0],
                                  y_bounds=[(-1.0, math.inf)])
    bad = Instance(2, [inst.nodes[0], [node, inst.nodes[1][1]]], inst.ambiguity, [5.0],
                   inst.x0, inst.diameters)
    errs = [d for d in validate(bad) if d.severity == "Error"]
    assert any("nonnegative" in d.message for d in errs)


def test_nonpositive_reg_factor_rejected(tmp_path):
    data = instance_to_json(t2_tiny())
    data["reg_factors"] = [0.0]
    p = tmp_path / "bad.json"
    p.write_text(json.dumps(data))
    with pytest.raises(ValidationError) as exc:
        load_instance(p)
    assert "regularization factor must be positive" in str(exc.value)


def test_unregularized_marker_round_trip():
    data = instance_to_json(t2_tiny(reg=None))
    assert data["reg_factors"] == "unregularized"
    assert instance_from_json(data).reg_factors is None


def test_diameter_warning():
    inst = t2_tiny()
    small = inst.with_reg(5.0)
    small.diameters = np.array([0.5, 0.0])
    warns = [d for d in validate(small) if d.severity == "Warning"]
    assert warns


def test_vertices_to_dr_order_and_limit():
    seen = []
    nodes, amb = vertices_to_dr([0, 0], [1, 2], lambda xi: seen.append(tuple(xi)) or len(seen))
    assert seen == [(0, 0), (0, 2), (1, 0), (1, 2)]
    assert isinstance(amb, FullSimplex) and amb.size == 4
    with pytest.raises(DimensionTooLarge):
        vertices_to_dr(np.zeros(21), np.ones(21), lambda xi: None)


def test_extensive_form_size_limit():
    with pytest.raises(TooLarge):
        extensive_form(gen_random_small(0, T=3, max_nodes=3), support_limit=1)


def test_regularized_value_not_above_original():
    for s in range(8):
        inst = gen_random_small(s)
        assert solve_extensive(inst, regularized=True)[0] <= solve_extensive(inst)[0] + 1e-9


def test_singleton_extensive_is_expectation():
    inst = t2_tiny("singleton")
    lp = extensive_form(inst)
    sol = solve_lp(lp, backend="highs")
    assert sol.objective_value == pytest.approx(0.5)
    assert isinstance(inst.ambiguity[0], Singleton)
