import numpy as np
import pytest

from sesemi.exceptions import ContractError
from sesemi.grid import decision_grid, export_decision_grid, isolated_cells, lattice
from sesemi.models import build_model, mlp_spec, tiny_convnet_spec
from sesemi.rng import RngStream


def test_lattice_resolution_three():
    pts = lattice((0.0, 1.0, 0.0, 1.0), 3)
    assert pts.shape == (9, 2)
    assert {tuple(p) for p in pts} == {(a, b) for a in (0, 0.5, 1) for b in (0, 0.5, 1)}


def test_export_rows_and_header():
    model = build_model(mlp_spec(3), RngStream(0))
    text = export_decision_grid(model, (0.0, 1.0, 0.0, 1.0), 3)
    lines = text.strip().split("\n")
    assert lines[0] == "x,y,pred,prob_0,prob_1,prob_2"
    assert len(lines) == 10
    rows = np.array([[float(v) for v in line.split(",")] for line in lines[1:]])
    assert set(map(tuple, rows[:, :2])) == {(a, b) for a in (0, 0.5, 1) for b in (0, 0.5, 1)}
    assert np.abs(rows[:, 3:].sum(axis=1) - 1).max() < 1e-6
    assert np.array_equal(rows[:, 2], rows[:, 3:].argmax(axis=1))


def test_probabilities_sum_to_one():
    model = build_model(mlp_spec(2), RngStream(4))
    _, _, probs = decision_grid(model, (-3, 3, -3, 3), 25)
    assert np.abs(probs.sum(axis=1) - 1).max() < 1e-6


def test_non_2d_model_rejected():
    with pytest.raises(ContractError):
        decision_grid(build_model(tiny_convnet_spec(), RngStream(0)), (0, 1, 0, 1), 3)


def test_isolated_cells():
    pred = np.zeros((5, 5), dtype=int)
    assert isolated_cells(pred.ravel(), 5) == 0
    pred[2, 2] = 1
    assert isolated_cells(pred.ravel(), 5) == 1
    pred[2, 3] = 1
    assert isolated_cells(pred.ravel(), 5) == 0
