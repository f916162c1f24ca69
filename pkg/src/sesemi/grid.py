"""Decision-grid export for models on 2-D inputs."""

import numpy as np

from .exceptions import ContractError
from .tensor import softmax


def lattice(bounds, resolution):
    """``resolution x resolution`` points spanning ``(xmin, xmax, ymin, ymax)``, x varying fastest."""
    xmin, xmax, ymin, ymax = bounds
    xs = np.linspace(xmin, xmax, resolution)
    ys = np.linspace(ymin, ymax, resolution)
    gx, gy = np.meshgrid(xs, ys)
    return np.column_stack([gx.ravel(), gy.ravel()])


def decision_grid(model, bounds, resolution):
    """Return ``(points, predictions, probabilities)`` over the lattice."""
    if model.spec.input_shape != (2,):
        raise ContractError(f"decision grids need a 2-D input model, got input shape {model.spec.input_shape}")
    points = lattice(bounds, resolution)
    model.eval()
    probs = softmax(model.predict_logits(points))
    return points, probs.argmax(axis=1), probs


def export_decision_grid(model, bounds, resolution):
    """CSV text with rows ``x,y,pred,prob_0..prob_{C-1}``."""
    points, pred, probs = decision_grid(model, bounds, resolution)
    C = probs.shape[1]
    lines = [",".join(["x", "y", "pred"] + [f"prob_{c}" for c in range(C)])]
    for (x, y), p, row in zip(points, pred, probs):
        lines.append(",".join([repr(float(x)), repr(float(y)), str(int(p))] + [repr(float(v)) for v in row]))
    return "\n".join(lines) + "\n"


def data_bounds(points, margin=0.5):
    lo, hi = points.min(axis=0), points.max(axis=0)
    return (lo[0] - margin, hi[0] + margin, lo[1] - margin, hi[1] + margin)


def region_coverage(model, points, targets, bounds, resolution):
    """Fraction of ``points`` whose nearest grid cell predicts their class."""
    _, pred, _ = decision_grid(model, bounds, resolution)
    xmin, xmax, ymin, ymax = bounds
    ix = np.clip(np.rint((points[:, 0] - xmin) / (xmax - xmin) * (resolution - 1)), 0, resolution - 1)
    iy = np.clip(np.rint((points[:, 1] - ymin) / (ymax - ymin) * (resolution - 1)), 0, resolution - 1)
    cell = (iy * resolution + ix).astype(int)
    return float(np.mean(pred[cell] == targets))


def isolated_cells(pred, resolution):
    """Cells whose four lattice neighbours all predict a different class."""
    grid = pred.reshape(resolution, resolution)
    padded = np.pad(grid, 1, mode="edge")
    same = np.zeros_like(grid, dtype=int)
    for dy, dx in ((0, 1), (2, 1), (1, 0), (1, 2)):
        same += padded[dy:dy + resolution, dx:dx + resolution] == grid
    interior = np.zeros_like(grid, dtype=bool)
    interior[1:-1, 1:-1] = True
    return int(np.sum((same == 0) & interior))
