"""Structured finite-difference gradient surrogates."""

from dataclasses import dataclass

import numpy as np


class NonFiniteObjectiveError(ArithmeticError):
    """The objective returned NaN or inf at a probe point."""

    def __init__(self, value, point, label):
        self.value = value
        self.point = point
        self.label = label
        super().__init__(f"objective returned {value!r} at probe {label}")


@dataclass
class SurrogateGradient:
    vector: np.ndarray
    points: list
    values: list
    norm_sq: float

    @property
    def eval_cache(self):
        return list(zip(self.points, self.values))


def _eval(objective, x, label):
    value = float(objective(x))
    if not np.isfinite(value):
        raise NonFiniteObjectiveError(value, x, label)
    return value


def forward_surrogate(objective, v, frame, h, f_v=None):
    """Forward-difference surrogate ``(d/l) sum_i (F(v + h p_i) - F(v)) / h p_i``.

    Spends ``l + 1`` evaluations (``l`` if ``f_v`` is supplied). ``points`` and
    ``values`` start with ``v`` itself followed by the ``l`` probes.
    """
    if h <= 0:
        raise ValueError("smoothing radius must be positive")
    v = np.asarray(v, dtype=np.float64)
    d, l = frame.columns.shape
    if f_v is None:
        f_v = _eval(objective, v, "v")
    points, values = [v], [f_v]
    coeffs = np.empty(l)
    probes = v + h * frame.columns.T  # all l probe points in one pass
    for i, x in enumerate(probes):
        fx = _eval(objective, x, f"v+h*p[{i}]")
        points.append(x)
        values.append(fx)
        coeffs[i] = (fx - f_v) / h
    g = (d / l) * (frame.columns @ coeffs)
    return SurrogateGradient(g, points, values, float(g @ g))


def central_surrogate(objective, v, frame, h):
    """Central-difference surrogate ``(d/l) sum_i (F(v + h p_i) - F(v - h p_i)) / 2h p_i``.

    Spends exactly ``2 l`` evaluations; probes are listed as ``+p_0, -p_0, +p_1, ...``.
    """
    if h <= 0:
        raise ValueError("smoothing radius must be positive")
    v = np.asarray(v, dtype=np.float64)
    d, l = frame.columns.shape
    points, values = [], []
    coeffs = np.empty(l)
    steps = h * frame.columns.T
    plus, minus = v + steps, v - steps
    for i, (xp, xm) in enumerate(zip(plus, minus)):
        fp = _eval(objective, xp, f"v+h*p[{i}]")
        fm = _eval(objective, xm, f"v-h*p[{i}]")
        points += [xp, xm]
        values += [fp, fm]
        coeffs[i] = (fp - fm) / (2 * h)
    g = (d / l) * (frame.columns @ coeffs)
    return SurrogateGradient(g, points, values, float(g @ g))
