"""Gradients of the loss over ansatz angles and anchor features.

Three mechanisms coexist:

* two-point shift rules (``grad_theta``, ``grad_anchor``) evaluate a given
  loss callable at symmetric offsets.  For an angle that enters through a
  single RY gate the pi/2 rule is the exact derivative.  For anchor
  features the scaled half-shift is exact only while the margin is zero;
  with a margin the prepared state mixes anchor and partner amplitudes and
  the feature dependence picks up extra harmonics plus a normalization
  factor, so no two-point rule can be exact there,
* the generalized rule (``triplet_anchor_gradient`` in mode
  ``exact-shift``) handles that case: it differentiates the product of the
  expectation and the analytic norm constant through a 9-node
  trigonometric interpolation and divides the normalization back out.
  This is still built purely from shifted circuit evaluations,
* central finite differences (``finite_diff``) as the independent
  verification oracle.

Loss-level wrappers apply the hinge by the chain rule: the shift rules
differentiate the raw expectation and the hinge contributes its active /
inactive factor at the evaluation point.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .ansatz import AnsatzParams
from .embedding import MarginSpec, Triplet, norm_constant, prepared_norm_gradient
from .metric import TripletPlan, hinge_scale, plan_for_triplet

MODE_HALFPI = "halfpi-shift"
MODE_EXACT = "exact-shift"
MODE_FD = "finite-diff"


class GradientError(ValueError):
    """Gradient evaluation hit a non-finite value or bad arguments."""


@dataclass(frozen=True)
class GradientVec:
    """Partial derivatives plus the method and target they refer to."""

    partials: np.ndarray = field(repr=False)
    method: str = MODE_EXACT
    target: str = "theta"

    def __post_init__(self):
        p = np.asarray(self.partials, dtype=np.float64)
        object.__setattr__(self, "partials", p)
        if not np.all(np.isfinite(p)):
            raise GradientError("non-finite gradient entries")

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.partials))


def _checked(value: float) -> float:
    if not np.isfinite(value):
        raise GradientError("loss evaluation returned a non-finite value")
    return float(value)


# ---------------------------------------------------------------------------
# generic shift rules over callables
# ---------------------------------------------------------------------------

def grad_theta(loss_at, p) -> GradientVec:
    """Per-angle pi/2 shift rule: 0.5 [L(t + pi/2) - L(t - pi/2)].

    Exact derivative for losses generated by single RY angles.
    ``loss_at`` receives a flat angle vector; ``p`` is the AnsatzParams
    (or any flat angle vector) defining the evaluation point.
    """
    theta = p.flat if isinstance(p, AnsatzParams) else np.asarray(p, dtype=np.float64).copy()
    partials = np.empty(theta.size)
    for k in range(theta.size):
        plus = theta.copy()
        plus[k] += np.pi / 2.0
        minus = theta.copy()
        minus[k] -= np.pi / 2.0
        partials[k] = 0.5 * (_checked(loss_at(plus)) - _checked(loss_at(minus)))
    return GradientVec(partials, method=MODE_EXACT, target="theta")


def grad_anchor(loss_at, x, mode: str = MODE_EXACT) -> GradientVec:
    """Two-point feature-shift rules on an opaque loss callable.

    ``halfpi-shift``: 0.5 [L(x + pi/2 e_j) - L(x - pi/2 e_j)] per feature.
    This is a direction heuristic, not a derivative of the doubled RY
    encoding (wrong scale, and the sign flips for some probes).

    ``exact-shift``: (pi/2) [L(x + 1/2 e_j) - L(x - 1/2 e_j)], the true
    derivative for a pure doubled-encoding dependence (margin-free
    circuits).  With an active margin use ``triplet_anchor_gradient``.
    """
    x = np.asarray(x, dtype=np.float64)
    if mode == MODE_HALFPI:
        shift, scale = np.pi / 2.0, 0.5
    elif mode == MODE_EXACT:
        shift, scale = 0.5, np.pi / 2.0
    else:
        raise GradientError(f"unknown anchor shift mode {mode!r}")
    partials = np.empty(x.size)
    for j in range(x.size):
        plus = x.copy()
        plus[j] += shift
        minus = x.copy()
        minus[j] -= shift
        partials[j] = scale * (_checked(loss_at(plus)) - _checked(loss_at(minus)))
    return GradientVec(partials, method=mode, target="anchor-features")


def finite_diff(loss_at, v, h: float = 1e-5) -> GradientVec:
    """Central finite differences; the independent verification oracle."""
    if h <= 0:
        raise GradientError("finite difference step must be positive")
    v = np.asarray(v, dtype=np.float64)
    partials = np.empty(v.size)
    for j in range(v.size):
        plus = v.copy()
        plus[j] += h
        minus = v.copy()
        minus[j] -= h
        partials[j] = (_checked(loss_at(plus)) - _checked(loss_at(minus))) / (2.0 * h)
    return GradientVec(partials, method=MODE_FD, target="vector")


def trig_derivative(fn, center: float, base_freq: float, degree: int) -> float:
    """Exact derivative of a trigonometric polynomial from sampled values.

    ``fn`` must be a trig polynomial of at most ``degree`` harmonics of
    ``base_freq``.  Samples 2*degree + 1 equidistant points across one
    period and differentiates the interpolant at ``center``.
    """
    count = 2 * degree + 1
    period = 2.0 * np.pi / base_freq
    nodes = center + period * np.arange(count) / count
    values = np.array([_checked(fn(s)) for s in nodes])
    coeffs = np.fft.fft(values) / count
    k = np.rint(np.fft.fftfreq(count, d=1.0 / count)).astype(int)
    return float(np.sum(1j * k * base_freq * coeffs).real)


# ---------------------------------------------------------------------------
# loss-level gradients of the triplet circuit
# ---------------------------------------------------------------------------

def triplet_theta_gradient(t: Triplet, p: AnsatzParams, margin: MarginSpec) -> GradientVec:
    """Exact gradient of the hinged loss over the flat ansatz angles."""
    plan = plan_for_triplet(t, p, margin)
    return _theta_gradient_from_plan(plan, p.flat, margin)


def _theta_gradient_from_plan(plan: TripletPlan, flat_theta, margin: MarginSpec) -> GradientVec:
    expectation = plan.expectation(flat_theta)
    if expectation <= 0.0:
        return GradientVec(np.zeros(len(flat_theta)), method=MODE_EXACT, target="theta")
    raw = grad_theta(plan.expectation, flat_theta)
    return GradientVec(hinge_scale(margin) * raw.partials, method=MODE_EXACT, target="theta")


def triplet_anchor_gradient(
    t: Triplet, p: AnsatzParams, margin: MarginSpec, mode: str = MODE_HALFPI
) -> GradientVec:
    """Gradient of the hinged loss over the anchor features.

    ``halfpi-shift`` applies the two-point pi/2 feature shift to the hinged
    loss verbatim (the adversarial-direction default).  ``exact-shift``
    returns the true derivative: hinge chain rule times the exact
    expectation derivative from the generalized rule.  ``finite-diff`` is
    the oracle route.
    """
    xa = t.anchor.features
    xp = t.positive.features
    xn = t.negative.features

    def loss_at(x):
        plan = TripletPlan(x, xp, xn, margin, p.qubit_count, p.layers)
        expectation = plan.expectation(p.flat)
        return max(0.0, hinge_scale(margin) * expectation)

    if mode == MODE_HALFPI:
        return grad_anchor(loss_at, xa, mode=MODE_HALFPI)
    if mode == MODE_FD:
        vec = finite_diff(loss_at, xa)
        return GradientVec(vec.partials, method=MODE_FD, target="anchor-features")
    if mode != MODE_EXACT:
        raise GradientError(f"unknown anchor gradient mode {mode!r}")

    base_plan = TripletPlan(xa, xp, xn, margin, p.qubit_count, p.layers)
    e0 = base_plan.expectation(p.flat)
    if e0 <= 0.0:
        return GradientVec(np.zeros(xa.size), method=MODE_EXACT, target="anchor-features")
    z0 = norm_constant(xa, xp, xn, margin)
    z_grad = prepared_norm_gradient(xa, xp, xn, margin)
    partials = np.empty(xa.size)
    for j in range(xa.size):

        def scaled_expectation(offset, j=j):
            x = xa.copy()
            x[j] += offset
            plan = TripletPlan(x, xp, xn, margin, p.qubit_count, p.layers)
            return plan.expectation(p.flat) * norm_constant(x, xp, xn, margin)

        # E * Z is a trig polynomial of at most 4 harmonics of pi/2 in each
        # anchor feature; E itself is not (the normalization divides it).
        numerator = trig_derivative(scaled_expectation, 0.0, np.pi / 2.0, 4)
        partials[j] = (numerator - e0 * z_grad[j]) / z0
    return GradientVec(
        hinge_scale(margin) * partials, method=MODE_EXACT, target="anchor-features"
    )
