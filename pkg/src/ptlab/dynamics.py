"""Pure-state evolution, polarization flow and its stationary points.

A pure state ``(psi_1, psi_2)`` is tracked projectively through its
polarization ``z = psi_1 / psi_2`` or ``w = 1 / z``. The flow

.. math::

    \\dot z = i (d z^2 - 2 i g z - d), \\qquad \\dot w = i (d w^2 + 2 i g w - d)

is integrated in whichever chart keeps the coordinate bounded. Bloch
coordinates put ``|0> = (1, 0)`` on the north pole.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq, minimize_scalar

from .errors import DegenerateQuadratic, NumericalError, StepSizeUnderflow
from .operators import IDENTITY, ModelParams, Regime, _first_components, coupling_matrix

CHART_SWITCH = 1.05
STATIONARY_TOL = 1e-10

KETS = {
    "0": np.array([1, 0], dtype=complex),
    "1": np.array([0, 1], dtype=complex),
    "+": np.array([1, 1], dtype=complex) / math.sqrt(2),
    "-": np.array([1, -1], dtype=complex) / math.sqrt(2),
    "+i": np.array([1, 1j], dtype=complex) / math.sqrt(2),
    "-i": np.array([1, -1j], dtype=complex) / math.sqrt(2),
}


def ket(name: str) -> np.ndarray:
    """Reference state ``|0>, |1>, |+>, |->, |+i>`` or ``|-i>`` by label."""
    return KETS[name].copy()


def as_state(psi) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex).reshape(2)
    if not np.any(psi):
        raise ValueError("a pure state cannot be the zero vector")
    return psi


class Chart(str, enum.Enum):
    Z = "z"
    W = "w"


@dataclass(frozen=True)
class Polarization:
    value: complex
    chart: Chart = Chart.Z

    @classmethod
    def from_state(cls, psi, chart: Chart | None = None) -> "Polarization":
        """Polarization of ``psi``; picks the bounded chart unless one is given."""
        psi1, psi2 = as_state(psi)
        if chart is None:
            chart = Chart.Z if abs(psi1) <= abs(psi2) else Chart.W
        if Chart(chart) is Chart.Z:
            return cls(complex(psi1 / psi2), Chart.Z)
        return cls(complex(psi2 / psi1), Chart.W)

    @property
    def z(self) -> complex:
        if self.chart is Chart.Z:
            return self.value
        return complex(math.inf, 0) if self.value == 0 else 1 / self.value

    def switched(self) -> "Polarization":
        other = Chart.W if self.chart is Chart.Z else Chart.Z
        return Polarization(1 / self.value, other)

    def in_chart(self, chart: Chart) -> "Polarization":
        return self if self.chart is Chart(chart) else self.switched()

    def state(self) -> np.ndarray:
        """Unit-norm ket ``(z, 1)`` or ``(1, w)``."""
        u = self.value
        vec = [u, 1] if self.chart is Chart.Z else [1, u]
        return np.array(vec, dtype=complex) / math.sqrt(1 + abs(u) ** 2)


@dataclass(frozen=True)
class BlochPoint:
    x: float
    y: float
    z: float

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z])


class FixedPointKind(str, enum.Enum):
    CENTER = "center"
    POINT_DIPOLE = "point_dipole"
    SOURCE_SINK = "source_sink"


@dataclass(frozen=True)
class FixedPointReport:
    """Stationary points of the flow with their linearization.

    ``eigenvalues[k]`` is the eigenvalue pair of the real 2D Jacobian at
    ``locations[k]``; for the holomorphic flow it is ``(f', conj(f'))``.
    """

    locations: list
    kind: FixedPointKind
    eigenvalues: list
    residuals: list = field(default_factory=list)

    @property
    def sink(self) -> Polarization | None:
        if self.kind is not FixedPointKind.SOURCE_SINK:
            return None
        k = min(range(len(self.locations)), key=lambda i: self.eigenvalues[i][0].real)
        return self.locations[k]

    @property
    def source(self) -> Polarization | None:
        if self.kind is not FixedPointKind.SOURCE_SINK:
            return None
        k = max(range(len(self.locations)), key=lambda i: self.eigenvalues[i][0].real)
        return self.locations[k]


def _cos_sinc(disc: float, t: float) -> tuple[float, float]:
    """``cos(Omega t)`` and ``sin(Omega t) / Omega`` as entire functions of ``disc``."""
    x = disc * t * t
    if abs(x) < 1e-4:
        c = 1 - x / 2 + x * x / 24 - x**3 / 720
        s = t * (1 - x / 6 + x * x / 120 - x**3 / 5040)
    elif disc > 0:
        om = math.sqrt(disc)
        c, s = math.cos(om * t), math.sin(om * t) / om
    else:
        k = math.sqrt(-disc)
        c, s = math.cosh(k * t), math.sinh(k * t) / k
    return c, s


def propagator(p: ModelParams, t: float) -> np.ndarray:
    """``U(t) = exp(-i H t)`` in closed form (Cayley-Hamilton); exact at the EP."""
    t = float(t)
    c, s = _cos_sinc(p.disc, t)
    phase = complex(math.cos(p.r * math.cos(p.theta) * t), -math.sin(p.r * math.cos(p.theta) * t))
    return phase * (c * IDENTITY - 1j * s * coupling_matrix(p))


def evolve_state(psi0, p: ModelParams, t: float) -> np.ndarray:
    """Right state at time ``t``; no normalization is applied."""
    return propagator(p, t) @ as_state(psi0)


def phase_velocity(zp: Polarization, p: ModelParams) -> complex:
    u, g, d = zp.value, p.gain, p.d
    if zp.chart is Chart.Z:
        return 1j * (d * u * u - 2j * g * u - d)
    return 1j * (d * u * u + 2j * g * u - d)


def _flow_derivative(zp: Polarization, p: ModelParams) -> complex:
    u, g, d = zp.value, p.gain, p.d
    if zp.chart is Chart.Z:
        return 1j * (2 * d * u - 2j * g)
    return 1j * (2 * d * u + 2j * g)


def stationary_points(p: ModelParams) -> FixedPointReport:
    """Roots ``z_c = (i g +- Omega) / d`` of the flow, classified.

    Each root is reported in the chart where it is bounded and checked by
    substitution into the flow.
    """
    if p.d <= 0:
        raise DegenerateQuadratic("stationary points sit at the chart poles when d = 0")
    if p.regime is Regime.EXCEPTIONAL_POINT:
        roots = [1j * p.gain / p.d]
    else:
        roots = [a / p.d for a in _first_components(p)]
    locations, eigs, residuals = [], [], []
    for zc in roots:
        loc = Polarization(complex(zc), Chart.Z)
        if abs(zc) > 1:
            loc = loc.switched()
        res = abs(phase_velocity(loc, p))
        if res > STATIONARY_TOL:
            raise NumericalError(f"stationary point {zc} fails substitution: |v|={res:.3g}")
        lam = _flow_derivative(loc, p)
        locations.append(loc)
        eigs.append((lam, lam.conjugate()))
        residuals.append(res)

    if len(roots) == 1:
        kind = FixedPointKind.POINT_DIPOLE
    else:
        re = [e[0].real for e in eigs]
        scale = max(abs(e[0]) for e in eigs)
        if all(abs(x) <= 1e-8 * scale for x in re):
            kind = FixedPointKind.CENTER
        elif re[0] * re[1] < 0:
            kind = FixedPointKind.SOURCE_SINK
        else:
            raise NumericalError(f"unexpected linearization spectrum {eigs}")
    return FixedPointReport(locations, kind, eigs, residuals)


def bloch_point(psi) -> BlochPoint:
    psi = as_state(psi)
    psi = psi / np.linalg.norm(psi)
    cross = psi[0].conjugate() * psi[1]
    return BlochPoint(
        float(2 * cross.real), float(2 * cross.imag), float(abs(psi[0]) ** 2 - abs(psi[1]) ** 2)
    )


def integrate_flow(
    z0: Polarization,
    p: ModelParams,
    t_span,
    *,
    rtol: float = 1e-9,
    atol: float = 1e-9,
    t_eval=None,
) -> list[tuple[float, Polarization]]:
    """Adaptive RK4(5) integration of the polarization flow with chart switching.

    The chart flips when the coordinate grows past ``CHART_SWITCH``; after a
    flip the new coordinate has modulus ``1 / CHART_SWITCH``, which gives the
    hysteresis band.

    Returns the trajectory at ``t_eval`` (or at the solver steps if omitted).
    """
    t0, t1 = float(t_span[0]), float(t_span[1])
    if not t1 > t0:
        raise ValueError("t_span must be increasing")
    if t_eval is not None:
        t_eval = np.asarray(t_eval, dtype=float)
        if np.any(np.diff(t_eval) < 0) or t_eval[0] < t0 or t_eval[-1] > t1:
            raise ValueError("t_eval must be sorted and inside t_span")

    pos = z0 if abs(z0.value) <= CHART_SWITCH else z0.switched()
    t = t0
    out: list[tuple[float, Polarization]] = []
    if t_eval is None:
        out.append((t0, pos))
    n_done = 0
    while True:
        chart = pos.chart

        def rhs(_t, y, chart=chart):
            return [phase_velocity(Polarization(y[0], chart), p)]

        def leave(_t, y):
            return abs(y[0]) - CHART_SWITCH

        leave.terminal = True
        leave.direction = 1
        seg_eval = None if t_eval is None else t_eval[n_done:]
        sol = solve_ivp(
            rhs, (t, t1), [complex(pos.value)], method="RK45",
            rtol=rtol, atol=atol, t_eval=seg_eval, events=leave,
        )
        if sol.status == -1:
            raise StepSizeUnderflow(sol.message)
        if len(sol.t):
            ts = sol.t if t_eval is not None else sol.t[1:]
            ys = sol.y[0] if t_eval is not None else sol.y[0][1:]
            out.extend((float(tk), Polarization(complex(yk), chart)) for tk, yk in zip(ts, ys))
        if t_eval is not None:
            n_done += len(sol.t)
        if sol.status != 1 or (t_eval is not None and n_done == len(t_eval)):
            break
        t = float(sol.t_events[0][0])
        pos = Polarization(complex(sol.y_events[0][0][0]), chart).switched()
        if t_eval is None:
            out.append((t, pos))
    return out


def first_return_time(f, t_max: float, samples: int = 4000, t_min: float | None = None) -> float | None:
    """First time the scalar signal ``f`` returns to ``f(0)`` moving the same way.

    ``f`` is sampled on ``[0, t_max]``. A return is either a crossing of
    ``f(0)`` in the direction of the initial departure (refined with
    ``brentq``) or, when ``t = 0`` is an extremum of ``f``, a tangential
    touch (refined as the extremum with ``minimize_scalar``). Returns None
    if no return is seen.
    """
    ts = np.linspace(0.0, t_max, samples + 1)
    f0 = f(0.0)
    vals = np.array([f(t) - f0 for t in ts])
    scale = np.abs(vals).max()
    if scale < 1e-12:
        return None
    start = 1 if t_min is None else max(1, int(np.searchsorted(ts, t_min)))
    # direction of departure from the initial value
    k = start
    while k < len(vals) and abs(vals[k]) <= 1e-12 * scale:
        k += 1
    if k >= len(vals):
        return None
    direction = math.copysign(1.0, vals[k])
    h = vals * direction
    touch_tol = 1e-3 * scale
    for j in range(k + 1, len(vals)):
        if h[j - 1] < 0 <= h[j]:
            return float(brentq(lambda t: f(t) - f0, ts[j - 1], ts[j], xtol=1e-14, rtol=1e-15))
        at_min = j + 1 < len(vals) and h[j] <= h[j - 1] and h[j] <= h[j + 1]
        if at_min and h[j] < touch_tol:
            res = minimize_scalar(
                lambda t: direction * (f(t) - f0), bounds=(ts[j - 1], ts[j + 1]),
                method="bounded", options={"xatol": 1e-13},
            )
            if abs(res.fun) <= 1e-8 * scale:
                return float(res.x)
    return None
