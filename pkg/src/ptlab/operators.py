"""Hamiltonian, spectrum, symmetry operators and metrics of the gain/loss qubit.

The model is the 2x2 Hamiltonian

.. math::

    H = \\begin{pmatrix} r e^{i\\theta} & d \\\\ d & r e^{-i\\theta} \\end{pmatrix},

which is symmetric under combined parity ``P = sigma_x`` and time reversal
(complex conjugation). Throughout, ``g = r sin(theta)`` is the gain/loss rate,
``disc = d**2 - g**2`` the discriminant and ``Omega = sqrt(disc)`` the
generalized transition frequency, always taken on the principal branch:
``Omega = +i sqrt(-disc)`` when ``disc < 0``. With this choice ``E_+`` is the
gaining eigenvalue (positive imaginary part) in the broken regime.

All matrices are plain ``numpy`` arrays of shape ``(2, 2)`` and dtype
``complex128``; functions never mutate their inputs.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    DegenerateSpectrum,
    MetricNotDiagonalizable,
    NegativeRealAxisEigenvalue,
    RegimeMismatch,
)

EPS_EP = 1e-9
EPS_MAT = 1e-10
EPS_EIG = 1e-10

IDENTITY = np.eye(2, dtype=complex)
SIGMA_PLUS = np.array([[0, 1], [0, 0]], dtype=complex)
SIGMA_MINUS = np.array([[0, 0], [1, 0]], dtype=complex)
_PARITY = np.array([[0, 1], [1, 0]], dtype=complex)


class Regime(str, enum.Enum):
    UNBROKEN = "unbroken"
    EXCEPTIONAL_POINT = "exceptional_point"
    BROKEN = "broken"


class Normalization(str, enum.Enum):
    """Scaling conventions for the right eigenvectors."""

    HERMITIAN = "hermitian"  # unit Hermitian norm (N_pm)
    PT = "pt"  # divided by M = sqrt(2 d Omega)
    CPT = "cpt"  # unit norm in the regime-appropriate C PT inner product


class InnerProductKind(str, enum.Enum):
    HERMITIAN = "hermitian"
    PT = "pt"
    GMETRIC = "gmetric"
    CPT_UNBROKEN = "cpt_unbroken"
    CUPT_BROKEN = "cupt_broken"
    CBPT_BROKEN = "cbpt_broken"


def classify_regime(p: "ModelParams", eps_ep: float | None = None) -> Regime:
    """Unbroken if ``disc > eps_ep``, broken if ``disc < -eps_ep``, else EP."""
    eps = p.eps_ep if eps_ep is None else eps_ep
    if eps <= 0:
        raise ValueError("eps_ep must be positive")
    if p.disc > eps:
        return Regime.UNBROKEN
    if p.disc < -eps:
        return Regime.BROKEN
    return Regime.EXCEPTIONAL_POINT


@dataclass(frozen=True)
class ModelParams:
    """Amplitude ``r``, direct coupling ``d`` and angle ``theta`` (radians)."""

    r: float
    d: float
    theta: float
    eps_ep: float = EPS_EP

    def __post_init__(self):
        for name in ("r", "d", "theta", "eps_ep"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        if self.r < 0 or self.d < 0:
            raise ValueError("r and d must be non-negative")

    @property
    def gain(self) -> float:
        """Gain/loss rate ``r sin(theta)``."""
        return self.r * math.sin(self.theta)

    @property
    def disc(self) -> float:
        return self.d**2 - self.gain**2

    @property
    def omega(self) -> complex:
        """Principal square root of the discriminant."""
        if self.disc >= 0:
            return complex(math.sqrt(self.disc), 0.0)
        return complex(0.0, math.sqrt(-self.disc))

    @property
    def kappa(self) -> float:
        """``sqrt(-disc)`` in the broken regime, 0 otherwise."""
        return math.sqrt(max(-self.disc, 0.0))

    @property
    def damping_rate(self) -> float:
        """Dissipator rate ``Gamma = 2 sqrt(g**2 - d**2)`` of the broken regime."""
        return 2.0 * self.kappa

    @property
    def regime(self) -> Regime:
        return classify_regime(self)


@dataclass(frozen=True)
class SpectralData:
    e_plus: complex
    e_minus: complex
    v_plus: np.ndarray
    v_minus: np.ndarray
    normalization: Normalization


@dataclass(frozen=True)
class SymmetryOperatorSet:
    parity: np.ndarray
    c_op: np.ndarray
    metric: np.ndarray
    dyson: np.ndarray
    dyson_inv: np.ndarray
    iso_h: np.ndarray
    regime: Regime


def build_hamiltonian(p: ModelParams) -> np.ndarray:
    phase = complex(math.cos(p.theta), math.sin(p.theta))
    return np.array([[p.r * phase, p.d], [p.d, p.r * phase.conjugate()]], dtype=complex)


def coupling_matrix(p: ModelParams) -> np.ndarray:
    """Traceless part ``H - r cos(theta)``; it squares to ``disc * 1``."""
    g = p.gain
    return np.array([[1j * g, p.d], [p.d, -1j * g]], dtype=complex)


def hermitian_split(H: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(H_h, H_ah)`` with ``H = H_h + i H_ah``, both Hermitian."""
    H = np.asarray(H, dtype=complex)
    Hd = H.conj().T
    return (H + Hd) / 2, (H - Hd) / 2j


def parity() -> np.ndarray:
    return _PARITY.copy()


def pt_conjugate(A: np.ndarray) -> np.ndarray:
    """``(PT)^-1 A (PT)`` for an operator ``A``, i.e. ``P conj(A) P``."""
    return _PARITY @ np.conj(A) @ _PARITY


def eigenvalues(p: ModelParams) -> tuple[complex, complex]:
    """``E_pm = r cos(theta) +- Omega``; defined at the EP as well."""
    base = p.r * math.cos(p.theta)
    return base + p.omega, base - p.omega


def exceptional_theta(r: float, d: float) -> float | None:
    """Angle in ``[0, pi/2]`` at which ``d = r sin(theta)``, or None if ``d > r``."""
    if r <= 0:
        raise ValueError("r must be positive")
    if d > r:
        return None
    return math.asin(d / r)


def _first_components(p: ModelParams) -> tuple[complex, complex]:
    # a_pm = i g +- Omega; a_+ a_- = -d**2 gives the smaller one without cancellation
    a_p = 1j * p.gain + p.omega
    a_m = 1j * p.gain - p.omega
    if abs(a_p) >= abs(a_m):
        a_m = -(p.d**2) / a_p
    else:
        a_p = -(p.d**2) / a_m
    return a_p, a_m


def _raw_eigenvectors(p: ModelParams) -> tuple[np.ndarray, np.ndarray]:
    if p.d <= 0:
        raise ValueError("eigenvector construction requires d > 0")
    if p.regime is Regime.EXCEPTIONAL_POINT:
        raise DegenerateSpectrum(f"eigenvectors coalesce at disc={p.disc:.3g}")
    a_p, a_m = _first_components(p)
    return (np.array([a_p, p.d], dtype=complex), np.array([a_m, p.d], dtype=complex))


def eigensystem(p: ModelParams, norm: Normalization = Normalization.HERMITIAN) -> SpectralData:
    """Eigenvalues and right eigenvectors ``(i g +- Omega, d)`` under ``norm``.

    Raises
    ------
    DegenerateSpectrum
        At the exceptional point, where the eigenvectors coalesce.
    """
    norm = Normalization(norm)
    e_p, e_m = eigenvalues(p)
    v_p, v_m = _raw_eigenvectors(p)
    if norm is Normalization.HERMITIAN:
        v_p, v_m = v_p / np.linalg.norm(v_p), v_m / np.linalg.norm(v_m)
    elif norm is Normalization.PT:
        m = np.sqrt(complex(2 * p.d * p.omega))
        v_p, v_m = v_p / m, v_m / m
    else:
        g = metric(p)
        v_p = v_p / math.sqrt((v_p.conj() @ g @ v_p).real)
        v_m = v_m / math.sqrt((v_m.conj() @ g @ v_m).real)
    return SpectralData(e_p, e_m, v_p, v_m, norm)


def c_u_continued(p: ModelParams) -> np.ndarray:
    """``C_u = (H - r cos(theta)) / Omega`` on the principal branch, any regime."""
    if p.regime is Regime.EXCEPTIONAL_POINT:
        raise DegenerateSpectrum("C_u is singular at the exceptional point")
    return coupling_matrix(p) / p.omega


def c_unbroken(p: ModelParams) -> np.ndarray:
    """The C operator of the unbroken regime."""
    if p.regime is Regime.BROKEN:
        raise RegimeMismatch("c_unbroken needs the unbroken regime; use c_u_continued")
    return c_u_continued(p)


def c_source(p: ModelParams) -> np.ndarray:
    """Source operator of the broken-regime Liouville and Lindblad equations.

    This is ``C_u`` with ``sqrt(disc)`` taken as ``-i sqrt(-disc)``, i.e.
    ``-c_u_continued(p)``. With it ``C_b = -i c_source + (2 kappa / d) sigma_-``
    and ``H - H^{C_b PT} = -2 i kappa c_source``.
    """
    if p.regime is not Regime.BROKEN:
        raise RegimeMismatch("the source operator exists only in the broken regime")
    return coupling_matrix(p) / complex(0.0, -p.kappa)


def c_broken(p: ModelParams) -> np.ndarray:
    """``C_b = sum_n PT |phi_n><phi_n|`` over the PT-normalized eigenstates.

    ``PT`` acts on the projector as ``P conj(.)``, so each term is
    ``P conj(phi) phi^T``.
    """
    if p.regime is Regime.EXCEPTIONAL_POINT:
        raise DegenerateSpectrum("C_b is undefined at the exceptional point")
    if p.regime is not Regime.BROKEN:
        raise RegimeMismatch("c_broken needs the broken regime")
    spec = eigensystem(p, Normalization.PT)
    return sum(_PARITY @ np.outer(v.conj(), v) for v in (spec.v_plus, spec.v_minus))


def c_operator(p: ModelParams) -> np.ndarray:
    """``C_u`` in the unbroken regime, ``C_b`` in the broken regime."""
    if p.regime is Regime.BROKEN:
        return c_broken(p)
    return c_unbroken(p)


def metric_from_c(c_op: np.ndarray) -> np.ndarray:
    """Metric ``g = (C P)^T``."""
    return (np.asarray(c_op, dtype=complex) @ _PARITY).T


def metric(p: ModelParams) -> np.ndarray:
    return metric_from_c(c_operator(p))


def inner_product(kind: InnerProductKind, psi, phi, p: ModelParams | None = None) -> complex:
    """``<psi| W |phi>`` with the weight ``W`` selected by ``kind``.

    The bra side is always the Hermitian conjugate of ``psi``.
    """
    kind = InnerProductKind(kind)
    psi = np.asarray(psi, dtype=complex)
    phi = np.asarray(phi, dtype=complex)
    if kind is InnerProductKind.HERMITIAN:
        weight = IDENTITY
    elif kind is InnerProductKind.PT:
        weight = _PARITY.T
    else:
        if p is None:
            raise ValueError(f"{kind.value} inner product needs model parameters")
        regime = p.regime
        if kind is InnerProductKind.GMETRIC:
            weight = metric(p)
        elif kind is InnerProductKind.CPT_UNBROKEN:
            if regime is not Regime.UNBROKEN:
                raise RegimeMismatch("CPT inner product of the unbroken regime")
            weight = metric_from_c(c_unbroken(p))
        elif kind is InnerProductKind.CUPT_BROKEN:
            if regime is not Regime.BROKEN:
                raise RegimeMismatch("C_u PT inner product requires the broken regime")
            weight = metric_from_c(c_u_continued(p))
        else:
            weight = metric_from_c(c_broken(p))
    return complex(psi.conj() @ weight @ phi)


def principal_sqrt(a: np.ndarray, cond_max: float = 1e12) -> tuple[np.ndarray, np.ndarray]:
    """Principal square root of a 2x2 matrix and its inverse by eigendecomposition.

    Hermitian input goes through ``eigh``; the general case through ``eig``.

    Raises
    ------
    MetricNotDiagonalizable
        If the eigenvector matrix is numerically singular.
    NegativeRealAxisEigenvalue
        If an eigenvalue lies on the closed negative real axis.
    """
    a = np.asarray(a, dtype=complex)
    scale = max(np.abs(a).max(), 1e-300)
    if np.abs(a - a.conj().T).max() <= 1e-13 * scale:
        w, V = np.linalg.eigh((a + a.conj().T) / 2)
        w = w.astype(complex)
        Vinv = V.conj().T
    else:
        w, V = np.linalg.eig(a)
        if np.linalg.cond(V) > cond_max:
            raise MetricNotDiagonalizable("eigenvectors of the metric are not a basis")
        Vinv = np.linalg.inv(V)
    for lam in w:
        if lam.real <= 0 and abs(lam.imag) <= 1e-14 * scale:
            raise NegativeRealAxisEigenvalue(f"eigenvalue {lam} has no principal root")
    root = np.sqrt(w)
    return V @ np.diag(root) @ Vinv, V @ np.diag(1 / root) @ Vinv


def dyson_map(p: ModelParams) -> tuple[np.ndarray, np.ndarray]:
    """``(eta, eta^-1)`` with ``eta`` the principal square root of the metric."""
    if p.regime is Regime.EXCEPTIONAL_POINT:
        raise DegenerateSpectrum("the metric is singular at the exceptional point")
    return principal_sqrt(metric(p))


def isospectral_hamiltonian(p: ModelParams) -> np.ndarray:
    """``h = eta H eta^-1``: Hermitian when unbroken, not when broken."""
    eta, eta_inv = dyson_map(p)
    return eta @ build_hamiltonian(p) @ eta_inv


def symmetry_operators(p: ModelParams) -> SymmetryOperatorSet:
    c_op = c_operator(p)
    eta, eta_inv = principal_sqrt(metric_from_c(c_op))
    return SymmetryOperatorSet(
        parity=parity(),
        c_op=c_op,
        metric=metric_from_c(c_op),
        dyson=eta,
        dyson_inv=eta_inv,
        iso_h=eta @ build_hamiltonian(p) @ eta_inv,
        regime=p.regime,
    )


# Closed forms of the Dyson map and the mapped Hamiltonian. These are
# independent of the spectral square root above and serve as its check.


def dyson_map_closed_form(p: ModelParams) -> np.ndarray:
    regime = p.regime
    if regime is Regime.UNBROKEN:
        g = p.gain
        a, b = math.sqrt(p.d + g), math.sqrt(p.d - g)
        pref = 1.0 / (2.0 * p.disc**0.25)
        return pref * np.array(
            [[a + b, -1j * (a - b)], [1j * (a - b), a + b]], dtype=complex
        )
    if regime is Regime.BROKEN:
        s = p.gain / p.d
        c2 = p.disc / p.d**2
        rad = math.sqrt(c2 * c2 + s * s)
        w_p = np.sqrt(complex(s * s + rad)) + np.sqrt(complex(s * s - rad))
        w_m = np.sqrt(complex(s * s + rad)) - np.sqrt(complex(s * s - rad))
        pref = 1.0 / (2.0 * (-c2) ** 0.25)
        return pref * np.array(
            [
                [w_p + c2 / rad * w_m, -1j * s / rad * w_m],
                [1j * s / rad * w_m, w_p - c2 / rad * w_m],
            ],
            dtype=complex,
        )
    raise DegenerateSpectrum("no Dyson map at the exceptional point")


def isospectral_closed_form(p: ModelParams) -> np.ndarray:
    base = p.r * math.cos(p.theta)
    regime = p.regime
    if regime is Regime.UNBROKEN:
        om = math.sqrt(p.disc)
        return np.array([[base, om], [om, base]], dtype=complex)
    if regime is Regime.BROKEN:
        s = p.gain / p.d
        c2 = p.disc / p.d**2
        den = c2 * c2 + s * s
        root = math.sqrt(-c2)
        diag = p.gain * (c2 * c2 + root) / den
        off = p.kappa * (c2 + s * s * root) / den
        return np.array([[base + 1j * diag, -off], [off, base - 1j * diag]], dtype=complex)
    raise DegenerateSpectrum("no isospectral map at the exceptional point")
