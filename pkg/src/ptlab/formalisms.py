"""Density matrices in the Hermitian-adjoint, biorthogonal and isospectral pictures.

* Hermitian-adjoint: ``rho = sum p_n |phi_n><phi_n|`` evolves as
  ``U rho U^dagger``; its trace is not conserved.
* Biorthogonal: ``rho_b = sum p_n |phi_n><<phi_n|`` with ``<<phi| = <phi| g``.
  Unbroken, ``rho_b -> U rho_b U^-1``. Broken, the adjoint states follow
  ``H^{C_b PT} = g^-1 H^dagger g`` and ``rho_b`` is integrated from
  ``d rho_b/dt = -i (H rho_b - rho_b H^{C_b PT})``.
* Isospectral: ``rho_eta = eta rho_b eta^-1``.

Observables (purity, von Neumann and Renyi entropies) are evaluated on the
trace-normalized matrix.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.integrate import solve_ivp

from .errors import (
    DegenerateSpectrum,
    IntegrationFailure,
    NonRealSpectrum,
    RegimeMismatch,
    VanishingTrace,
    WeightSumViolation,
)
from .dynamics import as_state, ket, propagator
from .operators import (
    ModelParams,
    Normalization,
    Regime,
    build_hamiltonian,
    c_source,
    dyson_map,
    eigensystem,
    hermitian_split,
    metric,
)

DEFAULT_ALPHAS = (0.5, 2.0, 3.0)
EPS_TRACE = 1e-14
EPS_SPEC = 1e-8
ODE_RTOL = 1e-12
ODE_ATOL = 1e-14


class Formalism(str, enum.Enum):
    HERMITIAN_ADJOINT = "hermitian_adjoint"
    BIORTHOGONAL = "biorthogonal"
    ISOSPECTRAL = "isospectral"


@dataclass(frozen=True)
class DensityState:
    rho: np.ndarray
    formalism: Formalism
    params: ModelParams
    t: float = 0.0

    @property
    def trace(self) -> complex:
        return complex(np.trace(self.rho))


@dataclass(frozen=True)
class EntropyReport:
    trace: float
    purity: float
    von_neumann: float
    renyi: dict = field(default_factory=dict)
    eigenvalues: tuple = ()


def _projector(psi, bra) -> np.ndarray:
    return np.outer(psi, bra)


def density_from_ensemble(
    weights,
    formalism: Formalism,
    p: ModelParams,
    *,
    cpt_norm_power: int = 1,
) -> DensityState:
    """Build ``sum p_n |phi_n><phi_n|`` (or ``<<phi_n|``) from ``(p_n, state)`` pairs.

    Hermitian-adjoint states are scaled to unit Hermitian norm. Biorthogonal
    (and isospectral) states are scaled by ``(phi|phi)_CPT ** (cpt_norm_power / 2)``;
    ``cpt_norm_power=1`` gives CPT-normalized states and ``2`` reproduces
    the ``|0><0| g / (0|0)**2`` normalization used for the biorthogonal
    trace figure.
    """
    formalism = Formalism(formalism)
    pairs = [(float(w), as_state(s)) for w, s in weights]
    if any(w < 0 for w, _ in pairs):
        raise WeightSumViolation("ensemble weights must be non-negative")
    total = sum(w for w, _ in pairs)
    if abs(total - 1.0) > 1e-12:
        raise WeightSumViolation(f"ensemble weights sum to {total!r}, not 1")

    if formalism is Formalism.HERMITIAN_ADJOINT:
        rho = sum(w * _projector(s, s.conj()) / np.vdot(s, s).real for w, s in pairs)
        return DensityState(np.asarray(rho, dtype=complex), formalism, p)

    g = metric(p)
    rho_b = np.zeros((2, 2), dtype=complex)
    for w, s in pairs:
        norm = (s.conj() @ g @ s).real
        rho_b += w * _projector(s, s.conj() @ g) / norm**cpt_norm_power
    if formalism is Formalism.BIORTHOGONAL:
        return DensityState(rho_b, formalism, p)
    eta, eta_inv = dyson_map(p)
    return DensityState(eta @ rho_b @ eta_inv, formalism, p)


def maximally_mixed(formalism: Formalism, p: ModelParams) -> DensityState:
    """The state ``1/2`` of every formalism.

    Hermitian-adjoint: equal mixture of ``|0>`` and ``|1>``. Biorthogonal
    and isospectral: equal mixture of the CPT-normalized eigenstates, which
    is ``1/2`` by completeness (and stays ``1/2`` under ``eta . eta^-1``).
    """
    formalism = Formalism(formalism)
    if formalism is Formalism.HERMITIAN_ADJOINT:
        return density_from_ensemble([(0.5, ket("0")), (0.5, ket("1"))], formalism, p)
    return eigenbasis_mixed(formalism, p)


def eigenbasis_mixed(formalism: Formalism, p: ModelParams) -> DensityState:
    """Equal mixture of the two energy eigenstates.

    In the biorthogonal picture this is ``1/2`` by completeness.
    """
    spec = eigensystem(p, Normalization.HERMITIAN)
    return density_from_ensemble([(0.5, spec.v_plus), (0.5, spec.v_minus)], formalism, p)


def conjugate_hamiltonian(p: ModelParams) -> np.ndarray:
    """``g^-1 H^dagger g``, the generator of the biorthogonal adjoint states."""
    g = metric(p)
    return np.linalg.solve(g, build_hamiltonian(p).conj().T @ g)


def hermitian_adjoint_rhs(rho: np.ndarray, p: ModelParams) -> np.ndarray:
    H = build_hamiltonian(p)
    return -1j * (H @ rho - rho @ H.conj().T)


def biorthogonal_rhs(rho: np.ndarray, p: ModelParams) -> np.ndarray:
    """``-i (H rho - rho H^{C PT})`` with the regime-appropriate metric."""
    H = build_hamiltonian(p)
    return -1j * (H @ rho - rho @ conjugate_hamiltonian(p))


def source_rhs(rho: np.ndarray, p: ModelParams) -> np.ndarray:
    """Broken regime: ``-i [H, rho] - Gamma rho C`` with ``C`` the source operator."""
    H = build_hamiltonian(p)
    return -1j * (H @ rho - rho @ H) - p.damping_rate * rho @ c_source(p)


def lindblad_rhs(rho: np.ndarray, p: ModelParams) -> np.ndarray:
    """``-i [H + (i/2) Gamma C, rho] - (Gamma/2) {C, rho}`` (no jump terms).

    Raises
    ------
    RegimeMismatch
        Outside the broken regime.
    """
    if p.regime is not Regime.BROKEN:
        raise RegimeMismatch("the Lindblad form exists only in the broken regime")
    H = build_hamiltonian(p)
    C = c_source(p)
    gamma = p.damping_rate
    K = H + 0.5j * gamma * C
    return -1j * (K @ rho - rho @ K) - 0.5 * gamma * (C @ rho + rho @ C)


def _integrate_biorthogonal(rho0: np.ndarray, p: ModelParams, t0: float, times) -> list[np.ndarray]:
    times = np.asarray(times, dtype=float)
    H = build_hamiltonian(p)
    Hc = conjugate_hamiltonian(p)

    def rhs(_t, y):
        r = y.reshape(2, 2)
        return (-1j * (H @ r - r @ Hc)).reshape(-1)

    out = [rho0.copy() if t == t0 else None for t in times]
    for direction in (1, -1):
        sel = [k for k, t in enumerate(times) if (t - t0) * direction > 0]
        if not sel:
            continue
        order = sorted(sel, key=lambda k: direction * times[k])
        t_eval = times[order]
        sol = solve_ivp(
            rhs, (t0, t_eval[-1]), rho0.reshape(-1).astype(complex), method="DOP853",
            t_eval=t_eval, rtol=ODE_RTOL, atol=ODE_ATOL,
        )
        if sol.status != 0:
            raise IntegrationFailure(sol.message)
        for j, k in enumerate(order):
            out[k] = sol.y[:, j].reshape(2, 2)
    return out


def evolve_series(rho0: DensityState, times) -> list[DensityState]:
    """Evolve ``rho0`` to each of ``times`` (absolute times, any order)."""
    times = [float(t) for t in times]
    p = rho0.params
    form = rho0.formalism
    regime = p.regime

    if form is Formalism.HERMITIAN_ADJOINT:
        mats = []
        for t in times:
            U = propagator(p, t - rho0.t)
            mats.append(U @ rho0.rho @ U.conj().T)
    else:
        if regime is Regime.EXCEPTIONAL_POINT:
            raise DegenerateSpectrum("no biorthogonal metric at the exceptional point")
        rho_b0 = rho0.rho
        if form is Formalism.ISOSPECTRAL:
            eta, eta_inv = dyson_map(p)
            rho_b0 = eta_inv @ rho_b0 @ eta
        if regime is Regime.UNBROKEN:
            mats = []
            for t in times:
                U = propagator(p, t - rho0.t)
                mats.append(U @ rho_b0 @ np.linalg.inv(U))
        else:
            mats = _integrate_biorthogonal(rho_b0, p, rho0.t, times)
        if form is Formalism.ISOSPECTRAL:
            mats = [eta @ m @ eta_inv for m in mats]
    return [DensityState(m, form, p, t) for m, t in zip(mats, times)]


def evolve_density(rho0: DensityState, t: float) -> DensityState:
    return evolve_series(rho0, [t])[0]


def trace_rate(rho: DensityState) -> complex:
    """Instantaneous ``d Tr[rho] / dt``."""
    p = rho.params
    if rho.formalism is Formalism.HERMITIAN_ADJOINT:
        _, H_ah = hermitian_split(build_hamiltonian(p))
        return complex(2 * np.trace(H_ah @ rho.rho))
    if p.regime is Regime.UNBROKEN:
        return 0j
    r = rho.rho
    if rho.formalism is Formalism.ISOSPECTRAL:
        eta, eta_inv = dyson_map(p)
        r = eta_inv @ r @ eta
    return complex(-p.damping_rate * np.trace(c_source(p) @ r))


def normalize(rho: DensityState) -> DensityState:
    tr = rho.trace
    if abs(tr) <= EPS_TRACE:
        raise VanishingTrace(f"trace {tr} too small to normalize")
    return replace(rho, rho=rho.rho / tr)


def _matrix(rho) -> np.ndarray:
    return rho.rho if isinstance(rho, DensityState) else np.asarray(rho, dtype=complex)


def _normalized_matrix(rho) -> np.ndarray:
    m = _matrix(rho)
    tr = np.trace(m)
    if abs(tr) <= EPS_TRACE:
        raise VanishingTrace(f"trace {tr} too small to normalize")
    return m / tr


def purity(rho) -> float:
    """``Tr[rho~^2]`` of the trace-normalized matrix."""
    m = _normalized_matrix(rho)
    return float(np.trace(m @ m).real)


def spectrum(rho, eps_spec: float = EPS_SPEC) -> np.ndarray:
    """Clamped real eigenvalues of the normalized matrix.

    Raises
    ------
    NonRealSpectrum
        If an eigenvalue has an imaginary part or negative part beyond
        ``eps_spec * ||rho~||``.
    """
    m = _normalized_matrix(rho)
    lam = np.linalg.eigvals(m)
    tol = eps_spec * max(np.linalg.norm(m, 2), 1.0)
    if np.any(np.abs(lam.imag) > tol) or np.any(lam.real < -tol):
        raise NonRealSpectrum(f"eigenvalues {lam} are not in the real unit interval")
    return np.sort(np.clip(lam.real, 0.0, None))[::-1]


def entropy(rho, alphas=DEFAULT_ALPHAS, eps_spec: float = EPS_SPEC) -> EntropyReport:
    """Trace, purity, von Neumann entropy (nats) and Renyi entropies.

    ``alpha == 1`` in ``alphas`` maps to the von Neumann value.
    """
    lam = spectrum(rho, eps_spec)
    nz = lam[lam > 0]
    s_vn = float(-(nz * np.log(nz)).sum()) + 0.0
    renyi = {}
    for a in alphas:
        a = float(a)
        if a <= 0:
            raise ValueError("Renyi order must be positive")
        if a == 1.0:
            renyi[a] = s_vn
        else:
            renyi[a] = float(math.log((nz**a).sum()) / (1 - a)) + 0.0
    tr = complex(np.trace(_matrix(rho)))
    return EntropyReport(tr.real, purity(rho), s_vn, renyi, tuple(float(x) for x in lam))


def rank(rho, eps_spec: float = EPS_SPEC) -> int:
    lam = np.abs(np.linalg.eigvals(_normalized_matrix(rho)))
    return int((lam > eps_spec).sum())


def map_to_isospectral(rho_b: DensityState) -> DensityState:
    if rho_b.formalism is not Formalism.BIORTHOGONAL:
        raise ValueError("map_to_isospectral expects a biorthogonal density matrix")
    eta, eta_inv = dyson_map(rho_b.params)
    return replace(rho_b, rho=eta @ rho_b.rho @ eta_inv, formalism=Formalism.ISOSPECTRAL)
