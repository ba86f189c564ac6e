"""Light-atom interaction layer: effective rates, squeezing solution,
gain-Lindblad master equation, and free-space signal-to-noise estimates.

The collective spin-wave mode couples coherently to the forward-scattered
field while spontaneous emission heats every atomic Fourier mode at the
same per-mode rate; simulating one collective mode plus a few
representative noise modes is enough to exhibit the rate separation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from . import fock

ADIABATIC_RATIO_WARN = 10.0


@dataclass(frozen=True)
class EnsembleParams:
    """Microscopic parameters of a driven Lambda-level ensemble."""

    atom_count: int
    rabi: float
    detuning: float
    coupling: float
    cavity_decay: float
    spont_rate: float
    interaction_time: float

    def __post_init__(self):
        if self.atom_count < 1:
            raise ValueError(f"atom_count must be positive, got {self.atom_count}")
        if self.detuning == 0.0:
            raise ValueError("detuning must be nonzero")
        if self.cavity_decay <= 0.0:
            raise ValueError(f"cavity_decay must be positive, got {self.cavity_decay}")
        if self.spont_rate < 0.0:
            raise ValueError(f"spont_rate must be non-negative, got {self.spont_rate}")
        if self.interaction_time < 0.0:
            raise ValueError(f"interaction_time must be non-negative, got {self.interaction_time}")

    @property
    def bad_cavity_ratio(self) -> float:
        """Cavity decay over the collective coupling rate; >> 1 justifies
        adiabatic elimination of the field mode."""
        coupling_rate = math.sqrt(self.atom_count) * abs(self.rabi * self.coupling) / abs(self.detuning)
        return math.inf if coupling_rate == 0 else self.cavity_decay / coupling_rate


@dataclass(frozen=True)
class EffectiveRates:
    kappa_prime: float        # collective emission rate into the signal mode
    gamma_s_prime: float      # per-atom spontaneous dephasing rate
    snr: float                # kappa_prime / gamma_s_prime
    squeeze: float            # Bogoliubov parameter r_c
    excitation_prob: float    # tanh^2 r_c
    bad_cavity_ratio: float
    adiabatic_marginal: bool


def effective_rates(params: EnsembleParams) -> EffectiveRates:
    """Adiabatic-elimination rates of the ensemble-field dynamics.

    kappa' = 4 N |Omega g|^2 / (Delta^2 kappa), gamma' = (Omega/Delta)^2 gamma,
    and cosh r_c = exp(kappa' t / 2) for an interaction window t.
    """
    kp = 4.0 * params.atom_count * abs(params.rabi * params.coupling) ** 2 / (
        params.detuning ** 2 * params.cavity_decay)
    gp = (params.rabi / params.detuning) ** 2 * params.spont_rate
    snr = (4.0 * params.atom_count * abs(params.coupling) ** 2
           / (params.cavity_decay * params.spont_rate)) if params.spont_rate > 0 else math.inf
    r_c = math.acosh(math.exp(kp * params.interaction_time / 2.0))
    p_c = math.tanh(r_c) ** 2
    ratio = params.bad_cavity_ratio
    return EffectiveRates(kp, gp, snr, r_c, p_c, ratio, ratio < ADIABATIC_RATIO_WARN)


def langevin_mean_solution(params: EnsembleParams, t: float) -> float:
    """Deterministic amplitude gain exp(kappa' t / 2) of the collective mode."""
    if t < 0:
        raise ValueError("t must be non-negative")
    kp = effective_rates(params).kappa_prime
    return math.exp(kp * t / 2.0)


def langevin_mean_ode(params: EnsembleParams, t_grid, rtol: float = 1e-11,
                      atol: float = 1e-13) -> np.ndarray:
    """Numerical integration of the drift equation dS/dt = (kappa'/2) S.

    Cross-check for the closed-form gain; tolerances are tighter than the
    master-equation default because the comparison budget is 1e-8.
    """
    kp = effective_rates(params).kappa_prime
    t_grid = np.asarray(t_grid, dtype=float)
    sol = solve_ivp(lambda t, y: 0.5 * kp * y, (0.0, float(t_grid[-1])), [1.0],
                    t_eval=t_grid, method="DOP853", rtol=rtol, atol=atol)
    if not sol.success:
        raise RuntimeError(f"gain integration failed: {sol.message}")
    return sol.y[0]


def squeezed_joint_state(rates: EffectiveRates, cutoff: int,
                         trunc_tol: float = 1e-6) -> fock.DensityOperator:
    """Joint atomic/photonic state after the interaction window.

    Two-mode squeezed vacuum with parameter ``rates.squeeze``; mode 0 is the
    collective atomic mode, mode 1 the effective pulse mode.
    """
    layout = fock.ModeLayout(2, cutoff)
    return fock.apply_two_mode_squeeze(fock.vacuum(layout), 0, 1, rates.squeeze,
                                       trunc_tol=trunc_tol)


@dataclass
class ModePopulations:
    """Populations of the collective mode and of one representative noise
    mode over a time grid (noise modes are statistically identical; the
    reported value is their average)."""

    time_grid: np.ndarray
    collective: np.ndarray
    per_noise_mode: np.ndarray
    traces: np.ndarray

    def rate_ratio(self) -> float:
        """Least-squares growth-rate ratio (through the origin) of the
        collective mode over a noise mode."""
        t = self.time_grid
        denom = float(np.dot(self.per_noise_mode, t))
        if denom == 0.0:
            return math.inf
        return float(np.dot(self.collective, t)) / denom


def _gain_lindblad_populations(kappa_prime: float, gamma_s_prime: float,
                               n_modes: int, cutoff: int, t_grid,
                               rtol: float = 1e-9, atol: float = 1e-12) -> ModePopulations:
    t_grid = np.asarray(t_grid, dtype=float)
    layout = fock.ModeLayout(n_modes, cutoff)
    d = layout.dim
    dm = layout.mode_dim
    a = np.diag(np.sqrt(np.arange(1, dm)), 1).astype(complex)

    def embed(op, mode):
        mats = [np.eye(dm, dtype=complex)] * n_modes
        mats[mode] = op
        out = mats[0]
        for m in mats[1:]:
            out = np.kron(out, m)
        return out

    rates = [kappa_prime + gamma_s_prime] + [gamma_s_prime] * (n_modes - 1)
    lops = []   # (rate, X, X†X) with X = a† for the gain process
    for mode, rate in enumerate(rates):
        if rate == 0.0:
            continue
        x = embed(a.conj().T, mode)
        lops.append((rate, x, x.conj().T @ x))

    def rhs(_t, y):
        rho = (y[:d * d] + 1j * y[d * d:]).reshape(d, d)
        drho = np.zeros_like(rho)
        for rate, x, xx in lops:
            drho += rate * (x @ rho @ x.conj().T - 0.5 * (xx @ rho + rho @ xx))
        return np.concatenate([drho.real.ravel(), drho.imag.ravel()])

    rho0 = fock.vacuum(layout).matrix
    y0 = np.concatenate([rho0.real.ravel(), rho0.imag.ravel()])
    sol = solve_ivp(rhs, (float(t_grid[0]), float(t_grid[-1])), y0, t_eval=t_grid,
                    method="RK45", rtol=rtol, atol=atol)
    if not sol.success:
        raise RuntimeError(f"master-equation integration failed: {sol.message}")

    number_diag = [np.real(np.diag(embed(a.conj().T @ a, m))) for m in range(n_modes)]
    collective = np.empty(len(t_grid))
    noise = np.zeros(len(t_grid))
    traces = np.empty(len(t_grid))
    for k in range(len(t_grid)):
        rho = (sol.y[:d * d, k] + 1j * sol.y[d * d:, k]).reshape(d, d)
        diag = np.real(np.diag(rho))
        traces[k] = diag.sum()
        collective[k] = float(np.dot(number_diag[0], diag))
        if n_modes > 1:
            noise[k] = float(np.mean([np.dot(number_diag[m], diag)
                                      for m in range(1, n_modes)]))
    return ModePopulations(t_grid, collective, noise, traces)


def integrate_master_equation(params: EnsembleParams, n_modes: int, cutoff: int,
                              t_grid, rtol: float = 1e-9,
                              atol: float = 1e-12) -> ModePopulations:
    """Integrate the gain-Lindblad equation from multimode vacuum.

    Mode 0 (collective) is heated at kappa' + gamma', every other mode at
    gamma' only; valid for rate extraction in the weak-excitation window
    kappa' t << 1.
    """
    if n_modes < 2:
        raise ValueError("need at least one collective and one noise mode")
    rates = effective_rates(params)
    return _gain_lindblad_populations(rates.kappa_prime, rates.gamma_s_prime,
                                      n_modes, cutoff, t_grid, rtol, atol)


@dataclass(frozen=True)
class FreeSpaceSnr:
    snr: float
    optical_depth: float
    superradiance_risk: bool


def free_space_snr(density: float, length: float, wavenumber: float) -> FreeSpaceSnr:
    """Cavity-free signal-to-noise estimate 3 rho L / k^2.

    The value doubles as the on-resonance optical-depth estimate.  The
    superradiance flag is raised when the gas is not dilute on the optical
    wavelength scale (k / rho^{1/3} < 1).
    """
    if density <= 0 or length <= 0 or wavenumber <= 0:
        raise ValueError("density, length and wavenumber must all be positive")
    value = 3.0 * density * length / wavenumber ** 2
    dilute = wavenumber / density ** (1.0 / 3.0)
    return FreeSpaceSnr(snr=value, optical_depth=value, superradiance_risk=dilute < 1.0)
