"""Entanglement generation and swapping: analytic recursion layer plus
brute-force Fock-circuit oracles that re-derive every analytic quantity.

The entangled-link descriptor mixes a vacuum component of relative weight
``c`` with a shared single excitation; each swap doubles the span and maps
``c -> 2c + 1 - eta_s`` while succeeding with probability
``eta_s (1 - eta_s / (2(c+1))) / (c+1)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from . import fock

# analytic swap inputs must have equal vacuum coefficients
_C_MATCH_TOL = 1e-12


class ChainStallError(RuntimeError):
    """A per-level success probability collapsed to (numerically) zero."""


@dataclass(frozen=True)
class EMEState:
    """Effective maximally entangled link: vacuum weight c/(c+1), shared
    single excitation weight 1/(c+1), accumulated channel phase, linearized
    fidelity deficit, and span in attenuation lengths."""

    vacuum_coeff: float
    phase: float = 0.0
    fidelity_deficit: float = 0.0
    span_length: float = 0.0

    def __post_init__(self):
        if self.vacuum_coeff < 0:
            raise ValueError(f"vacuum_coeff must be >= 0, got {self.vacuum_coeff}")
        if not 0.0 <= self.fidelity_deficit <= 1.0:
            raise ValueError(f"fidelity_deficit {self.fidelity_deficit} outside [0, 1]")
        if self.span_length < 0:
            raise ValueError("span_length must be >= 0")

    @property
    def entangled_fraction(self) -> float:
        return 1.0 / (self.vacuum_coeff + 1.0)


@dataclass(frozen=True)
class RepeaterParams:
    """Full protocol parameter set.

    Lengths are in units of the attenuation length unless
    ``attenuation_length`` is set to a physical value; times are seconds.
    """

    excitation_prob: float        # p_c
    pulse_time: float             # t_Delta, seconds
    local_efficiency: float       # eta_p' (distance-independent part)
    swap_efficiency: float        # eta_s
    app_efficiency: float         # eta_a
    dark_prob: float              # p_dc per detection window
    attenuation_length: float = 1.0
    segment_length: float = 1.0   # L_0
    levels: int = 0               # n doublings

    def __post_init__(self):
        checks = [
            ("excitation_prob", 0.0 < self.excitation_prob < 1.0),
            ("pulse_time", self.pulse_time > 0.0),
            ("local_efficiency", 0.0 < self.local_efficiency <= 1.0),
            ("swap_efficiency", 0.0 < self.swap_efficiency <= 1.0),
            ("app_efficiency", 0.0 < self.app_efficiency <= 1.0),
            ("dark_prob", 0.0 <= self.dark_prob < 1.0),
            ("attenuation_length", self.attenuation_length > 0.0),
            ("segment_length", self.segment_length > 0.0),
            ("levels", self.levels >= 0),
        ]
        for name, ok in checks:
            if not ok:
                raise ValueError(f"{name} = {getattr(self, name)} outside its valid range")

    @property
    def eta_p(self) -> float:
        """Overall generation efficiency including segment attenuation."""
        return self.local_efficiency * math.exp(-self.segment_length / self.attenuation_length)

    @property
    def total_length(self) -> float:
        return 2 ** self.levels * self.segment_length

    def with_(self, **overrides) -> "RepeaterParams":
        return replace(self, **overrides)


# ---------------------------------------------------------------------------
# analytic layer


@dataclass(frozen=True)
class GenerationResult:
    state: EMEState
    click_prob: float
    t0: float


def generate_analytic(params: RepeaterParams, channel_phase: float = 0.0) -> GenerationResult:
    """Leading-order entanglement generation across one segment.

    Click probability carries the additive dark-count term; the vacuum
    coefficient is the dark-to-signal click ratio.
    """
    signal = params.eta_p * params.excitation_prob
    if signal <= 0.0:
        raise ValueError("degenerate all-dark generation: eta_p * p_c vanished")
    state = EMEState(
        vacuum_coeff=params.dark_prob / signal,
        phase=channel_phase,
        fidelity_deficit=params.excitation_prob,
        span_length=params.segment_length / params.attenuation_length,
    )
    return GenerationResult(state=state, click_prob=signal + params.dark_prob,
                            t0=params.pulse_time / signal)


def swap_analytic(left: EMEState, right: EMEState, eta_s: float):
    """One entanglement connection of two equal-coefficient links.

    Returns ``(success_prob, fused_state)``.  Defined only for matching
    vacuum coefficients; unequal inputs must go through the circuit oracle.
    """
    if not 0.0 < eta_s <= 1.0:
        raise ValueError(f"swap efficiency {eta_s} outside (0, 1]")
    if abs(left.vacuum_coeff - right.vacuum_coeff) > _C_MATCH_TOL:
        raise ValueError(
            "analytic swap requires equal vacuum coefficients "
            f"({left.vacuum_coeff} vs {right.vacuum_coeff}); use swap_oracle"
        )
    c = left.vacuum_coeff
    p = eta_s * (1.0 - eta_s / (2.0 * (c + 1.0))) / (c + 1.0)
    out = EMEState(
        # 2c + 1 - eta, associated to avoid cancellation at small c
        vacuum_coeff=2.0 * c + (1.0 - eta_s),
        phase=left.phase + right.phase,
        fidelity_deficit=min(1.0, left.fidelity_deficit + right.fidelity_deficit),
        span_length=left.span_length + right.span_length,
    )
    return p, out


def vacuum_coeff_closed_form(i: int, eta_s: float, c0: float = 0.0) -> float:
    """Exact solution 2^i c0 + (2^i - 1)(1 - eta_s) of the affine recursion."""
    if i < 0:
        raise ValueError("level must be >= 0")
    return (2.0 ** i) * c0 + (2.0 ** i - 1.0) * (1.0 - eta_s)


@dataclass(frozen=True)
class ChainLevel:
    level: int
    length: float            # units of attenuation length
    vacuum_coeff: float
    success_prob: float      # click probability at level 0, swap probability above
    fidelity_deficit: float
    elapsed_time: float      # seconds


def chain(params: RepeaterParams, channel_phase: float = 0.0) -> list[ChainLevel]:
    """Per-level state of the doubling chain, levels 0..n.

    Cumulative time follows the multiplicative rule T_i = T_{i-1} / p_i.
    """
    gen = generate_analytic(params, channel_phase)
    state = gen.state
    rows = [ChainLevel(0, state.span_length, state.vacuum_coeff, gen.click_prob,
                       state.fidelity_deficit, gen.t0)]
    t = gen.t0
    for i in range(1, params.levels + 1):
        p, state = swap_analytic(state, state, params.swap_efficiency)
        if p < 1e-12:
            raise ChainStallError(f"success probability {p} at level {i}")
        t /= p
        rows.append(ChainLevel(i, state.span_length, state.vacuum_coeff, p,
                               state.fidelity_deficit, t))
    return rows


# ---------------------------------------------------------------------------
# circuit oracles


def eme_density(layout: fock.ModeLayout, pair, c: float, phase: float) -> fock.DensityOperator:
    """Link density operator embedded in ``layout`` with all other modes in
    vacuum."""
    occ_vac = tuple(0 for _ in range(layout.modes))

    def occ_one(mode):
        return tuple(1 if m == mode else 0 for m in range(layout.modes))

    psi = fock.pure_state(layout, {
        occ_one(pair[0]): 1.0 / math.sqrt(2.0),
        occ_one(pair[1]): complex(math.cos(phase), math.sin(phase)) / math.sqrt(2.0),
    }, normalize=False)
    vac = fock.number_state(layout, occ_vac)
    m = (c * vac.to_density().matrix + psi.to_density().matrix) / (c + 1.0)
    return fock.DensityOperator(layout, m)


@dataclass(frozen=True)
class GenerationOracleResult:
    c_measured: float
    infidelity: float
    click_prob: float


def generation_circuit(p_c: float, eta_p: float, p_dc: float,
                       channel_phase: float = 0.0, cutoff: int = 4,
                       include_second_order: bool = True):
    """Exact generation circuit: two squeezed-pair sources, channel loss, a
    balanced beamsplitter and one heralding click.

    Returns ``(joint click probability, conditional 2-mode atomic state)``
    with the click taken on the port that heralds the plus-superposition.
    """
    layout4 = fock.ModeLayout(4, cutoff)      # atom_L, phot_L, atom_R, phot_R
    side = {(0, 0): 1.0, (1, 1): math.sqrt(p_c)}
    if include_second_order:
        side[(2, 2)] = p_c                    # squeezed-expansion amplitude tanh^2 r
    layout2 = fock.ModeLayout(2, cutoff)
    src = np.zeros(layout2.dim, dtype=complex)
    for occ, amp in side.items():
        src[layout2.index(occ)] = amp
    joint = np.kron(src, src)
    if not include_second_order:
        # ideal case: drop every probability-p_c^2 term, including the
        # one-excitation-per-side cross product
        for k, occ in enumerate(layout4.occupations()):
            if occ[0] + occ[2] > 1:
                joint[k] = 0.0
    joint = joint / np.linalg.norm(joint)
    rho = fock.DensityOperator(layout4, np.outer(joint, joint.conj()))

    rho = fock.apply_loss(rho, 1, eta_p)
    rho = fock.apply_loss(rho, 3, eta_p)
    rho = fock.apply_phase(rho, 3, channel_phase)
    rho = fock.apply_beamsplitter(rho, 1, 3)

    det = fock.DetectorModel(efficiency=1.0, dark_count_prob=p_dc)
    p_click, rho = fock.measure_detector(rho, 3, det, "click")      # plus port
    p_silent, rho = fock.measure_detector(rho, 1, det, "no_click")  # minus port
    return p_click * p_silent, rho


def generate_oracle(params: RepeaterParams, cutoff: int = 4,
                    channel_phase: float = 0.0,
                    include_second_order: bool = True) -> GenerationOracleResult:
    """Measure the analytic generation claims on the exact circuit.

    ``c_measured`` is the conditional vacuum-to-single-excitation population
    ratio; ``infidelity`` is the conditional weight outside the ideal link
    support (vacuum plus the plus-superposition), the multi-excitation noise
    that survives a single click.
    """
    prob, rho = generation_circuit(params.excitation_prob, params.eta_p,
                                   params.dark_prob, channel_phase, cutoff,
                                   include_second_order)
    vac = rho.population((0, 0))
    singles = rho.population((1, 0)) + rho.population((0, 1))
    psi_plus = fock.pure_state(rho.layout, {
        (1, 0): 1.0 / math.sqrt(2.0),
        (0, 1): complex(math.cos(channel_phase), math.sin(channel_phase)) / math.sqrt(2.0),
    }, normalize=False)
    f_plus = fock.fidelity(rho, psi_plus)
    return GenerationOracleResult(
        c_measured=vac / singles,
        infidelity=max(0.0, 1.0 - vac - f_plus),
        click_prob=prob,
    )


@dataclass(frozen=True)
class SwapOracleResult:
    success_prob: float
    c_measured: float
    post_states: tuple    # conditional link states for the two herald patterns


def swap_oracle(c: float, eta_s: float, cutoff: int = 2,
                phase_left: float = 0.0, phase_right: float = 0.0) -> SwapOracleResult:
    """Exact entanglement connection of two links with coefficient ``c``.

    Retrieval and detection losses are lumped into ``eta_s`` ahead of the
    balanced beamsplitter; the herald is exactly one detected photon, the
    event the analytic recursion counts (a two-photon event that loses one
    photon is indistinguishable from it and feeds the vacuum term).
    """
    if not 0.0 < eta_s <= 1.0:
        raise ValueError(f"swap efficiency {eta_s} outside (0, 1]")
    layout = fock.ModeLayout(4, cutoff)       # L, I1, I2, R
    left = eme_density(fock.ModeLayout(2, cutoff), (0, 1), c, phase_left)
    right = eme_density(fock.ModeLayout(2, cutoff), (0, 1), c, phase_right)
    rho = fock.tensor(left, right)

    rho = fock.apply_loss(rho, 1, eta_s)
    rho = fock.apply_loss(rho, 2, eta_s)
    rho = fock.apply_beamsplitter(rho, 1, 2)

    det = fock.DetectorModel(efficiency=1.0, resolving=True)
    total = 0.0
    post = []
    summed = None
    for counts in ((1, 0), (0, 1)):
        p2, cond = fock.measure_detector(rho, 2, det, counts[1])
        p1, cond = fock.measure_detector(cond, 1, det, counts[0])
        p = p1 * p2
        total += p
        post.append(cond)
        m = cond.matrix * p
        summed = m if summed is None else summed + m
    mixed = fock.DensityOperator(post[0].layout, summed / total)
    vac = mixed.population((0, 0))
    singles = mixed.population((1, 0)) + mixed.population((0, 1))
    return SwapOracleResult(success_prob=total, c_measured=vac / singles,
                            post_states=tuple(post))
