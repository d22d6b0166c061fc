"""Single stochastic RRAM neuron: lognormal Set, deterministic Reset control.

A device carries the internal state that matters for switching statistics:
its pre-Set HRS in kOhm, a fixed per-device offset of the log-time mean in
decades (device-to-device spread), and the Reset management scheme applied
after every sampling:

    ideal       HRS untouched each cycle (drift-free abstraction)
    fixed-input Reset with fixed electrical input only; HRS random-walks with
                a deterministic per-cycle slope on top
    monitored   Reset-with-verify; HRS re-targeted to target_hrs within a
                fractional tolerance every cycle

HRS is physical state, so any update clamps into the surface's fitted range
(and counts the clamp). Voltages and pulse widths are caller inputs and raise
instead.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import NonPositivePulse
from .surface import DeviceSurface

SCHEME_IDEAL = "ideal"
SCHEME_FIXED = "fixed-input"
SCHEME_MONITORED = "monitored"
SCHEMES = (SCHEME_IDEAL, SCHEME_FIXED, SCHEME_MONITORED)

_SQRT2 = math.sqrt(2.0)


def norm_cdf(z: float) -> float:
    """Standard normal CDF via erf (good to ~1e-16)."""
    return 0.5 * (1.0 + math.erf(z / _SQRT2))


def switch_probability(mu_eff: float, sigma: float, t_pw: float) -> float:
    """P(t_set <= t_pw) for log10(t_set) ~ Normal(mu_eff, sigma)."""
    if t_pw <= 0:
        raise NonPositivePulse(f"t_pw={t_pw} s must be > 0")
    return norm_cdf((math.log10(t_pw) - mu_eff) / sigma)


@dataclass
class DriftModel:
    """Per-cycle HRS dynamics of the Reset actuator.

    m_hrs: deterministic drift slope [kOhm/cycle], fixed-input scheme.
    s_rw:  random-walk standard deviation [kOhm/cycle], fixed-input scheme.
    hrs_tolerance: fractional verify tolerance of the monitored scheme.
    """

    m_hrs: float = 0.0
    s_rw: float = 0.0
    hrs_tolerance: float = 0.1

    def __post_init__(self):
        if self.m_hrs < 0 or self.s_rw < 0:
            raise ValueError("m_hrs and s_rw must be >= 0")
        if not 0.0 < self.hrs_tolerance < 1.0:
            raise ValueError("hrs_tolerance must be in (0, 1)")

    def to_dict(self) -> dict:
        return {"m_hrs": self.m_hrs, "s_rw": self.s_rw, "hrs_tolerance": self.hrs_tolerance}


@dataclass
class NeuronDevice:
    """One RRAM instance bound to a fitted surface."""

    surface: DeviceSurface
    hrs: float
    scheme: str = SCHEME_IDEAL
    mu_offset: float = 0.0
    target_hrs: Optional[float] = None
    cycles: int = 0
    clamp_events: int = field(default=0, repr=False)

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}; expected one of {SCHEMES}")
        self._set_hrs(self.hrs)
        if self.target_hrs is None:
            self.target_hrs = self.hrs

    def _set_hrs(self, value: float) -> None:
        clamped = self.surface.clamp_hrs(value)
        if clamped != value:
            self.clamp_events += 1
        self.hrs = clamped

    # -- statistics at the current state ------------------------------------

    def mu_eff(self, v: float) -> float:
        """Log-time mean at input v including the per-device offset."""
        return float(self.surface.eval_mu(v, self.hrs)) + self.mu_offset

    def sigma(self, v: float) -> float:
        return float(self.surface.eval_sigma(v, self.hrs))

    def sample_tset(self, v: float, rng: np.random.Generator, size=None):
        """Draw Set time(s) [s] at input v; does not mutate device state."""
        mu = self.mu_eff(v)
        sg = self.sigma(v)
        z = rng.standard_normal(size)
        t = 10.0 ** (mu + sg * z)
        return float(t) if size is None else t

    def p_switch(self, v: float, t_pw: float) -> float:
        """Probability that a Set pulse of width t_pw [s] switches the device."""
        return switch_probability(self.mu_eff(v), self.sigma(v), t_pw)

    # -- state evolution ------------------------------------------------------

    def apply_cycle(self, drift: DriftModel, rng: np.random.Generator) -> None:
        """One Reset-Set cycle under the management scheme."""
        self.cycles += 1
        if self.scheme == SCHEME_FIXED:
            step = drift.m_hrs
            if drift.s_rw > 0:
                step += drift.s_rw * rng.standard_normal()
            self._set_hrs(self.hrs + step)
        elif self.scheme == SCHEME_MONITORED:
            u = rng.uniform(-drift.hrs_tolerance, drift.hrs_tolerance)
            self._set_hrs(self.target_hrs * (1.0 + u))
        # ideal: state untouched

    def calibrate(
        self,
        mu_target: float,
        v_ref: float,
        precision: float,
        rng: np.random.Generator,
    ) -> float:
        """Tune HRS so this device's mu_eff(v_ref) hits mu_target.

        Solves mu(v_ref, r) = mu_target - mu_offset by bisection, then writes
        the solution back with the actuator's fractional precision:
        hrs = target_hrs = r* (1 + u), u ~ U(-precision, +precision).
        Returns the exact root r* [kOhm]. Raises Unattainable / NonMonotone.
        """
        r_star = self.surface.hrs_for_mu(mu_target - self.mu_offset, v_ref)
        realized = r_star * (1.0 + rng.uniform(-precision, precision))
        self._set_hrs(realized)
        self.target_hrs = self.hrs
        return r_star
