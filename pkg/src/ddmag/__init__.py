"""Dynamical decoupling and rotary-echo AC magnetometry.

Closed-form and simulated response, decay and sensitivity of PDD, rotary
echo, constant driving and spin locking for a spin-1/2 sensor under
Ornstein-Uhlenbeck dephasing.
"""
__version__ = "0.1.0"

from .sequences import (  # noqa: E402
    ACFieldSpec,
    Scheme,
    SequenceSpec,
    constant,
    pdd,
    rotary_echo,
    spin_lock,
)
from .dynamics import OUNoise, mc_signal, propagate  # noqa: E402
from .response import avg_field_factor, passbands, phase_penalty, weight  # noqa: E402
from .decay import cumulant_coeffs, envelope_re, gamma2_long_tc  # noqa: E402
from .sensitivity import (  # noqa: E402
    OUDecay,
    SensorParams,
    T2Decay,
    eta_effective,
    eta_ideal,
    optimal_time,
    scan,
)

__all__ = [
    "ACFieldSpec", "Scheme", "SequenceSpec", "constant", "pdd", "rotary_echo",
    "spin_lock", "OUNoise", "mc_signal", "propagate", "avg_field_factor",
    "passbands", "phase_penalty", "weight", "cumulant_coeffs", "envelope_re",
    "gamma2_long_tc", "OUDecay", "SensorParams", "T2Decay", "eta_effective",
    "eta_ideal", "optimal_time", "scan",
]
