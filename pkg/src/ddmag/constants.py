"""Physical defaults."""

#: Electron gyromagnetic ratio, rad s^-1 T^-1.
GAMMA_E = 1.76085963023e11

#: Readout efficiency used for the single-NV sensitivity curves.
DEFAULT_C = 0.03
