"""Published reference values used by the reproduction tables.

Excess variances are fractions (0.008 for 0.8 %).  Rates are secret bits per
signal pulse.
"""

from __future__ import annotations

from dataclasses import dataclass

TABLE1_LABEL = "reference:table1"
TABLE2_LABEL = "reference:table2"


@dataclass(frozen=True)
class VarianceRow:
    overlap: float
    T: float
    E_x: float
    E_y: float
    E_x_corrected: float


@dataclass(frozen=True)
class RateRow:
    overlap: float
    T: float
    G_dr: float
    G_rr: float


TABLE1 = (
    VarianceRow(0.51, 1.000, 0.008, 0.001, 0.045),
    VarianceRow(0.50, 0.457, 0.002, -0.003, 0.083),
    VarianceRow(0.78, 1.000, -0.002, -0.002, 0.035),
    VarianceRow(0.77, 0.457, 0.003, 0.001, 0.083),
    VarianceRow(0.52, 1.000, 0.016, 0.001, 0.053),
    VarianceRow(0.52, 0.483, 0.002, 0.003, 0.077),
    VarianceRow(0.51, 0.650, 0.002, 0.000, 0.058),
    VarianceRow(0.65, 1.000, 0.006, -0.005, 0.042),
    VarianceRow(0.65, 0.483, 0.001, 0.000, 0.075),
)

#: Row whose data set produced the mixed-state Q-function and marginals.
TABLE1_HIGHLIGHTED = 1

#: Quoted 1-sigma statistical errors of E_x and E_y.
TABLE1_STAT_ERROR = (0.005, 0.003)

TABLE2 = (
    RateRow(0.50, 0.457, 0.0027, 0.0168),
    RateRow(0.77, 0.457, 0.0004, 0.0025),
    RateRow(0.52, 0.483, 0.0038, 0.0194),
    RateRow(0.65, 0.483, 0.0021, 0.0106),
    RateRow(0.51, 0.650, 0.0244, 0.0562),
)

#: Channel transmissions of the bound-curve figure.
FIG2_TRANSMISSIONS = (1.0, 0.65, 0.483, 0.457)

#: Operating point of the postselection sweep.
FIG9_POINT = (0.65, 0.483)

#: Pulse count of one measurement sequence.
SEQUENCE_PULSES = 250000
