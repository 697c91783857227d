"""Two-phase incompressible porous-media flow simulator.

Pressure is solved with a symmetric weighted interior-penalty DG method,
post-processed to a locally conservative face-flux field, and the saturation
equation is advanced by exact 1D front tracking along Pollock streamlines
and gravity lines with operator splitting.
"""

__version__ = "0.1.0"
