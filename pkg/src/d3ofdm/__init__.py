"""OFDM link-level simulator built around channel-estimation-free data detection.

The detector picks the data sequence whose received-to-trial quotients vary
least between adjacent cells, so pilots only resolve the phase ambiguity.
Modules:

* :mod:`d3ofdm.numerics`: FFT, special functions, seeded streams, quadrature
* :mod:`d3ofdm.channel`: multipath Rayleigh profiles and Doppler evolution
* :mod:`d3ofdm.ofdm`: constellations, pilot layouts and the OFDM chain
* :mod:`d3ofdm.detectors`: coherent, GLRT and adjacent-difference detectors
* :mod:`d3ofdm.analysis`: flat-fading error-rate predictions
* :mod:`d3ofdm.fec`: convolutional code, hard Viterbi decoder, interleaver
* :mod:`d3ofdm.complexity`: operation counts and relative power
* :mod:`d3ofdm.harness`, :mod:`d3ofdm.cli`: Monte Carlo experiments
"""

from ._accel import backend
from .channel import MobilityModel, TapProfile, get_profile
from .detectors import (coherent_mld, d3_bruteforce, d3_simo, d3_viterbi, detect_resource_block,
                        glrt_mlsd)
from .ofdm import (FrameLayout, OfdmParams, ResourceBlockLayout, SegmentLayout, constellation)

__version__ = "0.1.0"

__all__ = [
    "backend", "MobilityModel", "TapProfile", "get_profile", "coherent_mld", "d3_bruteforce",
    "d3_simo", "d3_viterbi", "detect_resource_block", "glrt_mlsd", "FrameLayout", "OfdmParams",
    "ResourceBlockLayout", "SegmentLayout", "constellation", "__version__",
]
