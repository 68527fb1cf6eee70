"""Link-level simulation of uncoded MIMO detectors over Rayleigh fading."""

__version__ = "0.1.0"
