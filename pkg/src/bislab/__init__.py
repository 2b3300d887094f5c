"""Identification, secrecy, storage and privacy-leakage trade-offs for Gaussian
biometric identification systems with noisy enrollment."""

from bislab.gaussmodel import AuxiliaryParams, ChannelParams, UnscaledParams, to_scaled
from bislab.region import Model, RateTuple, RegionQuery, is_achievable

__all__ = ["AuxiliaryParams", "ChannelParams", "UnscaledParams", "to_scaled", "Model", "RateTuple",
           "RegionQuery", "is_achievable"]
__version__ = "0.1.0"
