"""Spectral decay-rate toolkit for an incompressible Oldroyd-B fluid."""

__version__ = "0.1.0"

from .spectral import (
    AntisymmetricTensorField,
    FluidParams,
    FourierGrid,
    SpectralTensorField,
    SpectralVectorField,
)

__all__ = [
    "AntisymmetricTensorField",
    "FluidParams",
    "FourierGrid",
    "SpectralTensorField",
    "SpectralVectorField",
]
