"""Encrypted virtual disk with per-write, per-sector derived keys."""

from .errors import (
    AddressingError,
    AuthenticationError,
    CampaignFailure,
    ConfigurationError,
    ContractError,
    FormatError,
    SdmsError,
    SectorIOError,
)
from .layout import Geometry, PhysicalLocation, derive_geometry, locate
from .kdf import dk_func, input_space_bits
from .cipher import SectorCipherParams, gf128_mul_alpha, xts_decrypt_sector, xts_encrypt_sector
from .keystore import WrappedDek, generate_dek, rewrap_dek, unwrap_dek, wrap_dek
from .device import ContainerHeader, SdmsDevice, init_container, open_container, read_header

__version__ = "0.1.0"

__all__ = [
    "AddressingError",
    "AuthenticationError",
    "CampaignFailure",
    "ConfigurationError",
    "ContainerHeader",
    "ContractError",
    "FormatError",
    "Geometry",
    "PhysicalLocation",
    "SdmsDevice",
    "SdmsError",
    "SectorIOError",
    "SectorCipherParams",
    "WrappedDek",
    "derive_geometry",
    "dk_func",
    "generate_dek",
    "gf128_mul_alpha",
    "init_container",
    "input_space_bits",
    "locate",
    "open_container",
    "read_header",
    "rewrap_dek",
    "unwrap_dek",
    "wrap_dek",
    "xts_decrypt_sector",
    "xts_encrypt_sector",
]
