"""SDMS block geometry.

A container's data area is a sequence of SDMS blocks. Each block holds
``sa_sectors_per_block`` seed sectors (the SA area) followed by
``da_sectors_per_block`` data sectors (the DA area). Seed sectors are
divided into ``seed_size`` byte slots, one per data sector of the block.
"""

from dataclasses import dataclass

from .errors import AddressingError, ConfigurationError

SECTOR_SIZES = (512, 4096)
MIN_SEED_SIZE = 8


@dataclass(frozen=True)
class Geometry:
    sector_size: int
    seed_size: int
    sa_sectors_per_block: int
    da_sectors_per_block: int
    total_data_sectors: int

    @property
    def block_sectors(self) -> int:
        return self.sa_sectors_per_block + self.da_sectors_per_block

    @property
    def block_extent(self) -> int:
        """Size of one SDMS block in bytes."""
        return self.block_sectors * self.sector_size

    @property
    def sa_extent(self) -> int:
        return self.sa_sectors_per_block * self.sector_size

    @property
    def block_count(self) -> int:
        return -(-self.total_data_sectors // self.da_sectors_per_block)

    @property
    def data_area_size(self) -> int:
        # the trailing block is allocated in full even when partially used
        return self.block_count * self.block_extent

    @property
    def data_capacity(self) -> int:
        return self.total_data_sectors * self.sector_size


@dataclass(frozen=True)
class PhysicalLocation:
    data_offset: int
    seed_offset: int
    block_index: int
    slot: int


def derive_geometry(sector_size=512, seed_size=16, sa_sectors_per_block=1, total_data_sectors=1):
    """Validate layout parameters and compute the data sectors per block."""
    for name, value in (
        ("sector_size", sector_size),
        ("seed_size", seed_size),
        ("sa_sectors_per_block", sa_sectors_per_block),
        ("total_data_sectors", total_data_sectors),
    ):
        if not isinstance(value, int) or isinstance(value, bool) or value <= 0:
            raise ConfigurationError(f"{name} must be a positive integer, got {value!r}")
    if sector_size not in SECTOR_SIZES:
        raise ConfigurationError(f"sector_size must be one of {SECTOR_SIZES}, got {sector_size}")
    if sector_size % seed_size:
        raise ConfigurationError(
            f"seed_size {seed_size} does not divide sector_size {sector_size}"
        )
    if seed_size < MIN_SEED_SIZE:
        raise ConfigurationError(f"seed_size must be at least {MIN_SEED_SIZE} bytes, got {seed_size}")
    sa_bytes = sa_sectors_per_block * sector_size
    if sa_bytes % seed_size:
        raise ConfigurationError(
            f"seed_size {seed_size} does not divide the SA area ({sa_bytes} bytes)"
        )
    return Geometry(
        sector_size=sector_size,
        seed_size=seed_size,
        sa_sectors_per_block=sa_sectors_per_block,
        da_sectors_per_block=sa_bytes // seed_size,
        total_data_sectors=total_data_sectors,
    )


def locate(geometry: Geometry, sector_index: int, origin: int = 0) -> PhysicalLocation:
    """Map a logical sector to the byte offsets of its ciphertext and seed.

    Offsets are measured from ``origin``, the start of the data area.
    """
    if not isinstance(sector_index, int) or not 0 <= sector_index < geometry.total_data_sectors:
        raise AddressingError(
            f"sector {sector_index!r} out of range [0, {geometry.total_data_sectors})"
        )
    block, slot = divmod(sector_index, geometry.da_sectors_per_block)
    start = origin + block * geometry.block_extent
    return PhysicalLocation(
        data_offset=start + geometry.sa_extent + slot * geometry.sector_size,
        seed_offset=start + slot * geometry.seed_size,
        block_index=block,
        slot=slot,
    )
