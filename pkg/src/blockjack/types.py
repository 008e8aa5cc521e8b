"""Shared identifier types: IPv4 prefixes, AS numbers, router ids."""

from __future__ import annotations

import ipaddress
from dataclasses import dataclass

MAX_ASN = 4_294_967_295


def check_asn(value: int) -> int:
    """Validate an autonomous system number (16- or 32-bit, nonzero)."""
    if not isinstance(value, int) or isinstance(value, bool):
        raise TypeError(f"ASN must be an integer, got {value!r}")
    if not 1 <= value <= MAX_ASN:
        raise ValueError(f"ASN out of range 1..{MAX_ASN}: {value}")
    return value


@dataclass(frozen=True, order=True)
class Prefix:
    """A CIDR block, normalized so host bits below the mask are zero.

    Canonical text form is ``a.b.c.d/len``.
    """

    base: int
    length: int

    def __post_init__(self):
        if not 0 <= self.length <= 32:
            raise ValueError(f"prefix length out of range 0..32: {self.length}")
        if not 0 <= self.base <= 0xFFFFFFFF:
            raise ValueError(f"prefix base out of 32-bit range: {self.base}")
        mask = (0xFFFFFFFF << (32 - self.length)) & 0xFFFFFFFF if self.length else 0
        if self.base & ~mask:
            raise ValueError(f"host bits set below /{self.length}: "
                             f"{ipaddress.IPv4Address(self.base)}")

    @classmethod
    def parse(cls, text: str) -> "Prefix":
        """Parse ``a.b.c.d/len`` text, zeroing any host bits."""
        net = ipaddress.IPv4Network(str(text).strip(), strict=False)
        return cls(int(net.network_address), net.prefixlen)

    def __str__(self) -> str:
        return f"{ipaddress.IPv4Address(self.base)}/{self.length}"


@dataclass(frozen=True, order=True)
class RouterId:
    """Globally unique router identity: owning ASN plus a local index."""

    asn: int
    index: int = 0

    def __post_init__(self):
        check_asn(self.asn)
        if self.index < 0:
            raise ValueError(f"router index must be >= 0: {self.index}")

    @classmethod
    def parse(cls, text: str) -> "RouterId":
        """Parse the ``asn.index`` wire form."""
        asn, _, index = str(text).partition(".")
        return cls(int(asn), int(index or 0))

    def __str__(self) -> str:
        return f"{self.asn}.{self.index}"
