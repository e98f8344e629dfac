"""Multiplicative Schnorr groups of prime order.

A group is a prime-order-q subgroup of Z_p* with a fixed generator g.
Ring signatures, ordinary Schnorr signatures, and certificate signing
all operate over one of these groups. The two RFC 5114 groups are
published standard parameters; ``sim-512-160`` is a fixed, smaller
group of the same shape used by the experiment presets so that large
simulation runs stay tractable.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

from gmpy2 import powmod


@dataclass(frozen=True)
class SchnorrGroup:
    """Prime-order subgroup of Z_p* with generator g of order q."""

    name: str
    p: int
    q: int
    g: int

    @property
    def element_size(self) -> int:
        """Fixed big-endian byte width of an encoded group element."""
        return (self.p.bit_length() + 7) // 8

    def exp(self, base: int, exponent: int) -> int:
        return int(powmod(base, exponent, self.p))

    def mul(self, a: int, b: int) -> int:
        return (a * b) % self.p

    def random_scalar(self, rng) -> int:
        """Uniform nonzero scalar in [1, q)."""
        return rng.randrange(1, self.q)

    def is_member(self, y: int) -> bool:
        """True iff y is a non-identity element of the order-q subgroup."""
        if not 1 < y < self.p:
            return False
        return self.exp(y, self.q) == 1

    def encode_element(self, y: int) -> bytes:
        return y.to_bytes(self.element_size, "big")

    def hash_to_scalar(self, *parts: bytes) -> int:
        """Domain-separated hash of byte strings onto [0, q)."""
        h = hashlib.sha256(b"xrelay/scalar")
        for part in parts:
            h.update(len(part).to_bytes(4, "big"))
            h.update(part)
        return int.from_bytes(h.digest(), "big") % self.q


# RFC 5114 section 2.1: 1024-bit prime, 160-bit prime-order subgroup.
_RFC5114_1024_160 = SchnorrGroup(
    name="rfc5114-1024-160",
    p=int(
        "B10B8F96A080E01DDE92DE5EAE5D54EC52C99FBCFB06A3C69A6A9DCA52D23B61"
        "6073E28675A23D189838EF1E2EE652C013ECB4AEA906112324975C3CD49B83BF"
        "ACCBDD7D90C4BD7098488E9C219A73724EFFD6FAE5644738FAA31A4FF55BCCC0"
        "A151AF5F0DC8B4BD45BF37DF365C1A65E68CFDA76D4DA708DF1FB2BC2E4A4371",
        16,
    ),
    q=int("F518AA8781A8DF278ABA4E7D64B7CB9D49462353", 16),
    g=int(
        "A4D1CBD5C3FD34126765A442EFB99905F8104DD258AC507FD6406CFF14266D31"
        "266FEA1E5C41564B777E690F5504F213160217B4B01B886A5E91547F9E2749F4"
        "D7FBD7D3B9A92EE1909D0D2263F80A76A6A24C087A091F531DBF0A0169B6A28A"
        "D662A4D18E73AFA32D779D5918D08BC8858F4DCEF97C2A24855E6EEB22B3B2E5",
        16,
    ),
)

# RFC 5114 section 2.3: 2048-bit prime, 256-bit prime-order subgroup.
_RFC5114_2048_256 = SchnorrGroup(
    name="rfc5114-2048-256",
    p=int(
        "87A8E61DB4B6663CFFBBD19C651959998CEEF608660DD0F25D2CEED4435E3B00"
        "E00DF8F1D61957D4FAF7DF4561B2AA3016C3D91134096FAA3BF4296D830E9A7C"
        "209E0C6497517ABD5A8A9D306BCF67ED91F9E6725B4758C022E0B1EF4275BF7B"
        "6C5BFC11D45F9088B941F54EB1E59BB8BC39A0BF12307F5C4FDB70C581B23F76"
        "B63ACAE1CAA6B7902D52526735488A0E0FC141E07C255312A00C29B1A2EBB347"
        "2E9F93E827C9AF9BAEA2C47E2FC0D419DCF0D09830D9ED12B5B18C63D4DD023F"
        "EB54D5F1D4EEF10FA01AB58D68C38A8F78C0D67CE37D5ACB09EDF33CCCB13D48"
        "16A7CBB08F8D33AD3FC63AA5A0777D9D24F0E2FBB2F00E1EFA6E6F570C2BFB97",
        16,
    ),
    q=int(
        "8CF83642A709A097B447997640129DA299B1A47D1EB3750BA308B0FE64F5FBD3",
        16,
    ),
    g=int(
        "3FB32C9B73134D0B2E77506660EDBD484CA7B18F21EF205407F4793A1A0BA125"
        "10DBC15077BE463FFF4FED4AAC0BB555BE3A6C1B0C6B47B1BC3773BF7E8C6F62"
        "901228F8C28CBB18A55AE31341000A650196F931C77A57F2DDF463E5E9EC144B"
        "777DE62AAAB8A8628AC376D282D6ED3864E67982428EBC831D14348F6F2F9193"
        "B5045AF2767164E1DFC967C1FB3F2E55A4BD1BFFE83B9C80D052B985D182EA0A"
        "DB2A3B7313D3FE14C8484B1E052588B9B7D2BBD2DF016199ECD06E1557CD0915"
        "B3353BBB64E0EC377FD028370DF92B52C7891428CDC67EB6184B523D1DB246C3"
        "2F63078490F00EF8D647D148D47954515E2327CFEF98C582664B4C0F6CC41659",
        16,
    ),
)

# Fixed simulation-scale group: 512-bit prime with a 160-bit
# prime-order subgroup, generated once and pinned. Not for real use;
# it keeps whole-network experiment runs fast while preserving the
# algebraic structure of the larger groups.
_SIM_512_160 = SchnorrGroup(
    name="sim-512-160",
    p=int(
        "8e001526d3967b25f6b1536c8460fdfed7a0cd3c412684cd2283b3aa6b1d747e"
        "f21879b449f7b840b2dd51f2073b5fb62c747c589d42362961805bc7f9e6e22d",
        16,
    ),
    q=int("dbbcea9a08d8a1619bc34fdf993093d0c0059683", 16),
    g=int(
        "459bc9ee1d896ce19828154e339bbb8f50e76f0532088f7b5bc237a3849d4607"
        "53c5f6a552fde3c78f2bcf81d7aba24b4efca604b804aae31f61f862266d38e4",
        16,
    ),
)

GROUPS: dict[str, SchnorrGroup] = {
    _RFC5114_1024_160.name: _RFC5114_1024_160,
    _RFC5114_2048_256.name: _RFC5114_2048_256,
    _SIM_512_160.name: _SIM_512_160,
}

DEFAULT_GROUP = _RFC5114_1024_160


def get_group(name: str) -> SchnorrGroup:
    try:
        return GROUPS[name]
    except KeyError:
        raise ValueError(f"unknown group {name!r}") from None
