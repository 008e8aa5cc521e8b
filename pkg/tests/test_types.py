import pytest

from blockjack.types import Prefix, RouterId, check_asn


def test_prefix_normalizes_host_bits():
    assert str(Prefix.parse("10.0.0.7/24")) == "10.0.0.0/24"
    assert str(Prefix.parse("192.168.5.129/25")) == "192.168.5.128/25"


def test_prefix_roundtrip_and_order():
    p = Prefix.parse("10.1.2.0/24")
    assert Prefix.parse(str(p)) == p
    assert Prefix.parse("10.0.0.0/8") < Prefix.parse("10.0.0.0/24")
    assert Prefix.parse("10.0.0.0/24") < Prefix.parse("11.0.0.0/24")


def test_prefix_rejects_bad_input():
    with pytest.raises(ValueError):
        Prefix.parse("10.0.0.0/33")
    with pytest.raises(ValueError):
        Prefix(base=1, length=24)  # host bit set


def test_asn_bounds():
    assert check_asn(1) == 1
    assert check_asn(4_294_967_295)
    for bad in (0, -5, 4_294_967_296):
        with pytest.raises(ValueError):
            check_asn(bad)


def test_router_id_parse_and_order():
    rid = RouterId.parse("64512.3")
    assert rid == RouterId(64512, 3)
    assert str(rid) == "64512.3"
    assert RouterId(10, 0) < RouterId(10, 1) < RouterId(11, 0)
    with pytest.raises(ValueError):
        RouterId(0, 0)
