import pytest

from patchwork.errors import AuthorizationError, RegistryError
from patchwork.registry import Registry


@pytest.fixture
def reg():
    r = Registry()
    r.register_scheme("k1", "B1")
    return r


def test_publish_versions(reg):
    assert reg.publish("k1", "B1").version == 0
    assert reg.publish("k1", "B1").version == 1
    assert reg.record("k1", 0).superseded
    assert not reg.record("k1").superseded
    assert reg.current_version("k1") == 1


def test_publish_by_non_issuer(reg):
    with pytest.raises(AuthorizationError):
        reg.publish("k1", "B2")


def test_unknown_scheme(reg):
    with pytest.raises(RegistryError):
        reg.current_version("nope")


def test_sign_is_idempotent(reg):
    reg.publish("k1", "B1")
    for bank in ["B1", "B2", "B3"]:
        reg.sign("k1", 0, bank)
    reg.sign("k1", 0, "B2")
    assert reg.record("k1", 0).attestations == {"B1", "B2", "B3"}


def test_sign_superseded_version_stays_superseded(reg):
    reg.publish("k1", "B1")
    reg.publish("k1", "B1")
    rec = reg.sign("k1", 0, "B2")
    assert "B2" in rec.attestations and rec.superseded


def test_is_fully_attested(reg):
    reg.publish("k1", "B1")
    reg.sign("k1", 0, "B1")
    reg.sign("k1", 0, "B2")
    assert reg.is_fully_attested("k1", 0, {"B1", "B2"})
    assert not reg.is_fully_attested("k1", 0, {"B1", "B2", "B3"})
    assert reg.is_fully_attested("k1", 0, set())


def test_snapshot_is_plain_data(reg):
    reg.publish("k1", "B1", required={"B1"})
    snap = reg.snapshot()
    assert snap["k1"]["required"] == ["B1"]
    assert snap["k1"]["version"] == 0
