import hashlib

import pytest

from src.protocol.errors import InvalidKey, UnknownEntity
from src.protocol.identity import (
    SCHEMES,
    KeyRegistry,
    Signature,
    content_hash,
    derive_seed,
    keygen,
    person_id_for,
    sign,
    verify,
)


@pytest.mark.parametrize("scheme", sorted(SCHEMES))
class TestKeys:
    def test_same_seed_same_person(self, scheme):
        assert keygen(bytes(32), scheme).person_id == keygen(bytes(32), scheme).person_id

    def test_distinct_seeds_distinct_persons(self, scheme):
        people = {keygen(derive_seed(f"p{i}"), scheme).person_id for i in range(50)}
        assert len(people) == 50

    def test_sign_verify(self, scheme):
        key = keygen(derive_seed("k"), scheme)
        other = keygen(derive_seed("k2"), scheme)
        sig = sign(key, b"x")
        assert verify(key.public, b"x", sig, scheme)
        assert not verify(key.public, b"y", sig, scheme)
        assert not verify(other.public, b"x", sig, scheme)

    def test_person_id_is_key_fingerprint(self, scheme):
        key = keygen(derive_seed("k"), scheme)
        assert key.person_id == person_id_for(key.public)
        assert key.person_id.fingerprint == hashlib.sha256(key.public).digest()


def test_malformed_seed():
    with pytest.raises(InvalidKey):
        keygen(b"short")


def test_unknown_scheme():
    with pytest.raises(InvalidKey):
        keygen(bytes(32), "rsa")


def test_empty_input_hash_matches_reference():
    assert content_hash(b"").hex == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"


def test_signature_body_roundtrip_and_malformed():
    key = keygen(derive_seed("k"))
    sig = sign(key, b"payload")
    assert Signature.from_body(sig.to_body()) == sig
    with pytest.raises(InvalidKey):
        Signature.from_body(["not", "a", "signature"])


def test_registry(tmp_path):
    registry = KeyRegistry()
    ed = keygen(derive_seed("ed"), "ed25519")
    mac = keygen(derive_seed("mac"), "hmac-test")
    registry.register(ed.public, ed.scheme, True)
    registry.register(mac.public, mac.scheme, False)

    assert registry.is_validated(ed.person_id)
    assert not registry.is_validated(mac.person_id)
    assert registry.verify(b"m", sign(mac, b"m"))
    assert not registry.verify(b"m", sign(keygen(derive_seed("stranger"), "hmac-test"), b"m"))
    with pytest.raises(UnknownEntity):
        registry.get(keygen(derive_seed("stranger")).person_id)

    path = tmp_path / "keys.txt"
    registry.save(path)
    loaded = KeyRegistry.load(path)
    assert loaded.lines() == registry.lines()
    assert len(loaded) == 2
