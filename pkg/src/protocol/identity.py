"""Key pairs, signatures and content hashing for persons and artifacts.

A person is a public key; its ``PersonId`` is the SHA-256 fingerprint of
that key. Signature schemes are pluggable: ``ed25519`` for realistic runs,
``hmac-test`` for fast property tests.
"""
import hashlib
import hmac
import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass
from pathlib import Path

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives import serialization
from cryptography.hazmat.primitives.asymmetric.ed25519 import (
    Ed25519PrivateKey,
    Ed25519PublicKey,
)

from src.protocol.errors import InvalidKey, UnknownEntity

logger = logging.getLogger(__name__)

DIGEST_SIZE = 32
SEED_SIZE = 32

# Domain separation for everything a person signs
SIGNATURE_CONTEXT = b"principia/signature/v1"


@dataclass(frozen=True, order=True)
class ContentHash:
    digest: bytes

    def __post_init__(self):
        if len(self.digest) != DIGEST_SIZE:
            raise ValueError(f"content hash must be {DIGEST_SIZE} bytes, got {len(self.digest)}")

    @property
    def hex(self):
        return self.digest.hex()

    @classmethod
    def from_hex(cls, text):
        return cls(bytes.fromhex(text))

    def __canonical__(self):
        return self.digest

    def __str__(self):
        return self.hex


ZERO_HASH = ContentHash(bytes(DIGEST_SIZE))


@dataclass(frozen=True, order=True)
class PersonId:
    fingerprint: bytes

    def __post_init__(self):
        if len(self.fingerprint) != DIGEST_SIZE:
            raise ValueError("person fingerprint must be 32 bytes")

    @property
    def hex(self):
        return self.fingerprint.hex()

    @property
    def short(self):
        return self.hex[:12]

    @classmethod
    def from_hex(cls, text):
        return cls(bytes.fromhex(text))

    def __canonical__(self):
        return self.fingerprint

    def __str__(self):
        return self.hex


def content_hash(canonical_bytes):
    """SHA-256 digest of canonical bytes."""
    return ContentHash(hashlib.sha256(bytes(canonical_bytes)).digest())


def person_id_for(public):
    """Derive the PersonId of a public key (pure function of the key bytes)."""
    return PersonId(hashlib.sha256(bytes(public)).digest())


def derive_seed(label):
    """Deterministic 32-byte seed from a text label (scenarios and tests)."""
    return hashlib.sha256(b"principia/seed/" + label.encode("utf-8")).digest()


class SignatureScheme(ABC):
    """A deterministic signature scheme over raw byte strings."""

    name = ""

    @abstractmethod
    def public_from_secret(self, secret):
        ...

    @abstractmethod
    def sign_raw(self, secret, message):
        ...

    @abstractmethod
    def verify_raw(self, public, message, signature):
        ...


class Ed25519Scheme(SignatureScheme):
    name = "ed25519"

    def public_from_secret(self, secret):
        try:
            private = Ed25519PrivateKey.from_private_bytes(bytes(secret))
        except ValueError as exc:
            raise InvalidKey("malformed ed25519 secret key", scheme=self.name) from exc
        return private.public_key().public_bytes(
            encoding=serialization.Encoding.Raw,
            format=serialization.PublicFormat.Raw,
        )

    def sign_raw(self, secret, message):
        try:
            private = Ed25519PrivateKey.from_private_bytes(bytes(secret))
        except ValueError as exc:
            raise InvalidKey("malformed ed25519 secret key", scheme=self.name) from exc
        return private.sign(message)

    def verify_raw(self, public, message, signature):
        try:
            key = Ed25519PublicKey.from_public_bytes(bytes(public))
        except ValueError as exc:
            raise InvalidKey("malformed ed25519 public key", scheme=self.name) from exc
        try:
            key.verify(bytes(signature), message)
        except InvalidSignature:
            return False
        return True


class HmacTestScheme(SignatureScheme):
    """Fast HMAC-based stand-in used by property tests and large simulations.

    The public key is the MAC key, so anyone holding it can forge. Never use
    outside tests and simulations.
    """

    name = "hmac-test"

    def public_from_secret(self, secret):
        if len(secret) != SEED_SIZE:
            raise InvalidKey("malformed hmac-test secret key", scheme=self.name)
        return hashlib.sha256(b"hmac-test/public/" + bytes(secret)).digest()

    def sign_raw(self, secret, message):
        public = self.public_from_secret(secret)
        return hmac.new(public, message, hashlib.sha256).digest()

    def verify_raw(self, public, message, signature):
        if len(public) != DIGEST_SIZE:
            raise InvalidKey("malformed hmac-test public key", scheme=self.name)
        expected = hmac.new(bytes(public), message, hashlib.sha256).digest()
        return hmac.compare_digest(expected, bytes(signature))


SCHEMES = {
    Ed25519Scheme.name: Ed25519Scheme(),
    HmacTestScheme.name: HmacTestScheme(),
}

DEFAULT_SCHEME = Ed25519Scheme.name


def get_scheme(name):
    try:
        return SCHEMES[name]
    except KeyError:
        raise InvalidKey(f"unknown signature scheme {name!r}") from None


@dataclass(frozen=True)
class KeyPair:
    public: bytes
    secret: bytes
    scheme: str = DEFAULT_SCHEME

    @property
    def person_id(self):
        return person_id_for(self.public)


@dataclass(frozen=True)
class Signature:
    signer: PersonId
    payload_hash: ContentHash
    value: bytes

    def to_body(self):
        return {
            "payload": self.payload_hash.digest,
            "signer": self.signer.fingerprint,
            "value": self.value,
        }

    @classmethod
    def from_body(cls, body):
        try:
            return cls(
                signer=PersonId(body["signer"]),
                payload_hash=ContentHash(body["payload"]),
                value=body["value"],
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidKey("malformed signature record") from exc

    def __canonical__(self):
        return self.to_body()


def keygen(seed, scheme=DEFAULT_SCHEME):
    """
    Generate a key pair deterministically from a 32-byte seed.

    Args:
        seed: 32 bytes of seed material
        scheme: Name of the signature scheme

    Returns:
        KeyPair whose secret is the seed itself
    """
    seed = bytes(seed)
    if len(seed) != SEED_SIZE:
        raise InvalidKey(f"seed must be {SEED_SIZE} bytes", got=len(seed))
    public = get_scheme(scheme).public_from_secret(seed)
    return KeyPair(public=public, secret=seed, scheme=scheme)


def _signed_bytes(payload_hash):
    return SIGNATURE_CONTEXT + payload_hash.digest


def sign(key, message):
    """Sign ``message``; the signature covers its content hash."""
    if not isinstance(key, KeyPair):
        raise InvalidKey("sign expects a KeyPair")
    payload_hash = content_hash(message)
    value = get_scheme(key.scheme).sign_raw(key.secret, _signed_bytes(payload_hash))
    return Signature(signer=key.person_id, payload_hash=payload_hash, value=value)


def verify(public, message, signature, scheme=DEFAULT_SCHEME):
    """Check that ``signature`` is ``public``'s signature over ``message``."""
    if signature.signer != person_id_for(public):
        return False
    if signature.payload_hash != content_hash(message):
        return False
    return get_scheme(scheme).verify_raw(public, _signed_bytes(signature.payload_hash), signature.value)


@dataclass(frozen=True)
class RegisteredKey:
    person: PersonId
    scheme: str
    public: bytes
    validated: bool


class KeyRegistry:
    """Registered public keys with their institutional validation flag."""

    def __init__(self):
        self._keys = {}

    def __contains__(self, person):
        return person in self._keys

    def __len__(self):
        return len(self._keys)

    def __iter__(self):
        return iter(sorted(self._keys))

    def register(self, public, scheme, validated):
        get_scheme(scheme)
        person = person_id_for(public)
        self._keys[person] = RegisteredKey(person, scheme, bytes(public), bool(validated))
        return person

    def get(self, person):
        try:
            return self._keys[person]
        except KeyError:
            raise UnknownEntity("person is not registered", person=person.short) from None

    def is_validated(self, person):
        entry = self._keys.get(person)
        return entry is not None and entry.validated

    def verify(self, message, signature):
        """Verify a signature against the signer's registered key."""
        entry = self._keys.get(signature.signer)
        if entry is None:
            return False
        try:
            return verify(entry.public, message, signature, entry.scheme)
        except InvalidKey:
            return False

    def lines(self):
        return [
            f"{entry.person.hex} {entry.scheme} {entry.public.hex()} {'true' if entry.validated else 'false'}"
            for entry in (self._keys[p] for p in sorted(self._keys))
        ]

    def save(self, path):
        Path(path).write_text("".join(line + "\n" for line in self.lines()), encoding="utf-8")

    @classmethod
    def load(cls, path):
        registry = cls()
        for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
            if not line.strip():
                continue
            try:
                fingerprint_hex, scheme, pubkey_hex, validated = line.split()
            except ValueError:
                raise InvalidKey("malformed registry record", line=lineno) from None
            person = registry.register(bytes.fromhex(pubkey_hex), scheme, validated == "true")
            if person.hex != fingerprint_hex:
                raise InvalidKey("fingerprint does not match public key", line=lineno)
        logger.debug("Loaded %d registered keys from %s", len(registry), path)
        return registry

    def snapshot(self):
        return {
            entry.person.fingerprint: [entry.scheme, entry.public, entry.validated]
            for entry in self._keys.values()
        }
