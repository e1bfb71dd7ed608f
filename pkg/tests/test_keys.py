import pytest

from vaultledger.keys import KeyError_, NullScheme, get_scheme, scheme_names


def test_scheme_registry():
    assert set(scheme_names()) == {"ed25519", "null"}
    with pytest.raises(KeyError_):
        get_scheme("rsa")


@pytest.mark.parametrize("name", ["ed25519", "null"])
def test_sign_verify_round_trip(name):
    scheme = get_scheme(name)
    kp = scheme.from_seed(b"seed")
    msg = b"pay 40 atoms to std..."
    sig = scheme.sign(kp.private, msg)
    assert scheme.verify(kp.public, msg, sig)


@pytest.mark.parametrize("name", ["ed25519", "null"])
def test_single_bit_mutation_invalidates(name):
    scheme = get_scheme(name)
    kp = scheme.from_seed(b"seed")
    msg = bytearray(b"a short message")
    sig = scheme.sign(kp.private, bytes(msg))
    for byte_index in range(len(msg)):
        for bit in range(8):
            mutated = bytearray(msg)
            mutated[byte_index] ^= 1 << bit
            assert not scheme.verify(kp.public, bytes(mutated), sig)


@pytest.mark.parametrize("name", ["ed25519", "null"])
def test_wrong_key_rejected(name):
    scheme = get_scheme(name)
    signer = scheme.from_seed(b"signer")
    other = scheme.from_seed(b"other")
    sig = scheme.sign(signer.private, b"msg")
    assert not scheme.verify(other.public, b"msg", sig)


@pytest.mark.parametrize("name", ["ed25519", "null"])
def test_from_seed_deterministic(name):
    scheme = get_scheme(name)
    assert scheme.from_seed(b"x") == scheme.from_seed(b"x")
    assert scheme.from_seed(b"x") != scheme.from_seed(b"y")


def test_ed25519_signatures_deterministic():
    scheme = get_scheme("ed25519")
    kp = scheme.from_seed(b"det")
    assert scheme.sign(kp.private, b"m") == scheme.sign(kp.private, b"m")


def test_null_scheme_is_forgeable_by_design():
    scheme = NullScheme()
    kp = scheme.from_seed(b"victim")
    # anyone holding only the public key can forge
    forged = scheme.sign(kp.public, b"steal everything")
    assert scheme.verify(kp.public, b"steal everything", forged)


def test_generate_produces_distinct_keys():
    scheme = get_scheme("ed25519")
    assert scheme.generate() != scheme.generate()
