#include <doctest.h>

#include <algorithm>
#include <set>

#include "m2o/crypto.hpp"

using namespace m2o;
using namespace m2o::crypto;

namespace {

// Independent modular exponentiation oracle (repeated squaring on the gmp
// integers, written without the rsa_* entry points).
mpz_class powmod_oracle(mpz_class base, mpz_class exp, const mpz_class& mod) {
    mpz_class result = 1;
    base %= mod;
    while (exp > 0) {
        if (mpz_odd_p(exp.get_mpz_t())) result = result * base % mod;
        base = base * base % mod;
        exp >>= 1;
    }
    return result;
}

// Textbook keypair n = 61*53 = 3233, e = 17, d = 413.
RsaKeyPair tiny_keypair() {
    RsaKeyPair kp;
    kp.pub = RsaPublicKey{3233, 17, 12};
    kp.priv = RsaPrivateKey{3233, 413, 12};
    return kp;
}

SymKey key_from_byte(uint8_t b) {
    SymKey k;
    k.bits.fill(b);
    return k;
}

}  // namespace

TEST_CASE("sym_encrypt output length follows the always-pad block formula") {
    OpCounter ops;
    DeterministicRng rng(1);
    SymKey key = SymKey::random(rng);

    // 288-bit plaintext -> 384-bit ciphertext (the Msg1 sizing at NC=3)
    CHECK(sym_encrypt(ops, key, rng.bytes(36)).size() == 48);
    // 128-bit plaintext -> 256 bits: aligned input still gains a padding block
    CHECK(sym_encrypt(ops, key, rng.bytes(16)).size() == 32);

    for (size_t n = 1; n <= 100; n++) {
        Bytes ct = sym_encrypt(ops, key, rng.bytes(n));
        uint64_t expect_bits = 128 * ((8 * n + 1 + 127) / 128);
        CHECK(ct.size() * 8 == expect_bits);
    }
}

TEST_CASE("sym cipher known answers (FIPS-197 key, zero IV, PKCS#7)") {
    OpCounter ops;
    SymKey key = SymKey::from_bytes(from_hex("000102030405060708090a0b0c0d0e0f"));

    // First block matches the published AES-128 single-block vector.
    Bytes ct1 = sym_encrypt(ops, key, from_hex("00112233445566778899aabbccddeeff"));
    CHECK(to_hex(ct1) == "69c4e0d86a7b0430d8cdb78070b4c55a9e978e6d16b086570ef794ef97984232");

    Bytes pt2 = from_hex("67726f75702061757468656e7469636174696f6e01020304");
    CHECK(to_hex(sym_encrypt(ops, key, pt2)) ==
          "5c848d114ed6e889892f8f3b555a66d25ad5198cac546118061eeb34715ab3fa");
}

TEST_CASE("sym roundtrip over random messages") {
    OpCounter ops;
    DeterministicRng rng(2);
    for (int i = 0; i < 1000; i++) {
        SymKey key = SymKey::random(rng);
        Bytes pt = rng.bytes(1 + rng.below(120));
        Bytes back = sym_decrypt(ops, key, sym_encrypt(ops, key, pt));
        REQUIRE(back == pt);
    }
}

TEST_CASE("sym_decrypt flags tampering and wrong keys") {
    OpCounter ops;
    DeterministicRng rng(3);
    SymKey key = SymKey::random(rng);
    Bytes pt = rng.bytes(32);
    Bytes ct = sym_encrypt(ops, key, pt);

    SUBCASE("flipped bit never yields the original plaintext") {
        for (size_t pos = 0; pos < ct.size(); pos++) {
            Bytes bad = ct;
            bad[pos] ^= 0x01;
            try {
                Bytes out = sym_decrypt(ops, key, bad);
                CHECK(out != pt);  // caller-level verifier rejects garbled content
            } catch (const PaddingError&) {
                // equally acceptable outcome
            }
        }
    }

    SUBCASE("wrong key: zero false accepts in 1000 trials") {
        int false_accepts = 0;
        int padding_errors = 0;
        for (int i = 0; i < 1000; i++) {
            SymKey wrong = SymKey::random(rng);
            try {
                Bytes out = sym_decrypt(ops, wrong, ct);
                if (out == pt) false_accepts++;
            } catch (const PaddingError&) {
                padding_errors++;
            }
        }
        CHECK(false_accepts == 0);
        CHECK(padding_errors > 950);  // accidental valid padding is ~0.4%
    }

    SUBCASE("non-aligned ciphertext is rejected") {
        Bytes bad(ct.begin(), ct.begin() + 17);
        CHECK_THROWS_AS(sym_decrypt(ops, key, bad), PaddingError);
    }
}

TEST_CASE("raw RSA matches the repeated-squaring oracle on the textbook key") {
    OpCounter ops;
    RsaKeyPair kp = tiny_keypair();

    CHECK(rsa_raw_encrypt(ops, kp.pub, 0) == 0);
    CHECK(rsa_raw_encrypt(ops, kp.pub, 1) == 1);
    CHECK(rsa_raw_decrypt(ops, kp.priv, 1) == 1);

    mpz_class c = rsa_raw_encrypt(ops, kp.pub, 65);
    CHECK(c == 2790);  // 65^17 mod 3233, frozen from the oracle
    CHECK(c == powmod_oracle(65, 17, 3233));
    CHECK(rsa_raw_decrypt(ops, kp.priv, c) == 65);

    // 500-point sweep over [0, n)
    for (int i = 0; i < 500; i++) {
        mpz_class m = (3233 * i) / 500;
        mpz_class enc = rsa_raw_encrypt(ops, kp.pub, m);
        CHECK(enc == powmod_oracle(m, 17, 3233));
        CHECK(rsa_raw_decrypt(ops, kp.priv, enc) == m);
    }

    CHECK_THROWS_AS(rsa_raw_encrypt(ops, kp.pub, 3233), RangeError);
    CHECK_THROWS_AS(rsa_raw_encrypt(ops, kp.pub, mpz_class(-1)), RangeError);
    CHECK_THROWS_AS(rsa_raw_decrypt(ops, kp.priv, 5000), RangeError);
}

TEST_CASE("generated keypairs have the exact requested width and invert") {
    DeterministicRng rng(4);
    OpCounter ops;
    for (int bits : {64, 128, 256, 512}) {
        RsaKeyPair kp = generate_rsa_keypair(rng, bits, true);
        CHECK(mpz_sizeinbase(kp.pub.n.get_mpz_t(), 2) == static_cast<size_t>(bits));
        CHECK(kp.pub.n == kp.priv.n);
        for (int i = 0; i < 20; i++) {
            Bytes raw = rng.bytes(static_cast<size_t>(bits) / 8);
            mpz_class m = mpz_from_bytes(raw) % kp.pub.n;
            CHECK(rsa_raw_decrypt(ops, kp.priv, rsa_raw_encrypt(ops, kp.pub, m)) == m);
        }
    }
    CHECK_THROWS_AS(generate_rsa_keypair(rng, 256, false), CryptoError);
}

TEST_CASE("chunked RSA roundtrips and counts one operation per direction") {
    DeterministicRng rng(5);
    RsaKeyPair kp = generate_rsa_keypair(rng, 256, true);
    const size_t cap = kp.pub.input_block_bytes();
    CHECK(cap == kp.pub.modulus_bytes() - 1);

    for (size_t len : {1ul, cap - 1, cap, cap + 1, 3 * cap, 160ul}) {
        OpCounter ops;
        Bytes data = rng.bytes(len);
        std::vector<mpz_class> blocks = rsa_encrypt_chunked(ops, kp.pub, data);
        CHECK(blocks.size() == (len + cap - 1) / cap);
        CHECK(ops.ae == 1);
        Bytes back = rsa_decrypt_chunked(ops, kp.priv, blocks, len);
        CHECK(ops.ad == 1);
        CHECK(back == data);
    }

    OpCounter ops;
    CHECK(RsaPublicKey{0, 0, 3072}.input_block_bytes() == kRsaInputBlockBytes);
    CHECK_THROWS_AS(rsa_decrypt_chunked(ops, kp.priv, {}, 10), CryptoError);
}

TEST_CASE("hash: SHA-256 published vectors, determinism, collision sweep") {
    OpCounter ops;
    CHECK(to_hex(hash(ops, Bytes{})) ==
          "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    Bytes abc = {'a', 'b', 'c'};
    CHECK(to_hex(hash(ops, abc)) ==
          "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");

    DeterministicRng rng(6);
    Bytes x = rng.bytes(40);
    CHECK(hash(ops, x) == hash(ops, x));

    std::set<Bytes> seen;
    for (int i = 0; i < 10000; i++) {
        Bytes digest = hash(ops, rng.bytes(24));
        CHECK(digest.size() == kDigestBytes);
        CHECK(seen.insert(digest).second);
    }
}

TEST_CASE("hmac: known answer, key sensitivity, definitional reconstruction") {
    OpCounter ops;
    SymKey key = SymKey::from_bytes(from_hex("000102030405060708090a0b0c0d0e0f"));
    Bytes msg = from_hex("6d326f2067726f75702061757468656e7469636174696f6e");

    // frozen from an independent HMAC-SHA256 implementation
    CHECK(to_hex(hmac(ops, key, msg)) ==
          "1a0af67fe18d6edcc1eee4b37a40b1f2e5c71b5ca874d00ace56ab350db3684c");

    SUBCASE("matches H((k^opad) || H((k^ipad) || m)) built from the hash primitive") {
        Bytes ipad(64, 0x36);
        Bytes opad(64, 0x5c);
        for (size_t i = 0; i < kSymKeyBytes; i++) {
            ipad[i] ^= key.bits[i];
            opad[i] ^= key.bits[i];
        }
        Bytes inner = hash(ops, concat(ipad, msg));
        Bytes expect = hash(ops, concat(opad, inner));
        CHECK(hmac(ops, key, msg) == expect);
    }

    SUBCASE("distinct keys produce distinct tags") {
        DeterministicRng rng(7);
        for (int i = 0; i < 10000; i++) {
            SymKey k1 = SymKey::random(rng);
            SymKey k2 = SymKey::random(rng);
            if (k1 == k2) continue;
            CHECK(hmac(ops, k1, msg) != hmac(ops, k2, msg));
        }
    }

    SUBCASE("deterministic in key and data") {
        CHECK(hmac(ops, key, msg) == hmac(ops, key, msg));
        CHECK(hmac(ops, key_from_byte(9), msg) == hmac(ops, key_from_byte(9), msg));
    }
}

TEST_CASE("homomorphic identity: E(m1)*E(m2) = E(m1*m2 mod n)") {
    DeterministicRng rng(8);
    OpCounter ops;

    SUBCASE("1000 random pairs at test key size") {
        RsaKeyPair kp = generate_rsa_keypair(rng, 256, true);
        for (int i = 0; i < 1000; i++) {
            mpz_class m1 = mpz_from_bytes(rng.bytes(31)) % kp.pub.n;
            mpz_class m2 = mpz_from_bytes(rng.bytes(31)) % kp.pub.n;
            mpz_class lhs = rsa_raw_encrypt(ops, kp.pub, m1) * rsa_raw_encrypt(ops, kp.pub, m2) %
                            kp.pub.n;
            CHECK(lhs == rsa_raw_encrypt(ops, kp.pub, m1 * m2 % kp.pub.n));
        }
    }

    SUBCASE("10 pairs at the full 3072-bit size") {
        RsaKeyPair kp = generate_rsa_keypair(rng, 3072);
        for (int i = 0; i < 10; i++) {
            mpz_class m1 = mpz_from_bytes(rng.bytes(383)) % kp.pub.n;
            mpz_class m2 = mpz_from_bytes(rng.bytes(383)) % kp.pub.n;
            mpz_class lhs = rsa_raw_encrypt(ops, kp.pub, m1) * rsa_raw_encrypt(ops, kp.pub, m2) %
                            kp.pub.n;
            CHECK(lhs == rsa_raw_encrypt(ops, kp.pub, m1 * m2 % kp.pub.n));
        }
        CHECK(kp.pub.input_block_bytes() == kRsaInputBlockBytes);
    }
}

TEST_CASE("operation counter partitions every primitive call by kind") {
    DeterministicRng rng(9);
    OpCounter ops;
    SymKey key = SymKey::random(rng);
    RsaKeyPair kp = tiny_keypair();

    Bytes ct = sym_encrypt(ops, key, rng.bytes(20));
    sym_decrypt(ops, key, ct);
    sym_encrypt(ops, key, rng.bytes(4));
    rsa_raw_encrypt(ops, kp.pub, 99);
    rsa_raw_decrypt(ops, kp.priv, 99);
    hash(ops, ct);
    hmac(ops, key, ct);
    hmac(ops, key, ct);

    CHECK(ops.se == 3);
    CHECK(ops.ae == 1);
    CHECK(ops.ad == 1);
    CHECK(ops.h == 1);
    CHECK(ops.hmac == 2);
    CHECK(ops.total() == 8);

    OpCounter other;
    other.se = 5;
    ops += other;
    CHECK(ops.se == 8);
    ops.reset();
    CHECK(ops == OpCounter{});
}

TEST_CASE("nonce generation: size, kinds, or-nonce exclusions") {
    DeterministicRng rng(10);
    Nonce en = Nonce::random(rng, NonceKind::EnNonce);
    CHECK(en.view().size() == kNonceBytes);
    CHECK(en.kind == NonceKind::EnNonce);

    for (int i = 0; i < 200; i++) {
        Nonce on = Nonce::random(rng, NonceKind::OrNonce);
        CHECK(on.as_integer() > 1);
    }

    Bytes raw(16, 0);
    raw[15] = 1;
    Nonce one = Nonce::from_bytes(raw, NonceKind::OrNonce);
    CHECK(one.as_integer() == 1);
    CHECK(one.as_sym_key().view().size() == kSymKeyBytes);
    CHECK_THROWS_AS(Nonce::from_bytes(Bytes(8, 0), NonceKind::EnNonce), CryptoError);
}

TEST_CASE("constant-time comparisons behave as equality") {
    DeterministicRng rng(11);
    SymKey a = SymKey::random(rng);
    SymKey b = a;
    CHECK(a == b);
    b.bits[15] ^= 1;
    CHECK(!(a == b));
    CHECK(ct_equal(Bytes{}, Bytes{}));
    CHECK(!ct_equal(Bytes{1}, Bytes{1, 2}));
}

TEST_CASE("fixed-width integer export imports back") {
    DeterministicRng rng(12);
    for (int i = 0; i < 200; i++) {
        size_t width = 1 + rng.below(64);
        Bytes raw = rng.bytes(width);
        mpz_class v = mpz_from_bytes(raw);
        CHECK(mpz_to_bytes(v, width) == raw);
    }
    CHECK_THROWS_AS(mpz_to_bytes(mpz_class(256), 1), CryptoError);
    CHECK(mpz_to_bytes(0, 4) == Bytes(4, 0));
}
