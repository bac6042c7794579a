#include <doctest.h>

#include <map>

#include "m2o/tokens.hpp"

using namespace m2o;
using namespace m2o::tokens;
using crypto::Nonce;
using crypto::NonceKind;
using crypto::OpCounter;
using crypto::SymKey;
using wire::EntityId;
using wire::Timestamp;

namespace {

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

Nonce nonce_of(uint64_t value, NonceKind kind = NonceKind::OrNonce) {
    Bytes raw(16, 0);
    for (int i = 0; i < 8; i++) raw[15 - i] = static_cast<uint8_t>((value >> (8 * i)) & 0xff);
    return Nonce::from_bytes(raw, kind);
}

}  // namespace

TEST_CASE("ts_veri: inclusive window on the logical clock") {
    const uint32_t delta = 5000;
    CHECK(ts_veri(Timestamp{70000}, Timestamp{70000}, delta));
    CHECK(ts_veri(Timestamp{70000 - delta}, Timestamp{70000}, delta));  // boundary inclusive
    CHECK(!ts_veri(Timestamp{70000 - delta - 1}, Timestamp{70000}, delta));
    CHECK(ts_veri(Timestamp{70000 + delta}, Timestamp{70000}, delta));
    CHECK(!ts_veri(Timestamp{70000 + delta + 1}, Timestamp{70000}, delta));

    // symmetric in the sign of the skew
    DeterministicRng rng(20);
    for (int i = 0; i < 1000; i++) {
        uint32_t now = 100000 + static_cast<uint32_t>(rng.below(1000000));
        uint32_t skew = static_cast<uint32_t>(rng.below(20000));
        CHECK(ts_veri(Timestamp{now + skew}, Timestamp{now}, delta) ==
              ts_veri(Timestamp{now - skew}, Timestamp{now}, delta));
    }
}

TEST_CASE("id_veri is plain identity comparison") {
    CHECK(id_veri(EntityId{7}, EntityId{7}));
    CHECK(!id_veri(EntityId{7}, EntityId{8}));
    DeterministicRng rng(21);
    for (int i = 0; i < 100; i++) {
        EntityId id{static_cast<uint32_t>(rng.next_u64())};
        CHECK(id_veri(id, id));
    }
}

TEST_CASE("en_veri: constant-time nonce comparison") {
    DeterministicRng rng(22);
    Nonce a = Nonce::random(rng, NonceKind::EnNonce);
    CHECK(en_veri(a, a));

    Nonce flipped = a;
    flipped.bits[5] ^= 0x10;
    CHECK(!en_veri(a, flipped));

    for (int i = 0; i < 10000; i++) {
        Nonce x = Nonce::random(rng, NonceKind::EnNonce);
        Nonce y = Nonce::random(rng, NonceKind::EnNonce);
        if (!ct_equal(x.view(), y.view())) CHECK(!en_veri(x, y));
    }
}

TEST_CASE("hm_gen equals the HMAC primitive and reproduces the chain step") {
    DeterministicRng rng(23);
    OpCounter ops;
    SymKey k2 = SymKey::random(rng);
    Bytes hm3 = rng.bytes(32);

    CHECK(hm_gen(ops, k2, hm3) == crypto::hmac(ops, k2, hm3));

    // chain step: HM2 = HMAC(K2, HM3) feeding the next step
    Bytes hm2 = hm_gen(ops, k2, hm3);
    SymKey k1 = SymKey::random(rng);
    Bytes hm1 = hm_gen(ops, k1, hm2);
    CHECK(hm1 == crypto::hmac(ops, k1, crypto::hmac(ops, k2, hm3)));

    SymKey kat_key = SymKey::from_bytes(from_hex("000102030405060708090a0b0c0d0e0f"));
    CHECK(to_hex(hm_gen(ops, kat_key, from_hex("6d326f2067726f75702061757468656e7469636174696f6e"))) ==
          "1a0af67fe18d6edcc1eee4b37a40b1f2e5c71b5ca874d00ace56ab350db3684c");
}

TEST_CASE("hm_veri folds from the leader key and matches a step-by-step oracle") {
    DeterministicRng rng(24);
    for (size_t nc = 1; nc <= 8; nc++) {
        OpCounter ops;
        wire::ClientList chain;
        std::map<uint32_t, SymKey> keys;
        for (size_t i = 0; i < nc; i++) {
            EntityId id{static_cast<uint32_t>(200 + i)};
            chain.push_back(id);
            keys[id.value] = SymKey::random(rng);
        }
        Nonce seed = Nonce::random(rng, NonceKind::EnNonce);

        // oracle: the distributed steps, leader first, then each client down
        // the list
        OpCounter oracle_ops;
        Bytes hm = crypto::hmac(oracle_ops, keys[chain.back().value], seed.view());
        for (size_t i = nc - 1; i-- > 0;) {
            hm = crypto::hmac(oracle_ops, keys[chain[i].value], hm);
        }

        KeyLookup lookup = [&](EntityId id) -> std::optional<SymKey> {
            auto it = keys.find(id.value);
            if (it == keys.end()) return std::nullopt;
            return it->second;
        };
        CHECK(hm_veri(ops, hm, chain, lookup, seed));
        CHECK(ops.hmac == nc);

        // one replaced key breaks the token
        if (nc >= 2) {
            std::map<uint32_t, SymKey> mutated = keys;
            mutated[chain[rng.below(nc)].value] = SymKey::random(rng);
            KeyLookup bad_lookup = [&](EntityId id) -> std::optional<SymKey> {
                return mutated.at(id.value);
            };
            CHECK(!hm_veri(ops, hm, chain, bad_lookup, seed));
        }
    }
}

TEST_CASE("hm_veri degenerate and error cases") {
    DeterministicRng rng(25);
    OpCounter ops;
    SymKey only = SymKey::random(rng);
    Nonce seed = Nonce::random(rng, NonceKind::EnNonce);
    wire::ClientList chain = {EntityId{300}};

    KeyLookup lookup = [&](EntityId id) -> std::optional<SymKey> {
        if (id.value == 300) return only;
        return std::nullopt;
    };
    Bytes single = crypto::hmac(ops, only, seed.view());
    CHECK(hm_veri(ops, single, chain, lookup, seed));

    chain.push_back(EntityId{999});  // unknown client
    CHECK_THROWS_AS(hm_veri(ops, single, chain, lookup, seed), UnknownClient);
}

TEST_CASE("group authenticator keeps order and validates range") {
    DeterministicRng rng(26);
    crypto::RsaKeyPair kp = crypto::generate_rsa_keypair(rng, 64, true);

    std::vector<mpz_class> tokens = {5, 9, 2};
    EncGroupAuthenticator auth = build_group_authenticator(tokens, kp.pub);
    CHECK(auth.tokens.size() == 3);
    CHECK(auth.tokens[0] == 5);
    CHECK(auth.tokens[2] == 2);

    tokens.push_back(kp.pub.n);  // out of range
    CHECK_THROWS_AS(build_group_authenticator(tokens, kp.pub), crypto::RangeError);
}

TEST_CASE("homomorphic verification against the small-key modular oracle") {
    DeterministicRng rng(27);
    crypto::RsaKeyPair kp = crypto::generate_rsa_keypair(rng, 64, true);
    OpCounter ops;

    // three 16-bit authorization values
    std::vector<Nonce> issued;
    std::vector<mpz_class> tokens;
    for (int i = 0; i < 3; i++) {
        uint64_t v = 2 + rng.below(65534);
        issued.push_back(nonce_of(v));
        tokens.push_back(crypto::rsa_raw_encrypt(ops, kp.pub, v));
        CHECK(tokens.back() == powmod_oracle(v, kp.pub.e.get_ui(), kp.pub.n));
    }
    EncAuthVeriToken veri = build_auth_veri_token(ops, kp.pub, issued);
    EncGroupAuthenticator auth = build_group_authenticator(tokens, kp.pub);

    CHECK(homomorphic_group_verify(ops, auth, veri, kp));

    // direct X = Y arithmetic
    mpz_class prod = issued[0].as_integer() * issued[1].as_integer() % kp.pub.n *
                     issued[2].as_integer() % kp.pub.n;
    mpz_class x = powmod_oracle(prod, kp.pub.e.get_ui(), kp.pub.n);
    mpz_class y = tokens[0] * tokens[1] % kp.pub.n * tokens[2] % kp.pub.n;
    CHECK(x == y);
}

TEST_CASE("homomorphic verification: operation counts and failure modes") {
    DeterministicRng rng(28);
    crypto::RsaKeyPair kp = crypto::generate_rsa_keypair(rng, 256, true);
    OpCounter build_ops;

    std::vector<Nonce> issued;
    std::vector<mpz_class> tokens;
    for (int i = 0; i < 4; i++) {
        Nonce n = Nonce::random(rng, NonceKind::OrNonce);
        issued.push_back(n);
        tokens.push_back(crypto::rsa_raw_encrypt(build_ops, kp.pub, n.as_integer()));
    }
    EncAuthVeriToken veri = build_auth_veri_token(build_ops, kp.pub, issued);
    EncGroupAuthenticator auth = build_group_authenticator(tokens, kp.pub);

    OpCounter verify_ops;
    CHECK(homomorphic_group_verify(verify_ops, auth, veri, kp));
    CHECK(verify_ops.ad == 1);  // one chunked decrypt
    CHECK(verify_ops.ae == 1);  // one product encryption
    CHECK(verify_ops.se == 0);

    SUBCASE("token count mismatch is a decrypt failure") {
        EncGroupAuthenticator shorter = auth;
        shorter.tokens.pop_back();
        CHECK_THROWS_AS(homomorphic_group_verify(verify_ops, shorter, veri, kp), DecryptFailure);
    }
    SUBCASE("malformed veri token") {
        EncAuthVeriToken broken = veri;
        broken.blocks.pop_back();
        OpCounter ops;
        CHECK_THROWS_AS(open_auth_veri_token(ops, kp.priv, broken), DecryptFailure);
    }
}

TEST_CASE("homomorphic completeness across group sizes") {
    DeterministicRng rng(29);
    crypto::RsaKeyPair kp = crypto::generate_rsa_keypair(rng, 256, true);
    for (size_t nc = 1; nc <= 20; nc++) {
        for (int trial = 0; trial < 100; trial++) {
            OpCounter ops;
            std::vector<Nonce> issued;
            std::vector<mpz_class> tokens;
            for (size_t i = 0; i < nc; i++) {
                Nonce n = Nonce::random(rng, NonceKind::OrNonce);
                issued.push_back(n);
                tokens.push_back(crypto::rsa_raw_encrypt(ops, kp.pub, n.as_integer()));
            }
            EncAuthVeriToken veri = build_auth_veri_token(ops, kp.pub, issued);
            EncGroupAuthenticator auth = build_group_authenticator(tokens, kp.pub);
            REQUIRE(homomorphic_group_verify(ops, auth, veri, kp));
        }
    }
}

TEST_CASE("homomorphic soundness: single substituted token fails") {
    DeterministicRng rng(30);
    crypto::RsaKeyPair kp = crypto::generate_rsa_keypair(rng, 256, true);
    OpCounter ops;
    int rejected = 0;
    const int trials = 1000;
    for (int trial = 0; trial < trials; trial++) {
        const size_t nc = 3;
        std::vector<Nonce> issued;
        std::vector<mpz_class> tokens;
        for (size_t i = 0; i < nc; i++) {
            Nonce n = Nonce::random(rng, NonceKind::OrNonce);
            issued.push_back(n);
            tokens.push_back(crypto::rsa_raw_encrypt(ops, kp.pub, n.as_integer()));
        }
        EncAuthVeriToken veri = build_auth_veri_token(ops, kp.pub, issued);
        tokens[rng.below(nc)] = crypto::mpz_from_bytes(rng.bytes(31)) % kp.pub.n;
        EncGroupAuthenticator auth = build_group_authenticator(tokens, kp.pub);
        if (!homomorphic_group_verify(ops, auth, veri, kp)) rejected++;
    }
    CHECK(rejected >= 999);
}

TEST_CASE("NC=1 reduces to direct ciphertext equality") {
    DeterministicRng rng(31);
    crypto::RsaKeyPair kp = crypto::generate_rsa_keypair(rng, 256, true);
    OpCounter ops;
    Nonce n = Nonce::random(rng, NonceKind::OrNonce);
    mpz_class token = crypto::rsa_raw_encrypt(ops, kp.pub, n.as_integer());

    EncAuthVeriToken veri = build_auth_veri_token(ops, kp.pub, {n});
    EncGroupAuthenticator auth = build_group_authenticator({token}, kp.pub);
    CHECK(homomorphic_group_verify(ops, auth, veri, kp));

    // X = E(nonce) so verification is exactly E(nonce) == token
    CHECK(crypto::rsa_raw_encrypt(ops, kp.pub, n.as_integer()) == token);

    EncGroupAuthenticator other = build_group_authenticator({(token + 1) % kp.pub.n}, kp.pub);
    CHECK(!homomorphic_group_verify(ops, other, veri, kp));
}

TEST_CASE("nonce products stay below a full-size modulus for NC <= 23") {
    // 23 nonces of 128 bits multiply to < 2^2944, and a 3072-bit modulus is
    // at least 2^3071; the reduction in the verifier is exact as integers.
    DeterministicRng rng(32);
    mpz_class n_floor = 1;
    n_floor <<= 3071;
    for (int trial = 0; trial < 50; trial++) {
        mpz_class prod = 1;
        for (int i = 0; i < 23; i++) {
            prod *= Nonce::random(rng, NonceKind::OrNonce).as_integer();
        }
        CHECK(prod < n_floor);
    }
}

TEST_CASE("chunked verification token splits back into the issued nonces") {
    DeterministicRng rng(33);
    crypto::RsaKeyPair kp = crypto::generate_rsa_keypair(rng, 256, true);
    for (size_t nc : {1ul, 2ul, 5ul, 20ul}) {
        OpCounter ops;
        std::vector<Nonce> issued;
        for (size_t i = 0; i < nc; i++) issued.push_back(Nonce::random(rng, NonceKind::OrNonce));
        EncAuthVeriToken veri = build_auth_veri_token(ops, kp.pub, issued);
        CHECK(veri.blocks.size() == (16 * nc + 30) / 31);
        std::vector<Nonce> back = open_auth_veri_token(ops, kp.priv, veri);
        REQUIRE(back.size() == nc);
        for (size_t i = 0; i < nc; i++) CHECK(ct_equal(back[i].view(), issued[i].view()));
    }
}
