#include "m2o/tokens.hpp"

#include <cstdlib>

namespace m2o::tokens {

bool ts_veri(wire::Timestamp ts, wire::Timestamp now, uint32_t delta_ms) {
    int64_t diff = static_cast<int64_t>(ts.ms) - static_cast<int64_t>(now.ms);
    return std::abs(diff) <= static_cast<int64_t>(delta_ms);
}

bool id_veri(wire::EntityId sender, wire::EntityId registered) {
    return sender == registered;
}

bool en_veri(const crypto::Nonce& challenge, const crypto::Nonce& response) {
    return challenge.equal_ct(response);
}

Bytes hm_gen(crypto::OpCounter& ops, const crypto::SymKey& key, BytesView seed) {
    return crypto::hmac(ops, key, seed);
}

bool hm_veri(crypto::OpCounter& ops, BytesView hm1, const wire::ClientList& chain,
             const KeyLookup& keys, const crypto::Nonce& seed) {
    if (chain.empty()) return false;
    auto key_for = [&](wire::EntityId id) {
        std::optional<crypto::SymKey> k = keys(id);
        if (!k) throw UnknownClient("hm_veri: no key for client " + std::to_string(id.value));
        return *k;
    };
    // Leader first (chain.back()), then down to the deepest client.
    Bytes hm = hm_gen(ops, key_for(chain.back()), seed.view());
    for (size_t i = chain.size() - 1; i-- > 0;) {
        hm = hm_gen(ops, key_for(chain[i]), hm);
    }
    return ct_equal(hm, hm1);
}

EncAuthVeriToken build_auth_veri_token(crypto::OpCounter& ops, const crypto::RsaPublicKey& pub,
                                       const std::vector<crypto::Nonce>& or_nonces) {
    if (or_nonces.empty()) throw TokenError("build_auth_veri_token: no nonces");
    Bytes concat;
    concat.reserve(or_nonces.size() * crypto::kNonceBytes);
    for (const crypto::Nonce& n : or_nonces) append(concat, n.view());
    EncAuthVeriToken token;
    token.blocks = crypto::rsa_encrypt_chunked(ops, pub, concat);
    token.nc = or_nonces.size();
    return token;
}

EncGroupAuthenticator build_group_authenticator(const std::vector<mpz_class>& tokens,
                                                const crypto::RsaPublicKey& pub) {
    for (const mpz_class& t : tokens) {
        if (t < 0 || t >= pub.n) {
            throw crypto::RangeError("build_group_authenticator: token out of range");
        }
    }
    return EncGroupAuthenticator{tokens};
}

std::vector<crypto::Nonce> open_auth_veri_token(crypto::OpCounter& ops,
                                                const crypto::RsaPrivateKey& priv,
                                                const EncAuthVeriToken& veri_token) {
    if (veri_token.nc == 0) throw DecryptFailure("auth veri token: empty");
    Bytes plain;
    try {
        plain = crypto::rsa_decrypt_chunked(ops, priv, veri_token.blocks,
                                            veri_token.plaintext_len());
    } catch (const crypto::CryptoError& e) {
        throw DecryptFailure(std::string("auth veri token: ") + e.what());
    }
    std::vector<crypto::Nonce> out;
    out.reserve(veri_token.nc);
    for (size_t i = 0; i < veri_token.nc; i++) {
        out.push_back(crypto::Nonce::from_bytes(
            BytesView{plain}.subspan(i * crypto::kNonceBytes, crypto::kNonceBytes),
            crypto::NonceKind::OrNonce));
    }
    return out;
}

bool group_verify_with_nonces(crypto::OpCounter& ops,
                              const std::vector<crypto::Nonce>& issued,
                              const EncGroupAuthenticator& authenticator,
                              const crypto::RsaPublicKey& pub) {
    if (authenticator.tokens.size() != issued.size() || issued.empty()) return false;

    // X = E(product of issued nonces mod n). For 3072-bit keys and NC <= 23
    // the product never reaches n, so the reduction is exact as integers.
    mpz_class product = 1;
    for (const crypto::Nonce& nonce : issued) {
        product = product * nonce.as_integer() % pub.n;
    }
    mpz_class x = crypto::rsa_raw_encrypt(ops, pub, product);

    // Y = product of the submitted tokens mod n.
    mpz_class y = 1;
    for (const mpz_class& token : authenticator.tokens) {
        if (token < 0 || token >= pub.n) return false;
        y = y * token % pub.n;
    }
    return x == y;
}

bool homomorphic_group_verify(crypto::OpCounter& ops, const EncGroupAuthenticator& authenticator,
                              const EncAuthVeriToken& veri_token,
                              const crypto::RsaKeyPair& keypair) {
    if (authenticator.tokens.size() != veri_token.nc) {
        throw DecryptFailure("group verify: token count mismatch");
    }
    std::vector<crypto::Nonce> issued = open_auth_veri_token(ops, keypair.priv, veri_token);
    return group_verify_with_nonces(ops, issued, authenticator, keypair.pub);
}

}  // namespace m2o::tokens
