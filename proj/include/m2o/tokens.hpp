#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "m2o/crypto.hpp"
#include "m2o/wire.hpp"

namespace m2o::tokens {

class TokenError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};
class UnknownClient : public TokenError {
    using TokenError::TokenError;
};
class DecryptFailure : public TokenError {
    using TokenError::TokenError;
};

// Timestamp freshness: |ts - now| <= delta on the logical clock, no
// wraparound handling.
bool ts_veri(wire::Timestamp ts, wire::Timestamp now, uint32_t delta_ms);

bool id_veri(wire::EntityId sender, wire::EntityId registered);

// Challenge/response nonce comparison, constant time.
bool en_veri(const crypto::Nonce& challenge, const crypto::Nonce& response);

// One chain step: HM = HMAC(key, seed).
Bytes hm_gen(crypto::OpCounter& ops, const crypto::SymKey& key, BytesView seed);

using KeyLookup = std::function<std::optional<crypto::SymKey>(wire::EntityId)>;

// Recomputes the nested chain tag from scratch and compares it to hm1.
// The fold starts from the leader's key (chain.back()) over the seed and
// ends at the deepest client's key (chain.front()). Costs chain.size()
// HMAC operations. Throws UnknownClient when a key is missing.
bool hm_veri(crypto::OpCounter& ops, BytesView hm1, const wire::ClientList& chain,
             const KeyLookup& keys, const crypto::Nonce& seed);

// Nested HMAC group tag with the ordering that produced it.
struct HmChainToken {
    Bytes value;                  // 256-bit tag
    wire::ClientList chain_order; // index 0 deepest, last = leader
    crypto::Nonce seed;           // the server-issued challenge
};

// Server-issued encryption of all concatenated authorization nonces under
// the target's public key, chunked into raw-RSA input blocks.
struct EncAuthVeriToken {
    std::vector<mpz_class> blocks;
    size_t nc = 0;

    size_t plaintext_len() const { return nc * crypto::kNonceBytes; }
};

EncAuthVeriToken build_auth_veri_token(crypto::OpCounter& ops, const crypto::RsaPublicKey& pub,
                                       const std::vector<crypto::Nonce>& or_nonces);

// Per-client raw-RSA tokens assembled by the leader, in client-list order.
struct EncGroupAuthenticator {
    std::vector<mpz_class> tokens;
};

EncGroupAuthenticator build_group_authenticator(const std::vector<mpz_class>& tokens,
                                                const crypto::RsaPublicKey& pub);

// Single-comparison group verification via the RSA multiplicative property:
// decrypts the verification token to recover the issued nonces, encrypts
// their product, and compares with the product of the submitted tokens.
// Costs exactly one asymmetric decrypt and one asymmetric encrypt.
bool homomorphic_group_verify(crypto::OpCounter& ops, const EncGroupAuthenticator& authenticator,
                              const EncAuthVeriToken& veri_token,
                              const crypto::RsaKeyPair& keypair);

// Recovered nonces from a verification token (decrypt + split); used by the
// verifier and by tests.
std::vector<crypto::Nonce> open_auth_veri_token(crypto::OpCounter& ops,
                                                const crypto::RsaPrivateKey& priv,
                                                const EncAuthVeriToken& veri_token);

// The X = Y comparison alone, given already-recovered nonces. One asymmetric
// encrypt. The target uses this after opening the verification token so the
// recovered nonces stay available for the key-distribution replies.
bool group_verify_with_nonces(crypto::OpCounter& ops,
                              const std::vector<crypto::Nonce>& issued,
                              const EncGroupAuthenticator& authenticator,
                              const crypto::RsaPublicKey& pub);

}  // namespace m2o::tokens
