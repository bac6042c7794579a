#pragma once

#include <gmpxx.h>

#include <array>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "m2o/bytes.hpp"
#include "m2o/rng.hpp"

namespace m2o::crypto {

inline constexpr size_t kSymKeyBytes = 16;   // AES-128
inline constexpr size_t kSymBlockBytes = 16;
inline constexpr size_t kNonceBytes = 16;    // 128-bit nonces
inline constexpr size_t kDigestBytes = 32;   // SHA-256
inline constexpr int kDefaultRsaBits = 3072;

// Raw-RSA input chunking: 318-byte (2544-bit) blocks for 3072-bit keys,
// shrinking to modulus_bytes - 1 for smaller (test) keys so every chunk
// stays below the modulus.
inline constexpr size_t kRsaInputBlockBytes = 318;

class CryptoError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};
// Malformed padding on decrypt: tampered ciphertext or wrong key.
class PaddingError : public CryptoError {
    using CryptoError::CryptoError;
};
// RSA operand outside [0, n).
class RangeError : public CryptoError {
    using CryptoError::CryptoError;
};

struct SymKey {
    std::array<uint8_t, kSymKeyBytes> bits{};

    static SymKey random(RandomSource& rng);
    static SymKey from_bytes(BytesView data);  // throws on wrong length
    BytesView view() const { return {bits.data(), bits.size()}; }
    bool operator==(const SymKey& other) const {  // constant time
        return ct_equal(view(), other.view());
    }
};

enum class NonceKind : uint8_t { EnNonce, OrNonce };

struct Nonce {
    std::array<uint8_t, kNonceBytes> bits{};
    NonceKind kind = NonceKind::EnNonce;

    // OrNonce draws reject the values 0 and 1: both void the soundness of the
    // multiplicative group check.
    static Nonce random(RandomSource& rng, NonceKind kind);
    static Nonce from_bytes(BytesView data, NonceKind kind);
    BytesView view() const { return {bits.data(), bits.size()}; }
    mpz_class as_integer() const;
    // The protocols reuse OrNonce values directly as AES keys (no KDF).
    SymKey as_sym_key() const;
    bool equal_ct(const Nonce& other) const { return ct_equal(view(), other.view()); }
};

struct RsaPublicKey {
    mpz_class n;
    mpz_class e;
    int modulus_bits = 0;

    size_t modulus_bytes() const { return static_cast<size_t>((modulus_bits + 7) / 8); }
    size_t input_block_bytes() const;
};

struct RsaPrivateKey {
    mpz_class n;
    mpz_class d;
    int modulus_bits = 0;

    size_t modulus_bytes() const { return static_cast<size_t>((modulus_bits + 7) / 8); }
    size_t input_block_bytes() const;
};

struct RsaKeyPair {
    RsaPublicKey pub;
    RsaPrivateKey priv;
};

// Counts cryptographic operations the way the protocol cost tables account
// them: one count per logical cipher/hash invocation. A multi-block chunked
// RSA encryption of one token is one `ae`, mirroring the single T_AE the
// tables book for it.
struct OpCounter {
    uint64_t se = 0;    // symmetric encrypt/decrypt
    uint64_t ae = 0;    // asymmetric encrypt
    uint64_t ad = 0;    // asymmetric decrypt
    uint64_t h = 0;     // hash
    uint64_t hmac = 0;  // HMAC

    void reset() { *this = OpCounter{}; }
    uint64_t total() const { return se + ae + ad + h + hmac; }
    OpCounter& operator+=(const OpCounter& o) {
        se += o.se;
        ae += o.ae;
        ad += o.ad;
        h += o.h;
        hmac += o.hmac;
        return *this;
    }
    bool operator==(const OpCounter&) const = default;
};

// AES-128-CBC with mandatory PKCS#7 padding and a zero IV. The ciphertext is
// a pure function of (key, plaintext), which the deterministic-transcript
// requirement depends on; length is always 128*ceil((bits+1)/128).
Bytes sym_encrypt(OpCounter& ops, const SymKey& key, BytesView plaintext);
Bytes sym_decrypt(OpCounter& ops, const SymKey& key, BytesView ciphertext);

// Textbook RSA: c = m^e mod n / m = c^d mod n. No padding — the HGA group
// verification needs the multiplicative property.
mpz_class rsa_raw_encrypt(OpCounter& ops, const RsaPublicKey& pub, const mpz_class& m);
mpz_class rsa_raw_decrypt(OpCounter& ops, const RsaPrivateKey& priv, const mpz_class& c);

// Chunked raw RSA over an arbitrary byte string, counted as a single
// asymmetric operation. Blocks are input_block_bytes() wide except the last.
std::vector<mpz_class> rsa_encrypt_chunked(OpCounter& ops, const RsaPublicKey& pub,
                                           BytesView data);
Bytes rsa_decrypt_chunked(OpCounter& ops, const RsaPrivateKey& priv,
                          const std::vector<mpz_class>& blocks, size_t plaintext_len);

Bytes hash(OpCounter& ops, BytesView data);                       // SHA-256
Bytes hmac(OpCounter& ops, const SymKey& key, BytesView data);    // HMAC-SHA256

// Key generation is deterministic given the RandomSource. Sizes below 3072
// bits are for tests only and must be requested explicitly.
RsaKeyPair generate_rsa_keypair(RandomSource& rng, int modulus_bits,
                                bool allow_insecure_test_keys = false);

// Fixed-width big-endian encodings for wire transport.
Bytes mpz_to_bytes(const mpz_class& v, size_t width);
mpz_class mpz_from_bytes(BytesView data);

}  // namespace m2o::crypto
