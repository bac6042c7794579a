#include "m2o/crypto.hpp"

#include <openssl/evp.h>
#include <openssl/hmac.h>

#include <algorithm>
#include <memory>

namespace m2o::crypto {

namespace {

struct EvpCtxDeleter {
    void operator()(EVP_CIPHER_CTX* ctx) const { EVP_CIPHER_CTX_free(ctx); }
};
using EvpCtx = std::unique_ptr<EVP_CIPHER_CTX, EvpCtxDeleter>;

const uint8_t kZeroIv[kSymBlockBytes] = {};

}  // namespace

SymKey SymKey::random(RandomSource& rng) {
    SymKey k;
    rng.fill(k.bits.data(), k.bits.size());
    return k;
}

SymKey SymKey::from_bytes(BytesView data) {
    if (data.size() != kSymKeyBytes) throw CryptoError("SymKey: need exactly 16 bytes");
    SymKey k;
    std::copy(data.begin(), data.end(), k.bits.begin());
    return k;
}

Nonce Nonce::random(RandomSource& rng, NonceKind kind) {
    Nonce n;
    n.kind = kind;
    for (;;) {
        rng.fill(n.bits.data(), n.bits.size());
        if (kind == NonceKind::EnNonce) break;
        mpz_class v = n.as_integer();
        if (v > 1) break;  // 0 collapses the group product, 1 is absorbed by it
    }
    return n;
}

Nonce Nonce::from_bytes(BytesView data, NonceKind kind) {
    if (data.size() != kNonceBytes) throw CryptoError("Nonce: need exactly 16 bytes");
    Nonce n;
    n.kind = kind;
    std::copy(data.begin(), data.end(), n.bits.begin());
    return n;
}

mpz_class Nonce::as_integer() const {
    return mpz_from_bytes(view());
}

SymKey Nonce::as_sym_key() const {
    return SymKey::from_bytes(view());
}

size_t RsaPublicKey::input_block_bytes() const {
    return std::min(kRsaInputBlockBytes, modulus_bytes() - 1);
}

size_t RsaPrivateKey::input_block_bytes() const {
    return std::min(kRsaInputBlockBytes, modulus_bytes() - 1);
}

Bytes sym_encrypt(OpCounter& ops, const SymKey& key, BytesView plaintext) {
    if (plaintext.empty()) throw CryptoError("sym_encrypt: empty plaintext");
    ops.se++;
    EvpCtx ctx(EVP_CIPHER_CTX_new());
    if (!ctx || EVP_EncryptInit_ex(ctx.get(), EVP_aes_128_cbc(), nullptr, key.bits.data(),
                                   kZeroIv) != 1) {
        throw CryptoError("sym_encrypt: init failed");
    }
    Bytes out(plaintext.size() + kSymBlockBytes);
    int len1 = 0;
    int len2 = 0;
    if (EVP_EncryptUpdate(ctx.get(), out.data(), &len1, plaintext.data(),
                          static_cast<int>(plaintext.size())) != 1 ||
        EVP_EncryptFinal_ex(ctx.get(), out.data() + len1, &len2) != 1) {
        throw CryptoError("sym_encrypt: encrypt failed");
    }
    out.resize(static_cast<size_t>(len1 + len2));
    return out;
}

Bytes sym_decrypt(OpCounter& ops, const SymKey& key, BytesView ciphertext) {
    if (ciphertext.empty() || ciphertext.size() % kSymBlockBytes != 0) {
        throw PaddingError("sym_decrypt: ciphertext not block aligned");
    }
    ops.se++;
    EvpCtx ctx(EVP_CIPHER_CTX_new());
    if (!ctx || EVP_DecryptInit_ex(ctx.get(), EVP_aes_128_cbc(), nullptr, key.bits.data(),
                                   kZeroIv) != 1) {
        throw CryptoError("sym_decrypt: init failed");
    }
    Bytes out(ciphertext.size());
    int len1 = 0;
    int len2 = 0;
    if (EVP_DecryptUpdate(ctx.get(), out.data(), &len1, ciphertext.data(),
                          static_cast<int>(ciphertext.size())) != 1 ||
        EVP_DecryptFinal_ex(ctx.get(), out.data() + len1, &len2) != 1) {
        throw PaddingError("sym_decrypt: bad padding");
    }
    out.resize(static_cast<size_t>(len1 + len2));
    return out;
}

mpz_class rsa_raw_encrypt(OpCounter& ops, const RsaPublicKey& pub, const mpz_class& m) {
    if (m < 0 || m >= pub.n) throw RangeError("rsa_raw_encrypt: message out of range");
    ops.ae++;
    mpz_class c;
    mpz_powm(c.get_mpz_t(), m.get_mpz_t(), pub.e.get_mpz_t(), pub.n.get_mpz_t());
    return c;
}

mpz_class rsa_raw_decrypt(OpCounter& ops, const RsaPrivateKey& priv, const mpz_class& c) {
    if (c < 0 || c >= priv.n) throw RangeError("rsa_raw_decrypt: ciphertext out of range");
    ops.ad++;
    mpz_class m;
    mpz_powm(m.get_mpz_t(), c.get_mpz_t(), priv.d.get_mpz_t(), priv.n.get_mpz_t());
    return m;
}

std::vector<mpz_class> rsa_encrypt_chunked(OpCounter& ops, const RsaPublicKey& pub,
                                           BytesView data) {
    if (data.empty()) throw CryptoError("rsa_encrypt_chunked: empty input");
    ops.ae++;
    const size_t cap = pub.input_block_bytes();
    std::vector<mpz_class> blocks;
    for (size_t off = 0; off < data.size(); off += cap) {
        size_t len = std::min(cap, data.size() - off);
        mpz_class m = mpz_from_bytes(data.subspan(off, len));
        mpz_class c;
        mpz_powm(c.get_mpz_t(), m.get_mpz_t(), pub.e.get_mpz_t(), pub.n.get_mpz_t());
        blocks.push_back(std::move(c));
    }
    return blocks;
}

Bytes rsa_decrypt_chunked(OpCounter& ops, const RsaPrivateKey& priv,
                          const std::vector<mpz_class>& blocks, size_t plaintext_len) {
    const size_t cap = priv.input_block_bytes();
    const size_t expect = (plaintext_len + cap - 1) / cap;
    if (plaintext_len == 0 || blocks.size() != expect) {
        throw CryptoError("rsa_decrypt_chunked: block count mismatch");
    }
    ops.ad++;
    Bytes out;
    out.reserve(plaintext_len);
    for (size_t i = 0; i < blocks.size(); i++) {
        if (blocks[i] < 0 || blocks[i] >= priv.n) {
            throw RangeError("rsa_decrypt_chunked: block out of range");
        }
        mpz_class m;
        mpz_powm(m.get_mpz_t(), blocks[i].get_mpz_t(), priv.d.get_mpz_t(), priv.n.get_mpz_t());
        size_t len = (i + 1 < blocks.size()) ? cap : plaintext_len - cap * (blocks.size() - 1);
        append(out, mpz_to_bytes(m, len));
    }
    return out;
}

Bytes hash(OpCounter& ops, BytesView data) {
    ops.h++;
    Bytes digest(kDigestBytes);
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), digest.data(), &len, EVP_sha256(), nullptr) != 1 ||
        len != kDigestBytes) {
        throw CryptoError("hash: SHA-256 failed");
    }
    return digest;
}

Bytes hmac(OpCounter& ops, const SymKey& key, BytesView data) {
    ops.hmac++;
    Bytes tag(kDigestBytes);
    unsigned int len = 0;
    if (HMAC(EVP_sha256(), key.bits.data(), static_cast<int>(key.bits.size()), data.data(),
             data.size(), tag.data(), &len) == nullptr ||
        len != kDigestBytes) {
        throw CryptoError("hmac: HMAC-SHA256 failed");
    }
    return tag;
}

namespace {

// Random prime with the top two bits set, so the product of two such primes
// has exactly `bits * 2` significant bits.
mpz_class random_prime(RandomSource& rng, int bits) {
    size_t nbytes = static_cast<size_t>((bits + 7) / 8);
    for (;;) {
        Bytes raw = rng.bytes(nbytes);
        mpz_class cand = mpz_from_bytes(raw);
        mpz_fdiv_r_2exp(cand.get_mpz_t(), cand.get_mpz_t(), bits);
        mpz_setbit(cand.get_mpz_t(), bits - 1);
        mpz_setbit(cand.get_mpz_t(), bits - 2);
        mpz_class p;
        mpz_nextprime(p.get_mpz_t(), cand.get_mpz_t());
        if (mpz_sizeinbase(p.get_mpz_t(), 2) == static_cast<size_t>(bits)) return p;
        // nextprime overflowed past 2^bits; redraw
    }
}

}  // namespace

RsaKeyPair generate_rsa_keypair(RandomSource& rng, int modulus_bits,
                                bool allow_insecure_test_keys) {
    if (modulus_bits < kDefaultRsaBits && !allow_insecure_test_keys) {
        throw CryptoError("generate_rsa_keypair: key below 3072 bits needs the test-keys flag");
    }
    if (modulus_bits < 16 || modulus_bits % 2 != 0) {
        throw CryptoError("generate_rsa_keypair: modulus bits must be even and >= 16");
    }
    const int half = modulus_bits / 2;
    for (;;) {
        mpz_class p = random_prime(rng, half);
        mpz_class q = random_prime(rng, half);
        if (p == q) continue;
        mpz_class n = p * q;
        if (mpz_sizeinbase(n.get_mpz_t(), 2) != static_cast<size_t>(modulus_bits)) continue;
        mpz_class lambda;
        mpz_class pm1 = p - 1;
        mpz_class qm1 = q - 1;
        mpz_lcm(lambda.get_mpz_t(), pm1.get_mpz_t(), qm1.get_mpz_t());
        mpz_class e = 65537;
        if (e >= lambda) e = 17;  // tiny test moduli
        mpz_class g;
        mpz_gcd(g.get_mpz_t(), e.get_mpz_t(), lambda.get_mpz_t());
        if (g != 1) continue;
        mpz_class d;
        if (mpz_invert(d.get_mpz_t(), e.get_mpz_t(), lambda.get_mpz_t()) == 0) continue;
        RsaKeyPair kp;
        kp.pub = RsaPublicKey{n, e, modulus_bits};
        kp.priv = RsaPrivateKey{n, d, modulus_bits};
        return kp;
    }
}

Bytes mpz_to_bytes(const mpz_class& v, size_t width) {
    if (v < 0) throw CryptoError("mpz_to_bytes: negative value");
    Bytes out(width, 0);
    size_t count = 0;
    if (v != 0) {
        size_t need = (mpz_sizeinbase(v.get_mpz_t(), 2) + 7) / 8;
        if (need > width) throw CryptoError("mpz_to_bytes: value wider than field");
        mpz_export(out.data() + (width - need), &count, 1, 1, 1, 0, v.get_mpz_t());
    }
    return out;
}

mpz_class mpz_from_bytes(BytesView data) {
    mpz_class v;
    if (!data.empty()) {
        mpz_import(v.get_mpz_t(), data.size(), 1, 1, 1, 0, data.data());
    }
    return v;
}

}  // namespace m2o::crypto
