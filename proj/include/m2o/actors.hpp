#pragma once

#include <deque>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "m2o/crypto.hpp"
#include "m2o/tokens.hpp"
#include "m2o/wire.hpp"

namespace m2o::actors {

using wire::EntityId;
using wire::Timestamp;

// Long-term key material indexed by entity. The server holds everything
// except target private keys; each device actor is handed only its own view.
struct KeyRegistry {
    std::map<EntityId, crypto::SymKey> sym_keys;             // K_Ci, K_Di
    std::map<EntityId, crypto::SymKey> group_keys;           // target id -> K_GD1
    std::map<EntityId, crypto::RsaPublicKey> target_pubkeys;
    std::map<EntityId, crypto::RsaPrivateKey> target_privkeys;

    std::optional<crypto::SymKey> sym_key(EntityId id) const;
};

struct GroupConfig {
    wire::ClientList clients;  // leader last
    EntityId leader;
    EntityId target;
    EntityId as_id;

    int nc() const { return static_cast<int>(clients.size()); }
    void validate() const;  // throws std::invalid_argument
};

// Static authorization: which client sets may acquire credentials for which
// target.
struct AuthorizationTable {
    std::vector<std::pair<wire::ClientList, EntityId>> entries;

    void allow(const wire::ClientList& clients, EntityId target);
    bool authorized(const wire::ClientList& clients, EntityId target) const;
};

struct ProtocolParams {
    uint32_t delta_t_ms = 5000;         // freshness window
    bool run_hga = true;                // continue into HGA after HGAKA
    bool replay_cache_enabled = true;   // test hook for the negative control
    uint32_t timeout_ms() const { return 2 * delta_t_ms; }
};

enum class Role { AuthServer, Leader, Client, Target };
enum class Phase { Hgaka, Hga };
enum class Outcome { Working, CompletedHgaka, Completed, Terminated };

const char* role_name(Role role);
const char* outcome_name(Outcome outcome);

struct ArmTimer {
    uint64_t timer_id = 0;
    uint32_t delay_ms = 0;
};

struct Note {
    enum class Kind { Reject, Terminate, Info } kind = Kind::Info;
    std::string reason;
};

struct Emission {
    std::vector<wire::ProtocolMessage> messages;
    std::vector<ArmTimer> timers;
    std::vector<Note> notes;
};

// Rejects duplicate (sender, timestamp, nonce) tuples inside the freshness
// window. Tuples are recorded only for fully verified messages, so a flood of
// invalid copies cannot block the honest original.
class ReplayCache {
public:
    explicit ReplayCache(uint32_t window_ms) : window_ms_(window_ms) {}
    bool seen(EntityId sender, Timestamp ts, const crypto::Nonce& nonce, Timestamp now) const;
    void record(EntityId sender, Timestamp ts, const crypto::Nonce& nonce, Timestamp now);

private:
    struct Entry {
        uint32_t sender;
        uint32_t ts;
        std::array<uint8_t, crypto::kNonceBytes> nonce;
        uint32_t inserted_at;
    };
    uint32_t window_ms_;
    std::deque<Entry> entries_;
};

class Actor {
public:
    Actor(EntityId id, Role role) : id_(id), role_(role) {}
    virtual ~Actor() = default;

    virtual Emission on_start(Timestamp now);
    virtual Emission on_message(const wire::ProtocolMessage& msg, Timestamp now) = 0;
    virtual Emission on_timer(uint64_t timer_id, Timestamp now);

    EntityId id() const { return id_; }
    Role role() const { return role_; }
    Outcome outcome() const { return outcome_; }
    const std::string& terminate_reason() const { return terminate_reason_; }
    const std::string& state() const { return state_; }

    const crypto::OpCounter& ops(Phase phase) const {
        return phase == Phase::Hgaka ? hgaka_ops_ : hga_ops_;
    }

    // Secret byte strings this actor generated or holds (keys, nonces, the
    // session key); the eavesdropping scenario asserts none appear on the wire.
    virtual std::vector<Bytes> secrets() const = 0;
    virtual std::vector<crypto::Nonce> generated_nonces() const { return {}; }
    virtual std::optional<crypto::SymKey> session_key() const { return std::nullopt; }

protected:
    crypto::OpCounter& counter(Phase phase) {
        return phase == Phase::Hgaka ? hgaka_ops_ : hga_ops_;
    }
    void set_state(std::string s) { state_ = std::move(s); }
    void terminate(Emission& em, const std::string& reason);
    static void reject(Emission& em, const std::string& reason);

    EntityId id_;
    Role role_;
    Outcome outcome_ = Outcome::Working;
    std::string terminate_reason_;
    std::string state_ = "idle";
    crypto::OpCounter hgaka_ops_;
    crypto::OpCounter hga_ops_;
};

// Group leader: fronts all communication with the server and the target,
// drives both protocols end to end.
class LeaderActor final : public Actor {
public:
    LeaderActor(const GroupConfig& config, crypto::SymKey key, crypto::RsaPublicKey target_pub,
                RandomSource& rng, ProtocolParams params);

    Emission on_start(Timestamp now) override;
    Emission on_message(const wire::ProtocolMessage& msg, Timestamp now) override;
    Emission on_timer(uint64_t timer_id, Timestamp now) override;

    std::vector<Bytes> secrets() const override;
    std::vector<crypto::Nonce> generated_nonces() const override { return issued_nonces_; }
    std::optional<crypto::SymKey> session_key() const override { return sk_; }
    std::optional<crypto::Nonce> or_nonce() const { return or_nonce_; }

private:
    wire::ProtocolMessage build_hgaka_msg1(Timestamp now);
    wire::ProtocolMessage build_hga_msg1(Timestamp now);
    Emission send_hga_msg1(Timestamp now);

    GroupConfig config_;
    crypto::SymKey key_;
    crypto::RsaPublicKey target_pub_;
    RandomSource& rng_;
    ProtocolParams params_;

    std::optional<crypto::Nonce> en1_;        // HGAKA challenge to the server
    std::optional<crypto::Nonce> seed_;       // server challenge, chain seed
    std::optional<crypto::Nonce> en3_;        // challenge inside Msg6
    std::optional<crypto::Nonce> hga_en1_;    // HGA challenge to the target
    std::optional<crypto::SymKey> sk_;
    std::optional<crypto::Nonce> or_nonce_;
    std::vector<crypto::Nonce> issued_nonces_;
    wire::WireItem target_pkg_;               // forwarded EK_D1 package from Msg7
    wire::WireItem target_pkg_hash_;
    std::map<uint32_t, mpz_class> pre_tokens_;  // collected PreHGA tokens
    std::optional<mpz_class> own_token_;
    int resends_ = 0;
};

// Non-leader client: one chain step, then credential receipt, then its
// pre-protocol token and the final session-key share.
class ClientActor final : public Actor {
public:
    ClientActor(const GroupConfig& config, size_t index, crypto::SymKey key,
                crypto::RsaPublicKey target_pub, ProtocolParams params);

    Emission on_message(const wire::ProtocolMessage& msg, Timestamp now) override;

    std::vector<Bytes> secrets() const override;
    std::optional<crypto::SymKey> session_key() const override { return sk_; }
    std::optional<crypto::Nonce> or_nonce() const { return or_nonce_; }

private:
    GroupConfig config_;
    size_t index_;  // position in the client list
    crypto::SymKey key_;
    crypto::RsaPublicKey target_pub_;
    ProtocolParams params_;

    std::optional<crypto::Nonce> or_nonce_;
    std::optional<crypto::Nonce> dist_nonce_;  // server nonce from the credential
    std::optional<crypto::Nonce> hga_nonce_;   // target nonce from the share
    std::optional<crypto::SymKey> sk_;
};

// Authentication server: verifies the group token and issues credentials.
// Invalid messages are rejected individually; only failures inside the
// active session terminate it.
class AsActor final : public Actor {
public:
    AsActor(EntityId id, KeyRegistry registry, AuthorizationTable authz, RandomSource& rng,
            ProtocolParams params);

    Emission on_message(const wire::ProtocolMessage& msg, Timestamp now) override;

    std::vector<Bytes> secrets() const override;
    std::vector<crypto::Nonce> generated_nonces() const override;
    std::optional<crypto::SymKey> session_key() const override { return issued_sk_; }
    const std::vector<crypto::Nonce>& issued_or_nonces() const { return or_nonces_; }

private:
    Emission handle_msg1(const wire::ProtocolMessage& msg, Timestamp now);
    Emission handle_msg6(const wire::ProtocolMessage& msg, Timestamp now);

    KeyRegistry registry_;
    AuthorizationTable authz_;
    RandomSource& rng_;
    ProtocolParams params_;
    ReplayCache cache_;

    // active session
    bool session_active_ = false;
    EntityId session_leader_;
    wire::ClientList session_clients_;
    EntityId session_target_;
    std::optional<crypto::Nonce> session_en1_;
    std::optional<crypto::Nonce> session_en2_;

    std::optional<crypto::SymKey> issued_sk_;
    std::vector<crypto::Nonce> or_nonces_;
    std::vector<crypto::Nonce> challenge_nonces_;
};

// Target device: verifies the group in one homomorphic comparison. The
// integrity hash is checked before any private-key operation.
class TargetActor final : public Actor {
public:
    TargetActor(EntityId id, crypto::SymKey own_key, crypto::SymKey group_key,
                crypto::RsaKeyPair keypair, RandomSource& rng, ProtocolParams params);

    Emission on_message(const wire::ProtocolMessage& msg, Timestamp now) override;

    std::vector<Bytes> secrets() const override;
    std::vector<crypto::Nonce> generated_nonces() const override { return challenge_nonces_; }
    std::optional<crypto::SymKey> session_key() const override { return sk_; }

private:
    crypto::SymKey own_key_;
    crypto::SymKey group_key_;
    crypto::RsaKeyPair keypair_;
    RandomSource& rng_;
    ProtocolParams params_;
    ReplayCache cache_;
    bool served_ = false;

    std::optional<crypto::SymKey> sk_;
    std::vector<crypto::Nonce> challenge_nonces_;
};

// Generates a fully provisioned registry for a group configuration.
KeyRegistry make_registry(const GroupConfig& config, RandomSource& rng, int rsa_bits,
                          bool allow_insecure_test_keys);

// Timer ids used by the leader.
inline constexpr uint64_t kTimerHgakaMsg1 = 1;
inline constexpr uint64_t kTimerPreHgaCollect = 2;
inline constexpr uint64_t kTimerHgaMsg1 = 3;

}  // namespace m2o::actors
