#include "m2o/actors.hpp"

#include <algorithm>
#include <set>

namespace m2o::actors {

namespace {

using crypto::Nonce;
using crypto::NonceKind;
using crypto::OpCounter;
using crypto::SymKey;
using wire::Direction;
using wire::MsgTag;
using wire::ProtocolMessage;

// Plaintext carried inside the session-establishment ciphers of HGAKA Msg1
// and HGA Msg1: client list, target id, challenge nonce, timestamp.
struct SessionPlain {
    wire::ClientList clients;
    EntityId target;
    Nonce nonce;
    Timestamp ts;
};

Bytes encode_session_plain(const wire::ClientList& clients, EntityId target, const Nonce& nonce,
                           Timestamp ts) {
    Bytes out = wire::encode_client_list(clients);
    put_u32(out, target.value);
    append(out, nonce.view());
    put_u32(out, ts.ms);
    return out;
}

std::optional<SessionPlain> decode_session_plain(BytesView data) {
    constexpr size_t kTrailer = 4 + crypto::kNonceBytes + 4;
    if (data.size() < 2 * 4 + kTrailer || (data.size() - kTrailer) % 4 != 0) return std::nullopt;
    SessionPlain out;
    size_t list_len = data.size() - kTrailer;
    out.clients = wire::decode_client_list(data.subspan(0, list_len));
    out.target = EntityId{get_u32(data, list_len)};
    out.nonce = Nonce::from_bytes(data.subspan(list_len + 4, crypto::kNonceBytes),
                                  NonceKind::EnNonce);
    out.ts = Timestamp{get_u32(data, list_len + 4 + crypto::kNonceBytes)};
    return out;
}

uint32_t session_plain_bits(int nc) {
    return static_cast<uint32_t>(32 * nc + 192);
}

// Cost-table accounting of the target package: the inner group-key cipher
// counts one block, the verification token counts 2544 bits per input block.
uint32_t target_pkg_plain_bits(int nc) {
    uint64_t token_bits = wire::block_round_bits(128 * static_cast<uint64_t>(nc), 2544);
    return static_cast<uint32_t>(128 + token_bits);
}

Nonce fresh_distinct_nonce(RandomSource& rng, NonceKind kind, std::vector<Nonce>& pool) {
    for (;;) {
        Nonce n = Nonce::random(rng, kind);
        bool dup = std::any_of(pool.begin(), pool.end(),
                               [&](const Nonce& p) { return ct_equal(p.view(), n.view()); });
        if (!dup) {
            pool.push_back(n);
            return n;
        }
    }
}

void push_optional_secret(std::vector<Bytes>& out, const std::optional<Nonce>& n) {
    if (n) out.emplace_back(n->view().begin(), n->view().end());
}

}  // namespace

std::optional<SymKey> KeyRegistry::sym_key(EntityId id) const {
    auto it = sym_keys.find(id);
    if (it == sym_keys.end()) return std::nullopt;
    return it->second;
}

void GroupConfig::validate() const {
    wire::validate_client_list(clients);
    if (!(leader == clients.back())) {
        throw std::invalid_argument("GroupConfig: leader must be the last client");
    }
    std::set<uint32_t> ids;
    for (const EntityId& c : clients) ids.insert(c.value);
    if (ids.count(target.value) || ids.count(as_id.value) || target == as_id) {
        throw std::invalid_argument("GroupConfig: server/target ids collide with clients");
    }
}

void AuthorizationTable::allow(const wire::ClientList& clients, EntityId target) {
    entries.emplace_back(clients, target);
}

bool AuthorizationTable::authorized(const wire::ClientList& clients, EntityId target) const {
    for (const auto& [list, tgt] : entries) {
        if (tgt == target && list == clients) return true;
    }
    return false;
}

const char* role_name(Role role) {
    switch (role) {
        case Role::AuthServer: return "auth-server";
        case Role::Leader: return "leader";
        case Role::Client: return "client";
        case Role::Target: return "target";
    }
    return "?";
}

const char* outcome_name(Outcome outcome) {
    switch (outcome) {
        case Outcome::Working: return "working";
        case Outcome::CompletedHgaka: return "completed-hgaka";
        case Outcome::Completed: return "completed";
        case Outcome::Terminated: return "terminated";
    }
    return "?";
}

bool ReplayCache::seen(EntityId sender, Timestamp ts, const Nonce& nonce, Timestamp now) const {
    for (const Entry& e : entries_) {
        if (now.ms >= e.inserted_at && now.ms - e.inserted_at > window_ms_) continue;
        if (e.sender == sender.value && e.ts == ts.ms &&
            ct_equal(BytesView{e.nonce}, nonce.view())) {
            return true;
        }
    }
    return false;
}

void ReplayCache::record(EntityId sender, Timestamp ts, const Nonce& nonce, Timestamp now) {
    while (!entries_.empty() && now.ms >= entries_.front().inserted_at &&
           now.ms - entries_.front().inserted_at > window_ms_) {
        entries_.pop_front();
    }
    Entry e;
    e.sender = sender.value;
    e.ts = ts.ms;
    std::copy(nonce.view().begin(), nonce.view().end(), e.nonce.begin());
    e.inserted_at = now.ms;
    entries_.push_back(e);
}

Emission Actor::on_start(Timestamp) {
    return {};
}

Emission Actor::on_timer(uint64_t, Timestamp) {
    return {};
}

void Actor::terminate(Emission& em, const std::string& reason) {
    outcome_ = Outcome::Terminated;
    terminate_reason_ = reason;
    state_ = "terminated";
    em.notes.push_back({Note::Kind::Terminate, reason});
}

void Actor::reject(Emission& em, const std::string& reason) {
    em.notes.push_back({Note::Kind::Reject, reason});
}

// ---------------------------------------------------------------------------
// LeaderActor

LeaderActor::LeaderActor(const GroupConfig& config, SymKey key, crypto::RsaPublicKey target_pub,
                         RandomSource& rng, ProtocolParams params)
    : Actor(config.leader, Role::Leader),
      config_(config),
      key_(key),
      target_pub_(std::move(target_pub)),
      rng_(rng),
      params_(params) {}

ProtocolMessage LeaderActor::build_hgaka_msg1(Timestamp now) {
    en1_ = fresh_distinct_nonce(rng_, NonceKind::EnNonce, issued_nonces_);
    Bytes plain = encode_session_plain(config_.clients, config_.target, *en1_, now);
    Bytes cipher = crypto::sym_encrypt(counter(Phase::Hgaka), key_, plain);
    ProtocolMessage msg;
    msg.tag = MsgTag::HgakaMsg1;
    msg.direction = Direction::Req;
    msg.sender = id_;
    msg.receiver = config_.as_id;
    msg.items.push_back(wire::sym_item(std::move(cipher), session_plain_bits(config_.nc())));
    return msg;
}

Emission LeaderActor::on_start(Timestamp now) {
    Emission em;
    em.messages.push_back(build_hgaka_msg1(now));
    em.timers.push_back({kTimerHgakaMsg1, params_.timeout_ms()});
    set_state("await-msg2");
    return em;
}

Emission LeaderActor::on_message(const ProtocolMessage& msg, Timestamp now) {
    Emission em;
    if (outcome_ == Outcome::Terminated || outcome_ == Outcome::Completed) {
        reject(em, "ignored: not running");
        return em;
    }
    const int nc = config_.nc();
    switch (msg.tag) {
        case MsgTag::HgakaMsg2: {
            if (state() != "await-msg2" || !(msg.sender == config_.as_id) ||
                msg.items.size() != 1) {
                reject(em, "unexpected-message");
                return em;
            }
            Bytes plain;
            try {
                plain = crypto::sym_decrypt(counter(Phase::Hgaka), key_, msg.items[0].data);
            } catch (const crypto::PaddingError&) {
                terminate(em, "decrypt-failure");
                return em;
            }
            if (plain.size() != 2 * crypto::kNonceBytes) {
                terminate(em, "malformed-inner");
                return em;
            }
            Nonce echo = Nonce::from_bytes(BytesView{plain}.subspan(0, crypto::kNonceBytes),
                                           NonceKind::EnNonce);
            if (!tokens::en_veri(*en1_, echo)) {
                terminate(em, "challenge-mismatch");
                return em;
            }
            seed_ = Nonce::from_bytes(BytesView{plain}.subspan(crypto::kNonceBytes),
                                      NonceKind::EnNonce);
            Bytes hm = tokens::hm_gen(counter(Phase::Hgaka), key_, seed_->view());
            ProtocolMessage chain;
            chain.tag = MsgTag::HgakaChain;
            chain.direction = Direction::Req;
            chain.hop = 1;
            chain.sender = id_;
            chain.receiver = config_.clients[static_cast<size_t>(nc) - 2];
            chain.items.push_back(wire::raw_item(std::move(hm)));
            em.messages.push_back(std::move(chain));
            set_state("await-chain-return");
            return em;
        }
        case MsgTag::HgakaChain: {
            if (state() != "await-chain-return" || !(msg.sender == config_.clients.front()) ||
                msg.hop != nc || msg.items.size() != 1) {
                reject(em, "unexpected-message");
                return em;
            }
            if (msg.items[0].data.size() != crypto::kDigestBytes) {
                terminate(em, "malformed-inner");
                return em;
            }
            en3_ = fresh_distinct_nonce(rng_, NonceKind::EnNonce, issued_nonces_);
            Bytes plain = concat(seed_->view(), en3_->view());
            Bytes cipher = crypto::sym_encrypt(counter(Phase::Hgaka), key_, plain);
            ProtocolMessage m6;
            m6.tag = MsgTag::HgakaMsg6;
            m6.direction = Direction::Req;
            m6.sender = id_;
            m6.receiver = config_.as_id;
            m6.items.push_back(wire::raw_item(msg.items[0].data));
            m6.items.push_back(wire::sym_item(std::move(cipher), 256));
            em.messages.push_back(std::move(m6));
            set_state("await-msg7");
            return em;
        }
        case MsgTag::HgakaMsg7: {
            if (state() != "await-msg7" || !(msg.sender == config_.as_id)) {
                reject(em, "unexpected-message");
                return em;
            }
            if (msg.items.size() != static_cast<size_t>(nc) + 2) {
                terminate(em, "malformed-inner");
                return em;
            }
            Bytes plain;
            try {
                plain = crypto::sym_decrypt(counter(Phase::Hgaka), key_,
                                            msg.items[static_cast<size_t>(nc) - 1].data);
            } catch (const crypto::PaddingError&) {
                terminate(em, "decrypt-failure");
                return em;
            }
            if (plain.size() != crypto::kSymKeyBytes + 2 * crypto::kNonceBytes) {
                terminate(em, "malformed-inner");
                return em;
            }
            BytesView view{plain};
            Nonce echo = Nonce::from_bytes(view.subspan(32, crypto::kNonceBytes),
                                           NonceKind::EnNonce);
            if (!tokens::en_veri(*en3_, echo)) {
                terminate(em, "challenge-mismatch");
                return em;
            }
            sk_ = SymKey::from_bytes(view.subspan(0, crypto::kSymKeyBytes));
            or_nonce_ = Nonce::from_bytes(view.subspan(16, crypto::kNonceBytes),
                                          NonceKind::OrNonce);
            target_pkg_ = msg.items[static_cast<size_t>(nc)];
            target_pkg_hash_ = msg.items[static_cast<size_t>(nc) + 1];
            for (size_t i = 0; i + 1 < static_cast<size_t>(nc); i++) {
                ProtocolMessage dist;
                dist.tag = MsgTag::HgakaOrDist;
                dist.direction = Direction::Res;
                dist.sender = id_;
                dist.receiver = config_.clients[i];
                dist.items.push_back(msg.items[i]);
                em.messages.push_back(std::move(dist));
            }
            outcome_ = Outcome::CompletedHgaka;
            if (params_.run_hga) {
                own_token_ = crypto::rsa_raw_encrypt(counter(Phase::Hga), target_pub_,
                                                     or_nonce_->as_integer());
                em.timers.push_back({kTimerPreHgaCollect, params_.timeout_ms()});
                set_state("collect-prehga");
            } else {
                set_state("hgaka-done");
            }
            return em;
        }
        case MsgTag::PreHga: {
            if (state() != "collect-prehga") {
                reject(em, "unexpected-message");
                return em;
            }
            auto pos = std::find(config_.clients.begin(), config_.clients.end(), msg.sender);
            if (pos == config_.clients.end() || msg.sender == id_ || msg.items.size() != 1) {
                reject(em, "unexpected-message");
                return em;
            }
            if (pre_tokens_.count(msg.sender.value)) {
                reject(em, "duplicate");
                return em;
            }
            pre_tokens_[msg.sender.value] = crypto::mpz_from_bytes(msg.items[0].data);
            if (pre_tokens_.size() == static_cast<size_t>(nc) - 1) {
                return send_hga_msg1(now);
            }
            return em;
        }
        case MsgTag::HgaMsg2: {
            if (state() != "await-hga-msg2" || !(msg.sender == config_.target)) {
                reject(em, "unexpected-message");
                return em;
            }
            if (msg.items.size() != static_cast<size_t>(nc)) {
                terminate(em, "malformed-inner");
                return em;
            }
            Bytes plain;
            try {
                plain = crypto::sym_decrypt(counter(Phase::Hga), *sk_, msg.items[0].data);
            } catch (const crypto::PaddingError&) {
                terminate(em, "decrypt-failure");
                return em;
            }
            if (plain.size() != crypto::kNonceBytes ||
                !tokens::en_veri(*hga_en1_,
                                 Nonce::from_bytes(BytesView{plain}, NonceKind::EnNonce))) {
                terminate(em, "challenge-mismatch");
                return em;
            }
            for (size_t i = 0; i + 1 < static_cast<size_t>(nc); i++) {
                ProtocolMessage dist;
                dist.tag = MsgTag::HgaSkDist;
                dist.direction = Direction::Res;
                dist.sender = id_;
                dist.receiver = config_.clients[i];
                dist.items.push_back(msg.items[i + 1]);
                em.messages.push_back(std::move(dist));
            }
            outcome_ = Outcome::Completed;
            set_state("done");
            return em;
        }
        default:
            reject(em, "unexpected-message");
            return em;
    }
}

ProtocolMessage LeaderActor::build_hga_msg1(Timestamp now) {
    const int nc = config_.nc();
    std::vector<mpz_class> ordered;
    ordered.reserve(static_cast<size_t>(nc));
    for (size_t i = 0; i + 1 < static_cast<size_t>(nc); i++) {
        ordered.push_back(pre_tokens_.at(config_.clients[i].value));
    }
    ordered.push_back(*own_token_);
    tokens::EncGroupAuthenticator authenticator =
        tokens::build_group_authenticator(ordered, target_pub_);

    hga_en1_ = fresh_distinct_nonce(rng_, NonceKind::EnNonce, issued_nonces_);
    Bytes plain = encode_session_plain(config_.clients, config_.target, *hga_en1_, now);
    Bytes cipher = crypto::sym_encrypt(counter(Phase::Hga), *sk_, plain);

    ProtocolMessage msg;
    msg.tag = MsgTag::HgaMsg1;
    msg.direction = Direction::Req;
    msg.sender = id_;
    msg.receiver = config_.target;
    msg.items.push_back(wire::sym_item(std::move(cipher), session_plain_bits(nc)));
    const size_t width = target_pub_.modulus_bytes();
    for (const mpz_class& token : authenticator.tokens) {
        msg.items.push_back(wire::rsa_token_item(crypto::mpz_to_bytes(token, width)));
    }
    msg.items.push_back(target_pkg_);
    msg.items.push_back(target_pkg_hash_);
    return msg;
}

Emission LeaderActor::send_hga_msg1(Timestamp now) {
    Emission em;
    try {
        em.messages.push_back(build_hga_msg1(now));
    } catch (const crypto::RangeError&) {
        terminate(em, "malformed-inner");
        return em;
    }
    em.timers.push_back({kTimerHgaMsg1, params_.timeout_ms()});
    set_state("await-hga-msg2");
    return em;
}

Emission LeaderActor::on_timer(uint64_t timer_id, Timestamp now) {
    Emission em;
    if (outcome_ == Outcome::Terminated || outcome_ == Outcome::Completed) return em;
    switch (timer_id) {
        case kTimerHgakaMsg1:
            if (state() != "await-msg2") return em;
            if (resends_ == 0) {
                resends_++;
                em.notes.push_back({Note::Kind::Info, "resend HGAKA-Msg1"});
                em.messages.push_back(build_hgaka_msg1(now));
                em.timers.push_back({kTimerHgakaMsg1, params_.timeout_ms()});
            } else {
                terminate(em, "timeout");
            }
            return em;
        case kTimerPreHgaCollect:
            if (state() == "collect-prehga") terminate(em, "incomplete-group");
            return em;
        case kTimerHgaMsg1:
            if (state() != "await-hga-msg2") return em;
            if (resends_ == 0) {
                resends_++;
                em.notes.push_back({Note::Kind::Info, "resend HGA-Msg1"});
                em.messages.push_back(build_hga_msg1(now));
                em.timers.push_back({kTimerHgaMsg1, params_.timeout_ms()});
            } else {
                terminate(em, "timeout");
            }
            return em;
        default:
            return em;
    }
}

std::vector<Bytes> LeaderActor::secrets() const {
    std::vector<Bytes> out;
    out.emplace_back(key_.bits.begin(), key_.bits.end());
    if (sk_) out.emplace_back(sk_->bits.begin(), sk_->bits.end());
    push_optional_secret(out, or_nonce_);
    push_optional_secret(out, en1_);
    push_optional_secret(out, seed_);
    push_optional_secret(out, en3_);
    push_optional_secret(out, hga_en1_);
    return out;
}

// ---------------------------------------------------------------------------
// ClientActor

ClientActor::ClientActor(const GroupConfig& config, size_t index, SymKey key,
                         crypto::RsaPublicKey target_pub, ProtocolParams params)
    : Actor(config.clients.at(index), Role::Client),
      config_(config),
      index_(index),
      key_(key),
      target_pub_(std::move(target_pub)),
      params_(params) {
    set_state("await-chain");
}

Emission ClientActor::on_message(const ProtocolMessage& msg, Timestamp) {
    Emission em;
    if (outcome_ == Outcome::Terminated || outcome_ == Outcome::Completed) {
        reject(em, "ignored: not running");
        return em;
    }
    const size_t nc = config_.clients.size();
    switch (msg.tag) {
        case MsgTag::HgakaChain: {
            EntityId expect_from = (index_ == nc - 2) ? config_.leader : config_.clients[index_ + 1];
            uint8_t expect_hop = static_cast<uint8_t>(nc - 1 - index_);
            if (state() != "await-chain" || !(msg.sender == expect_from) ||
                msg.hop != expect_hop || msg.items.size() != 1) {
                reject(em, "unexpected-message");
                return em;
            }
            if (msg.items[0].data.size() != crypto::kDigestBytes) {
                terminate(em, "malformed-inner");
                return em;
            }
            Bytes hm = tokens::hm_gen(counter(Phase::Hgaka), key_, msg.items[0].data);
            ProtocolMessage next;
            next.tag = MsgTag::HgakaChain;
            next.direction = (index_ == 0) ? Direction::Res : Direction::Req;
            next.hop = static_cast<uint8_t>(expect_hop + 1);
            next.sender = id_;
            next.receiver = (index_ == 0) ? config_.leader : config_.clients[index_ - 1];
            next.items.push_back(wire::raw_item(std::move(hm)));
            em.messages.push_back(std::move(next));
            set_state("await-ordist");
            return em;
        }
        case MsgTag::HgakaOrDist: {
            if (state() != "await-ordist" || !(msg.sender == config_.leader) ||
                msg.items.size() != 1) {
                reject(em, "unexpected-message");
                return em;
            }
            Bytes plain;
            try {
                plain = crypto::sym_decrypt(counter(Phase::Hgaka), key_, msg.items[0].data);
            } catch (const crypto::PaddingError&) {
                terminate(em, "decrypt-failure");
                return em;
            }
            if (plain.size() != 2 * crypto::kNonceBytes) {
                terminate(em, "malformed-inner");
                return em;
            }
            or_nonce_ = Nonce::from_bytes(BytesView{plain}.subspan(0, crypto::kNonceBytes),
                                          NonceKind::OrNonce);
            dist_nonce_ = Nonce::from_bytes(BytesView{plain}.subspan(crypto::kNonceBytes),
                                            NonceKind::EnNonce);
            outcome_ = Outcome::CompletedHgaka;
            if (!params_.run_hga) {
                set_state("hgaka-done");
                return em;
            }
            mpz_class token = crypto::rsa_raw_encrypt(counter(Phase::Hga), target_pub_,
                                                      or_nonce_->as_integer());
            ProtocolMessage pre;
            pre.tag = MsgTag::PreHga;
            pre.direction = Direction::Req;
            pre.sender = id_;
            pre.receiver = config_.leader;
            pre.items.push_back(wire::rsa_token_item(
                crypto::mpz_to_bytes(token, target_pub_.modulus_bytes())));
            em.messages.push_back(std::move(pre));
            set_state("await-skdist");
            return em;
        }
        case MsgTag::HgaSkDist: {
            if (state() != "await-skdist" || !(msg.sender == config_.leader) ||
                msg.items.size() != 1) {
                reject(em, "unexpected-message");
                return em;
            }
            Bytes plain;
            try {
                plain = crypto::sym_decrypt(counter(Phase::Hga), or_nonce_->as_sym_key(),
                                            msg.items[0].data);
            } catch (const crypto::PaddingError&) {
                terminate(em, "decrypt-failure");
                return em;
            }
            if (plain.size() != crypto::kSymKeyBytes + crypto::kNonceBytes) {
                terminate(em, "malformed-inner");
                return em;
            }
            sk_ = SymKey::from_bytes(BytesView{plain}.subspan(0, crypto::kSymKeyBytes));
            hga_nonce_ = Nonce::from_bytes(BytesView{plain}.subspan(crypto::kSymKeyBytes),
                                           NonceKind::EnNonce);
            outcome_ = Outcome::Completed;
            set_state("done");
            return em;
        }
        default:
            reject(em, "unexpected-message");
            return em;
    }
}

std::vector<Bytes> ClientActor::secrets() const {
    std::vector<Bytes> out;
    out.emplace_back(key_.bits.begin(), key_.bits.end());
    if (sk_) out.emplace_back(sk_->bits.begin(), sk_->bits.end());
    push_optional_secret(out, or_nonce_);
    push_optional_secret(out, dist_nonce_);
    push_optional_secret(out, hga_nonce_);
    return out;
}

// ---------------------------------------------------------------------------
// AsActor

AsActor::AsActor(EntityId id, KeyRegistry registry, AuthorizationTable authz, RandomSource& rng,
                 ProtocolParams params)
    : Actor(id, Role::AuthServer),
      registry_(std::move(registry)),
      authz_(std::move(authz)),
      rng_(rng),
      params_(params),
      cache_(2 * params.delta_t_ms) {
    set_state("await-msg1");
}

Emission AsActor::on_message(const ProtocolMessage& msg, Timestamp now) {
    Emission em;
    if (outcome_ == Outcome::Terminated) {
        reject(em, "ignored: not running");
        return em;
    }
    switch (msg.tag) {
        case MsgTag::HgakaMsg1:
            return handle_msg1(msg, now);
        case MsgTag::HgakaMsg6:
            return handle_msg6(msg, now);
        default:
            reject(em, "unexpected-message");
            return em;
    }
}

Emission AsActor::handle_msg1(const ProtocolMessage& msg, Timestamp now) {
    Emission em;
    std::optional<SymKey> key = registry_.sym_key(msg.sender);
    if (!key || msg.items.size() != 1) {
        reject(em, "unknown-client");
        return em;
    }
    Bytes plain;
    try {
        plain = crypto::sym_decrypt(counter(Phase::Hgaka), *key, msg.items[0].data);
    } catch (const crypto::PaddingError&) {
        reject(em, "decrypt-failure");
        return em;
    }
    std::optional<SessionPlain> inner = decode_session_plain(plain);
    if (!inner) {
        reject(em, "malformed-inner");
        return em;
    }
    try {
        wire::validate_client_list(inner->clients);
    } catch (const wire::MalformedMessage&) {
        reject(em, "malformed-inner");
        return em;
    }
    if (!tokens::id_veri(msg.sender, inner->clients.back())) {
        reject(em, "id-mismatch");
        return em;
    }
    for (const EntityId& c : inner->clients) {
        if (!registry_.sym_key(c)) {
            reject(em, "unknown-client");
            return em;
        }
    }
    if (!tokens::ts_veri(inner->ts, now, params_.delta_t_ms)) {
        reject(em, "stale-timestamp");
        return em;
    }
    if (params_.replay_cache_enabled && cache_.seen(msg.sender, inner->ts, inner->nonce, now)) {
        reject(em, "duplicate");
        return em;
    }
    if (!authz_.authorized(inner->clients, inner->target)) {
        reject(em, "unauthorized");
        return em;
    }
    if (!registry_.target_pubkeys.count(inner->target) ||
        !registry_.group_keys.count(inner->target) || !registry_.sym_key(inner->target)) {
        reject(em, "unknown-target");
        return em;
    }
    cache_.record(msg.sender, inner->ts, inner->nonce, now);

    session_active_ = true;
    session_leader_ = msg.sender;
    session_clients_ = inner->clients;
    session_target_ = inner->target;
    session_en1_ = inner->nonce;
    session_en2_ = fresh_distinct_nonce(rng_, NonceKind::EnNonce, challenge_nonces_);

    Bytes reply_plain = concat(session_en1_->view(), session_en2_->view());
    Bytes cipher = crypto::sym_encrypt(counter(Phase::Hgaka), *key, reply_plain);
    ProtocolMessage m2;
    m2.tag = MsgTag::HgakaMsg2;
    m2.direction = Direction::Res;
    m2.sender = id_;
    m2.receiver = msg.sender;
    m2.items.push_back(wire::sym_item(std::move(cipher), 256));
    em.messages.push_back(std::move(m2));
    set_state("await-msg6");
    return em;
}

Emission AsActor::handle_msg6(const ProtocolMessage& msg, Timestamp) {
    Emission em;
    if (!session_active_ || state() != "await-msg6" || !(msg.sender == session_leader_)) {
        reject(em, "unexpected-message");
        return em;
    }
    if (msg.items.size() != 2 || msg.items[0].data.size() != crypto::kDigestBytes) {
        terminate(em, "malformed-inner");
        return em;
    }
    SymKey leader_key = *registry_.sym_key(session_leader_);
    Bytes plain;
    try {
        plain = crypto::sym_decrypt(counter(Phase::Hgaka), leader_key, msg.items[1].data);
    } catch (const crypto::PaddingError&) {
        terminate(em, "decrypt-failure");
        return em;
    }
    if (plain.size() != 2 * crypto::kNonceBytes) {
        terminate(em, "malformed-inner");
        return em;
    }
    Nonce echo = Nonce::from_bytes(BytesView{plain}.subspan(0, crypto::kNonceBytes),
                                   NonceKind::EnNonce);
    if (!tokens::en_veri(*session_en2_, echo)) {
        terminate(em, "challenge-mismatch");
        return em;
    }
    Nonce en3 = Nonce::from_bytes(BytesView{plain}.subspan(crypto::kNonceBytes),
                                  NonceKind::EnNonce);
    tokens::KeyLookup lookup = [this](EntityId id) { return registry_.sym_key(id); };
    bool hm_ok;
    try {
        hm_ok = tokens::hm_veri(counter(Phase::Hgaka), msg.items[0].data, session_clients_,
                                lookup, *session_en2_);
    } catch (const tokens::UnknownClient&) {
        terminate(em, "unknown-client");
        return em;
    }
    if (!hm_ok) {
        terminate(em, "hm-mismatch");
        return em;
    }

    const size_t nc = session_clients_.size();
    issued_sk_ = SymKey::random(rng_);
    or_nonces_.clear();
    std::vector<Nonce> pool;
    for (size_t i = 0; i < nc; i++) {
        or_nonces_.push_back(fresh_distinct_nonce(rng_, NonceKind::OrNonce, pool));
    }
    OpCounter& ops = counter(Phase::Hgaka);
    ProtocolMessage m7;
    m7.tag = MsgTag::HgakaMsg7;
    m7.direction = Direction::Res;
    m7.sender = id_;
    m7.receiver = session_leader_;
    // per-client credential packages, non-leaders first
    for (size_t i = 0; i + 1 < nc; i++) {
        Nonce en = fresh_distinct_nonce(rng_, NonceKind::EnNonce, challenge_nonces_);
        SymKey ck = *registry_.sym_key(session_clients_[i]);
        Bytes p = concat(or_nonces_[i].view(), en.view());
        m7.items.push_back(wire::sym_item(crypto::sym_encrypt(ops, ck, p), 256));
    }
    // leader package: session key, leader nonce, challenge echo
    {
        Bytes p(issued_sk_->bits.begin(), issued_sk_->bits.end());
        append(p, or_nonces_.back().view());
        append(p, en3.view());
        m7.items.push_back(wire::sym_item(crypto::sym_encrypt(ops, leader_key, p), 384));
    }
    // target package: EK_GD1[SK] plus the encrypted verification token
    {
        SymKey gd1 = registry_.group_keys.at(session_target_);
        Bytes gd1_cipher = crypto::sym_encrypt(ops, gd1, issued_sk_->view());
        const crypto::RsaPublicKey& pub = registry_.target_pubkeys.at(session_target_);
        tokens::EncAuthVeriToken veri = tokens::build_auth_veri_token(ops, pub, or_nonces_);
        Bytes inner = gd1_cipher;
        for (const mpz_class& block : veri.blocks) {
            append(inner, crypto::mpz_to_bytes(block, pub.modulus_bytes()));
        }
        SymKey target_key = *registry_.sym_key(session_target_);
        Bytes pkg = crypto::sym_encrypt(ops, target_key, inner);
        m7.items.push_back(wire::sym_item(std::move(pkg),
                                          target_pkg_plain_bits(static_cast<int>(nc))));
        m7.items.push_back(wire::raw_item(crypto::hash(ops, inner)));
    }
    em.messages.push_back(std::move(m7));
    outcome_ = Outcome::Completed;
    set_state("done");
    return em;
}

std::vector<Bytes> AsActor::secrets() const {
    std::vector<Bytes> out;
    for (const auto& [id, key] : registry_.sym_keys) {
        out.emplace_back(key.bits.begin(), key.bits.end());
    }
    for (const auto& [id, key] : registry_.group_keys) {
        out.emplace_back(key.bits.begin(), key.bits.end());
    }
    if (issued_sk_) out.emplace_back(issued_sk_->bits.begin(), issued_sk_->bits.end());
    for (const Nonce& n : or_nonces_) out.emplace_back(n.view().begin(), n.view().end());
    for (const Nonce& n : challenge_nonces_) out.emplace_back(n.view().begin(), n.view().end());
    return out;
}

std::vector<Nonce> AsActor::generated_nonces() const {
    std::vector<Nonce> out = challenge_nonces_;
    out.insert(out.end(), or_nonces_.begin(), or_nonces_.end());
    return out;
}

// ---------------------------------------------------------------------------
// TargetActor

TargetActor::TargetActor(EntityId id, SymKey own_key, SymKey group_key, crypto::RsaKeyPair keypair,
                         RandomSource& rng, ProtocolParams params)
    : Actor(id, Role::Target),
      own_key_(own_key),
      group_key_(group_key),
      keypair_(std::move(keypair)),
      rng_(rng),
      params_(params),
      cache_(2 * params.delta_t_ms) {
    set_state("await-hga-msg1");
}

Emission TargetActor::on_message(const ProtocolMessage& msg, Timestamp now) {
    Emission em;
    if (msg.tag != MsgTag::HgaMsg1) {
        reject(em, "unexpected-message");
        return em;
    }
    if (msg.items.size() < 5) {
        reject(em, "malformed-inner");
        return em;
    }
    OpCounter& ops = counter(Phase::Hga);
    const size_t pkg_index = msg.items.size() - 2;
    const size_t token_count = msg.items.size() - 3;

    // (1) recover the session key from the credential package
    Bytes pkg_inner;
    try {
        pkg_inner = crypto::sym_decrypt(ops, own_key_, msg.items[pkg_index].data);
    } catch (const crypto::PaddingError&) {
        reject(em, "decrypt-failure");
        return em;
    }
    const size_t gd1_len = 2 * crypto::kSymBlockBytes;  // one padded key block
    const size_t width = keypair_.pub.modulus_bytes();
    if (pkg_inner.size() <= gd1_len || (pkg_inner.size() - gd1_len) % width != 0) {
        reject(em, "malformed-inner");
        return em;
    }
    Bytes sk_plain;
    try {
        sk_plain = crypto::sym_decrypt(ops, group_key_,
                                       BytesView{pkg_inner}.subspan(0, gd1_len));
    } catch (const crypto::PaddingError&) {
        reject(em, "decrypt-failure");
        return em;
    }
    if (sk_plain.size() != crypto::kSymKeyBytes) {
        reject(em, "malformed-inner");
        return em;
    }
    SymKey sk = SymKey::from_bytes(sk_plain);

    // (2) freshness of the session request
    Bytes session_plain;
    try {
        session_plain = crypto::sym_decrypt(ops, sk, msg.items[0].data);
    } catch (const crypto::PaddingError&) {
        reject(em, "decrypt-failure");
        return em;
    }
    std::optional<SessionPlain> inner = decode_session_plain(session_plain);
    if (!inner || inner->clients.size() != token_count) {
        reject(em, "malformed-inner");
        return em;
    }
    if (!tokens::id_veri(inner->target, id_) ||
        !tokens::id_veri(msg.sender, inner->clients.back())) {
        reject(em, "id-mismatch");
        return em;
    }
    if (!tokens::ts_veri(inner->ts, now, params_.delta_t_ms)) {
        reject(em, "stale-timestamp");
        return em;
    }
    if (params_.replay_cache_enabled && cache_.seen(msg.sender, inner->ts, inner->nonce, now)) {
        reject(em, "duplicate");
        return em;
    }

    // (3) integrity hash before any private-key operation
    Bytes fresh_hash = crypto::hash(ops, pkg_inner);
    if (!ct_equal(fresh_hash, msg.items.back().data)) {
        reject(em, "hash-mismatch");
        return em;
    }

    // (4) single homomorphic comparison over all tokens
    const size_t nc = inner->clients.size();
    tokens::EncAuthVeriToken veri;
    veri.nc = nc;
    for (size_t off = gd1_len; off < pkg_inner.size(); off += width) {
        veri.blocks.push_back(crypto::mpz_from_bytes(BytesView{pkg_inner}.subspan(off, width)));
    }
    std::vector<crypto::Nonce> issued;
    try {
        issued = tokens::open_auth_veri_token(ops, keypair_.priv, veri);
    } catch (const tokens::DecryptFailure&) {
        reject(em, "group-verify-failed");
        return em;
    }
    std::vector<mpz_class> submitted;
    submitted.reserve(nc);
    for (size_t i = 0; i < nc; i++) {
        submitted.push_back(crypto::mpz_from_bytes(msg.items[1 + i].data));
    }
    bool verified;
    try {
        tokens::EncGroupAuthenticator authenticator =
            tokens::build_group_authenticator(submitted, keypair_.pub);
        verified = tokens::group_verify_with_nonces(ops, issued, authenticator, keypair_.pub);
    } catch (const crypto::RangeError&) {
        verified = false;
    }
    if (!verified) {
        reject(em, "group-verify-failed");
        return em;
    }

    cache_.record(msg.sender, inner->ts, inner->nonce, now);
    sk_ = sk;
    served_ = true;

    ProtocolMessage m2;
    m2.tag = MsgTag::HgaMsg2;
    m2.direction = Direction::Res;
    m2.sender = id_;
    m2.receiver = msg.sender;
    m2.items.push_back(wire::sym_item(crypto::sym_encrypt(ops, sk, inner->nonce.view()), 128));
    for (size_t i = 0; i + 1 < nc; i++) {
        Nonce en = fresh_distinct_nonce(rng_, NonceKind::EnNonce, challenge_nonces_);
        Bytes p(sk.bits.begin(), sk.bits.end());
        append(p, en.view());
        m2.items.push_back(
            wire::sym_item(crypto::sym_encrypt(ops, issued[i].as_sym_key(), p), 256));
    }
    em.messages.push_back(std::move(m2));
    outcome_ = Outcome::Completed;
    set_state("done");
    return em;
}

std::vector<Bytes> TargetActor::secrets() const {
    std::vector<Bytes> out;
    out.emplace_back(own_key_.bits.begin(), own_key_.bits.end());
    out.emplace_back(group_key_.bits.begin(), group_key_.bits.end());
    if (sk_) out.emplace_back(sk_->bits.begin(), sk_->bits.end());
    for (const Nonce& n : challenge_nonces_) out.emplace_back(n.view().begin(), n.view().end());
    return out;
}

KeyRegistry make_registry(const GroupConfig& config, RandomSource& rng, int rsa_bits,
                          bool allow_insecure_test_keys) {
    config.validate();
    KeyRegistry reg;
    for (const EntityId& c : config.clients) {
        reg.sym_keys[c] = SymKey::random(rng);
    }
    reg.sym_keys[config.target] = SymKey::random(rng);
    reg.group_keys[config.target] = SymKey::random(rng);
    crypto::RsaKeyPair kp = crypto::generate_rsa_keypair(rng, rsa_bits, allow_insecure_test_keys);
    reg.target_pubkeys[config.target] = kp.pub;
    reg.target_privkeys[config.target] = kp.priv;
    return reg;
}

}  // namespace m2o::actors
