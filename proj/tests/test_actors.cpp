#include <doctest.h>

#include <set>

#include "m2o/netsim.hpp"

using namespace m2o;
using namespace m2o::actors;
using namespace m2o::netsim;
using crypto::Nonce;
using crypto::NonceKind;
using crypto::SymKey;
using wire::Direction;
using wire::MsgTag;
using wire::ProtocolMessage;

namespace {

// Direct harness around a single server actor for message-level cases.
struct AsHarness {
    GroupConfig config = make_group(3);
    DeterministicRng rng{42};
    KeyRegistry registry = make_registry(config, rng, 256, true);
    ProtocolParams params;
    AuthorizationTable authz;

    AsActor make_as() {
        authz.allow(config.clients, config.target);
        return AsActor(config.as_id, registry, authz, rng, params);
    }

    ProtocolMessage msg1(wire::Timestamp ts, const Nonce& nonce) {
        Bytes plain = wire::encode_client_list(config.clients);
        put_u32(plain, config.target.value);
        append(plain, nonce.view());
        put_u32(plain, ts.ms);
        crypto::OpCounter ops;
        Bytes cipher =
            crypto::sym_encrypt(ops, registry.sym_keys.at(config.leader), plain);
        ProtocolMessage msg;
        msg.tag = MsgTag::HgakaMsg1;
        msg.direction = Direction::Req;
        msg.sender = config.leader;
        msg.receiver = config.as_id;
        msg.items.push_back(wire::sym_item(std::move(cipher), 288));
        return msg;
    }
};

bool has_note(const Emission& em, Note::Kind kind, const std::string& reason) {
    for (const Note& note : em.notes) {
        if (note.kind == kind && note.reason.find(reason) != std::string::npos) return true;
    }
    return false;
}

}  // namespace

TEST_CASE("server accepts a fresh request and answers with both nonces") {
    AsHarness h;
    AsActor as = h.make_as();
    Nonce en1 = Nonce::random(h.rng, NonceKind::EnNonce);
    Emission em = as.on_message(h.msg1(wire::Timestamp{100000}, en1), wire::Timestamp{100004});
    REQUIRE(em.messages.size() == 1);
    CHECK(em.messages[0].tag == MsgTag::HgakaMsg2);
    CHECK(em.messages[0].receiver == h.config.leader);

    // reply decrypts under the leader key and echoes the challenge
    crypto::OpCounter ops;
    Bytes plain = crypto::sym_decrypt(ops, h.registry.sym_keys.at(h.config.leader),
                                      em.messages[0].items[0].data);
    REQUIRE(plain.size() == 32);
    CHECK(ct_equal(BytesView{plain}.subspan(0, 16), en1.view()));
}

TEST_CASE("server freshness window: boundary inclusive, beyond rejected") {
    AsHarness h;
    const uint32_t now = 100000;
    const uint32_t delta = h.params.delta_t_ms;

    SUBCASE("timestamp exactly delta old is accepted") {
        AsActor as = h.make_as();
        Nonce en = Nonce::random(h.rng, NonceKind::EnNonce);
        Emission em = as.on_message(h.msg1(wire::Timestamp{now - delta}, en),
                                    wire::Timestamp{now});
        CHECK(em.messages.size() == 1);
    }
    SUBCASE("timestamp one past delta is rejected as stale") {
        AsActor as = h.make_as();
        Nonce en = Nonce::random(h.rng, NonceKind::EnNonce);
        Emission em = as.on_message(h.msg1(wire::Timestamp{now - delta - 1}, en),
                                    wire::Timestamp{now});
        CHECK(em.messages.empty());
        CHECK(has_note(em, Note::Kind::Reject, "stale-timestamp"));
    }
}

TEST_CASE("server rejections: unknown client, garbage cipher, duplicate, unauthorized") {
    AsHarness h;
    AsActor as = h.make_as();
    const wire::Timestamp now{100000};

    SUBCASE("unknown sender") {
        ProtocolMessage msg = h.msg1(now, Nonce::random(h.rng, NonceKind::EnNonce));
        msg.sender = wire::EntityId{9999};
        Emission em = as.on_message(msg, now);
        CHECK(em.messages.empty());
        CHECK(has_note(em, Note::Kind::Reject, "unknown-client"));
    }
    SUBCASE("garbage ciphertext fails decryption") {
        ProtocolMessage msg = h.msg1(now, Nonce::random(h.rng, NonceKind::EnNonce));
        msg.items[0].data = h.rng.bytes(48);
        Emission em = as.on_message(msg, now);
        CHECK(em.messages.empty());
        CHECK(has_note(em, Note::Kind::Reject, ""));
    }
    SUBCASE("replayed copy rejected, first copy served") {
        ProtocolMessage msg = h.msg1(now, Nonce::random(h.rng, NonceKind::EnNonce));
        Emission first = as.on_message(msg, now);
        CHECK(first.messages.size() == 1);
        Emission second = as.on_message(msg, wire::Timestamp{now.ms + 40});
        CHECK(second.messages.empty());
        CHECK(has_note(second, Note::Kind::Reject, "duplicate"));
    }
    SUBCASE("unauthorized group") {
        AuthorizationTable empty;
        AsActor strict(h.config.as_id, h.registry, empty, h.rng, h.params);
        Emission em = strict.on_message(h.msg1(now, Nonce::random(h.rng, NonceKind::EnNonce)),
                                        now);
        CHECK(em.messages.empty());
        CHECK(has_note(em, Note::Kind::Reject, "unauthorized"));
    }
    SUBCASE("wrong id inside the envelope") {
        // a registered non-leader client sends a request under its own key,
        // but the encrypted list still names the leader as its last entry
        Bytes plain = wire::encode_client_list(h.config.clients);
        put_u32(plain, h.config.target.value);
        append(plain, Nonce::random(h.rng, NonceKind::EnNonce).view());
        put_u32(plain, now.ms);
        crypto::OpCounter ops;
        ProtocolMessage msg;
        msg.tag = MsgTag::HgakaMsg1;
        msg.direction = Direction::Req;
        msg.sender = h.config.clients[0];
        msg.receiver = h.config.as_id;
        msg.items.push_back(wire::sym_item(
            crypto::sym_encrypt(ops, h.registry.sym_keys.at(h.config.clients[0]), plain), 288));
        Emission em = as.on_message(msg, now);
        CHECK(em.messages.empty());
        CHECK(has_note(em, Note::Kind::Reject, "id-mismatch"));
    }
}

TEST_CASE("honest HGAKA leaves the leader holding SK and its authorization nonce") {
    actors::GroupConfig config = make_group(3);
    RunOptions options;
    options.run_hga = false;
    RunTranscript t = run_fresh(config, {}, 7, options);

    const ActorReport& leader = t.report_for(config.leader);
    CHECK(leader.outcome == "completed-hgaka");
    REQUIRE(leader.session_key.has_value());
    const ActorReport& as = t.report_for(config.as_id);
    REQUIRE(as.session_key.has_value());
    CHECK(*leader.session_key == *as.session_key);

    // exactly the HGAKA message budget, nothing from the access protocol
    costmodel::MeasuredRun m = t.measured();
    CHECK(m.hgaka_messages == 9);
    CHECK(m.hga_messages == 0);
}

TEST_CASE("wrong challenge echo in Msg2 terminates the leader") {
    // garble the first ciphertext block of Msg2: padding survives, the echo
    // does not
    AdversaryScript script;
    Rule rule;
    rule.match.tag = MsgTag::HgakaMsg2;
    rule.primary = Rule::Primary::Tamper;
    rule.edit = TamperEdit{0, 0, 0x01};
    script.rules.push_back(rule);

    actors::GroupConfig config = make_group(3);
    RunTranscript t = run_fresh(config, script, 8, {});
    const ActorReport& leader = t.report_for(config.leader);
    CHECK(leader.outcome == "terminated");
    CHECK((leader.reason == "challenge-mismatch" || leader.reason == "decrypt-failure"));
}

TEST_CASE("tampered credential package terminates the receiving client") {
    // garbling the final ciphertext block destroys the padding, so the
    // client sees the tampering at decryption
    AdversaryScript script;
    Rule rule;
    rule.match.tag = MsgTag::HgakaOrDist;
    rule.match.occurrence = 1;
    rule.primary = Rule::Primary::Tamper;
    rule.edit = TamperEdit{0, 40, 0x5a};  // inside the last of three blocks
    script.rules.push_back(rule);

    actors::GroupConfig config = make_group(3);
    RunTranscript t = run_fresh(config, script, 9, {});
    const ActorReport& c0 = t.report_for(config.clients[0]);
    CHECK(c0.outcome == "terminated");
    CHECK((c0.reason == "decrypt-failure" || c0.reason == "malformed-inner"));
}

TEST_CASE("group token folded with one wrong key fails server verification") {
    AsHarness h;
    AsActor as = h.make_as();
    const wire::Timestamp now{100000};

    // S1/S2: open the session and learn the server challenge
    Nonce en1 = Nonce::random(h.rng, NonceKind::EnNonce);
    Emission em = as.on_message(h.msg1(now, en1), now);
    REQUIRE(em.messages.size() == 1);
    crypto::OpCounter ops;
    Bytes m2_plain = crypto::sym_decrypt(ops, h.registry.sym_keys.at(h.config.leader),
                                         em.messages[0].items[0].data);
    Nonce en2 = Nonce::from_bytes(BytesView{m2_plain}.subspan(16), NonceKind::EnNonce);

    // S3-S5 fold with client 0 using the wrong long-term key
    DeterministicRng other(99);
    SymKey wrong = SymKey::random(other);
    Bytes hm = crypto::hmac(ops, h.registry.sym_keys.at(h.config.clients[2]), en2.view());
    hm = crypto::hmac(ops, h.registry.sym_keys.at(h.config.clients[1]), hm);
    hm = crypto::hmac(ops, wrong, hm);

    // S6
    Nonce en3 = Nonce::random(h.rng, NonceKind::EnNonce);
    ProtocolMessage m6;
    m6.tag = MsgTag::HgakaMsg6;
    m6.direction = Direction::Req;
    m6.sender = h.config.leader;
    m6.receiver = h.config.as_id;
    m6.items.push_back(wire::raw_item(hm));
    m6.items.push_back(wire::sym_item(
        crypto::sym_encrypt(ops, h.registry.sym_keys.at(h.config.leader),
                            concat(en2.view(), en3.view())),
        256));
    Emission verdict = as.on_message(m6, wire::Timestamp{now.ms + 50});
    CHECK(verdict.messages.empty());
    CHECK(has_note(verdict, Note::Kind::Terminate, "hm-mismatch"));
    CHECK(as.outcome() == Outcome::Terminated);

    // the run-level variant: a tampered chain hop reaching the server
    for (const Scenario& s : scenario_suite()) {
        if (s.name != "tamper-chain") continue;
        ScenarioResult r = run_scenario(s, 3, 11, {});
        CHECK(r.passed);
        CHECK(r.detail.find("hm-mismatch") != std::string::npos);
    }
}

TEST_CASE("every client and the target share one session key after honest HGA") {
    for (int nc : {2, 3, 10}) {
        actors::GroupConfig config = make_group(nc);
        RunTranscript t = run_fresh(config, {}, 12 + static_cast<uint64_t>(nc), {});
        CHECK(t.honest_complete());
        CHECK(t.session_keys_agree());
        for (int i = 0; i + 1 < nc; i++) {
            const ActorReport& client = t.report_for(config.clients[static_cast<size_t>(i)]);
            CHECK(client.outcome == "completed");
            REQUIRE(client.session_key.has_value());
        }
    }
}

TEST_CASE("challenge nonces are pairwise distinct within one execution") {
    actors::GroupConfig config = make_group(10);
    RunTranscript t = run_fresh(config, {}, 13, {});
    std::set<Bytes> seen;
    for (const Nonce& n : t.generated_nonces) {
        Bytes raw(n.view().begin(), n.view().end());
        CHECK(seen.insert(raw).second);
    }
    // leader: 3 challenges; server: 1 + (nc-1) challenges + nc or-nonces;
    // target: nc-1 challenges
    CHECK(t.generated_nonces.size() == 3 + 1 + 9 + 10 + 9);
}

TEST_CASE("honest send sequence follows the protocol step order") {
    actors::GroupConfig config = make_group(3);
    RunTranscript t = run_fresh(config, {}, 14, {});
    std::vector<std::string> tags;
    for (const TranscriptEntry& e : t.entries) {
        if (e.action == "send") tags.push_back(wire::tag_name(static_cast<MsgTag>(e.frame[0])));
    }
    std::vector<std::string> expect = {
        "HGAKA-Msg1", "HGAKA-Msg2",   "HGAKA-Chain", "HGAKA-Chain", "HGAKA-Chain",
        "HGAKA-Msg6", "HGAKA-Msg7",   "HGAKA-OrDist", "HGAKA-OrDist", "PreHGA-Msg",
        "PreHGA-Msg", "HGA-Msg1",     "HGA-Msg2",    "HGA-SkDist",  "HGA-SkDist"};
    CHECK(tags == expect);
}

TEST_CASE("unauthorized group strands the leader at the timeout") {
    actors::GroupConfig config = make_group(3);
    RunOptions options;
    options.authorize_group = false;
    options.deadlock_check = false;  // the strand is the expected outcome here
    RunTranscript t = run_fresh(config, {}, 15, options);
    CHECK(t.count("reject", "unauthorized", "auth-server") == 2);  // original + one resend
    const ActorReport& leader = t.report_for(config.leader);
    CHECK(leader.outcome == "terminated");
    CHECK(leader.reason == "timeout");
}

TEST_CASE("hga rejects a stale request when every delivery exceeds the window") {
    actors::GroupConfig config = make_group(2);
    RunOptions options;
    options.deadlock_check = false;  // clients never learn the session key
    options.latency.per_hop[{config.leader.value, config.target.value}] =
        options.delta_t_ms + 11;
    RunTranscript t = run_fresh(config, {}, 16, options);
    CHECK(t.count("reject", "stale-timestamp", "target") == 2);  // original + resend
    const ActorReport& leader = t.report_for(config.leader);
    CHECK(leader.outcome == "terminated");
    CHECK(leader.reason == "timeout");
}

TEST_CASE("group config validation") {
    actors::GroupConfig config = make_group(3);
    CHECK_NOTHROW(config.validate());
    actors::GroupConfig bad = config;
    bad.leader = bad.clients[0];
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    actors::GroupConfig collide = config;
    collide.target = collide.clients[1];
    CHECK_THROWS_AS(collide.validate(), std::invalid_argument);
    CHECK_THROWS_AS(make_group(1), std::invalid_argument);
}

TEST_CASE("replay cache forgets tuples outside twice the freshness window") {
    ReplayCache cache(10000);
    DeterministicRng rng(17);
    Nonce n = Nonce::random(rng, NonceKind::EnNonce);
    wire::EntityId sender{5};
    cache.record(sender, wire::Timestamp{1000}, n, wire::Timestamp{1000});
    CHECK(cache.seen(sender, wire::Timestamp{1000}, n, wire::Timestamp{5000}));
    CHECK(cache.seen(sender, wire::Timestamp{1000}, n, wire::Timestamp{11000}));
    CHECK(!cache.seen(sender, wire::Timestamp{1000}, n, wire::Timestamp{11001}));
}
