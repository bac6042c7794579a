#pragma once

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "m2o/actors.hpp"
#include "m2o/costmodel.hpp"
#include "m2o/wire.hpp"

namespace m2o::netsim {

using actors::EntityId;
using wire::Timestamp;

class DeadlockError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct LatencyModel {
    uint32_t default_ms = 10;
    std::map<std::pair<uint32_t, uint32_t>, uint32_t> per_hop;

    uint32_t latency(EntityId from, EntityId to) const {
        auto it = per_hop.find({from.value, to.value});
        return it == per_hop.end() ? default_ms : it->second;
    }
};

// Byte edit applied to one payload item of a matched message.
struct TamperEdit {
    size_t item_index = 0;
    size_t byte_offset = 0;
    uint8_t xor_mask = 0x01;
};

struct Match {
    std::optional<wire::MsgTag> tag;
    std::optional<EntityId> sender;
    std::optional<EntityId> receiver;
    std::optional<uint8_t> hop;
    std::optional<uint32_t> occurrence;  // apply only to the n-th matching message

    bool matches(const wire::ProtocolMessage& msg) const;
};

// What the adversary knows when fabricating messages: the full wire history
// (Dolev-Yao on an open channel), its own randomness, and whatever keys the
// script granted it.
struct AdversaryView {
    RandomSource& rng;
    const std::vector<Bytes>& observed;
    const actors::KeyRegistry& granted_keys;
};

using InjectFactory = std::function<std::optional<wire::ProtocolMessage>(
    AdversaryView&, const wire::ProtocolMessage* matched)>;

struct ReplaySpec {
    uint32_t first_delay_ms = 1;
    uint32_t gap_ms = 1;
    uint32_t copies = 1;
    std::optional<TamperEdit> edit;
};

struct InjectSpec {
    uint32_t delay_ms = 0;
    InjectFactory factory;
};

struct Rule {
    Match match;
    enum class Primary { Pass, Drop, Delay, Tamper } primary = Primary::Pass;
    uint32_t delay_ms = 0;           // Primary::Delay
    std::optional<TamperEdit> edit;  // Primary::Tamper
    std::vector<ReplaySpec> replays;
    std::vector<InjectSpec> injects;
};

struct TimedInject {
    uint32_t at_ms = 0;
    InjectFactory factory;
};

// Ordered rules plus time-triggered injections; deterministic given the run
// seed. An empty script is the honest network.
struct AdversaryScript {
    std::vector<Rule> rules;
    std::vector<TimedInject> timed;
    actors::KeyRegistry granted_keys;

    bool empty() const { return rules.empty() && timed.empty(); }
};

struct RunOptions {
    int rsa_bits = 512;
    bool allow_insecure_keys = true;
    uint32_t delta_t_ms = 5000;
    bool run_hga = true;
    bool replay_cache_enabled = true;
    bool authorize_group = true;
    // Stranded actors under an empty script raise DeadlockError. Tests that
    // deliberately mis-provision a run switch this off.
    bool deadlock_check = true;
    LatencyModel latency;
};

struct TranscriptEntry {
    uint64_t time_ms = 0;
    std::string action;  // send deliver drop delay tamper replay inject timer reject terminate info
    std::string actor;
    std::string detail;
    Bytes frame;  // present for entries that put bytes on the wire
    uint64_t paper_bits = 0;
    uint64_t wire_bits = 0;
};

struct ActorReport {
    std::string role;
    std::string outcome;
    std::string state;
    std::string reason;
    crypto::OpCounter hgaka_ops;
    crypto::OpCounter hga_ops;
    std::optional<crypto::SymKey> session_key;
};

struct RunTranscript {
    int nc = 0;
    bool ran_hga = true;
    std::vector<TranscriptEntry> entries;
    std::map<uint32_t, ActorReport> reports;  // keyed by entity id
    std::vector<Bytes> secrets;               // all secret values held by actors
    std::vector<crypto::Nonce> generated_nonces;

    // One line per frame placed on the wire: "<send-time> <hex>".
    std::string dump() const;
    // Full deterministic run report: every event plus final actor states.
    std::string full_report() const;

    costmodel::MeasuredRun measured() const;
    bool honest_complete() const;
    bool session_keys_agree() const;
    size_t count(const std::string& action, const std::string& detail_substr = "",
                 const std::string& actor_substr = "") const;
    std::vector<BytesView> observed_frames() const;
    // True when no secret byte string appears verbatim in any wire frame.
    bool secrets_stay_off_wire() const;
    const ActorReport& report_for(EntityId id) const { return reports.at(id.value); }
};

// Discrete-event execution to quiescence. Deterministic for fixed
// (config, registry, script, seed). Throws DeadlockError when an empty
// script strands a participating actor — a harness bug, not a protocol
// outcome.
RunTranscript run(const actors::GroupConfig& config, const actors::KeyRegistry& registry,
                  const AdversaryScript& script, uint64_t seed, const RunOptions& options = {});

// Registry derived from the seed, then run(); what the CLI and most tests use.
RunTranscript run_fresh(const actors::GroupConfig& config, const AdversaryScript& script,
                        uint64_t seed, const RunOptions& options = {});

// Standard simulated deployment: server id 1, target id 2, clients 100..,
// leader last.
actors::GroupConfig make_group(int nc);

// One canned adversary script per threat class, with the predicted outcome
// as a checkable predicate over the finished transcript.
struct Scenario {
    std::string name;
    std::string threat_class;
    std::string expected;
    std::function<AdversaryScript(const actors::GroupConfig&)> make_script;
    std::function<std::pair<bool, std::string>(const RunTranscript&)> check;
};

std::vector<Scenario> scenario_suite();

struct ScenarioResult {
    std::string name;
    std::string threat_class;
    std::string expected;
    std::string detail;
    int nc = 0;
    bool passed = false;
};

ScenarioResult run_scenario(const Scenario& scenario, int nc, uint64_t seed,
                            const RunOptions& options = {});

}  // namespace m2o::netsim
