// Command-line front end: protocol runs over the simulated network,
// adversarial scenario sweeps, cost-table generation, and timing calibration.

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <numeric>
#include <optional>
#include <random>

#include "m2o/costmodel.hpp"
#include "m2o/netsim.hpp"

namespace {

using namespace m2o;

constexpr int kExitOk = 0;
constexpr int kExitMismatch = 1;
constexpr int kExitUsage = 2;

struct KeySizeOption {
    std::string name = "full-3072";

    int bits() const {
        if (name == "test-64") return 64;
        if (name == "test-512") return 512;
        return 3072;
    }
    bool insecure() const { return name != "full-3072"; }
};

uint64_t resolve_seed(std::optional<uint64_t> flag_seed) {
    if (flag_seed) return *flag_seed;
    if (const char* env = std::getenv("M2O_SEED")) {
        return std::strtoull(env, nullptr, 10);
    }
    std::random_device rd;
    uint64_t seed = (static_cast<uint64_t>(rd()) << 32) | rd();
    std::cerr << "no seed given; using entropy seed " << seed << "\n";
    return seed;
}

std::optional<std::pair<int, int>> parse_range(const std::string& text) {
    size_t dots = text.find("..");
    try {
        if (dots == std::string::npos) {
            int v = std::stoi(text);
            return std::make_pair(v, v);
        }
        int lo = std::stoi(text.substr(0, dots));
        int hi = std::stoi(text.substr(dots + 2));
        if (lo > hi) return std::nullopt;
        return std::make_pair(lo, hi);
    } catch (const std::exception&) {
        return std::nullopt;
    }
}

costmodel::TimingModel resolve_timing(const std::string& preset) {
    if (preset == "paper") return costmodel::TimingModel::paper_2019_laptop();
    if (!preset.empty()) return costmodel::TimingModel::load(preset);
    std::ifstream probe("m2o-timing.preset");
    if (probe.good()) return costmodel::TimingModel::load("m2o-timing.preset");
    std::cerr << "no local preset found (run `m2o calibrate`); "
                 "falling back to the paper preset\n";
    return costmodel::TimingModel::paper_2019_laptop();
}

int cmd_run(int nc, uint64_t seed, uint32_t delta_t, const KeySizeOption& key_size,
            const std::string& scenario, const std::string& out_path, bool disable_replay_cache) {
    if (nc < 2) {
        std::cerr << "error: group protocols need at least 2 clients (got " << nc << ")\n";
        return kExitUsage;
    }
    if (key_size.bits() < 200) {
        std::cerr << "error: key size " << key_size.name
                  << " cannot carry 128-bit authorization tokens; use test-512 or full-3072\n";
        return kExitUsage;
    }
    netsim::RunOptions options;
    options.rsa_bits = key_size.bits();
    options.allow_insecure_keys = key_size.insecure();
    options.delta_t_ms = delta_t;
    options.replay_cache_enabled = !disable_replay_cache;

    auto write_dump = [&](const netsim::RunTranscript& t) {
        if (out_path.empty()) {
            std::cout << t.dump();
            return true;
        }
        std::ofstream out(out_path);
        if (!out) {
            std::cerr << "error: cannot write " << out_path << "\n";
            return false;
        }
        out << t.dump();
        return true;
    };

    if (scenario == "honest") {
        netsim::RunTranscript t = netsim::run_fresh(netsim::make_group(nc), {}, seed, options);
        if (!write_dump(t)) return kExitUsage;
        costmodel::ReconcileReport report = costmodel::reconcile(t.measured(), nc);
        std::cout << "outcome: " << (t.honest_complete() ? "completed" : "incomplete")
                  << ", session keys " << (t.session_keys_agree() ? "agree" : "DISAGREE") << "\n";
        if (report.ok()) {
            std::cout << "reconciliation: formulas and measurements agree at nc=" << nc << "\n";
        } else {
            std::cout << "reconciliation: " << report.discrepancies.size() << " discrepancies\n";
            for (const std::string& d : report.discrepancies) std::cout << "  " << d << "\n";
        }
        bool ok = t.honest_complete() && t.session_keys_agree() && report.ok();
        return ok ? kExitOk : kExitMismatch;
    }

    for (const netsim::Scenario& s : netsim::scenario_suite()) {
        if (s.name != scenario) continue;
        netsim::ScenarioResult result = netsim::run_scenario(s, nc, seed, options);
        netsim::RunTranscript t = netsim::run_fresh(
            netsim::make_group(nc), s.make_script(netsim::make_group(nc)), seed, options);
        if (!write_dump(t)) return kExitUsage;
        std::cout << "scenario " << result.name << " [" << result.threat_class
                  << "]: " << (result.passed ? "as expected" : "MISMATCH") << " - "
                  << result.detail << "\n";
        return result.passed ? kExitOk : kExitMismatch;
    }
    std::cerr << "error: unknown scenario '" << scenario << "'\n";
    return kExitUsage;
}

int cmd_costs(const std::string& range_text, const std::string& preset,
              const std::string& out_path) {
    auto range = parse_range(range_text);
    if (!range || range->first < 2) {
        std::cerr << "error: bad range '" << range_text << "' (expected A..B with A >= 2)\n";
        return kExitUsage;
    }
    costmodel::TimingModel timing;
    try {
        timing = resolve_timing(preset);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    }
    if (out_path.empty()) {
        costmodel::write_cost_csv(std::cout, range->first, range->second, timing);
        return kExitOk;
    }
    std::ofstream out(out_path);
    if (!out) {
        std::cerr << "error: cannot write " << out_path << "\n";
        return kExitUsage;
    }
    costmodel::write_cost_csv(out, range->first, range->second, timing);
    return kExitOk;
}

// Per-primitive microbenchmark. Fast operations run in batches so each
// sample stays well above the clock resolution.
struct BenchStat {
    double mean_ms = 0;
    double sem_ms = 0;
};

template <typename F>
BenchStat bench(F&& op, uint64_t iterations) {
    using clock = std::chrono::steady_clock;
    const uint64_t batch = 32;
    for (uint64_t i = 0; i < batch; i++) op();  // warm caches and clocks
    std::vector<double> samples;
    uint64_t done = 0;
    while (done < iterations) {
        uint64_t n = std::min(batch, iterations - done);
        auto start = clock::now();
        for (uint64_t i = 0; i < n; i++) op();
        auto stop = clock::now();
        double ms = std::chrono::duration<double, std::milli>(stop - start).count();
        samples.push_back(ms / static_cast<double>(n));
        done += n;
    }
    BenchStat stat;
    stat.mean_ms = std::accumulate(samples.begin(), samples.end(), 0.0) /
                   static_cast<double>(samples.size());
    double var = 0;
    for (double s : samples) var += (s - stat.mean_ms) * (s - stat.mean_ms);
    var /= static_cast<double>(samples.size());
    stat.sem_ms = std::sqrt(var) / std::sqrt(static_cast<double>(samples.size()));
    return stat;
}

int cmd_calibrate(uint64_t iterations, const std::string& out_path) {
    if (iterations < 100) {
        std::cerr << "error: need at least 100 iterations (got " << iterations << ")\n";
        return kExitUsage;
    }
    using clock = std::chrono::steady_clock;
    if (clock::period::den < 1000000) {
        std::cerr << "error: steady_clock resolution too coarse for calibration\n";
        return kExitMismatch;
    }

    std::cerr << "calibrating over " << iterations << " iterations per primitive...\n";
    DeterministicRng rng(0x5eed);
    crypto::OpCounter ops;

    // spin for ~100ms so frequency scaling settles before any sample
    {
        auto until = clock::now() + std::chrono::milliseconds(100);
        volatile uint64_t sink = 0;
        while (clock::now() < until) {
            for (int i = 0; i < 1000; i++) sink += static_cast<uint64_t>(i) * 2654435761u;
        }
    }
    crypto::SymKey key = crypto::SymKey::random(rng);
    Bytes msg32 = rng.bytes(32);
    Bytes msg128 = rng.bytes(128);
    Bytes msg416 = rng.bytes(416);
    Bytes ct128 = crypto::sym_encrypt(ops, key, msg128);

    std::cerr << "generating a 3072-bit keypair...\n";
    crypto::RsaKeyPair kp = crypto::generate_rsa_keypair(rng, 3072);
    mpz_class m = crypto::mpz_from_bytes(rng.bytes(318));
    mpz_class c = crypto::rsa_raw_encrypt(ops, kp.pub, m);

    costmodel::TimingModel model;
    bool timer_ok = true;
    auto record = [&](const std::string& kind, BenchStat stat) {
        if (stat.mean_ms <= 0) {
            std::cerr << "error: timer returned a non-positive duration for " << kind << "\n";
            timer_ok = false;
            return;
        }
        model.unit_ms[kind] = stat.mean_ms;
        model.sem_ms[kind] = stat.sem_ms;
        std::cerr << "  t_" << kind << " = " << stat.mean_ms << " ms (sem " << stat.sem_ms
                  << ")\n";
    };

    record("se", bench([&] { crypto::sym_encrypt(ops, key, msg32); }, iterations));
    record("ae", bench([&] { crypto::rsa_raw_encrypt(ops, kp.pub, m); }, iterations));
    record("ad", bench([&] { crypto::rsa_raw_decrypt(ops, kp.priv, c); }, iterations));
    record("h", bench([&] { crypto::hash(ops, msg416); }, iterations));
    record("hmac", bench([&] { crypto::hmac(ops, key, msg32); }, iterations));
    record("kse", bench([&] { crypto::sym_encrypt(ops, key, msg128); }, iterations));
    record("ksd", bench([&] { crypto::sym_decrypt(ops, key, ct128); }, iterations));
    if (!timer_ok) return kExitMismatch;

    std::string path = out_path.empty() ? "m2o-timing.preset" : out_path;
    model.save(path);
    std::cout << "wrote " << path << "\n";
    return kExitOk;
}

int cmd_scenarios(uint64_t seed, const KeySizeOption& key_size, const std::string& out_path,
                  bool disable_replay_cache) {
    netsim::RunOptions options;
    options.rsa_bits = key_size.bits() < 200 ? 512 : key_size.bits();
    options.allow_insecure_keys = true;
    options.replay_cache_enabled = !disable_replay_cache;

    std::vector<netsim::ScenarioResult> results;
    bool all_passed = true;
    for (int nc : {2, 3, 10}) {
        for (const netsim::Scenario& s : netsim::scenario_suite()) {
            netsim::ScenarioResult r = netsim::run_scenario(s, nc, seed + nc, options);
            all_passed = all_passed && r.passed;
            results.push_back(std::move(r));
        }
    }

    std::cout << "scenario                threat-class       nc  result  detail\n";
    for (const netsim::ScenarioResult& r : results) {
        std::printf("%-23s %-18s %-3d %-7s %s\n", r.name.c_str(), r.threat_class.c_str(), r.nc,
                    r.passed ? "PASS" : "FAIL", r.detail.c_str());
    }
    if (!out_path.empty()) {
        std::ofstream out(out_path);
        if (!out) {
            std::cerr << "error: cannot write " << out_path << "\n";
            return kExitUsage;
        }
        out << "scenario,threat_class,nc,result,detail\n";
        for (const netsim::ScenarioResult& r : results) {
            std::string detail = r.detail;
            for (char& ch : detail) {
                if (ch == ',') ch = ';';
            }
            out << r.name << "," << r.threat_class << "," << r.nc << ","
                << (r.passed ? "PASS" : "FAIL") << "," << detail << "\n";
        }
    }
    return all_passed ? kExitOk : kExitMismatch;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"M2O hybrid group-authentication protocol simulator"};
    app.require_subcommand(1);
    app.set_config("--config", "", "read options from a key=value file");

    std::optional<uint64_t> seed;
    KeySizeOption key_size;
    uint32_t delta_t = 5000;
    bool disable_replay_cache = false;
    std::string out_path;

    app.add_option("--seed", seed, "run seed (M2O_SEED env is the fallback)");
    app.add_option("--key-size", key_size.name, "RSA size: test-64, test-512, full-3072")
        ->check(CLI::IsMember({"test-64", "test-512", "full-3072"}))
        ->capture_default_str();
    app.add_option("--delta-t", delta_t, "freshness window in logical ms")
        ->capture_default_str();
    app.add_option("--out", out_path, "output file (transcript dump / CSV / preset)");
    app.add_flag("--disable-replay-cache", disable_replay_cache,
                 "test hook: drop duplicate detection")
        ->group("");  // hidden

    int nc = 3;
    std::string scenario = "honest";
    CLI::App* run = app.add_subcommand("run", "execute one protocol run");
    run->fallthrough();
    run->add_option("--nc", nc, "number of client devices")->capture_default_str();
    run->add_option("--scenario", scenario, "'honest' or a scenario name")
        ->capture_default_str();

    std::string range_text = "2..50";
    std::string preset;
    CLI::App* costs = app.add_subcommand("costs", "emit the analytic cost table as CSV");
    costs->fallthrough();
    costs->add_option("--range", range_text, "group sizes, e.g. 5..400 or a single value")
        ->capture_default_str();
    costs->add_option("--timing-preset", preset, "'paper' or a preset file path");

    uint64_t iterations = 7000;
    CLI::App* calibrate =
        app.add_subcommand("calibrate", "microbenchmark the primitives into a timing preset");
    calibrate->fallthrough();
    calibrate->add_option("--iterations", iterations, "samples per primitive")
        ->capture_default_str();

    CLI::App* scenarios =
        app.add_subcommand("scenarios", "run the adversarial suite across nc in {2, 3, 10}");
    scenarios->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (run->parsed()) {
            return cmd_run(nc, resolve_seed(seed), delta_t, key_size, scenario, out_path,
                           disable_replay_cache);
        }
        if (costs->parsed()) {
            return cmd_costs(range_text, preset, out_path);
        }
        if (calibrate->parsed()) {
            return cmd_calibrate(iterations, out_path);
        }
        if (scenarios->parsed()) {
            return cmd_scenarios(resolve_seed(seed), key_size, out_path, disable_replay_cache);
        }
    } catch (const costmodel::DomainError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitMismatch;
    }
    return kExitUsage;
}
