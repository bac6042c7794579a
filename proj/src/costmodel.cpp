#include "m2o/costmodel.hpp"

#include <cmath>
#include <fstream>
#include <ostream>
#include <sstream>

#include "m2o/wire.hpp"

namespace m2o::costmodel {

namespace {

uint64_t block128(uint64_t bits) {
    return wire::block_round_bits(bits, 128);
}

// The verification-token input is chunked into 2544-bit raw-RSA blocks;
// the tables book 2544 bits per block.
uint64_t veri_token_bits(uint64_t nc) {
    return wire::block_round_bits(128 * nc, 2544);
}

void require_nc(int nc, int floor, const char* what) {
    if (nc < floor) {
        throw DomainError(std::string(what) + ": nc must be >= " + std::to_string(floor));
    }
}

uint64_t sum_rows(const std::vector<RowCost>& rows) {
    uint64_t total = 0;
    for (const RowCost& r : rows) total += r.bits;
    return total;
}

}  // namespace

OpCounts& OpCounts::operator+=(const OpCounts& o) {
    se += o.se;
    ae += o.ae;
    ad += o.ad;
    h += o.h;
    hmac += o.hmac;
    kse += o.kse;
    ksd += o.ksd;
    return *this;
}

std::string describe(const OpCounts& c) {
    std::ostringstream os;
    os << "{se:" << c.se << " ae:" << c.ae << " ad:" << c.ad << " h:" << c.h
       << " hmac:" << c.hmac;
    if (c.kse || c.ksd) os << " kse:" << c.kse << " ksd:" << c.ksd;
    os << "}";
    return os.str();
}

CommCost comm_hgaka(int nc) {
    require_nc(nc, 2, "comm_hgaka");
    uint64_t n = static_cast<uint64_t>(nc);
    CommCost cost;
    cost.breakdown = {
        {"HGAKA-Msg1", block128(32 * n + 192)},
        {"HGAKA-Msg2", 256},
        {"HGAKA-Chain", 256 * n},
        {"HGAKA-Msg6", 512},
        {"HGAKA-Msg7", 256 * (n - 1) + 768 + block128(veri_token_bits(n))},
        {"HGAKA-OrDist", 256 * (n - 1)},
    };
    cost.bits = sum_rows(cost.breakdown);
    return cost;
}

CommCost comm_hga(int nc) {
    require_nc(nc, 2, "comm_hga");
    uint64_t n = static_cast<uint64_t>(nc);
    CommCost cost;
    cost.breakdown = {
        {"PreHGA-Msg", 2544 * (n - 1)},
        {"HGA-Msg1", block128(32 * n + 192) + 2544 * n + block128(veri_token_bits(n)) + 384},
        {"HGA-Msg2", 256 * (n - 1) + 128},
        {"HGA-SkDist", 256 * (n - 1)},
    };
    cost.bits = sum_rows(cost.breakdown);
    return cost;
}

CommCost comm_kerberos(int nc) {
    require_nc(nc, 1, "comm_kerberos");
    CommCost cost;
    cost.breakdown = {{"Kerberos", 6080 * static_cast<uint64_t>(nc)}};
    cost.bits = cost.breakdown[0].bits;
    return cost;
}

CompCost comp_hgaka(int nc) {
    require_nc(nc, 2, "comp_hgaka");
    uint64_t n = static_cast<uint64_t>(nc);
    CompCost cost;
    cost.leader = {.se = 4, .hmac = 1};
    cost.non_leader = {.se = n - 1, .hmac = n - 1};
    cost.server = {.se = 5 + n, .ae = 1, .h = 1, .hmac = n};
    cost.total = cost.leader;
    cost.total += cost.non_leader;
    cost.total += cost.server;
    return cost;
}

CompCost comp_hga(int nc) {
    require_nc(nc, 2, "comp_hga");
    uint64_t n = static_cast<uint64_t>(nc);
    CompCost cost;
    cost.leader = {.se = 2, .ae = 1};
    cost.non_leader = {.se = n - 1, .ae = n - 1};
    cost.server = {.se = 3 + n, .ae = 1, .ad = 1, .h = 1};
    cost.total = cost.leader;
    cost.total += cost.non_leader;
    cost.total += cost.server;
    return cost;
}

CompCost comp_kerberos(int nc) {
    require_nc(nc, 1, "comp_kerberos");
    uint64_t n = static_cast<uint64_t>(nc);
    CompCost cost;
    // (2 KSE + 1 KSD) + 2*(5 KSE + 6 KSD) per client.
    cost.total = {.kse = 12 * n, .ksd = 13 * n};
    return cost;
}

uint64_t hgaka_message_count(int nc) {
    require_nc(nc, 2, "hgaka_message_count");
    return 3 + 2 * static_cast<uint64_t>(nc);
}

uint64_t hga_message_count(int nc) {
    require_nc(nc, 2, "hga_message_count");
    return 2 * static_cast<uint64_t>(nc);
}

const std::vector<std::string>& TimingModel::kinds() {
    static const std::vector<std::string> k = {"se", "ae", "ad", "h", "hmac", "kse", "ksd"};
    return k;
}

TimingModel TimingModel::paper_2019_laptop() {
    // Solves the published regression lines exactly:
    //   PCC_HGAKA(nc) = 0.096*nc + 2.248, PCC_HGA(nc) = 2.131*nc + 18.636,
    //   PCC_Kerberos(nc) = 1.7*nc.
    TimingModel t;
    t.unit_ms = {{"se", 0.015}, {"ae", 2.101}, {"ad", 16.448}, {"h", 0.027},
                 {"hmac", 0.033}, {"kse", 0.068}, {"ksd", 0.068}};
    return t;
}

TimingModel TimingModel::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("TimingModel: cannot open " + path);
    TimingModel t;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        size_t eq = line.find('=');
        if (eq == std::string::npos) continue;
        std::string key = line.substr(0, eq);
        double value = std::stod(line.substr(eq + 1));
        if (key.rfind("t_", 0) == 0 && key.size() > 5 && key.ends_with("_ms")) {
            t.unit_ms[key.substr(2, key.size() - 5)] = value;
        } else if (key.rfind("sem_", 0) == 0 && key.ends_with("_ms")) {
            t.sem_ms[key.substr(4, key.size() - 7)] = value;
        }
    }
    for (const auto& [kind, v] : t.unit_ms) {
        if (v <= 0) throw std::runtime_error("TimingModel: non-positive unit cost for " + kind);
    }
    return t;
}

void TimingModel::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("TimingModel: cannot write " + path);
    out << "# unit costs in milliseconds per operation\n";
    for (const std::string& kind : kinds()) {
        auto it = unit_ms.find(kind);
        if (it != unit_ms.end()) out << "t_" << kind << "_ms=" << it->second << "\n";
        auto sem = sem_ms.find(kind);
        if (sem != sem_ms.end()) out << "sem_" << kind << "_ms=" << sem->second << "\n";
    }
}

double pcc_ms(const OpCounts& counts, const TimingModel& timing) {
    struct Term {
        const char* kind;
        uint64_t count;
    };
    const Term terms[] = {{"se", counts.se},   {"ae", counts.ae},   {"ad", counts.ad},
                          {"h", counts.h},     {"hmac", counts.hmac}, {"kse", counts.kse},
                          {"ksd", counts.ksd}};
    double total = 0;
    for (const Term& t : terms) {
        if (t.count == 0) continue;
        auto it = timing.unit_ms.find(t.kind);
        if (it == timing.unit_ms.end() || it->second <= 0) {
            throw MissingUnitCost(std::string("pcc_ms: no unit cost for ") + t.kind);
        }
        total += static_cast<double>(t.count) * it->second;
    }
    return total;
}

WorkFactor work_factor(Protocol protocol, int nc) {
    if (protocol == Protocol::HGAKA) {
        require_nc(nc, 2, "work_factor(HGAKA)");
        return WorkFactor{128.0 + std::log2(static_cast<double>(nc))};
    }
    require_nc(nc, 1, "work_factor(HGA)");
    return WorkFactor{129.0};  // two 128-bit keys: 2^128 + 2^128
}

namespace {

void compare_counts(std::vector<std::string>& out, const std::string& what,
                    const OpCounts& measured, const OpCounts& expected) {
    if (!(measured == expected)) {
        out.push_back(what + ": measured " + describe(measured) + " expected " +
                      describe(expected));
    }
}

}  // namespace

ReconcileReport reconcile(const MeasuredRun& run, int nc) {
    ReconcileReport report;
    auto& d = report.discrepancies;
    if (run.nc != nc) {
        d.push_back("nc mismatch: run at " + std::to_string(run.nc) + ", asked to reconcile " +
                    std::to_string(nc));
        return report;
    }
    CommCost hgaka = comm_hgaka(nc);
    CommCost hga = comm_hga(nc);
    if (run.hgaka_payload_bits != hgaka.bits) {
        d.push_back("HGAKA payload bits: measured " + std::to_string(run.hgaka_payload_bits) +
                    " expected " + std::to_string(hgaka.bits));
    }
    if (run.hga_payload_bits != hga.bits) {
        d.push_back("HGA payload bits: measured " + std::to_string(run.hga_payload_bits) +
                    " expected " + std::to_string(hga.bits));
    }
    for (const CommCost* cost : {&hgaka, &hga}) {
        for (const RowCost& row : cost->breakdown) {
            auto it = run.row_bits.find(row.row);
            uint64_t measured = (it == run.row_bits.end()) ? 0 : it->second;
            if (measured != row.bits) {
                d.push_back(row.row + " bits: measured " + std::to_string(measured) +
                            " expected " + std::to_string(row.bits));
            }
        }
    }
    if (run.hgaka_messages != hgaka_message_count(nc)) {
        d.push_back("HGAKA message count: measured " + std::to_string(run.hgaka_messages) +
                    " expected " + std::to_string(hgaka_message_count(nc)));
    }
    if (run.hga_messages != hga_message_count(nc)) {
        d.push_back("HGA message count: measured " + std::to_string(run.hga_messages) +
                    " expected " + std::to_string(hga_message_count(nc)));
    }
    CompCost chgaka = comp_hgaka(nc);
    CompCost chga = comp_hga(nc);
    compare_counts(d, "HGAKA ops total", run.hgaka_ops.total, chgaka.total);
    compare_counts(d, "HGAKA ops leader", run.hgaka_ops.leader, chgaka.leader);
    compare_counts(d, "HGAKA ops non-leader", run.hgaka_ops.non_leader, chgaka.non_leader);
    compare_counts(d, "HGAKA ops server", run.hgaka_ops.server, chgaka.server);
    compare_counts(d, "HGA ops total", run.hga_ops.total, chga.total);
    compare_counts(d, "HGA ops leader", run.hga_ops.leader, chga.leader);
    compare_counts(d, "HGA ops non-leader", run.hga_ops.non_leader, chga.non_leader);
    compare_counts(d, "HGA ops target", run.hga_ops.server, chga.server);
    return report;
}

void write_cost_csv(std::ostream& out, int nc_from, int nc_to, const TimingModel& timing) {
    if (nc_from < 2 || nc_to < nc_from) {
        throw DomainError("write_cost_csv: need 2 <= nc_from <= nc_to");
    }
    out << "nc,comm_hgaka_bits,comm_hga_bits,comm_m2o_total,comm_kerberos,"
           "pcc_hgaka_ms,pcc_hga_ms,pcc_kerberos_ms\n";
    for (int nc = nc_from; nc <= nc_to; nc++) {
        uint64_t a = comm_hgaka(nc).bits;
        uint64_t b = comm_hga(nc).bits;
        out << nc << "," << a << "," << b << "," << (a + b) << "," << comm_kerberos(nc).bits
            << "," << pcc_ms(comp_hgaka(nc).total, timing) << ","
            << pcc_ms(comp_hga(nc).total, timing) << ","
            << pcc_ms(comp_kerberos(nc).total, timing) << "\n";
    }
}

}  // namespace m2o::costmodel
