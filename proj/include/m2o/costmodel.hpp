#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace m2o::costmodel {

class DomainError : public std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};
class MissingUnitCost : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct RowCost {
    std::string row;  // message/tag label
    uint64_t bits = 0;
};

// Exact communication bits for one protocol execution, itemized per message
// row the way the cost tables present it.
struct CommCost {
    uint64_t bits = 0;
    std::vector<RowCost> breakdown;
};

struct OpCounts {
    uint64_t se = 0;
    uint64_t ae = 0;
    uint64_t ad = 0;
    uint64_t h = 0;
    uint64_t hmac = 0;
    uint64_t kse = 0;  // Kerberos symmetric encrypt
    uint64_t ksd = 0;  // Kerberos symmetric decrypt

    OpCounts& operator+=(const OpCounts& o);
    bool operator==(const OpCounts&) const = default;
};

std::string describe(const OpCounts& c);

// Per-execution crypto-operation counts split by role. `server` is the
// authentication server for HGAKA and the target device for HGA.
struct CompCost {
    OpCounts total;
    OpCounts leader;
    OpCounts non_leader;  // all non-leader clients combined
    OpCounts server;
};

CommCost comm_hgaka(int nc);     // nc >= 2
CommCost comm_hga(int nc);       // nc >= 2
CommCost comm_kerberos(int nc);  // nc >= 1

CompCost comp_hgaka(int nc);     // nc >= 2
CompCost comp_hga(int nc);       // nc >= 2
CompCost comp_kerberos(int nc);  // nc >= 1

// Expected message counts for one honest execution.
uint64_t hgaka_message_count(int nc);  // 3 + 2*NC
uint64_t hga_message_count(int nc);    // 2*NC, pre-protocol messages included

// Unit costs in milliseconds per operation kind. Missing entries surface as
// MissingUnitCost only when a nonzero count needs them.
struct TimingModel {
    std::map<std::string, double> unit_ms;  // keys: se ae ad h hmac kse ksd
    std::map<std::string, double> sem_ms;   // optional, from calibration

    static const std::vector<std::string>& kinds();
    // Back-fitted to the published PCC regression lines; machine-specific.
    static TimingModel paper_2019_laptop();
    static TimingModel load(const std::string& path);
    void save(const std::string& path) const;
};

double pcc_ms(const OpCounts& counts, const TimingModel& timing);

enum class Protocol { HGAKA, HGA };

struct WorkFactor {
    double log2_ops = 0;
};

WorkFactor work_factor(Protocol protocol, int nc);

// Measured side of the formula/measurement reconciliation, produced from a
// run transcript.
struct MeasuredRun {
    int nc = 0;
    uint64_t hgaka_payload_bits = 0;
    uint64_t hga_payload_bits = 0;
    std::map<std::string, uint64_t> row_bits;  // per message row
    uint64_t hgaka_messages = 0;
    uint64_t hga_messages = 0;
    CompCost hgaka_ops;
    CompCost hga_ops;
};

struct ReconcileReport {
    std::vector<std::string> discrepancies;
    bool ok() const { return discrepancies.empty(); }
};

// Compares measured totals, per-row bits, and per-role operation counts with
// the closed-form costs at the same NC. Discrepancies are report content,
// not errors.
ReconcileReport reconcile(const MeasuredRun& run, int nc);

// CSV columns: nc, comm_hgaka_bits, comm_hga_bits, comm_m2o_total,
// comm_kerberos, pcc_hgaka_ms, pcc_hga_ms, pcc_kerberos_ms.
void write_cost_csv(std::ostream& out, int nc_from, int nc_to, const TimingModel& timing);

}  // namespace m2o::costmodel
