#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "m2o/bytes.hpp"

namespace m2o::wire {

struct EntityId {
    uint32_t value = 0;
    auto operator<=>(const EntityId&) const = default;
};

struct Timestamp {
    uint32_t ms = 0;  // logical milliseconds
    auto operator<=>(const Timestamp&) const = default;
};

enum class Direction : uint8_t { Req = 0, Res = 1 };

// HGAKA Msg3/Msg4/Msg5 generalize to one chain tag with a hop index in the
// header; Msg8/Msg9 and HGA Msg3/Msg4 generalize to one per-recipient tag.
enum class MsgTag : uint8_t {
    HgakaMsg1 = 0x11,
    HgakaMsg2 = 0x12,
    HgakaChain = 0x13,
    HgakaMsg6 = 0x16,
    HgakaMsg7 = 0x17,
    HgakaOrDist = 0x18,
    PreHga = 0x20,
    HgaMsg1 = 0x21,
    HgaMsg2 = 0x22,
    HgaSkDist = 0x23,
};

bool tag_is_hgaka(MsgTag tag);
bool tag_is_hga(MsgTag tag);  // PreHGA counts inside the HGA message budget
const char* tag_name(MsgTag tag);

class MalformedMessage : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

// One itemized payload entry. `logical_bits` carries the cost-table length of
// the item (plaintext length block-rounded for ciphers, 2544 bits per RSA
// block), which the padded/real `data` cannot reproduce on its own; it rides
// the wire next to the byte length so parse(serialize(m)) == m holds.
struct WireItem {
    Bytes data;
    uint32_t logical_bits = 0;
    bool operator==(const WireItem&) const = default;
};

// Cipher item: logical length is the block-rounded plaintext length, the way
// the cost tables count symmetric items.
WireItem sym_item(Bytes ciphertext, uint32_t plaintext_bits);
// Single raw-RSA token: always booked at one 2544-bit input block.
WireItem rsa_token_item(Bytes token);
// Cleartext item (HM values, digests): logical = real.
WireItem raw_item(Bytes data);

struct ProtocolMessage {
    MsgTag tag = MsgTag::HgakaMsg1;
    Direction direction = Direction::Req;
    uint8_t hop = 0;  // chain leg number for HgakaChain, 0 elsewhere
    EntityId sender;
    EntityId receiver;
    std::vector<WireItem> items;

    bool operator==(const ProtocolMessage&) const = default;
};

Bytes serialize(const ProtocolMessage& msg);
ProtocolMessage parse(BytesView bytes);  // throws MalformedMessage

// Itemized payload length under the cost-table accounting (headers and
// prefixes excluded).
uint64_t payload_bits(const ProtocolMessage& msg);
// Real serialized frame length.
uint64_t wire_bits(const ProtocolMessage& msg);

// Transcript dump line: "<send-time-ms> <hex>".
std::string dump_line(Timestamp send_time, BytesView frame);

// Ordered client identities; index 0 is the deepest chain client, the last
// element is the group leader.
using ClientList = std::vector<EntityId>;

void validate_client_list(const ClientList& clients);  // throws MalformedMessage
Bytes encode_client_list(const ClientList& clients);
ClientList decode_client_list(BytesView data);

inline uint64_t block_round_bits(uint64_t bits, uint64_t block) {
    return block * ((bits + block - 1) / block);
}

}  // namespace m2o::wire
