#include "m2o/wire.hpp"

#include <algorithm>
#include <limits>
#include <set>

namespace m2o::wire {

namespace {

constexpr size_t kHeaderBytes = 1 + 1 + 1 + 4 + 4 + 2;
constexpr size_t kItemPrefixBytes = 2 + 2;
constexpr uint32_t kSymBlockBits = 128;
constexpr uint32_t kRsaBlockBits = 2544;

bool valid_tag(uint8_t raw) {
    switch (static_cast<MsgTag>(raw)) {
        case MsgTag::HgakaMsg1:
        case MsgTag::HgakaMsg2:
        case MsgTag::HgakaChain:
        case MsgTag::HgakaMsg6:
        case MsgTag::HgakaMsg7:
        case MsgTag::HgakaOrDist:
        case MsgTag::PreHga:
        case MsgTag::HgaMsg1:
        case MsgTag::HgaMsg2:
        case MsgTag::HgaSkDist:
            return true;
    }
    return false;
}

// Figure-derived item-count bounds per tag; variable counts scale with NC.
void check_item_count(MsgTag tag, size_t count) {
    auto fail = [&] {
        throw MalformedMessage(std::string("bad item count for ") + tag_name(tag));
    };
    switch (tag) {
        case MsgTag::HgakaMsg1:
        case MsgTag::HgakaMsg2:
        case MsgTag::HgakaChain:
        case MsgTag::HgakaOrDist:
        case MsgTag::PreHga:
        case MsgTag::HgaSkDist:
            if (count != 1) fail();
            break;
        case MsgTag::HgakaMsg6:
            if (count != 2) fail();
            break;
        case MsgTag::HgakaMsg7:  // NC-1 client pkgs, leader pkg, target pkg, hash
            if (count < 4) fail();
            break;
        case MsgTag::HgaMsg1:  // session cipher, NC tokens, target pkg, hash
            if (count < 5) fail();
            break;
        case MsgTag::HgaMsg2:  // session echo, NC-1 client shares
            if (count < 2) fail();
            break;
    }
}

}  // namespace

bool tag_is_hgaka(MsgTag tag) {
    switch (tag) {
        case MsgTag::HgakaMsg1:
        case MsgTag::HgakaMsg2:
        case MsgTag::HgakaChain:
        case MsgTag::HgakaMsg6:
        case MsgTag::HgakaMsg7:
        case MsgTag::HgakaOrDist:
            return true;
        default:
            return false;
    }
}

bool tag_is_hga(MsgTag tag) {
    return !tag_is_hgaka(tag);
}

const char* tag_name(MsgTag tag) {
    switch (tag) {
        case MsgTag::HgakaMsg1: return "HGAKA-Msg1";
        case MsgTag::HgakaMsg2: return "HGAKA-Msg2";
        case MsgTag::HgakaChain: return "HGAKA-Chain";
        case MsgTag::HgakaMsg6: return "HGAKA-Msg6";
        case MsgTag::HgakaMsg7: return "HGAKA-Msg7";
        case MsgTag::HgakaOrDist: return "HGAKA-OrDist";
        case MsgTag::PreHga: return "PreHGA-Msg";
        case MsgTag::HgaMsg1: return "HGA-Msg1";
        case MsgTag::HgaMsg2: return "HGA-Msg2";
        case MsgTag::HgaSkDist: return "HGA-SkDist";
    }
    return "?";
}

WireItem sym_item(Bytes ciphertext, uint32_t plaintext_bits) {
    return WireItem{std::move(ciphertext),
                    static_cast<uint32_t>(block_round_bits(plaintext_bits, kSymBlockBits))};
}

WireItem rsa_token_item(Bytes token) {
    return WireItem{std::move(token), kRsaBlockBits};
}

WireItem raw_item(Bytes data) {
    uint32_t bits = static_cast<uint32_t>(data.size() * 8);
    return WireItem{std::move(data), bits};
}

Bytes serialize(const ProtocolMessage& msg) {
    Bytes out;
    out.reserve(kHeaderBytes + msg.items.size() * kItemPrefixBytes);
    out.push_back(static_cast<uint8_t>(msg.tag));
    out.push_back(static_cast<uint8_t>(msg.direction));
    out.push_back(msg.hop);
    put_u32(out, msg.sender.value);
    put_u32(out, msg.receiver.value);
    if (msg.items.size() > std::numeric_limits<uint16_t>::max()) {
        throw MalformedMessage("serialize: too many items");
    }
    put_u16(out, static_cast<uint16_t>(msg.items.size()));
    for (const WireItem& item : msg.items) {
        if (item.data.size() > std::numeric_limits<uint16_t>::max() ||
            item.logical_bits / 8 > std::numeric_limits<uint16_t>::max() ||
            item.logical_bits % 8 != 0) {
            throw MalformedMessage("serialize: item too large");
        }
        put_u16(out, static_cast<uint16_t>(item.data.size()));
        put_u16(out, static_cast<uint16_t>(item.logical_bits / 8));
        append(out, item.data);
    }
    return out;
}

ProtocolMessage parse(BytesView bytes) {
    if (bytes.size() < kHeaderBytes) throw MalformedMessage("parse: truncated header");
    if (!valid_tag(bytes[0])) throw MalformedMessage("parse: unknown tag");
    if (bytes[1] > 1) throw MalformedMessage("parse: bad direction");

    ProtocolMessage msg;
    msg.tag = static_cast<MsgTag>(bytes[0]);
    msg.direction = static_cast<Direction>(bytes[1]);
    msg.hop = bytes[2];
    msg.sender = EntityId{get_u32(bytes, 3)};
    msg.receiver = EntityId{get_u32(bytes, 7)};
    size_t count = get_u16(bytes, 11);
    check_item_count(msg.tag, count);

    size_t off = kHeaderBytes;
    msg.items.reserve(count);
    for (size_t i = 0; i < count; i++) {
        if (off + kItemPrefixBytes > bytes.size()) throw MalformedMessage("parse: truncated item");
        size_t len = get_u16(bytes, off);
        uint32_t logical = static_cast<uint32_t>(get_u16(bytes, off + 2)) * 8;
        off += kItemPrefixBytes;
        if (off + len > bytes.size()) throw MalformedMessage("parse: item overruns buffer");
        WireItem item;
        item.data.assign(bytes.begin() + off, bytes.begin() + off + len);
        item.logical_bits = logical;
        msg.items.push_back(std::move(item));
        off += len;
    }
    if (off != bytes.size()) throw MalformedMessage("parse: trailing bytes");
    return msg;
}

uint64_t payload_bits(const ProtocolMessage& msg) {
    uint64_t total = 0;
    for (const WireItem& item : msg.items) total += item.logical_bits;
    return total;
}

uint64_t wire_bits(const ProtocolMessage& msg) {
    uint64_t total = kHeaderBytes;
    for (const WireItem& item : msg.items) total += kItemPrefixBytes + item.data.size();
    return total * 8;
}

std::string dump_line(Timestamp send_time, BytesView frame) {
    return std::to_string(send_time.ms) + " " + to_hex(frame);
}

void validate_client_list(const ClientList& clients) {
    if (clients.size() < 2) throw MalformedMessage("client list: need at least 2 clients");
    std::set<uint32_t> seen;
    for (const EntityId& id : clients) {
        if (!seen.insert(id.value).second) {
            throw MalformedMessage("client list: duplicate id");
        }
    }
}

Bytes encode_client_list(const ClientList& clients) {
    Bytes out;
    out.reserve(clients.size() * 4);
    for (const EntityId& id : clients) put_u32(out, id.value);
    return out;
}

ClientList decode_client_list(BytesView data) {
    if (data.size() % 4 != 0) throw MalformedMessage("client list: length not a multiple of 4");
    ClientList out;
    out.reserve(data.size() / 4);
    for (size_t off = 0; off < data.size(); off += 4) {
        out.push_back(EntityId{get_u32(data, off)});
    }
    return out;
}

}  // namespace m2o::wire
