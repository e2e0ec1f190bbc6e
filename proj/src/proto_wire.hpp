// SPDX-License-Identifier: Apache-2.0
//
// Minimal protobuf wire-format primitives, enough to read and write the
// feed-forward ONNX subset without a protoc dependency. Unknown fields are
// skipped on read.
#pragma once

#include <cstdint>
#include <cstring>
#include <string>
#include <string_view>
#include <vector>

#include "vnncomp/errors.hpp"

namespace vnncomp::protowire {

enum WireType : uint32_t { kVarint = 0, kFixed64 = 1, kLengthDelimited = 2, kFixed32 = 5 };

class Reader {
public:
    explicit Reader(std::string_view data) : data_(data) {}

    bool at_end() const { return pos_ >= data_.size(); }

    uint64_t read_varint() {
        uint64_t value = 0;
        int shift = 0;
        while (true) {
            if (pos_ >= data_.size())
                throw HarnessError(ErrorCode::MalformedModel, "truncated varint");
            uint8_t byte = static_cast<uint8_t>(data_[pos_++]);
            value |= static_cast<uint64_t>(byte & 0x7f) << shift;
            if (!(byte & 0x80)) return value;
            shift += 7;
            if (shift >= 64)
                throw HarnessError(ErrorCode::MalformedModel, "varint too long");
        }
    }

    // Returns field number; wire type via out-param. False at end of buffer.
    bool next_field(uint32_t& field, WireType& type) {
        if (at_end()) return false;
        uint64_t tag = read_varint();
        field = static_cast<uint32_t>(tag >> 3);
        type = static_cast<WireType>(tag & 0x7);
        return true;
    }

    uint32_t read_fixed32() {
        if (pos_ + 4 > data_.size())
            throw HarnessError(ErrorCode::MalformedModel, "truncated fixed32");
        uint32_t v;
        std::memcpy(&v, data_.data() + pos_, 4);
        pos_ += 4;
        return v;
    }

    uint64_t read_fixed64() {
        if (pos_ + 8 > data_.size())
            throw HarnessError(ErrorCode::MalformedModel, "truncated fixed64");
        uint64_t v;
        std::memcpy(&v, data_.data() + pos_, 8);
        pos_ += 8;
        return v;
    }

    float read_float() {
        uint32_t bits = read_fixed32();
        float v;
        std::memcpy(&v, &bits, 4);
        return v;
    }

    std::string_view read_bytes() {
        uint64_t len = read_varint();
        if (pos_ + len > data_.size())
            throw HarnessError(ErrorCode::MalformedModel, "truncated length-delimited field");
        std::string_view v = data_.substr(pos_, len);
        pos_ += len;
        return v;
    }

    void skip(WireType type) {
        switch (type) {
            case kVarint: read_varint(); break;
            case kFixed64: read_fixed64(); break;
            case kLengthDelimited: read_bytes(); break;
            case kFixed32: read_fixed32(); break;
            default:
                throw HarnessError(ErrorCode::MalformedModel, "unsupported wire type");
        }
    }

private:
    std::string_view data_;
    std::size_t pos_ = 0;
};

// Nested messages are encoded bottom-up into owned byte strings.
class Writer {
public:
    void varint_field(uint32_t field, uint64_t value) {
        tag(field, kVarint);
        varint(value);
    }

    void int64_field(uint32_t field, int64_t value) {
        varint_field(field, static_cast<uint64_t>(value));
    }

    void float_field(uint32_t field, float value) {
        tag(field, kFixed32);
        uint32_t bits;
        std::memcpy(&bits, &value, 4);
        fixed32(bits);
    }

    void bytes_field(uint32_t field, std::string_view bytes) {
        tag(field, kLengthDelimited);
        varint(bytes.size());
        out_.append(bytes);
    }

    void message_field(uint32_t field, const Writer& msg) { bytes_field(field, msg.out_); }

    // Packed repeated int64 (protobuf packs varints inside one length-delimited field).
    void packed_int64_field(uint32_t field, const std::vector<int64_t>& values) {
        Writer payload;
        for (int64_t v : values) payload.varint(static_cast<uint64_t>(v));
        bytes_field(field, payload.out_);
    }

    const std::string& bytes() const { return out_; }

private:
    std::string out_;

    void tag(uint32_t field, WireType type) { varint((static_cast<uint64_t>(field) << 3) | type); }

    void varint(uint64_t value) {
        while (value >= 0x80) {
            out_.push_back(static_cast<char>((value & 0x7f) | 0x80));
            value >>= 7;
        }
        out_.push_back(static_cast<char>(value));
    }

    void fixed32(uint32_t value) {
        char buf[4];
        std::memcpy(buf, &value, 4);
        out_.append(buf, 4);
    }
};

}  // namespace vnncomp::protowire
