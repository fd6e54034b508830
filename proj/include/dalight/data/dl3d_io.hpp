#pragma once

#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "dalight/data/case_record.hpp"

namespace dalight::data {

// DL3D container, version 1:
//   magic "DL3D", version byte 1,
//   little-endian u32 header [C, D, H, W, id_len],
//   id bytes,
//   image payload as little-endian IEEE-754 32-bit floats in C,D,H,W
//   row-major order,
//   label payload as unsigned bytes in D,H,W order.
inline constexpr char kDl3dMagic[4] = {'D', 'L', '3', 'D'};
inline constexpr uint8_t kDl3dVersion = 1;

namespace detail {

inline void put_u32(std::string& buf, uint32_t v) {
    buf.push_back(static_cast<char>(v & 0xFF));
    buf.push_back(static_cast<char>((v >> 8) & 0xFF));
    buf.push_back(static_cast<char>((v >> 16) & 0xFF));
    buf.push_back(static_cast<char>((v >> 24) & 0xFF));
}

inline uint32_t get_u32(const unsigned char* p) {
    return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
           (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
}

inline std::string read_all(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError(IoErrorKind::missing_file, "cannot open " + path);
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return bytes;
}

}  // namespace detail

inline std::string encode_case(const CaseRecord& rec) {
    const auto& s = rec.image.shape();
    if (s.rank() != 4) throw ShapeError("encode_case: image must be [C,D,H,W]");
    constexpr uint32_t limit = 0xFFFFFFFFu;
    for (int i = 0; i < 4; ++i) {
        if (static_cast<uint64_t>(s[i]) > limit) {
            throw IoError(IoErrorKind::dimension_overflow,
                          "case dimension exceeds the 32-bit header field: " + s.str());
        }
    }
    if (rec.case_id.size() > limit) {
        throw IoError(IoErrorKind::dimension_overflow, "case id too long");
    }
    if (static_cast<int64_t>(rec.labels.size()) != s[1] * s[2] * s[3]) {
        throw ShapeError("encode_case: label count does not match extents");
    }

    std::string buf;
    buf.reserve(21 + rec.case_id.size() + 4 * static_cast<size_t>(rec.image.size()) +
                rec.labels.size());
    buf.append(kDl3dMagic, 4);
    buf.push_back(static_cast<char>(kDl3dVersion));
    for (int i = 0; i < 4; ++i) detail::put_u32(buf, static_cast<uint32_t>(s[i]));
    detail::put_u32(buf, static_cast<uint32_t>(rec.case_id.size()));
    buf.append(rec.case_id);
    for (int64_t i = 0; i < rec.image.size(); ++i) {
        const uint32_t bits = std::bit_cast<uint32_t>(static_cast<float>(rec.image[i]));
        detail::put_u32(buf, bits);
    }
    buf.append(reinterpret_cast<const char*>(rec.labels.data()), rec.labels.size());
    return buf;
}

inline void write_case(const std::string& path, const CaseRecord& rec) {
    const std::string bytes = encode_case(rec);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError(IoErrorKind::write_failed, "cannot write " + path);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError(IoErrorKind::write_failed, "short write to " + path);
}

inline CaseRecord decode_case(const std::string& bytes, int num_buckets = 8) {
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
    if (bytes.size() < 25) {
        throw IoError(IoErrorKind::truncated, "file truncated: expected at least 25 header bytes, got " +
                                                  std::to_string(bytes.size()));
    }
    if (std::string_view(bytes.data(), 4) != std::string_view(kDl3dMagic, 4)) {
        throw IoError(IoErrorKind::bad_magic, "bad magic bytes; not a DL3D container");
    }
    if (p[4] != kDl3dVersion) {
        throw IoError(IoErrorKind::bad_version,
                      "unsupported DL3D version " + std::to_string(p[4]));
    }
    const uint32_t C = detail::get_u32(p + 5), D = detail::get_u32(p + 9);
    const uint32_t H = detail::get_u32(p + 13), W = detail::get_u32(p + 17);
    const uint32_t id_len = detail::get_u32(p + 21);
    if (C == 0 || D == 0 || H == 0 || W == 0) {
        throw IoError(IoErrorKind::dimension_overflow, "zero extent in DL3D header");
    }
    constexpr uint64_t sane = 1ull << 20;
    if (C > 64 || D > sane || H > sane || W > sane ||
        static_cast<uint64_t>(C) * D * H * W > (1ull << 34)) {
        throw IoError(IoErrorKind::dimension_overflow, "implausible DL3D extents");
    }
    const uint64_t voxels = static_cast<uint64_t>(D) * H * W;
    const uint64_t expected = 25ull + id_len + 4ull * C * voxels + voxels;
    if (bytes.size() != expected) {
        throw IoError(IoErrorKind::truncated, "file truncated: expected " +
                                                  std::to_string(expected) + " bytes, got " +
                                                  std::to_string(bytes.size()));
    }

    CaseRecord rec;
    rec.case_id.assign(bytes.data() + 25, id_len);
    rec.bucket = scanner_bucket(rec.case_id, num_buckets);
    rec.image = Tensor(Shape{static_cast<int64_t>(C), static_cast<int64_t>(D),
                             static_cast<int64_t>(H), static_cast<int64_t>(W)});
    const unsigned char* img = p + 25 + id_len;
    for (int64_t i = 0; i < rec.image.size(); ++i) {
        const uint32_t bits = detail::get_u32(img + 4 * i);
        rec.image[i] = static_cast<double>(std::bit_cast<float>(bits));
    }
    const unsigned char* lab = img + 4ull * C * voxels;
    rec.labels.assign(lab, lab + voxels);
    return rec;
}

inline CaseRecord read_case(const std::string& path, int num_buckets = 8) {
    return decode_case(detail::read_all(path), num_buckets);
}

}  // namespace dalight::data
