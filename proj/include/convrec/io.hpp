#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "convrec/common.hpp"
#include "convrec/corpus.hpp"

namespace convrec::io {

using nlohmann::json;

inline constexpr int kFormatVersion = 1;

// Container layout: 8-byte magic, little-endian u64 header length, UTF-8 JSON
// header, then a little-endian payload described by the header.
inline constexpr char kModelMagic[8] = {'C', 'V', 'R', 'C', 'M', 'O', 'D', '1'};
inline constexpr char kSparseMagic[8] = {'C', 'V', 'R', 'C', 'S', 'P', 'M', '1'};

struct RawContainer {
    json header;
    std::vector<std::byte> payload;
};

void write_container(std::ostream& out, const char (&magic)[8], const json& header,
                     const std::vector<std::byte>& payload);
RawContainer read_container(std::istream& in, const char (&magic)[8]);

void append_f64(std::vector<std::byte>& buf, double v);
void append_i64(std::vector<std::byte>& buf, std::int64_t v);
double read_f64(const std::vector<std::byte>& buf, std::size_t offset);
std::int64_t read_i64(const std::vector<std::byte>& buf, std::size_t offset);

// Sparse (row, col, value) triplets of the non-zero entries, row-major order.
void write_sparse(const std::filesystem::path& path, const CountMatrix& m, const json& extra = {});
CountMatrix read_sparse(const std::filesystem::path& path);

void write_interactions(const std::filesystem::path& path, const InteractionSet& set);
InteractionSet read_interactions(const std::filesystem::path& path);

void write_string_list(const std::filesystem::path& path, const std::vector<std::string>& values);
std::vector<std::string> read_string_list(const std::filesystem::path& path);

// Writes bytes atomically (temp file + rename).
void write_file(const std::filesystem::path& path, const std::string& bytes);
std::string read_file(const std::filesystem::path& path);

// Git blob object id: SHA-1 over "blob <size>\0" followed by the content.
std::string git_blob_hash(const std::string& content);
std::string git_blob_hash_file(const std::filesystem::path& path);

}  // namespace convrec::io
