#include "convrec/io.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <openssl/evp.h>

namespace convrec::io {

namespace {

template <typename T>
void append_le(std::vector<std::byte>& buf, T value) {
    static_assert(sizeof(T) == 8);
    std::uint64_t bits = 0;
    std::memcpy(&bits, &value, 8);
    for (int k = 0; k < 8; ++k) {
        buf.push_back(static_cast<std::byte>((bits >> (8 * k)) & 0xffu));
    }
}

template <typename T>
T read_le(const std::vector<std::byte>& buf, std::size_t offset) {
    if (offset + 8 > buf.size()) throw Error("container payload truncated");
    std::uint64_t bits = 0;
    for (int k = 0; k < 8; ++k) {
        bits |= static_cast<std::uint64_t>(std::to_integer<unsigned>(buf[offset + k])) << (8 * k);
    }
    T value;
    std::memcpy(&value, &bits, 8);
    return value;
}

}  // namespace

void append_f64(std::vector<std::byte>& buf, double v) { append_le(buf, v); }
void append_i64(std::vector<std::byte>& buf, std::int64_t v) { append_le(buf, v); }
double read_f64(const std::vector<std::byte>& buf, std::size_t offset) { return read_le<double>(buf, offset); }
std::int64_t read_i64(const std::vector<std::byte>& buf, std::size_t offset) {
    return read_le<std::int64_t>(buf, offset);
}

void write_container(std::ostream& out, const char (&magic)[8], const json& header,
                     const std::vector<std::byte>& payload) {
    const std::string text = header.dump();
    std::vector<std::byte> len;
    append_le<std::uint64_t>(len, text.size());
    out.write(magic, 8);
    out.write(reinterpret_cast<const char*>(len.data()), 8);
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    out.write(reinterpret_cast<const char*>(payload.data()), static_cast<std::streamsize>(payload.size()));
    if (!out) throw Error("failed writing container");
}

RawContainer read_container(std::istream& in, const char (&magic)[8]) {
    char seen[8];
    if (!in.read(seen, 8) || std::memcmp(seen, magic, 8) != 0) {
        throw Error("not a " + std::string(magic, 8) + " container");
    }
    std::vector<std::byte> len(8);
    if (!in.read(reinterpret_cast<char*>(len.data()), 8)) throw Error("container header truncated");
    const auto header_len = read_le<std::uint64_t>(len, 0);
    std::string text(header_len, '\0');
    if (!in.read(text.data(), static_cast<std::streamsize>(header_len))) {
        throw Error("container header truncated");
    }
    RawContainer raw;
    raw.header = json::parse(text);
    if (raw.header.value("format_version", 0) != kFormatVersion) {
        throw Error("unsupported container format_version " + raw.header.value("format_version", json()).dump());
    }
    std::ostringstream rest;
    rest << in.rdbuf();
    const std::string bytes = rest.str();
    raw.payload.resize(bytes.size());
    std::memcpy(raw.payload.data(), bytes.data(), bytes.size());
    return raw;
}

void write_sparse(const std::filesystem::path& path, const CountMatrix& m, const json& extra) {
    std::vector<std::byte> payload;
    std::int64_t nnz = 0;
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            if (m(r, c) == 0) continue;
            append_i64(payload, r);
            append_i64(payload, c);
            append_i64(payload, m(r, c));
            ++nnz;
        }
    }
    json header = {{"format_version", kFormatVersion},
                   {"dims", {m.rows(), m.cols()}},
                   {"dtype", "int64"},
                   {"nnz", nnz}};
    if (!extra.is_null()) header["meta"] = extra;
    std::ostringstream out;
    write_container(out, kSparseMagic, header, payload);
    write_file(path, out.str());
}

CountMatrix read_sparse(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot read " + path.string());
    RawContainer raw = read_container(in, kSparseMagic);
    if (raw.header.at("dtype") != "int64") throw Error("unsupported sparse dtype");
    const auto rows = raw.header.at("dims").at(0).get<std::int64_t>();
    const auto cols = raw.header.at("dims").at(1).get<std::int64_t>();
    const auto nnz = raw.header.at("nnz").get<std::int64_t>();
    if (raw.payload.size() != static_cast<std::size_t>(nnz) * 24) throw Error("sparse payload size mismatch");
    CountMatrix m = CountMatrix::Zero(rows, cols);
    for (std::int64_t k = 0; k < nnz; ++k) {
        const auto r = read_i64(raw.payload, k * 24);
        const auto c = read_i64(raw.payload, k * 24 + 8);
        if (r < 0 || r >= rows || c < 0 || c >= cols) throw Error("sparse triplet out of range");
        m(r, c) = read_i64(raw.payload, k * 24 + 16);
    }
    return m;
}

void write_interactions(const std::filesystem::path& path, const InteractionSet& set) {
    std::vector<std::byte> payload;
    for (auto [u, i] : set.pairs()) {
        append_i64(payload, u);
        append_i64(payload, i);
        append_i64(payload, 1);
    }
    json header = {{"format_version", kFormatVersion},
                   {"dims", {set.n_users(), set.n_items()}},
                   {"dtype", "int64"},
                   {"nnz", set.size()}};
    std::ostringstream out;
    write_container(out, kSparseMagic, header, payload);
    write_file(path, out.str());
}

InteractionSet read_interactions(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot read " + path.string());
    RawContainer raw = read_container(in, kSparseMagic);
    const auto rows = raw.header.at("dims").at(0).get<int>();
    const auto cols = raw.header.at("dims").at(1).get<int>();
    const auto nnz = raw.header.at("nnz").get<std::int64_t>();
    if (raw.payload.size() != static_cast<std::size_t>(nnz) * 24) throw Error("sparse payload size mismatch");
    InteractionSet set(rows, cols);
    for (std::int64_t k = 0; k < nnz; ++k) {
        set.add(static_cast<int>(read_i64(raw.payload, k * 24)), static_cast<int>(read_i64(raw.payload, k * 24 + 8)));
    }
    return set;
}

void write_string_list(const std::filesystem::path& path, const std::vector<std::string>& values) {
    write_file(path, json(values).dump(1) + "\n");
}

std::vector<std::string> read_string_list(const std::filesystem::path& path) {
    return json::parse(read_file(path)).get<std::vector<std::string>>();
}

void write_file(const std::filesystem::path& path, const std::string& bytes) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot write " + tmp.string());
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw Error("failed writing " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string git_blob_hash(const std::string& content) {
    const std::string prefix = "blob " + std::to_string(content.size()) + '\0';
    std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
    unsigned int len = 0;
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    EVP_DigestInit_ex(ctx, EVP_sha1(), nullptr);
    EVP_DigestUpdate(ctx, prefix.data(), prefix.size());
    EVP_DigestUpdate(ctx, content.data(), content.size());
    EVP_DigestFinal_ex(ctx, digest.data(), &len);
    EVP_MD_CTX_free(ctx);
    std::ostringstream hex;
    for (unsigned int k = 0; k < len; ++k) {
        hex << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[k]);
    }
    return hex.str();
}

std::string git_blob_hash_file(const std::filesystem::path& path) { return git_blob_hash(read_file(path)); }

}  // namespace convrec::io
