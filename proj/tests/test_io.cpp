#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "convrec/io.hpp"
#include "convrec/model.hpp"
#include "fixtures.hpp"

using namespace convrec;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    auto dir = fs::temp_directory_path() / ("convrec_io_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

}  // namespace

TEST_SUITE("io") {

TEST_CASE("container round trip keeps header and payload") {
    std::vector<std::byte> payload;
    io::append_f64(payload, 1.5);
    io::append_i64(payload, -7);
    std::stringstream s;
    io::write_container(s, io::kSparseMagic, {{"format_version", 1}, {"x", "y"}}, payload);
    auto raw = io::read_container(s, io::kSparseMagic);
    CHECK(raw.header["x"] == "y");
    CHECK(io::read_f64(raw.payload, 0) == 1.5);
    CHECK(io::read_i64(raw.payload, 8) == -7);
}

TEST_CASE("payload is little endian") {
    std::vector<std::byte> payload;
    io::append_i64(payload, 0x0102030405060708LL);
    CHECK(payload[0] == std::byte{0x08});
    CHECK(payload[7] == std::byte{0x01});
}

TEST_CASE("wrong magic and version are rejected") {
    std::stringstream s;
    io::write_container(s, io::kSparseMagic, {{"format_version", 1}}, {});
    CHECK_THROWS_AS(io::read_container(s, io::kModelMagic), Error);
    std::stringstream v;
    io::write_container(v, io::kSparseMagic, {{"format_version", 99}}, {});
    CHECK_THROWS_AS(io::read_container(v, io::kSparseMagic), Error);
}

TEST_CASE("sparse matrix round trip") {
    auto dir = scratch("sparse");
    CountMatrix m = CountMatrix::Zero(4, 5);
    m(0, 1) = 3;
    m(3, 4) = 1;
    m(2, 0) = 12;
    io::write_sparse(dir / "m.spm", m);
    CHECK(io::read_sparse(dir / "m.spm") == m);
}

TEST_CASE("interaction round trip") {
    auto dir = scratch("inter");
    auto set = fixture::random_interactions(6, 9, 3, 1);
    io::write_interactions(dir / "t.spm", set);
    auto back = io::read_interactions(dir / "t.spm");
    CHECK(back.n_users() == 6);
    CHECK(back.n_items() == 9);
    CHECK(back.pairs() == set.pairs());
}

TEST_CASE("git blob hashes match git") {
    CHECK(io::git_blob_hash("") == "e69de29bb2d1d6434b8b29ae775ad8c2e48c5391");
    CHECK(io::git_blob_hash("hello\n") == "ce013625030ba8dba906f756967f9e9ca394464a");
}

TEST_CASE("model container round trip is byte identical") {
    auto m = fixture::random_model(3, 5, 4, 3, 2);
    m.hyperparams = {{"lr", 0.1}};
    m.projection = Matrix::Constant(5, 3, 0.25);
    const auto bytes = serialize_model(m);
    auto back = deserialize_model(bytes);
    CHECK(back.user_base == m.user_base);
    CHECK(back.item == m.item);
    CHECK(back.encoder.weight == m.encoder.weight);
    CHECK(back.encoder.bias == m.encoder.bias);
    CHECK(back.head.w3 == m.head.w3);
    CHECK(back.projection == m.projection);
    CHECK(back.hyperparams == m.hyperparams);
    CHECK(serialize_model(back) == bytes);

    auto dir = scratch("model");
    save_model(dir / "m.bin", m);
    CHECK(io::read_file(dir / "m.bin") == bytes);
}

TEST_CASE("model header lists the declared fields") {
    auto m = fixture::random_model(2, 3, 2, 2, 1);
    std::istringstream in(serialize_model(m));
    auto raw = io::read_container(in, io::kModelMagic);
    for (const char* key : {"model_kind", "h", "n_users", "n_items", "n_aspects", "seed", "hyperparams", "arrays"}) {
        CHECK(raw.header.contains(key));
    }
    CHECK(raw.header["dtype"] == "float64");
}

TEST_CASE("inconsistent model is rejected") {
    auto m = fixture::random_model(2, 3, 2, 2, 1);
    m.encoder.weight = Matrix::Zero(2, 5);
    CHECK_THROWS_AS(m.check_consistent(), InvalidInput);
}

TEST_CASE("dataset directory round trip") {
    Dataset d;
    d.user_ids = {"a", "b"};
    d.item_ids = {"x", "y", "z"};
    d.train = InteractionSet(2, 3, {{0, 2}, {1}});
    d.valid = InteractionSet(2, 3, {{1}, {}});
    d.test = InteractionSet(2, 3, {{}, {0}});
    d.vocab = AspectVocabulary({"citrus", "dark roast"});
    d.matrices.user_freq = CountMatrix::Zero(2, 2);
    d.matrices.user_freq(0, 1) = 2;
    d.matrices.item_freq = CountMatrix::Zero(3, 2);
    d.matrices.item_freq(2, 0) = 3;
    d.matrices.item_presence = (d.matrices.item_freq.array() >= 1).cast<std::int64_t>();
    auto dir = scratch("dataset");
    save_dataset(dir, d, {{"subcommand", "test"}});
    auto back = load_dataset(dir);
    CHECK(back.user_ids == d.user_ids);
    CHECK(back.vocab.aspects() == d.vocab.aspects());
    CHECK(back.train.pairs() == d.train.pairs());
    CHECK(back.test.pairs() == d.test.pairs());
    CHECK(back.matrices.item_presence == d.matrices.item_presence);
    CHECK(back.matrices.user_freq == d.matrices.user_freq);
}

}  // TEST_SUITE
