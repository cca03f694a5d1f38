#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "convrec/io.hpp"
#include "convrec/manifest.hpp"

using namespace convrec;
namespace fs = std::filesystem;

TEST_SUITE("manifest") {

TEST_CASE("file inputs carry their git blob hash") {
    const auto dir = fs::temp_directory_path() / ("convrec_manifest_" + std::to_string(::getpid()));
    fs::remove_all(dir);
    fs::create_directories(dir);
    io::write_file(dir / "a.txt", "hello\n");
    RunManifest m;
    m.subcommand = "train";
    m.seed = 9;
    m.config = {{"lr", 0.05}};
    m.add_input(dir / "a.txt");
    REQUIRE(m.inputs.size() == 1);
    CHECK(m.inputs[0].hash == "ce013625030ba8dba906f756967f9e9ca394464a");
    CHECK_THROWS_AS(m.add_input(dir / "missing"), NotFound);

    SUBCASE("directory hash depends on names and contents, not on listing order") {
        io::write_file(dir / "b.txt", "x");
        const auto h1 = content_hash(dir);
        const std::string listing = "a.txt ce013625030ba8dba906f756967f9e9ca394464a\nb.txt " +
                                    io::git_blob_hash("x") + "\n";
        CHECK(h1 == io::git_blob_hash(listing));
        io::write_file(dir / "b.txt", "y");
        CHECK(content_hash(dir) != h1);
    }

    SUBCASE("json round trip and sidecar") {
        m.add_output(dir / "out.csv");
        const auto back = RunManifest::from_json(m.to_json());
        CHECK(back.to_json() == m.to_json());
        CHECK(back.seed == 9);
        const auto side = write_manifest_sidecar(dir / "out.csv", m);
        CHECK(side.filename() == "out.csv.manifest.json");
        CHECK(nlohmann::json::parse(io::read_file(side)) == m.to_json());
        CHECK_THROWS_AS(RunManifest::from_json(nlohmann::json::object()), InvalidInput);
    }
    fs::remove_all(dir);
}

}  // TEST_SUITE
