#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "tmm/io.hpp"

using namespace tmm;
using nlohmann::json;

namespace {

std::filesystem::path scratch_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("tmm_io_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream f(p);
    REQUIRE(bool(f));
    std::ostringstream buf;
    buf << f.rdbuf();
    return buf.str();
}

}  // namespace

TEST_CASE("device config maps MHz/us keys onto simulator parameters") {
    DeviceConfig d;
    d.kappa_f_mhz = 164.0;
    d.t1ge_us = 31.0;
    d.t1ef_us = 0.0;  // off: ideal limit
    d.t2ge_star_us = 12.5;
    d.loss = 0.25;

    const DeviceParams p = d.to_params();
    CHECK(p.kappa_f == doctest::Approx(2.0 * 3.14159265358979323846 * 164e6).epsilon(1e-15));
    CHECK(p.t1ge == doctest::Approx(31e-6).epsilon(1e-15));
    CHECK(std::isinf(p.t1ef));
    CHECK(p.t2ge_star == doctest::Approx(12.5e-6).epsilon(1e-15));
    CHECK(p.loss == 0.25);

    const DeviceConfig back = DeviceConfig::from_params(p);
    CHECK(back.kappa_f_mhz == doctest::Approx(164.0).epsilon(1e-12));
    CHECK(back.t1ge_us == doctest::Approx(31.0).epsilon(1e-12));
    CHECK(back.t1ef_us == 0.0);
    CHECK(back.t2ge_star_us == doctest::Approx(12.5).epsilon(1e-12));

    // chip presets survive the round trip
    for (const auto& preset : {DeviceParams::sender_chip(), DeviceParams::receiver_chip()}) {
        const DeviceParams rt = DeviceConfig::from_params(preset).to_params();
        CHECK(rt.kappa_f == doctest::Approx(preset.kappa_f).epsilon(1e-12));
        CHECK(rt.t1ge == doctest::Approx(preset.t1ge).epsilon(1e-12));
        CHECK(rt.t1ef == doctest::Approx(preset.t1ef).epsilon(1e-12));
        CHECK(rt.t2ge_star == doctest::Approx(preset.t2ge_star).epsilon(1e-12));
        CHECK(rt.loss == preset.loss);
    }
}

TEST_CASE("config serialization round trips and defaults validate") {
    ExperimentConfig c;
    c.validate();
    CHECK(c.sender.kappa_f_mhz == doctest::Approx(138.0).epsilon(1e-12));
    CHECK(c.receiver.kappa_f_mhz == doctest::Approx(164.0).epsilon(1e-12));
    CHECK(c.kappa_ph() == doctest::Approx(2.0 * 3.14159265358979323846 * 5e6).epsilon(1e-15));

    c.seed = 99;
    c.modes.max_index = 7;
    c.tomography.loss = 0.33;
    c.drives.dac_bits = {3, 9};
    const json j = config_to_json(c);
    const ExperimentConfig back = config_from_json(j);
    CHECK(config_to_json(back) == j);
    CHECK(back.seed == 99);
    CHECK(back.modes.max_index == 7);
    CHECK(back.tomography.loss == 0.33);
    CHECK(back.drives.dac_bits == std::vector<int>{3, 9});
}

TEST_CASE("parsing rejects unknown keys, wrong types, and partial objects keep defaults") {
    json j = config_to_json(ExperimentConfig{});
    j["modes"]["familly"] = "sech_orthogonal";
    CHECK_THROWS_AS(config_from_json(j), ConfigError);

    j = config_to_json(ExperimentConfig{});
    j["frobnicate"] = 1;
    CHECK_THROWS_AS(config_from_json(j), ConfigError);

    j = config_to_json(ExperimentConfig{});
    j["modes"]["kappa_ph_mhz"] = "fast";
    CHECK_THROWS_AS(config_from_json(j), ConfigError);

    j = config_to_json(ExperimentConfig{});
    j["sweep"] = json{{"delay_points", "many"}};
    CHECK_THROWS_AS(config_from_json(j), ConfigError);

    // a sparse document only overrides what it names
    const ExperimentConfig c =
        config_from_json(json{{"seed", 7}, {"modes", {{"max_index", 2}}}});
    CHECK(c.seed == 7);
    CHECK(c.modes.max_index == 2);
    CHECK(c.modes.family == "sech_orthogonal");
    CHECK(c.sweep.delay_points == 21);
}

TEST_CASE("validation flags out-of-range settings") {
    const auto rejects = [](void (*tweak)(ExperimentConfig&)) {
        ExperimentConfig c;
        tweak(c);
        CHECK_THROWS_AS(c.validate(), ConfigError);
    };
    rejects([](ExperimentConfig& c) { c.schema_version = 2; });
    rejects([](ExperimentConfig& c) { c.out_dir.clear(); });
    rejects([](ExperimentConfig& c) { c.modes.family = "nonsense"; });
    rejects([](ExperimentConfig& c) { c.modes.family = "measured"; });
    rejects([](ExperimentConfig& c) { c.modes.kappa_ph_mhz = 0.0; });
    rejects([](ExperimentConfig& c) { c.modes.max_index = 21; });
    rejects([](ExperimentConfig& c) { c.modes.bin_count = 0; });
    rejects([](ExperimentConfig& c) { c.sender.loss = 1.5; });
    rejects([](ExperimentConfig& c) { c.simulate.emit_mode = -1; });
    rejects([](ExperimentConfig& c) { c.simulate.delay_ns = std::nan(""); });
    rejects([](ExperimentConfig& c) { c.sweep.delay_points = 1; });
    rejects([](ExperimentConfig& c) { c.sweep.delay_start_ns = c.sweep.delay_stop_ns; });
    rejects([](ExperimentConfig& c) { c.tomography.shots = 0; });
    rejects([](ExperimentConfig& c) { c.tomography.confusion_error = 1.0; });
    rejects([](ExperimentConfig& c) { c.tomography.loss = -0.1; });
    rejects([](ExperimentConfig& c) { c.capacity.t_window_min_us = 3.0; });
    rejects([](ExperimentConfig& c) { c.capacity.kappa_min_mhz = 9.0; });
    rejects([](ExperimentConfig& c) { c.capacity.fraction = 1.0; });
    rejects([](ExperimentConfig& c) { c.capacity.kappa_points = 1; });
    rejects([](ExperimentConfig& c) { c.capacity.wigner_max_mode = 99; });
    rejects([](ExperimentConfig& c) { c.drives.dac_bits = {}; });
    rejects([](ExperimentConfig& c) { c.drives.dac_bits = {0}; });
    rejects([](ExperimentConfig& c) { c.drives.dac_bits = {25}; });
    rejects([](ExperimentConfig& c) { c.drives.sample_rate_msps = 0.0; });
}

TEST_CASE("environment overrides replace nested keys") {
    ::setenv("TMMX_SEED", "41", 1);
    ::setenv("TMMX_MODES__MAX_INDEX", "5", 1);
    ::setenv("TMMX_SIMULATE__IDEAL_DEVICE", "false", 1);
    ::setenv("TMMX_OUT_DIR", "runs/from-env", 1);  // not a JSON literal: stays a string
    json j = config_to_json(ExperimentConfig{});
    apply_env_overrides(j, "TMMX_");
    ::unsetenv("TMMX_SEED");
    ::unsetenv("TMMX_MODES__MAX_INDEX");
    ::unsetenv("TMMX_SIMULATE__IDEAL_DEVICE");
    ::unsetenv("TMMX_OUT_DIR");

    const ExperimentConfig c = config_from_json(j);
    CHECK(c.seed == 41);
    CHECK(c.modes.max_index == 5);
    CHECK(c.simulate.ideal_device == false);
    CHECK(c.out_dir == "runs/from-env");

    // an override that breaks the schema is caught by the normal parser
    ::setenv("TMMX_MODES__NO_SUCH_KEY", "1", 1);
    json bad = config_to_json(ExperimentConfig{});
    apply_env_overrides(bad, "TMMX_");
    ::unsetenv("TMMX_MODES__NO_SUCH_KEY");
    CHECK_THROWS_AS(config_from_json(bad), ConfigError);
}

TEST_CASE("load_config reads files, falls back to defaults, and reports bad input") {
    const auto dir = scratch_dir("load");
    const auto path = (dir / "config.json").string();
    {
        // key order and whitespace differ from the canonical dump on purpose
        std::ofstream f(path);
        f << "{\"modes\": {\"max_index\": 4},\n \"seed\": 12,\n \"schema_version\": 1}\n";
    }
    const ExperimentConfig c = load_config(path, "TMM_IO_TEST_");
    CHECK(c.seed == 12);
    CHECK(c.modes.max_index == 4);

    const ExperimentConfig defaults = load_config("", "TMM_IO_TEST_");
    CHECK(defaults.seed == ExperimentConfig{}.seed);

    CHECK_THROWS_AS(load_config((dir / "absent.json").string(), ""), ConfigError);
    {
        std::ofstream f(dir / "broken.json");
        f << "{ not json";
    }
    CHECK_THROWS_AS(load_config((dir / "broken.json").string(), ""), ConfigError);
    {
        std::ofstream f(dir / "invalid.json");
        f << "{\"schema_version\": 1, \"tomography\": {\"shots\": 0}}";
    }
    CHECK_THROWS_AS(load_config((dir / "invalid.json").string(), ""), ConfigError);
}

TEST_CASE("fnv1a64 matches the reference vectors and the hash ignores key order") {
    CHECK(fnv1a64("") == 14695981039346656037ULL);
    CHECK(to_hex(fnv1a64("a")) == "af63dc4c8601ec8c");
    CHECK(to_hex(fnv1a64("foobar")) == "85944171f73967e8");
    CHECK(to_hex(0) == "0000000000000000");

    ExperimentConfig c;
    c.seed = 5;
    const std::string h = config_hash(c);
    CHECK(h.size() == 16);

    // round trip through a differently ordered / indented document
    json shuffled;
    shuffled["seed"] = 5;
    shuffled["schema_version"] = 1;
    const json merged = [&] {
        json j = config_to_json(c);
        json out;
        for (auto it = j.rbegin(); it != j.rend(); ++it) out[it.key()] = it.value();
        return out;
    }();
    CHECK(config_hash(config_from_json(json::parse(merged.dump(4)))) == h);

    ExperimentConfig other;
    other.seed = 6;
    CHECK(config_hash(other) != h);
}

TEST_CASE("manifest records checksums for every output file") {
    const auto dir = scratch_dir("manifest");
    {
        std::ofstream(dir / "b.csv") << "x\n1\n";
        std::ofstream(dir / "a.json") << "{}\n";
    }
    RunManifest m;
    m.command = "simulate";
    m.config_checksum = config_hash(ExperimentConfig{});
    m.seed = 3;
    m.workers = 2;
    write_manifest(m, dir.string(), {"b.csv", "a.json"});

    const RunManifest back = read_manifest((dir / "manifest.json").string());
    CHECK(back.command == "simulate");
    CHECK(back.artifact_version == kArtifactVersion);
    CHECK(back.config_checksum == m.config_checksum);
    CHECK(back.seed == 3);
    CHECK(back.workers == 2);
    CHECK(!back.created_utc.empty());
    REQUIRE(back.files.size() == 2);
    CHECK(back.files[0].path == "a.json");  // sorted regardless of call order
    CHECK(back.files[1].path == "b.csv");
    CHECK(back.files[0].bytes == 3);
    CHECK(back.files[0].checksum == to_hex(fnv1a64("{}\n")));
    CHECK(back.files[1].checksum == to_hex(fnv1a64_file((dir / "b.csv").string())));

    CHECK_THROWS_AS(write_manifest(m, dir.string(), {"missing.csv"}),
                    std::filesystem::filesystem_error);
    CHECK_THROWS_AS(read_manifest((dir / "nope.json").string()), ConfigError);
}

TEST_CASE("table writer emits full-precision csv and json") {
    const auto dir = scratch_dir("table");
    const std::vector<std::string> cols{"delay_ns", "overlap"};
    const std::vector<std::vector<double>> rows{{1.5, 0.1}, {-2.0, 1.0 / 3.0}};

    const auto csv = dir / "t.csv";
    write_table(csv.string(), cols, rows, "csv");
    CHECK(slurp(csv) ==
          "delay_ns,overlap\n"
          "1.5,0.10000000000000001\n"
          "-2,0.33333333333333331\n");

    const auto jpath = dir / "t.json";
    write_table(jpath.string(), cols, rows, "json");
    const json parsed = json::parse(slurp(jpath));
    REQUIRE(parsed.is_array());
    REQUIRE(parsed.size() == 2);
    CHECK(parsed[0]["delay_ns"] == 1.5);
    CHECK(parsed[1]["overlap"].get<double>() == 1.0 / 3.0);

    CHECK_THROWS_AS(write_table((dir / "x.csv").string(), cols, {{1.0}}, "csv"), ConfigError);
    CHECK_THROWS_AS(write_table((dir / "x.csv").string(), {}, {}, "csv"), ConfigError);
    CHECK_THROWS_AS(write_table((dir / "x.tsv").string(), cols, rows, "tsv"), ConfigError);

    // identical rows give byte-identical files
    const auto again = dir / "t2.csv";
    write_table(again.string(), cols, rows, "csv");
    CHECK(slurp(again) == slurp(csv));
}

TEST_CASE("failures map onto exit codes and a machine-readable report") {
    const ConfigError ce("bad knob");
    const NumericalError ne("diverged");
    const std::runtime_error re("plain");

    CHECK(error_exit_code(ce) == 2);
    CHECK(error_exit_code(ne) == 3);
    CHECK(error_exit_code(re) == 3);

    CHECK(error_json(ce)["error"]["type"] == "config");
    CHECK(error_json(ce)["error"]["message"] == "bad knob");
    CHECK(error_json(ne)["error"]["type"] == "numerical");
    CHECK(error_json(re)["error"]["type"] == "internal");

    const std::string stamp = iso8601_utc_now();
    CHECK(stamp.size() == 20);
    CHECK(stamp[4] == '-');
    CHECK(stamp.back() == 'Z');
}
