#pragma once

#include <cstdint>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "tmm/dynamics.hpp"

namespace tmm {

inline constexpr int kConfigSchemaVersion = 1;
inline constexpr const char* kArtifactVersion = "1.0.0";

// ---- experiment configuration ----
// All physical quantities carry explicit units in their key names: linear
// frequencies in MHz (value / 2 pi), times in us or ns. Coherence keys at or
// below zero switch the channel off (ideal limit) so the JSON never needs an
// infinity literal.

struct DeviceConfig {
    double kappa_f_mhz = 164.0;
    double t1ge_us = 0.0;
    double t1ef_us = 0.0;
    double t2ge_star_us = 0.0;
    double loss = 0.0;

    DeviceParams to_params() const;
    static DeviceConfig from_params(const DeviceParams& p);
};

struct ModesConfig {
    std::string family = "sech_orthogonal";
    double kappa_ph_mhz = 5.0;
    int max_index = 3;
    double hg_sigma_ns = 100.0;  // hermite_gaussian only
    int bin_count = 3;           // time_bin / frequency_bin only
};

struct SimulateConfig {
    int emit_mode = 0;
    int absorb_mode = 0;
    double delay_ns = 1.5;
    bool ideal_device = true;  // false: use the receiver block
    bool record_g1 = false;
};

struct SweepConfig {
    double delay_start_ns = -100.0;
    double delay_stop_ns = 100.0;
    int delay_points = 21;
    bool ideal_device = true;
};

struct TomographyConfig {
    std::int64_t shots = 2000;
    double confusion_error = 0.0;
    double loss = 0.0;         // propagation loss injected into the channel
    bool ideal_device = true;  // false: receiver block + loss above
};

struct CapacityConfig {
    double t_window_min_us = 0.2;
    double t_window_max_us = 2.4;
    int t_window_points = 6;
    double bandwidth_min_mhz = 5.0;
    double bandwidth_max_mhz = 40.0;
    int bandwidth_points = 6;
    double kappa_min_mhz = 0.5;
    double kappa_max_mhz = 8.0;  // emitter decay-rate ceiling
    double fraction = 0.99;
    int kappa_points = 64;
    int wigner_max_mode = 1;  // modes whose distributions are exported
};

struct DrivesConfig {
    std::vector<int> dac_bits = {2, 4, 6, 8, 10, 12};
    double sample_rate_msps = 1000.0;
};

struct ExperimentConfig {
    int schema_version = kConfigSchemaVersion;
    std::uint64_t seed = 20260815;
    std::string out_dir = "runs/default";
    ModesConfig modes;
    DeviceConfig sender;    // defaults to the sender chip constants
    DeviceConfig receiver;  // defaults to the receiver chip constants
    SimulateConfig simulate;
    SweepConfig sweep;
    TomographyConfig tomography;
    CapacityConfig capacity;
    DrivesConfig drives;

    ExperimentConfig();  // fills the device blocks from the chip presets
    void validate() const;
    double kappa_ph() const;  // rad/s
};

// JSON round trip. Parsing rejects unknown keys, wrong types, and schema
// version mismatches with ConfigError.
nlohmann::json config_to_json(const ExperimentConfig& c);
ExperimentConfig config_from_json(const nlohmann::json& j);

// Load a config file, then apply environment overrides: variables named
// PREFIX + path with "__" as the nesting separator (TMM_SENDER__T1GE_US=31)
// replace the corresponding key; values parse as JSON literals when possible,
// else as strings. Pass an empty path to start from the built-in defaults.
ExperimentConfig load_config(const std::string& path, const std::string& env_prefix = "TMM_");
void apply_env_overrides(nlohmann::json& j, const std::string& prefix = "TMM_");

// FNV-1a 64-bit checksum of a byte string / file contents.
std::uint64_t fnv1a64(std::string_view bytes);
std::uint64_t fnv1a64_file(const std::string& path);
std::string to_hex(std::uint64_t v);

// Hash of the canonical (key-sorted) serialization: invariant to key order
// and whitespace in the source file.
std::string config_hash(const ExperimentConfig& c);

// ---- run manifest ----
struct FileRecord {
    std::string path;  // relative to the run directory
    std::uint64_t bytes = 0;
    std::string checksum;  // fnv1a64, hex
};

struct RunManifest {
    std::string command;
    std::string artifact_version = kArtifactVersion;
    std::string config_checksum;
    std::uint64_t seed = 0;
    int workers = 1;
    std::string created_utc;  // wall-clock metadata; excluded from determinism
    std::vector<FileRecord> files;
};

// Record every file (checksummed) and write <dir>/manifest.json.
void write_manifest(RunManifest manifest, const std::string& dir,
                    const std::vector<std::string>& files);
RunManifest read_manifest(const std::string& path);

// ---- output writers (deterministic bytes) ----
// Scalars print with %.17g so equal doubles give equal files.
void write_json_file(const std::string& path, const nlohmann::json& j);
void write_table(const std::string& path, const std::vector<std::string>& columns,
                 const std::vector<std::vector<double>>& rows, const std::string& format);

// Machine-readable failure report and the matching process exit code
// (config error 2, numerical failure 3).
nlohmann::json error_json(const std::exception& e);
int error_exit_code(const std::exception& e);

std::string iso8601_utc_now();

}  // namespace tmm
