#include "tmm/io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

extern char** environ;

namespace tmm {
namespace {

constexpr double pi = 3.14159265358979323846;
constexpr double inf = std::numeric_limits<double>::infinity();

double mhz_to_rad(double mhz) { return 2.0 * pi * mhz * 1e6; }
double rad_to_mhz(double rad) { return rad / (2.0 * pi * 1e6); }
double us_to_s_or_inf(double us) { return us > 0.0 ? us * 1e-6 : inf; }
double s_to_us_or_off(double s) { return std::isfinite(s) ? s * 1e6 : 0.0; }

// Object reader that rejects unknown keys and reports conversion errors with
// their full path.
class KeyReader {
  public:
    KeyReader(const nlohmann::json& j, std::string context)
        : j_(j), context_(std::move(context)) {
        if (!j_.is_object()) throw ConfigError(context_ + ": expected a JSON object");
    }

    template <typename T>
    void get(const char* key, T& out) {
        seen_.insert(key);
        if (!j_.contains(key)) return;  // keep the default
        try {
            j_.at(key).get_to(out);
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError(context_ + "." + key + ": " + e.what());
        }
    }

    bool has(const char* key) const { return j_.contains(key); }

    const nlohmann::json& sub(const char* key) {
        seen_.insert(key);
        return j_.at(key);
    }

    void finish() const {
        for (const auto& [key, value] : j_.items())
            if (!seen_.count(key))
                throw ConfigError(context_ + ": unknown key \"" + key + "\"");
    }

  private:
    const nlohmann::json& j_;
    std::string context_;
    std::set<std::string> seen_;
};

nlohmann::json device_to_json(const DeviceConfig& d) {
    return {{"kappa_f_mhz", d.kappa_f_mhz}, {"t1ge_us", d.t1ge_us},
            {"t1ef_us", d.t1ef_us},         {"t2ge_star_us", d.t2ge_star_us},
            {"loss", d.loss}};
}

DeviceConfig device_from_json(const nlohmann::json& j, const std::string& ctx,
                              DeviceConfig d) {
    KeyReader r(j, ctx);
    r.get("kappa_f_mhz", d.kappa_f_mhz);
    r.get("t1ge_us", d.t1ge_us);
    r.get("t1ef_us", d.t1ef_us);
    r.get("t2ge_star_us", d.t2ge_star_us);
    r.get("loss", d.loss);
    r.finish();
    return d;
}

void require_range(bool ok, const std::string& what) {
    if (!ok) throw ConfigError("config: " + what);
}

}  // namespace

// ---- DeviceConfig ----

DeviceParams DeviceConfig::to_params() const {
    DeviceParams p = DeviceParams::ideal();
    p.kappa_f = mhz_to_rad(kappa_f_mhz);
    p.t1ge = us_to_s_or_inf(t1ge_us);
    p.t1ef = us_to_s_or_inf(t1ef_us);
    p.t2ge_star = us_to_s_or_inf(t2ge_star_us);
    p.loss = loss;
    p.validate();
    return p;
}

DeviceConfig DeviceConfig::from_params(const DeviceParams& p) {
    DeviceConfig d;
    d.kappa_f_mhz = rad_to_mhz(p.kappa_f);
    d.t1ge_us = s_to_us_or_off(p.t1ge);
    d.t1ef_us = s_to_us_or_off(p.t1ef);
    d.t2ge_star_us = s_to_us_or_off(p.t2ge_star);
    d.loss = p.loss;
    return d;
}

// ---- ExperimentConfig ----

ExperimentConfig::ExperimentConfig()
    : sender(DeviceConfig::from_params(DeviceParams::sender_chip())),
      receiver(DeviceConfig::from_params(DeviceParams::receiver_chip())) {}

double ExperimentConfig::kappa_ph() const { return mhz_to_rad(modes.kappa_ph_mhz); }

void ExperimentConfig::validate() const {
    require_range(schema_version == kConfigSchemaVersion,
                  "schema_version " + std::to_string(schema_version) + " is not supported");
    require_range(!out_dir.empty(), "out_dir must be non-empty");

    const ModeFamily family = mode_family_from_string(modes.family);
    require_range(family != ModeFamily::measured,
                  "modes.family \"measured\" needs a basis file, not a config");
    require_range(modes.kappa_ph_mhz > 0.0, "modes.kappa_ph_mhz must be positive");
    require_range(modes.max_index >= 0 && modes.max_index <= 20,
                  "modes.max_index must lie in [0, 20]");
    require_range(modes.hg_sigma_ns > 0.0, "modes.hg_sigma_ns must be positive");
    require_range(modes.bin_count >= 1, "modes.bin_count must be at least 1");

    const auto check_device = [](const DeviceConfig& d, const char* label) {
        try {
            d.to_params();
        } catch (const ConfigError& e) {
            throw ConfigError(std::string("config.") + label + ": " + e.what());
        }
    };
    check_device(sender, "sender");
    check_device(receiver, "receiver");

    require_range(simulate.emit_mode >= 0 && simulate.emit_mode <= 20,
                  "simulate.emit_mode must lie in [0, 20]");
    require_range(simulate.absorb_mode >= 0 && simulate.absorb_mode <= 20,
                  "simulate.absorb_mode must lie in [0, 20]");
    require_range(std::isfinite(simulate.delay_ns), "simulate.delay_ns must be finite");

    require_range(sweep.delay_points >= 2, "sweep.delay_points must be at least 2");
    require_range(sweep.delay_start_ns < sweep.delay_stop_ns,
                  "sweep.delay_start_ns must be below sweep.delay_stop_ns");

    require_range(tomography.shots > 0, "tomography.shots must be positive");
    require_range(tomography.confusion_error >= 0.0 && tomography.confusion_error < 1.0,
                  "tomography.confusion_error must lie in [0, 1)");
    require_range(tomography.loss >= 0.0 && tomography.loss < 1.0,
                  "tomography.loss must lie in [0, 1)");

    require_range(capacity.t_window_points >= 1, "capacity.t_window_points must be at least 1");
    require_range(capacity.bandwidth_points >= 1, "capacity.bandwidth_points must be at least 1");
    require_range(capacity.t_window_min_us > 0.0, "capacity.t_window_min_us must be positive");
    require_range(capacity.bandwidth_min_mhz > 0.0, "capacity.bandwidth_min_mhz must be positive");
    require_range(capacity.t_window_min_us <= capacity.t_window_max_us,
                  "capacity t_window bounds are inverted");
    require_range(capacity.bandwidth_min_mhz <= capacity.bandwidth_max_mhz,
                  "capacity bandwidth bounds are inverted");
    require_range(capacity.kappa_min_mhz > 0.0 && capacity.kappa_min_mhz < capacity.kappa_max_mhz,
                  "capacity kappa bounds are inverted or non-positive");
    require_range(capacity.fraction > 0.0 && capacity.fraction < 1.0,
                  "capacity.fraction must lie in (0, 1)");
    require_range(capacity.kappa_points >= 2, "capacity.kappa_points must be at least 2");
    require_range(capacity.wigner_max_mode >= 0 && capacity.wigner_max_mode <= 20,
                  "capacity.wigner_max_mode must lie in [0, 20]");

    require_range(!drives.dac_bits.empty(), "drives.dac_bits must be non-empty");
    for (int b : drives.dac_bits)
        require_range(b >= 1 && b <= 24, "drives.dac_bits entries must lie in [1, 24]");
    require_range(drives.sample_rate_msps > 0.0, "drives.sample_rate_msps must be positive");
}

nlohmann::json config_to_json(const ExperimentConfig& c) {
    return {
        {"schema_version", c.schema_version},
        {"seed", c.seed},
        {"out_dir", c.out_dir},
        {"modes",
         {{"family", c.modes.family},
          {"kappa_ph_mhz", c.modes.kappa_ph_mhz},
          {"max_index", c.modes.max_index},
          {"hg_sigma_ns", c.modes.hg_sigma_ns},
          {"bin_count", c.modes.bin_count}}},
        {"sender", device_to_json(c.sender)},
        {"receiver", device_to_json(c.receiver)},
        {"simulate",
         {{"emit_mode", c.simulate.emit_mode},
          {"absorb_mode", c.simulate.absorb_mode},
          {"delay_ns", c.simulate.delay_ns},
          {"ideal_device", c.simulate.ideal_device},
          {"record_g1", c.simulate.record_g1}}},
        {"sweep",
         {{"delay_start_ns", c.sweep.delay_start_ns},
          {"delay_stop_ns", c.sweep.delay_stop_ns},
          {"delay_points", c.sweep.delay_points},
          {"ideal_device", c.sweep.ideal_device}}},
        {"tomography",
         {{"shots", c.tomography.shots},
          {"confusion_error", c.tomography.confusion_error},
          {"loss", c.tomography.loss},
          {"ideal_device", c.tomography.ideal_device}}},
        {"capacity",
         {{"t_window_min_us", c.capacity.t_window_min_us},
          {"t_window_max_us", c.capacity.t_window_max_us},
          {"t_window_points", c.capacity.t_window_points},
          {"bandwidth_min_mhz", c.capacity.bandwidth_min_mhz},
          {"bandwidth_max_mhz", c.capacity.bandwidth_max_mhz},
          {"bandwidth_points", c.capacity.bandwidth_points},
          {"kappa_min_mhz", c.capacity.kappa_min_mhz},
          {"kappa_max_mhz", c.capacity.kappa_max_mhz},
          {"fraction", c.capacity.fraction},
          {"kappa_points", c.capacity.kappa_points},
          {"wigner_max_mode", c.capacity.wigner_max_mode}}},
        {"drives",
         {{"dac_bits", c.drives.dac_bits},
          {"sample_rate_msps", c.drives.sample_rate_msps}}},
    };
}

ExperimentConfig config_from_json(const nlohmann::json& j) {
    ExperimentConfig c;
    KeyReader top(j, "config");
    top.get("schema_version", c.schema_version);
    top.get("seed", c.seed);
    top.get("out_dir", c.out_dir);
    if (top.has("modes")) {
        KeyReader r(top.sub("modes"), "config.modes");
        r.get("family", c.modes.family);
        r.get("kappa_ph_mhz", c.modes.kappa_ph_mhz);
        r.get("max_index", c.modes.max_index);
        r.get("hg_sigma_ns", c.modes.hg_sigma_ns);
        r.get("bin_count", c.modes.bin_count);
        r.finish();
    }
    if (top.has("sender")) c.sender = device_from_json(top.sub("sender"), "config.sender", c.sender);
    if (top.has("receiver"))
        c.receiver = device_from_json(top.sub("receiver"), "config.receiver", c.receiver);
    if (top.has("simulate")) {
        KeyReader r(top.sub("simulate"), "config.simulate");
        r.get("emit_mode", c.simulate.emit_mode);
        r.get("absorb_mode", c.simulate.absorb_mode);
        r.get("delay_ns", c.simulate.delay_ns);
        r.get("ideal_device", c.simulate.ideal_device);
        r.get("record_g1", c.simulate.record_g1);
        r.finish();
    }
    if (top.has("sweep")) {
        KeyReader r(top.sub("sweep"), "config.sweep");
        r.get("delay_start_ns", c.sweep.delay_start_ns);
        r.get("delay_stop_ns", c.sweep.delay_stop_ns);
        r.get("delay_points", c.sweep.delay_points);
        r.get("ideal_device", c.sweep.ideal_device);
        r.finish();
    }
    if (top.has("tomography")) {
        KeyReader r(top.sub("tomography"), "config.tomography");
        r.get("shots", c.tomography.shots);
        r.get("confusion_error", c.tomography.confusion_error);
        r.get("loss", c.tomography.loss);
        r.get("ideal_device", c.tomography.ideal_device);
        r.finish();
    }
    if (top.has("capacity")) {
        KeyReader r(top.sub("capacity"), "config.capacity");
        r.get("t_window_min_us", c.capacity.t_window_min_us);
        r.get("t_window_max_us", c.capacity.t_window_max_us);
        r.get("t_window_points", c.capacity.t_window_points);
        r.get("bandwidth_min_mhz", c.capacity.bandwidth_min_mhz);
        r.get("bandwidth_max_mhz", c.capacity.bandwidth_max_mhz);
        r.get("bandwidth_points", c.capacity.bandwidth_points);
        r.get("kappa_min_mhz", c.capacity.kappa_min_mhz);
        r.get("kappa_max_mhz", c.capacity.kappa_max_mhz);
        r.get("fraction", c.capacity.fraction);
        r.get("kappa_points", c.capacity.kappa_points);
        r.get("wigner_max_mode", c.capacity.wigner_max_mode);
        r.finish();
    }
    if (top.has("drives")) {
        KeyReader r(top.sub("drives"), "config.drives");
        r.get("dac_bits", c.drives.dac_bits);
        r.get("sample_rate_msps", c.drives.sample_rate_msps);
        r.finish();
    }
    top.finish();
    return c;
}

// ---- environment overrides ----

void apply_env_overrides(nlohmann::json& j, const std::string& prefix) {
    for (char** env = environ; *env != nullptr; ++env) {
        const std::string entry(*env);
        const auto eq = entry.find('=');
        if (eq == std::string::npos) continue;
        std::string name = entry.substr(0, eq);
        if (name.rfind(prefix, 0) != 0) continue;
        name = name.substr(prefix.size());
        if (name.empty()) continue;
        const std::string value = entry.substr(eq + 1);

        // path segments separated by "__", matched case-insensitively
        std::vector<std::string> path;
        size_t pos = 0;
        while (true) {
            const auto sep = name.find("__", pos);
            path.push_back(name.substr(pos, sep - pos));
            if (sep == std::string::npos) break;
            pos = sep + 2;
        }
        for (auto& seg : path) {
            std::transform(seg.begin(), seg.end(), seg.begin(),
                           [](unsigned char ch) { return std::tolower(ch); });
            if (seg.empty())
                throw ConfigError("environment override " + prefix + name +
                                  ": empty key segment");
        }

        nlohmann::json* node = &j;
        for (size_t i = 0; i + 1 < path.size(); ++i) node = &(*node)[path[i]];
        nlohmann::json parsed = nlohmann::json::parse(value, nullptr, false);
        (*node)[path.back()] = parsed.is_discarded() ? nlohmann::json(value) : parsed;
    }
}

ExperimentConfig load_config(const std::string& path, const std::string& env_prefix) {
    nlohmann::json j;
    if (path.empty()) {
        j = config_to_json(ExperimentConfig{});
    } else {
        std::ifstream f(path);
        if (!f) throw ConfigError("cannot open config file: " + path);
        try {
            f >> j;
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError("config file " + path + ": " + e.what());
        }
    }
    if (!env_prefix.empty()) apply_env_overrides(j, env_prefix);
    ExperimentConfig c = config_from_json(j);
    c.validate();
    return c;
}

// ---- checksums ----

std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char b : bytes) {
        h ^= b;
        h *= 1099511628211ULL;
    }
    return h;
}

std::uint64_t fnv1a64_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ConfigError("cannot open file for checksum: " + path);
    std::ostringstream buf;
    buf << f.rdbuf();
    return fnv1a64(buf.str());
}

std::string to_hex(std::uint64_t v) {
    char out[17];
    std::snprintf(out, sizeof out, "%016llx", static_cast<unsigned long long>(v));
    return out;
}

std::string config_hash(const ExperimentConfig& c) {
    // nlohmann objects iterate in key order, so dump() is canonical.
    return to_hex(fnv1a64(config_to_json(c).dump()));
}

// ---- manifest ----

void write_manifest(RunManifest manifest, const std::string& dir,
                    const std::vector<std::string>& files) {
    manifest.files.clear();
    std::vector<std::string> sorted = files;
    std::sort(sorted.begin(), sorted.end());
    for (const auto& rel : sorted) {
        const std::string full = dir + "/" + rel;
        FileRecord rec;
        rec.path = rel;
        rec.bytes = static_cast<std::uint64_t>(std::filesystem::file_size(full));
        rec.checksum = to_hex(fnv1a64_file(full));
        manifest.files.push_back(rec);
    }
    if (manifest.created_utc.empty()) manifest.created_utc = iso8601_utc_now();

    nlohmann::json j{{"command", manifest.command},
                     {"artifact_version", manifest.artifact_version},
                     {"config_checksum", manifest.config_checksum},
                     {"seed", manifest.seed},
                     {"workers", manifest.workers},
                     {"created_utc", manifest.created_utc},
                     {"files", nlohmann::json::array()}};
    for (const auto& f : manifest.files)
        j["files"].push_back({{"path", f.path}, {"bytes", f.bytes}, {"checksum", f.checksum}});
    write_json_file(dir + "/manifest.json", j);
}

RunManifest read_manifest(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open manifest: " + path);
    nlohmann::json j;
    try {
        f >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("manifest " + path + ": " + e.what());
    }
    RunManifest m;
    try {
        j.at("command").get_to(m.command);
        j.at("artifact_version").get_to(m.artifact_version);
        j.at("config_checksum").get_to(m.config_checksum);
        j.at("seed").get_to(m.seed);
        j.at("workers").get_to(m.workers);
        j.at("created_utc").get_to(m.created_utc);
        for (const auto& e : j.at("files")) {
            FileRecord rec;
            e.at("path").get_to(rec.path);
            e.at("bytes").get_to(rec.bytes);
            e.at("checksum").get_to(rec.checksum);
            m.files.push_back(rec);
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("manifest " + path + ": " + e.what());
    }
    return m;
}

// ---- writers ----

void write_json_file(const std::string& path, const nlohmann::json& j) {
    std::ofstream f(path);
    if (!f) throw ConfigError("cannot open output file: " + path);
    f << j.dump(2) << "\n";
    if (!f) throw NumericalError("write failed: " + path);
}

void write_table(const std::string& path, const std::vector<std::string>& columns,
                 const std::vector<std::vector<double>>& rows, const std::string& format) {
    if (columns.empty()) throw ConfigError("write_table: no columns");
    for (const auto& r : rows)
        if (r.size() != columns.size())
            throw ConfigError("write_table: row width does not match the header");

    if (format == "csv") {
        std::ofstream f(path);
        if (!f) throw ConfigError("cannot open output file: " + path);
        for (size_t i = 0; i < columns.size(); ++i)
            f << columns[i] << (i + 1 < columns.size() ? "," : "\n");
        char buf[32];
        for (const auto& r : rows) {
            for (size_t i = 0; i < r.size(); ++i) {
                std::snprintf(buf, sizeof buf, "%.17g", r[i]);
                f << buf << (i + 1 < r.size() ? "," : "\n");
            }
        }
        if (!f) throw NumericalError("write failed: " + path);
    } else if (format == "json") {
        nlohmann::json arr = nlohmann::json::array();
        for (const auto& r : rows) {
            nlohmann::json obj;
            for (size_t i = 0; i < r.size(); ++i) obj[columns[i]] = r[i];
            arr.push_back(obj);
        }
        write_json_file(path, arr);
    } else {
        throw ConfigError("write_table: format must be \"json\" or \"csv\"");
    }
}

// ---- failure reporting ----

nlohmann::json error_json(const std::exception& e) {
    std::string type = "internal";
    if (dynamic_cast<const ConfigError*>(&e)) type = "config";
    else if (dynamic_cast<const NumericalError*>(&e)) type = "numerical";
    return {{"error", {{"type", type}, {"message", e.what()}}}};
}

int error_exit_code(const std::exception& e) {
    return dynamic_cast<const ConfigError*>(&e) ? 2 : 3;
}

std::string iso8601_utc_now() {
    const std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    char out[32];
    std::strftime(out, sizeof out, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return out;
}

}  // namespace tmm
