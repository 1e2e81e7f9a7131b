#pragma once

#include <cstdint>
#include <istream>
#include <map>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "evcast/errors.hpp"
#include "evcast/features.hpp"
#include "evcast/geo.hpp"
#include "evcast/pipeline.hpp"
#include "evcast/spatial_nn.hpp"
#include "evcast/synthetic.hpp"
#include "evcast/temporal_crf.hpp"
#include "evcast/text.hpp"
#include "evcast/time.hpp"

namespace evcast {

enum class InputKind { synthetic, trajectories, features };

/// Flat key = value experiment configuration. Every key has a constant
/// default, so a config file only needs the keys it overrides; unknown or
/// duplicate keys are rejected.
struct PipelineConfig {
    int config_version = 1;
    InputKind input_kind = InputKind::synthetic;
    std::string trajectories_path; // required for input_kind = trajectories
    std::string features_path;     // required for input_kind = features

    int synthetic_vehicles = 200;
    int synthetic_days = 6;
    int synthetic_fix_interval_s = 300;
    double synthetic_pattern_strength = 0.8;
    std::uint64_t synthetic_seed = 1;
    std::int64_t synthetic_start_day = days_from_civil(2008, 2, 3);

    BBox grid_bbox{116.20, 39.75, 116.56, 40.05};
    int grid_rows = 4;
    int grid_cols = 4;

    double max_speed_ms = 50.0;
    SocConfig soc;
    EvarMode evar_mode = EvarMode::across_evs;

    std::int64_t split_start_day = days_from_civil(2008, 2, 3);
    int split_train_days = 4;

    FeatureSubset subset = FeatureSubset::parse("F_D,F_N,F_E");
    int delta_t = 1;
    bool hourly_retrain = true;

    int nn_hidden = 16;
    double nn_learning_rate = 0.01;
    int nn_max_epochs = 2000;
    int nn_patience = 100;
    double nn_l2 = 1e-4;
    std::uint64_t nn_seed = 7;

    int crf_levels = 10;
    double crf_l2 = 0.1;
    double crf_learning_rate = 0.5;
    int crf_max_iters = 500;
    double crf_tol = 1e-4;
    std::uint64_t crf_seed = 11;

    std::string out_dir = "out";

    void validate() const {
        if (config_version != 1) throw ConfigError("config: unsupported config_version");
        if (input_kind == InputKind::trajectories && trajectories_path.empty())
            throw ConfigError("config: trajectories_path required for input_kind=trajectories");
        if (input_kind == InputKind::features && features_path.empty())
            throw ConfigError("config: features_path required for input_kind=features");
        if (!grid_bbox.valid()) throw ConfigError("config: grid bounding box is degenerate");
        if (grid_rows < 1 || grid_cols < 1) throw ConfigError("config: grid needs >= 1 row and column");
        if (max_speed_ms <= 0.0) throw ConfigError("config: max_speed_ms must be > 0");
        soc.validate();
        if (split_train_days < 1) throw ConfigError("config: split_train_days must be >= 1");
        if (delta_t < 1 || delta_t > 23) throw ConfigError("config: delta_t must be in 1..23");
        if (out_dir.empty()) throw ConfigError("config: out_dir must not be empty");
        synthetic_config().validate();
        pipeline_setup().nn.validate();
        pipeline_setup().crf.validate();
    }

    SyntheticFleetConfig synthetic_config() const {
        SyntheticFleetConfig s;
        s.num_vehicles = synthetic_vehicles;
        s.num_days = synthetic_days;
        s.bbox = grid_bbox;
        s.fix_interval_s = synthetic_fix_interval_s;
        s.rng_seed = synthetic_seed;
        s.pattern_strength = synthetic_pattern_strength;
        s.start_day = synthetic_start_day;
        return s;
    }

    SplitPlan split_plan() const {
        SplitPlan p;
        for (int d = 0; d < split_train_days; ++d) p.train_days.push_back(split_start_day + d);
        p.validation_day = split_start_day + split_train_days;
        p.test_day = split_start_day + split_train_days + 1;
        return p;
    }

    PipelineSetup pipeline_setup() const {
        PipelineSetup s;
        s.subset = subset;
        s.delta_t = delta_t;
        s.hourly_retrain = hourly_retrain;
        s.nn.hidden_dim = nn_hidden;
        s.nn.learning_rate = nn_learning_rate;
        s.nn.max_epochs = nn_max_epochs;
        s.nn.patience = nn_patience;
        s.nn.l2 = nn_l2;
        s.nn.rng_seed = nn_seed;
        s.nn.delta_t = delta_t;
        s.crf.num_labels = crf_levels;
        s.crf.num_hours = 24;
        s.crf.l2 = crf_l2;
        s.crf.learning_rate = crf_learning_rate;
        s.crf.max_iters = crf_max_iters;
        s.crf.tol = crf_tol;
        s.crf.rng_seed = crf_seed;
        return s;
    }

    /// Every key in canonical order, as written to disk and echoed into
    /// manifests.
    std::vector<std::pair<std::string, std::string>> items() const {
        auto kind_str = [](InputKind k) {
            switch (k) {
                case InputKind::synthetic: return "synthetic";
                case InputKind::trajectories: return "trajectories";
                case InputKind::features: return "features";
            }
            throw ConfigError("config: bad input kind");
        };
        std::vector<std::pair<std::string, std::string>> kv;
        kv.emplace_back("config_version", std::to_string(config_version));
        kv.emplace_back("input_kind", kind_str(input_kind));
        kv.emplace_back("trajectories_path", trajectories_path);
        kv.emplace_back("features_path", features_path);
        kv.emplace_back("synthetic_vehicles", std::to_string(synthetic_vehicles));
        kv.emplace_back("synthetic_days", std::to_string(synthetic_days));
        kv.emplace_back("synthetic_fix_interval_s", std::to_string(synthetic_fix_interval_s));
        kv.emplace_back("synthetic_pattern_strength", fmt_double(synthetic_pattern_strength));
        kv.emplace_back("synthetic_seed", std::to_string(synthetic_seed));
        kv.emplace_back("synthetic_start_date", format_date(synthetic_start_day));
        kv.emplace_back("grid_lon_min", fmt_double(grid_bbox.lon_min));
        kv.emplace_back("grid_lat_min", fmt_double(grid_bbox.lat_min));
        kv.emplace_back("grid_lon_max", fmt_double(grid_bbox.lon_max));
        kv.emplace_back("grid_lat_max", fmt_double(grid_bbox.lat_max));
        kv.emplace_back("grid_rows", std::to_string(grid_rows));
        kv.emplace_back("grid_cols", std::to_string(grid_cols));
        kv.emplace_back("max_speed_ms", fmt_double(max_speed_ms));
        kv.emplace_back("battery_capacity_kwh", fmt_double(soc.capacity_kwh));
        kv.emplace_back("consumption_kwh_per_km", fmt_double(soc.consumption_rate_kwh_per_km));
        kv.emplace_back("evar_mode", evar_mode == EvarMode::across_evs ? "across_evs" : "across_time");
        kv.emplace_back("split_start_date", format_date(split_start_day));
        kv.emplace_back("split_train_days", std::to_string(split_train_days));
        kv.emplace_back("subset", subset.str());
        kv.emplace_back("delta_t", std::to_string(delta_t));
        kv.emplace_back("hourly_retrain", hourly_retrain ? "true" : "false");
        kv.emplace_back("nn_hidden", std::to_string(nn_hidden));
        kv.emplace_back("nn_learning_rate", fmt_double(nn_learning_rate));
        kv.emplace_back("nn_max_epochs", std::to_string(nn_max_epochs));
        kv.emplace_back("nn_patience", std::to_string(nn_patience));
        kv.emplace_back("nn_l2", fmt_double(nn_l2));
        kv.emplace_back("nn_seed", std::to_string(nn_seed));
        kv.emplace_back("crf_levels", std::to_string(crf_levels));
        kv.emplace_back("crf_l2", fmt_double(crf_l2));
        kv.emplace_back("crf_learning_rate", fmt_double(crf_learning_rate));
        kv.emplace_back("crf_max_iters", std::to_string(crf_max_iters));
        kv.emplace_back("crf_tol", fmt_double(crf_tol));
        kv.emplace_back("crf_seed", std::to_string(crf_seed));
        kv.emplace_back("out_dir", out_dir);
        return kv;
    }
};

namespace detail {

inline std::uint64_t parse_u64(std::string_view v, const std::string& key) {
    auto n = parse_int(v);
    if (!n || *n < 0) throw ConfigError("config: bad value for " + key);
    return static_cast<std::uint64_t>(*n);
}

inline int parse_i(std::string_view v, const std::string& key) {
    auto n = parse_int(v);
    if (!n || *n < INT32_MIN || *n > INT32_MAX) throw ConfigError("config: bad value for " + key);
    return static_cast<int>(*n);
}

inline double parse_d(std::string_view v, const std::string& key) {
    auto x = parse_double(v);
    if (!x) throw ConfigError("config: bad value for " + key);
    return *x;
}

inline bool parse_b(std::string_view v, const std::string& key) {
    if (v == "true") return true;
    if (v == "false") return false;
    throw ConfigError("config: " + key + " must be true or false");
}

inline std::int64_t parse_day(std::string_view v, const std::string& key) {
    auto d = parse_date(v);
    if (!d) throw ConfigError("config: " + key + " must be YYYY-MM-DD");
    return *d;
}

} // namespace detail

/// Parses a key = value document. Blank lines and lines starting with '#'
/// are skipped; every key must be known and appear at most once.
inline PipelineConfig parse_config(std::istream& in) {
    PipelineConfig cfg;
    std::map<std::string, std::string, std::less<>> seen;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string_view sv = trim(line);
        if (sv.empty() || sv.front() == '#') continue;
        const auto eq = sv.find('=');
        if (eq == std::string_view::npos) throw ParseError(line_no, "expected key = value");
        const std::string key(trim(sv.substr(0, eq)));
        const std::string value(trim(sv.substr(eq + 1)));
        if (key.empty()) throw ParseError(line_no, "empty key");
        if (!seen.emplace(key, value).second) throw ParseError(line_no, "duplicate key " + key);
    }
    using detail::parse_b;
    using detail::parse_d;
    using detail::parse_day;
    using detail::parse_i;
    using detail::parse_u64;
    for (const auto& [key, value] : seen) {
        if (key == "config_version") cfg.config_version = parse_i(value, key);
        else if (key == "input_kind") {
            if (value == "synthetic") cfg.input_kind = InputKind::synthetic;
            else if (value == "trajectories") cfg.input_kind = InputKind::trajectories;
            else if (value == "features") cfg.input_kind = InputKind::features;
            else throw ConfigError("config: input_kind must be synthetic, trajectories or features");
        } else if (key == "trajectories_path") cfg.trajectories_path = value;
        else if (key == "features_path") cfg.features_path = value;
        else if (key == "synthetic_vehicles") cfg.synthetic_vehicles = parse_i(value, key);
        else if (key == "synthetic_days") cfg.synthetic_days = parse_i(value, key);
        else if (key == "synthetic_fix_interval_s") cfg.synthetic_fix_interval_s = parse_i(value, key);
        else if (key == "synthetic_pattern_strength") cfg.synthetic_pattern_strength = parse_d(value, key);
        else if (key == "synthetic_seed") cfg.synthetic_seed = parse_u64(value, key);
        else if (key == "synthetic_start_date") cfg.synthetic_start_day = parse_day(value, key);
        else if (key == "grid_lon_min") cfg.grid_bbox.lon_min = parse_d(value, key);
        else if (key == "grid_lat_min") cfg.grid_bbox.lat_min = parse_d(value, key);
        else if (key == "grid_lon_max") cfg.grid_bbox.lon_max = parse_d(value, key);
        else if (key == "grid_lat_max") cfg.grid_bbox.lat_max = parse_d(value, key);
        else if (key == "grid_rows") cfg.grid_rows = parse_i(value, key);
        else if (key == "grid_cols") cfg.grid_cols = parse_i(value, key);
        else if (key == "max_speed_ms") cfg.max_speed_ms = parse_d(value, key);
        else if (key == "battery_capacity_kwh") cfg.soc.capacity_kwh = parse_d(value, key);
        else if (key == "consumption_kwh_per_km") cfg.soc.consumption_rate_kwh_per_km = parse_d(value, key);
        else if (key == "evar_mode") {
            if (value == "across_evs") cfg.evar_mode = EvarMode::across_evs;
            else if (value == "across_time") cfg.evar_mode = EvarMode::across_time;
            else throw ConfigError("config: evar_mode must be across_evs or across_time");
        } else if (key == "split_start_date") cfg.split_start_day = parse_day(value, key);
        else if (key == "split_train_days") cfg.split_train_days = parse_i(value, key);
        else if (key == "subset") cfg.subset = FeatureSubset::parse(value);
        else if (key == "delta_t") cfg.delta_t = parse_i(value, key);
        else if (key == "hourly_retrain") cfg.hourly_retrain = parse_b(value, key);
        else if (key == "nn_hidden") cfg.nn_hidden = parse_i(value, key);
        else if (key == "nn_learning_rate") cfg.nn_learning_rate = parse_d(value, key);
        else if (key == "nn_max_epochs") cfg.nn_max_epochs = parse_i(value, key);
        else if (key == "nn_patience") cfg.nn_patience = parse_i(value, key);
        else if (key == "nn_l2") cfg.nn_l2 = parse_d(value, key);
        else if (key == "nn_seed") cfg.nn_seed = parse_u64(value, key);
        else if (key == "crf_levels") cfg.crf_levels = parse_i(value, key);
        else if (key == "crf_l2") cfg.crf_l2 = parse_d(value, key);
        else if (key == "crf_learning_rate") cfg.crf_learning_rate = parse_d(value, key);
        else if (key == "crf_max_iters") cfg.crf_max_iters = parse_i(value, key);
        else if (key == "crf_tol") cfg.crf_tol = parse_d(value, key);
        else if (key == "crf_seed") cfg.crf_seed = parse_u64(value, key);
        else if (key == "out_dir") cfg.out_dir = value;
        else throw ConfigError("config: unknown key " + key);
    }
    return cfg;
}

inline void write_config(std::ostream& out, const PipelineConfig& cfg) {
    out << "# evcast config v1\n";
    for (const auto& [key, value] : cfg.items()) out << key << " = " << value << '\n';
}

} // namespace evcast
