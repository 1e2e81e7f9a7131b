// Command-line driver: generate synthetic fleets, run the prediction
// pipeline, sweep feature subsets, and export per-hour grid heatmaps.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "evcast/evcast.hpp"

namespace {

namespace fs = std::filesystem;
using namespace evcast;

PipelineConfig load_config(const std::string& path) {
    if (path.empty()) return PipelineConfig{};
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    return parse_config(in);
}

void make_out_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw ConfigError("cannot create output directory " + dir + ": " + ec.message());
}

std::ofstream open_output(const fs::path& path) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write " + path.string());
    return out;
}

std::ifstream open_data(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path);
    return in;
}

struct Overrides {
    std::optional<std::string> subset;
    std::optional<int> delta_t;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out_dir;

    void apply(PipelineConfig& cfg) const {
        if (subset) cfg.subset = FeatureSubset::parse(*subset);
        if (delta_t) cfg.delta_t = *delta_t;
        if (seed) {
            cfg.synthetic_seed = *seed;
            cfg.nn_seed = *seed;
            cfg.crf_seed = *seed;
        }
        if (out_dir) cfg.out_dir = *out_dir;
    }
};

std::vector<SpatialFeatureRow> acquire_features(const PipelineConfig& cfg, const RegionGrid& grid) {
    std::vector<Trajectory> trajs;
    switch (cfg.input_kind) {
        case InputKind::features: {
            auto in = open_data(cfg.features_path);
            return read_feature_rows(in);
        }
        case InputKind::synthetic:
            trajs = generate_synthetic_fleet(cfg.synthetic_config());
            break;
        case InputKind::trajectories: {
            auto in = open_data(cfg.trajectories_path);
            trajs = parse_trajectory_file(in);
            break;
        }
    }
    trajs = clean_trajectories(std::move(trajs), cfg.grid_bbox, cfg.max_speed_ms);
    return extract_spatial_features(trajs, grid, cfg.soc, cfg.evar_mode);
}

int cmd_generate(const PipelineConfig& cfg) {
    make_out_dir(cfg.out_dir);
    const auto trajs = generate_synthetic_fleet(cfg.synthetic_config());
    const fs::path path = fs::path(cfg.out_dir) / "trajectories.txt";
    auto out = open_output(path);
    write_trajectories(out, trajs);
    std::size_t fixes = 0;
    for (const auto& t : trajs) fixes += t.fixes.size();
    std::cout << "wrote " << path.string() << " (" << trajs.size() << " vehicles, " << fixes
              << " fixes)\n";
    return 0;
}

int cmd_run(const PipelineConfig& cfg) {
    make_out_dir(cfg.out_dir);
    const RegionGrid grid(cfg.grid_bbox, cfg.grid_rows, cfg.grid_cols);
    const auto rows = acquire_features(cfg, grid);
    const FeatureTable features(rows, grid);
    const SplitPlan split = cfg.split_plan();
    const PipelineSetup setup = cfg.pipeline_setup();

    PipelineResult result = run_full(features, grid, split, setup);
    result.manifest.config_echo = cfg.items();

    const fs::path dir(cfg.out_dir);
    {
        auto out = open_output(dir / "config.txt");
        write_config(out, cfg);
    }
    if (cfg.input_kind != InputKind::features) {
        auto out = open_output(dir / "features.txt");
        write_feature_rows(out, features.rows());
    }
    {
        auto out = open_output(dir / "models.txt");
        write_models(out, result.models);
    }
    {
        auto out = open_output(dir / "predictions.txt");
        write_predictions(out, result.records);
    }
    {
        auto out = open_output(dir / "manifest.txt");
        write_manifest(out, result.manifest);
    }
    std::cout << "lambda_star = " << fmt_double(result.manifest.lambda_star) << '\n';
    std::cout << "stp_ave_nmse = " << fmt_double(result.manifest.stp.ave) << '\n';
    std::cout << "wrote " << (dir / "manifest.txt").string() << '\n';
    return 0;
}

int cmd_ablate(const PipelineConfig& cfg) {
    make_out_dir(cfg.out_dir);
    const RegionGrid grid(cfg.grid_bbox, cfg.grid_rows, cfg.grid_cols);
    const auto rows = acquire_features(cfg, grid);
    const FeatureTable features(rows, grid);
    const auto subsets = default_ablation_subsets();
    auto manifests =
        run_ablation(features, grid, cfg.split_plan(), cfg.pipeline_setup(), subsets);
    for (auto& m : manifests) m.config_echo = cfg.items();

    const fs::path dir(cfg.out_dir);
    {
        auto out = open_output(dir / "config.txt");
        write_config(out, cfg);
    }
    {
        auto out = open_output(dir / "ablation.txt");
        write_ablation(out, manifests);
    }
    for (const auto& m : manifests)
        std::cout << m.subset.str() << " stp_ave_nmse = " << fmt_double(m.stp.ave) << '\n';
    std::cout << "wrote " << (dir / "ablation.txt").string() << '\n';
    return 0;
}

int cmd_export_heatmap(const PipelineConfig& cfg, const std::string& predictions_path, int hour,
                       const std::string& predictor_str) {
    const Predictor predictor = parse_predictor(predictor_str);
    const std::string path = predictions_path.empty()
                                 ? (fs::path(cfg.out_dir) / "predictions.txt").string()
                                 : predictions_path;
    auto in = open_data(path);
    const auto records = read_predictions(in);
    make_out_dir(cfg.out_dir);
    const fs::path out_path = fs::path(cfg.out_dir) /
                              ("heatmap_" + std::string(predictor_name(predictor)) + "_h" +
                               std::to_string(hour) + ".txt");
    auto out = open_output(out_path);
    write_heatmap(out, records, cfg.grid_rows, cfg.grid_cols, hour, predictor);
    std::cout << "wrote " << out_path.string() << '\n';
    return 0;
}

template <typename F>
int guarded(F&& body) {
    try {
        return body();
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 1;
    } catch (const NumericError& e) {
        std::cerr << "numeric error: " << e.what() << '\n';
        return 3;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"hourly EV-fleet battery energy prediction over a city grid"};
    app.require_subcommand(1);

    std::string config_path;
    Overrides ov;
    std::string subset_arg;
    int delta_t_arg = 0;
    std::uint64_t seed_arg = 0;
    std::string out_arg;
    std::string predictions_path;
    std::string predictor_str = "STP";
    int hour = 0;

    auto add_config = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path, "config file (key = value lines)");
    };
    auto add_out = [&](CLI::App* cmd) {
        return cmd->add_option("--out", out_arg, "output directory (overrides out_dir)");
    };
    auto add_seed = [&](CLI::App* cmd) {
        return cmd->add_option("--seed", seed_arg, "override every RNG seed in the config");
    };

    CLI::App* gen = app.add_subcommand("generate", "write a synthetic GPS trajectory file");
    add_config(gen);
    auto* gen_seed = add_seed(gen);
    auto* gen_out = add_out(gen);

    CLI::App* run = app.add_subcommand("run", "train, combine, predict and evaluate");
    add_config(run);
    auto* run_subset = run->add_option("--subset", subset_arg,
                                       "feature subset, e.g. \"F_D,F_N,F_E\"");
    auto* run_dt = run->add_option("--delta-t", delta_t_arg, "prediction horizon in hours")
                       ->check(CLI::Range(1, 23));
    auto* run_seed = add_seed(run);
    auto* run_out = add_out(run);

    CLI::App* ablate = app.add_subcommand("ablate", "run every standard feature subset");
    add_config(ablate);
    auto* abl_dt = ablate->add_option("--delta-t", delta_t_arg, "prediction horizon in hours")
                       ->check(CLI::Range(1, 23));
    auto* abl_seed = add_seed(ablate);
    auto* abl_out = add_out(ablate);

    CLI::App* heatmap = app.add_subcommand("export-heatmap",
                                           "write one hour of predictions as a grid table");
    add_config(heatmap);
    heatmap->add_option("--predictions", predictions_path,
                        "predictions file (default: <out_dir>/predictions.txt)");
    heatmap->add_option("--hour", hour, "hour of day, 1..24")
        ->required()
        ->check(CLI::Range(1, 24));
    heatmap->add_option("--predictor", predictor_str, "SP, TP or STP (default STP)");
    auto* hm_out = add_out(heatmap);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    return guarded([&]() -> int {
        PipelineConfig cfg = load_config(config_path);
        if (run_subset->count() > 0) ov.subset = subset_arg;
        if (run_dt->count() > 0 || abl_dt->count() > 0) ov.delta_t = delta_t_arg;
        if (gen_seed->count() > 0 || run_seed->count() > 0 || abl_seed->count() > 0)
            ov.seed = seed_arg;
        if (gen_out->count() > 0 || run_out->count() > 0 || abl_out->count() > 0 ||
            hm_out->count() > 0)
            ov.out_dir = out_arg;
        ov.apply(cfg);
        cfg.validate();
        if (gen->parsed()) return cmd_generate(cfg);
        if (run->parsed()) return cmd_run(cfg);
        if (ablate->parsed()) return cmd_ablate(cfg);
        if (heatmap->parsed()) return cmd_export_heatmap(cfg, predictions_path, hour, predictor_str);
        throw ConfigError("no command given");
    });
}
