// Minimal end-to-end run: generate a small synthetic fleet, train both
// predictors, fit the combination coefficient, and print the headline
// numbers for the test day.

#include <iomanip>
#include <iostream>

#include "evcast/evcast.hpp"

int main() {
    using namespace evcast;

    PipelineConfig cfg;
    cfg.synthetic_vehicles = 40;
    cfg.synthetic_days = 4;
    cfg.synthetic_fix_interval_s = 600;
    cfg.split_train_days = 2;
    cfg.nn_max_epochs = 300;
    cfg.nn_patience = 50;
    cfg.hourly_retrain = false;
    cfg.validate();

    RegionGrid grid(cfg.grid_bbox, cfg.grid_rows, cfg.grid_cols);
    auto trajs = clean_trajectories(generate_synthetic_fleet(cfg.synthetic_config()),
                                    cfg.grid_bbox, cfg.max_speed_ms);
    const auto rows = extract_spatial_features(trajs, grid, cfg.soc, cfg.evar_mode);
    const FeatureTable features(rows, grid);

    const PipelineResult res = run_full(features, grid, cfg.split_plan(), cfg.pipeline_setup());
    const auto& m = res.manifest;

    std::cout << std::fixed << std::setprecision(3);
    std::cout << "lambda* = " << m.lambda_star << " (spatial weight " << m.w_star << ")\n";
    std::cout << "average test-day NMSE: spatial " << m.sp.ave << ", temporal " << m.tp.ave
              << ", combined " << m.stp.ave << "\n\n";

    std::cout << "region 1, first six hours of " << format_date(m.split.test_day) << ":\n";
    std::cout << std::setprecision(1);
    for (const auto& r : res.records) {
        if (r.region != 1 || r.hour > 6) continue;
        std::cout << "  hour " << r.hour << ": true " << std::setw(6) << r.e_true
                  << " kWh, predicted " << std::setw(6) << r.stp << " kWh\n";
    }
    return 0;
}
