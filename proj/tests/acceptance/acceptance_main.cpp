// Acceptance gate: one self-contained check per release criterion. Each
// check prints a single PASS/FAIL line with its runtime and a short
// measurement summary; the process exits nonzero if any check fails.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "evcast/evcast.hpp"

namespace {

using namespace evcast;
using Clock = std::chrono::steady_clock;

double elapsed_s(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string g3(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
}

struct Outcome {
    bool pass = false;
    std::string detail;
};

// ---------------------------------------------------------------------------
// shared fixtures

struct Fixture {
    RegionGrid grid;
    FeatureTable features;
    SplitPlan split;
    PipelineSetup setup;
};

Fixture make_fixture(const PipelineConfig& cfg) {
    RegionGrid grid(cfg.grid_bbox, cfg.grid_rows, cfg.grid_cols);
    auto trajs = clean_trajectories(generate_synthetic_fleet(cfg.synthetic_config()),
                                    cfg.grid_bbox, cfg.max_speed_ms);
    const auto rows = extract_spatial_features(trajs, grid, cfg.soc, cfg.evar_mode);
    FeatureTable features(rows, grid);
    return Fixture{grid, std::move(features), cfg.split_plan(), cfg.pipeline_setup()};
}

/// The default config IS the reference fleet: 200 vehicles, 6 days,
/// pattern_strength 0.8, fixed seeds.
const Fixture& reference_fixture() {
    static const Fixture f = make_fixture(PipelineConfig{});
    return f;
}

const PipelineResult& reference_run() {
    static const PipelineResult r = [] {
        const Fixture& f = reference_fixture();
        return run_full(f.features, f.grid, f.split, f.setup);
    }();
    return r;
}

/// Smaller fleet and shorter training budgets for the checks that exercise
/// harness behavior (ablation sweep, determinism) rather than accuracy.
PipelineConfig small_config() {
    PipelineConfig cfg;
    cfg.synthetic_vehicles = 60;
    cfg.synthetic_fix_interval_s = 600;
    cfg.nn_max_epochs = 400;
    cfg.nn_patience = 60;
    return cfg;
}

// ---------------------------------------------------------------------------
// 1. CRF: forward-backward vs exhaustive enumeration, analytic gradient vs
//    central finite differences.

Outcome check_crf() {
    const auto t0 = Clock::now();
    auto rng = make_rng(424242);
    double worst_z = 0.0, worst_p = 0.0;

    for (int trial = 0; trial < 200; ++trial) {
        const int L = 2 + static_cast<int>(rng() % 2);
        const int T = 2 + static_cast<int>(rng() % 5);
        const int H = 4;
        CrfModel model(L, H, 0.1);
        for (double& w : model.mu) w = uniform(rng, -1.5, 1.5);
        for (double& w : model.gamma) w = uniform(rng, -1.5, 1.5);
        std::vector<int> x(static_cast<std::size_t>(T));
        for (int& h : x) h = 1 + static_cast<int>(rng() % H);
        std::optional<int> clamp;
        if (trial % 3 == 0) clamp = 1 + static_cast<int>(rng() % L);

        // enumerate every labeling (clamped first position stays fixed)
        const ScoreTables tables = score_tables(model, x);
        std::vector<std::vector<int>> labelings;
        std::vector<double> scores;
        std::vector<int> y(static_cast<std::size_t>(T), 1);
        if (clamp) y[0] = *clamp;
        const int first_free = clamp ? 1 : 0;
        while (true) {
            scores.push_back(sequence_score(tables, y));
            labelings.push_back(y);
            int pos = T - 1;
            for (; pos >= first_free; --pos) {
                if (++y[static_cast<std::size_t>(pos)] <= L) break;
                y[static_cast<std::size_t>(pos)] = 1;
            }
            if (pos < first_free) break;
        }
        const double mx = *std::max_element(scores.begin(), scores.end());
        double sum = 0.0;
        for (double s : scores) sum += std::exp(s - mx);
        const double log_z = mx + std::log(sum);

        const MarginalTable m = forward_backward(model, x, clamp);
        worst_z = std::max(worst_z, std::abs(m.log_z - log_z) / std::max(1.0, std::abs(log_z)));

        for (int t = 0; t < T; ++t) {
            for (int l = 1; l <= L; ++l) {
                double ref = 0.0;
                for (std::size_t k = 0; k < labelings.size(); ++k)
                    if (labelings[k][static_cast<std::size_t>(t)] == l)
                        ref += std::exp(scores[k] - log_z);
                worst_p = std::max(worst_p, std::abs(m.prob(t, l) - ref));
            }
        }
        for (int t = 0; t + 1 < T; ++t) {
            for (int a = 1; a <= L; ++a) {
                for (int b = 1; b <= L; ++b) {
                    double ref = 0.0;
                    for (std::size_t k = 0; k < labelings.size(); ++k)
                        if (labelings[k][static_cast<std::size_t>(t)] == a &&
                            labelings[k][static_cast<std::size_t>(t) + 1] == b)
                            ref += std::exp(scores[k] - log_z);
                    worst_p = std::max(worst_p, std::abs(m.pair_prob(t, a, b) - ref));
                }
            }
        }
    }

    double worst_g = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
        CrfModel model(3, 4, 0.1);
        for (double& w : model.mu) w = uniform(rng, -1.0, 1.0);
        for (double& w : model.gamma) w = uniform(rng, -1.0, 1.0);
        std::vector<LabeledSequence> data(2);
        for (auto& seq : data) {
            seq.x.resize(5);
            seq.y.resize(5);
            for (int& h : seq.x) h = 1 + static_cast<int>(rng() % 4);
            for (int& l : seq.y) l = 1 + static_cast<int>(rng() % 3);
        }
        const CrfGradient g = gradient(model, data);
        const double h = 1e-6;
        auto fd_check = [&](std::vector<double>& w, const std::vector<double>& gw) {
            for (std::size_t i = 0; i < w.size(); ++i) {
                const double save = w[i];
                w[i] = save + h;
                const double up = log_likelihood(model, data);
                w[i] = save - h;
                const double dn = log_likelihood(model, data);
                w[i] = save;
                const double fd = (up - dn) / (2.0 * h);
                worst_g = std::max(worst_g, std::abs(gw[i] - fd) / std::max(1.0, std::abs(fd)));
            }
        };
        fd_check(model.mu, g.mu);
        fd_check(model.gamma, g.gamma);
    }

    const double secs = elapsed_s(t0);
    Outcome o;
    o.pass = worst_z <= 1e-9 && worst_p <= 1e-9 && worst_g <= 1e-5 && secs < 10.0;
    o.detail = "200 models: logZ err " + g3(worst_z) + ", marginal err " + g3(worst_p) +
               "; grad err " + g3(worst_g) + " (limits 1e-9 / 1e-9 / 1e-5)";
    return o;
}

// ---------------------------------------------------------------------------
// 2. NN: backprop vs finite differences on random tiny networks; fits the
//    linear fixture y = 3x + noise.

Outcome check_nn() {
    const auto t0 = Clock::now();
    auto rng = make_rng(8675309);
    double worst_g = 0.0;

    for (int trial = 0; trial < 50; ++trial) {
        const int in_dim = 2 + static_cast<int>(rng() % 3);
        const int hidden = 1 + static_cast<int>(rng() % 3);
        detail::RawNet net;
        net.input_dim = in_dim;
        net.hidden_dim = hidden;
        net.w1.resize(static_cast<std::size_t>(hidden * in_dim));
        net.b1.resize(static_cast<std::size_t>(hidden));
        net.w2.resize(static_cast<std::size_t>(hidden));
        for (double& w : net.w1) w = uniform(rng, -0.8, 0.8);
        for (double& w : net.b1) w = uniform(rng, -0.8, 0.8);
        for (double& w : net.w2) w = uniform(rng, -0.8, 0.8);
        net.b2 = uniform(rng, -0.8, 0.8);

        std::vector<Sample> samples(4 + rng() % 4);
        for (auto& s : samples) {
            s.x.resize(static_cast<std::size_t>(in_dim));
            for (double& v : s.x) v = uniform(rng, -1.0, 1.0);
            s.y = uniform(rng, -1.0, 1.0);
        }
        const double l2 = 1e-3;
        const detail::RawNet g = detail::nn_gradient(net, samples, l2);
        const double h = 1e-5;
        auto fd_at = [&](double& w, double gw) {
            const double save = w;
            w = save + h;
            const double up = detail::nn_loss(net, samples, l2);
            w = save - h;
            const double dn = detail::nn_loss(net, samples, l2);
            w = save;
            const double fd = (up - dn) / (2.0 * h);
            worst_g = std::max(worst_g, std::abs(gw - fd) / std::max(1.0, std::abs(fd)));
        };
        for (std::size_t i = 0; i < net.w1.size(); ++i) fd_at(net.w1[i], g.w1[i]);
        for (std::size_t i = 0; i < net.b1.size(); ++i) fd_at(net.b1[i], g.b1[i]);
        for (std::size_t i = 0; i < net.w2.size(); ++i) fd_at(net.w2[i], g.w2[i]);
        fd_at(net.b2, g.b2);
    }

    // linear fixture: y = 3x + gaussian noise, sigma = 0.01
    std::normal_distribution<double> noise(0.0, 0.01);
    std::vector<Sample> linear;
    for (int i = 0; i <= 40; ++i)
        linear.push_back({{i * 0.05}, 3.0 * (i * 0.05) + noise(rng)});
    NNTrainConfig cfg;
    cfg.hidden_dim = 8;
    cfg.learning_rate = 0.1;
    cfg.max_epochs = 2500;
    cfg.patience = 300;
    cfg.rng_seed = 5;
    const NNModel model = train(linear, cfg);
    double mse = 0.0, mean = 0.0;
    for (const auto& s : linear) mean += s.y;
    mean /= static_cast<double>(linear.size());
    double var = 0.0;
    for (const auto& s : linear) {
        const double e = model.predict(s.x) - s.y;
        mse += e * e;
        var += (s.y - mean) * (s.y - mean);
    }
    mse /= static_cast<double>(linear.size());
    var /= static_cast<double>(linear.size());
    const double ratio = mse / var;

    const double secs = elapsed_s(t0);
    Outcome o;
    o.pass = worst_g <= 1e-4 && ratio < 0.01 && secs < 30.0;
    o.detail = "50 nets: grad err " + g3(worst_g) + " (limit 1e-4); linear fit mse/var " +
               g3(ratio) + " (limit 0.01)";
    return o;
}

// ---------------------------------------------------------------------------
// 3. Combiner: closed-form optimum vs direct grid evaluation, endpoint
//    dominance.

Outcome check_combiner() {
    const auto t0 = Clock::now();
    constexpr double w_cap = 1.0 - 1e-9;
    auto rng = make_rng(31337);
    double worst_w = 0.0;
    int endpoint_violations = 0;

    for (int trial = 0; trial < 100; ++trial) {
        std::vector<RegionTriples> regions(1 + rng() % 4);
        int id = 0;
        for (auto& reg : regions) {
            reg.region = ++id;
            const std::size_t n = 5 + rng() % 26;
            reg.truth.resize(n);
            reg.sp.resize(n);
            reg.tp.resize(n);
            for (std::size_t i = 0; i < n; ++i) {
                reg.truth[i] = uniform(rng, 0.1, 10.0);
                reg.sp[i] = reg.truth[i] + uniform(rng, -2.0, 2.0);
                reg.tp[i] = reg.truth[i] + uniform(rng, -2.0, 2.0);
            }
        }
        const LambdaResult res = optimize_lambda(regions);

        double grid_w = 0.0, grid_f = detail::combined_objective(regions, 0.0);
        for (int i = 1; i <= 1000; ++i) {
            const double wi = w_cap * static_cast<double>(i) / 1000.0;
            const double fi = detail::combined_objective(regions, wi);
            if (fi < grid_f) {
                grid_f = fi;
                grid_w = wi;
            }
        }
        worst_w = std::max(worst_w, std::abs(res.w_star - grid_w));
        if (res.objective > detail::combined_objective(regions, 0.0) ||
            res.objective > detail::combined_objective(regions, w_cap))
            ++endpoint_violations;
    }

    const double secs = elapsed_s(t0);
    Outcome o;
    o.pass = worst_w <= 1e-3 + 1e-9 && endpoint_violations == 0 && secs < 5.0;
    o.detail = "100 instances: max |w* - grid| " + g3(worst_w) + " (limit 1e-3), " +
               std::to_string(endpoint_violations) + " endpoint violations";
    return o;
}

// ---------------------------------------------------------------------------
// 4. Feature invariants on the reference synthetic fleet.

Outcome check_features() {
    const PipelineConfig cfg;
    const RegionGrid grid(cfg.grid_bbox, cfg.grid_rows, cfg.grid_cols);
    const auto trajs = clean_trajectories(generate_synthetic_fleet(cfg.synthetic_config()),
                                          cfg.grid_bbox, cfg.max_speed_ms);
    const auto rows = extract_spatial_features(trajs, grid, cfg.soc, cfg.evar_mode);
    auto series = build_energy_series(rows);

    int norm_violations = 0;
    for (const auto& s : series) {
        double sum = 0.0;
        for (double v : s.e_norm) sum += v;
        if (!(sum == 0.0 || std::abs(sum - 1.0) <= 1e-12)) ++norm_violations;
    }

    int level_violations = 0;
    for (int region = 1; region <= grid.num_regions(); ++region) {
        std::vector<EnergySeries> mine;
        for (const auto& s : series)
            if (s.region == region) mine.push_back(s);
        const LevelRange range = level_range(mine);
        discretize(mine, range, 10);
        for (const auto& s : mine)
            for (int lvl : s.level)
                if (lvl < 1 || lvl > 10) ++level_violations;
    }

    // replay each trajectory's within-day distance walk: the battery model
    // must never gain charge between fixes of the same day
    int soc_violations = 0;
    for (const auto& t : trajs) {
        double km = 0.0;
        double prev_soc = 1.0;
        for (std::size_t i = 0; i < t.fixes.size(); ++i) {
            if (i == 0 || day_of(t.fixes[i].timestamp) != day_of(t.fixes[i - 1].timestamp)) {
                km = 0.0;
                prev_soc = compute_soc(km, cfg.soc);
                continue;
            }
            km += segment_distance(t.fixes[i - 1], t.fixes[i]) / 1000.0;
            const double soc = compute_soc(km, cfg.soc);
            if (soc > prev_soc + 1e-15) ++soc_violations;
            prev_soc = soc;
        }
    }

    const std::array<int, 8> center{1, 2, 3, 5, 7, 9, 10, 11};
    const std::array<int, 8> corner{2, 3, 5, 6, 7, 9, 10, 11};
    const bool neighbors_ok = grid.neighbor_set(6) == center && grid.neighbor_set(1) == corner;

    Outcome o;
    o.pass = norm_violations == 0 && level_violations == 0 && soc_violations == 0 && neighbors_ok;
    o.detail = std::to_string(series.size()) + " region-days: " +
               std::to_string(norm_violations) + " e_norm, " + std::to_string(level_violations) +
               " level, " + std::to_string(soc_violations) + " SOC violations; neighbor sets " +
               (neighbors_ok ? "exact" : "WRONG");
    return o;
}

// ---------------------------------------------------------------------------
// 5. End-to-end accuracy on the reference fleet at delta_t = 1.

Outcome check_e2e() {
    const auto t0 = Clock::now();
    const PipelineResult& run = reference_run();
    const ExperimentManifest& man = run.manifest;

    double worst = 0.0;
    int worst_region = 0;
    for (const auto& r : man.regions) {
        if (r.excluded) continue;
        if (r.nmse_stp > worst) {
            worst = r.nmse_stp;
            worst_region = r.region;
        }
    }

    // lambda*-dominance on the validation day: the blended predictor must
    // not be worse than the temporal predictor it interpolates from
    std::vector<RegionTriples> usable;
    for (const auto& reg : run.validation.triples) {
        double den = 0.0;
        for (double v : reg.truth) den += v * v;
        if (den > 0.0) usable.push_back(reg);
    }
    const double stp_val = run.validation.lambda.objective;
    const double tp_val = detail::combined_objective(usable, 0.0);

    const double secs = elapsed_s(t0);
    const bool all_regions = man.regions.size() == 16 && man.excluded_regions.empty();
    Outcome o;
    o.pass = all_regions && worst < 0.15 && man.stp.ave < 0.10 && stp_val <= tp_val &&
             secs < 300.0;
    o.detail = "stp ave " + g3(man.stp.ave) + " (limit 0.1), worst region " +
               std::to_string(worst_region) + " = " + g3(worst) + " (limit 0.15); val stp " +
               g3(stp_val) + " <= tp " + g3(tp_val) + "; lambda* " + g3(man.lambda_star);
    return o;
}

// ---------------------------------------------------------------------------
// 6. Horizon sweep: the spatial predictor must not get better as the input
//    moves further from the target hour.

Outcome check_horizon() {
    const Fixture& f = reference_fixture();
    std::array<double, 3> sp_ave{};
    sp_ave[0] = reference_run().manifest.sp.ave;
    for (int dt : {2, 3}) {
        PipelineSetup setup = f.setup;
        setup.delta_t = dt;
        setup.nn.delta_t = dt;
        const auto res = run_full(f.features, f.grid, f.split, setup);
        sp_ave[static_cast<std::size_t>(dt - 1)] = res.manifest.sp.ave;
    }
    Outcome o;
    o.pass = sp_ave[2] >= sp_ave[0];
    o.detail = "sp ave nmse at dt 1/2/3: " + g3(sp_ave[0]) + " / " + g3(sp_ave[1]) + " / " +
               g3(sp_ave[2]);
    return o;
}

// ---------------------------------------------------------------------------
// 7. Ablation harness: all six standard subsets, descending STP table.

Outcome check_ablation() {
    PipelineConfig cfg = small_config();
    cfg.hourly_retrain = false; // this check is about the sweep, not accuracy
    const Fixture f = make_fixture(cfg);
    const auto subsets = default_ablation_subsets();
    const auto manifests = run_ablation(f.features, f.grid, f.split, f.setup, subsets);

    bool sorted = true;
    for (std::size_t i = 1; i < manifests.size(); ++i)
        if (manifests[i - 1].stp.ave < manifests[i].stp.ave) sorted = false;

    std::set<std::string> seen;
    for (const auto& m : manifests) seen.insert(m.subset.str());
    const std::set<std::string> expected{"F_V,F_N,F_E", "F_V,F_D,F_N,F_E", "F_N,F_E",
                                         "F_N",         "F_E",             "F_D,F_N,F_E"};

    std::ostringstream table;
    write_ablation(table, manifests);
    const bool has_default = seen.count("F_D,F_N,F_E") > 0 &&
                             PipelineConfig{}.subset.str() == "F_D,F_N,F_E";

    Outcome o;
    o.pass = manifests.size() == 6 && sorted && seen == expected && has_default &&
             !table.str().empty();
    o.detail = std::to_string(manifests.size()) + " subsets, " +
               (sorted ? "descending stp" : "NOT SORTED") + ", worst " +
               manifests.front().subset.str() + " = " + g3(manifests.front().stp.ave) +
               ", best " + manifests.back().subset.str() + " = " +
               g3(manifests.back().stp.ave);
    return o;
}

// ---------------------------------------------------------------------------
// 8. Determinism: two full runs from the same config give byte-identical
//    reports.

Outcome check_determinism() {
    const PipelineConfig cfg = small_config();
    auto render = [&cfg]() {
        const Fixture f = make_fixture(cfg);
        PipelineResult res = run_full(f.features, f.grid, f.split, f.setup);
        res.manifest.config_echo = cfg.items();
        std::ostringstream manifest, predictions;
        write_manifest(manifest, res.manifest);
        write_predictions(predictions, res.records);
        return std::pair<std::string, std::string>(manifest.str(), predictions.str());
    };
    const auto a = render();
    const auto b = render();
    Outcome o;
    o.pass = a.first == b.first && a.second == b.second;
    o.detail = std::string("manifests ") + (a.first == b.first ? "identical" : "DIFFER") +
               ", predictions " + (a.second == b.second ? "identical" : "DIFFER") + " (" +
               std::to_string(a.first.size()) + " bytes)";
    return o;
}

} // namespace

int main() {
    struct Criterion {
        const char* name;
        Outcome (*fn)();
    };
    const Criterion criteria[] = {
        {"crf_marginals_and_gradient", check_crf},
        {"nn_gradient_and_linear_fit", check_nn},
        {"combiner_closed_form", check_combiner},
        {"feature_invariants", check_features},
        {"e2e_reference_accuracy", check_e2e},
        {"horizon_degradation", check_horizon},
        {"ablation_table", check_ablation},
        {"determinism", check_determinism},
    };

    int failures = 0;
    for (const auto& c : criteria) {
        const auto t0 = Clock::now();
        Outcome o;
        try {
            o = c.fn();
        } catch (const std::exception& e) {
            o.pass = false;
            o.detail = std::string("exception: ") + e.what();
        }
        std::printf("%s %-28s %6.1fs  %s\n", o.pass ? "PASS" : "FAIL", c.name, elapsed_s(t0),
                    o.detail.c_str());
        std::fflush(stdout);
        if (!o.pass) ++failures;
    }
    if (failures) std::printf("%d of 8 acceptance checks failed\n", failures);
    return failures == 0 ? 0 : 1;
}
