#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "evcast/combiner.hpp"
#include "evcast/errors.hpp"
#include "evcast/features.hpp"
#include "evcast/grid.hpp"
#include "evcast/rand.hpp"
#include "evcast/spatial_nn.hpp"
#include "evcast/temporal_crf.hpp"
#include "evcast/time.hpp"

namespace evcast {

/// Chronological experiment split: several training days, one validation
/// day for fitting the combination coefficient, one test day.
struct SplitPlan {
    std::vector<std::int64_t> train_days;
    std::int64_t validation_day = 0;
    std::int64_t test_day = 0;

    void validate() const {
        if (train_days.empty()) throw ConfigError("split: need at least one training day");
        for (std::size_t i = 1; i < train_days.size(); ++i)
            if (train_days[i] <= train_days[i - 1])
                throw ConfigError("split: training days must be strictly increasing");
        if (validation_day <= train_days.back())
            throw ConfigError("split: validation day must follow the training days");
        if (test_day <= validation_day)
            throw ConfigError("split: test day must follow the validation day");
    }

    /// train on the first num_days-2 days, validate and test on the last two
    static SplitPlan contiguous(std::int64_t start_day, int num_days) {
        if (num_days < 3) throw ConfigError("split: need at least three days");
        SplitPlan s;
        for (int d = 0; d < num_days - 2; ++d) s.train_days.push_back(start_day + d);
        s.validation_day = start_day + num_days - 2;
        s.test_day = start_day + num_days - 1;
        return s;
    }
};

/// Hyperparameters and scope shared by every pipeline phase.
struct PipelineSetup {
    FeatureSubset subset = FeatureSubset::parse("F_D,F_N,F_E");
    int delta_t = 1;
    NNTrainConfig nn;
    CrfTrainConfig crf;
    bool hourly_retrain = true;
    std::vector<int> regions; // empty = every region of the grid

    void validate(const RegionGrid& grid) const {
        if (subset.empty()) throw ConfigError("pipeline: feature subset must not be empty");
        if (delta_t < 1 || delta_t > 23) throw ConfigError("pipeline: delta_t must be in 1..23");
        nn.validate();
        crf.validate();
        for (int k : regions)
            if (k < 1 || k > grid.num_regions())
                throw ConfigError("pipeline: region " + std::to_string(k) + " outside the grid");
    }

    std::vector<int> effective_regions(const RegionGrid& grid) const {
        if (!regions.empty()) return regions;
        std::vector<int> all(static_cast<std::size_t>(grid.num_regions()));
        for (int k = 1; k <= grid.num_regions(); ++k) all[static_cast<std::size_t>(k - 1)] = k;
        return all;
    }
};

struct RegionModels {
    int region = 0;
    NNModel nn;
    CrfModel crf;
    LevelRange range;
    LevelValueTable levels;
    double initial_energy = 0.0; // mean hour-1 energy over the training days
};

struct TrainedModels {
    std::vector<RegionModels> regions;

    const RegionModels& at(int region) const {
        for (const auto& r : regions)
            if (r.region == region) return r;
        throw DataError("pipeline: no trained model for region " + std::to_string(region));
    }
};

struct PredictionRecord {
    int region = 0;
    std::int64_t day = 0;
    int hour = 0; // 1..24
    double e_true = 0.0;
    double sp = 0.0;
    double tp = 0.0;
    double stp = 0.0;
};

namespace detail {

inline std::uint64_t region_seed(std::uint64_t base, int region) {
    return mix_seed(base + static_cast<std::uint64_t>(region) * 0x9e3779b97f4a7c15ULL);
}

/// Energy series of one region on the given days, ascending by day.
inline std::vector<EnergySeries> series_for(std::span<const EnergySeries> all, int region,
                                            std::span<const std::int64_t> days) {
    std::vector<EnergySeries> out;
    for (std::int64_t d : days) {
        bool found = false;
        for (const auto& s : all) {
            if (s.region == region && s.day == d) {
                out.push_back(s);
                found = true;
                break;
            }
        }
        if (!found)
            throw DataError("pipeline: no energy series for region " + std::to_string(region) +
                            " on " + format_date(d));
    }
    return out;
}

inline double mean_first_hour_energy(std::span<const EnergySeries> series) {
    double sum = 0.0;
    for (const auto& s : series) sum += s.e_sum[0];
    return sum / static_cast<double>(series.size());
}

struct HourRef {
    std::int64_t day = 0;
    int hour = 0; // 1..24
};

inline HourRef hour_ref(std::int64_t abs_hour) {
    std::int64_t day = abs_hour / 24;
    std::int64_t rem = abs_hour % 24;
    if (rem < 0) {
        rem += 24;
        day -= 1;
    }
    return {day, static_cast<int>(rem) + 1};
}

inline std::int64_t abs_hour(std::int64_t day, int hour) { return day * 24 + (hour - 1); }

} // namespace detail

/// Training pairs for one region: the neighborhood feature vector at each
/// hour of an allowed day, paired with the region's energy delta_t hours
/// later, kept only when the target also falls on an allowed day.
inline std::vector<Sample> build_nn_dataset(const FeatureTable& features, const RegionGrid& grid,
                                            int region, std::span<const std::int64_t> days,
                                            int delta_t, const FeatureSubset& subset) {
    std::vector<Sample> out;
    for (std::int64_t day : days) {
        for (int hour = 1; hour <= 24; ++hour) {
            const auto target = detail::hour_ref(detail::abs_hour(day, hour) + delta_t);
            if (std::find(days.begin(), days.end(), target.day) == days.end()) continue;
            Sample s;
            s.x = assemble_input(features, grid, region, day, hour, subset);
            s.y = features.at(region, target.day, target.hour).e_sum;
            out.push_back(std::move(s));
        }
    }
    return out;
}

/// Phase one: per-region spatial and temporal models fitted on the training
/// days only.
inline TrainedModels run_offline_training(const FeatureTable& features, const RegionGrid& grid,
                                          const SplitPlan& split, const PipelineSetup& setup) {
    split.validate();
    setup.validate(grid);
    const auto all_series = build_energy_series(features.rows());
    TrainedModels models;
    for (int k : setup.effective_regions(grid)) {
        RegionModels rm;
        rm.region = k;

        auto train_series = detail::series_for(all_series, k, split.train_days);
        rm.range = level_range(train_series);
        discretize(train_series, rm.range, setup.crf.num_labels);
        rm.levels = build_level_values(train_series, setup.crf.num_labels);
        rm.initial_energy = detail::mean_first_hour_energy(train_series);

        std::vector<LabeledSequence> sequences;
        for (const auto& s : train_series) {
            LabeledSequence seq;
            for (int t = 0; t < 24; ++t) {
                seq.x.push_back(t + 1);
                seq.y.push_back(s.level[static_cast<std::size_t>(t)]);
            }
            sequences.push_back(std::move(seq));
        }
        CrfTrainConfig crf_cfg = setup.crf;
        crf_cfg.rng_seed = detail::region_seed(setup.crf.rng_seed, k);
        rm.crf = train_crf(sequences, crf_cfg);

        NNTrainConfig nn_cfg = setup.nn;
        nn_cfg.delta_t = setup.delta_t;
        nn_cfg.rng_seed = detail::region_seed(setup.nn.rng_seed, k);
        const auto samples = build_nn_dataset(features, grid, k, split.train_days, setup.delta_t,
                                              setup.subset);
        rm.nn = train(samples, nn_cfg);

        models.regions.push_back(std::move(rm));
    }
    return models;
}

struct ValidationResult {
    LambdaResult lambda;
    std::vector<RegionTriples> triples; // validation-day truth / SP / TP per region
};

/// Phase two: predict the validation day with both offline models and fit
/// the combination coefficient on the resulting triples.
inline ValidationResult run_validation_combining(const TrainedModels& models,
                                                 const FeatureTable& features,
                                                 const RegionGrid& grid, const SplitPlan& split,
                                                 const PipelineSetup& setup) {
    split.validate();
    setup.validate(grid);
    ValidationResult res;
    for (const auto& rm : models.regions) {
        RegionTriples triple;
        triple.region = rm.region;
        const auto tp = predict_day(rm.crf, rm.levels, rm.initial_energy);
        for (int hour = 1; hour <= 24; ++hour) {
            const auto input = detail::hour_ref(detail::abs_hour(split.validation_day, hour) -
                                                setup.delta_t);
            const auto x = assemble_input(features, grid, rm.region, input.day, input.hour,
                                          setup.subset);
            triple.sp.push_back(rm.nn.predict(x));
            triple.tp.push_back(tp[static_cast<std::size_t>(hour - 1)]);
            triple.truth.push_back(features.at(rm.region, split.validation_day, hour).e_sum);
        }
        res.triples.push_back(std::move(triple));
    }
    res.lambda = optimize_lambda(res.triples);
    return res;
}

/// Phase three: retrain on training plus validation days (the spatial model
/// warm-starts from its offline parameters, the temporal model retrains on
/// the re-discretized window), then walk the test day hour by hour. The
/// spatial model predicts t + delta_t from hour-t features and is retrained
/// as each test-day observation becomes available; the temporal model
/// predicts the whole day once from its clamped initial level; both are
/// blended with the fixed coefficient.
inline std::vector<PredictionRecord> run_online_prediction(const TrainedModels& models,
                                                           const FeatureTable& features,
                                                           const RegionGrid& grid,
                                                           const SplitPlan& split,
                                                           const PipelineSetup& setup,
                                                           double lambda_star) {
    split.validate();
    setup.validate(grid);
    if (!(lambda_star >= 0.0)) throw ConfigError("pipeline: lambda must be >= 0");
    std::vector<std::int64_t> extended = split.train_days;
    extended.push_back(split.validation_day);
    const auto all_series = build_energy_series(features.rows());

    std::vector<PredictionRecord> records;
    for (int k : setup.effective_regions(grid)) {
        auto ext_series = detail::series_for(all_series, k, extended);
        const LevelRange range = level_range(ext_series);
        discretize(ext_series, range, setup.crf.num_labels);
        const LevelValueTable levels = build_level_values(ext_series, setup.crf.num_labels);

        std::vector<LabeledSequence> sequences;
        for (const auto& s : ext_series) {
            LabeledSequence seq;
            for (int t = 0; t < 24; ++t) {
                seq.x.push_back(t + 1);
                seq.y.push_back(s.level[static_cast<std::size_t>(t)]);
            }
            sequences.push_back(std::move(seq));
        }
        CrfTrainConfig crf_cfg = setup.crf;
        crf_cfg.rng_seed = detail::region_seed(setup.crf.rng_seed, k);
        const CrfModel crf = train_crf(sequences, crf_cfg);
        const auto tp = predict_day(crf, levels, detail::mean_first_hour_energy(ext_series));

        NNTrainConfig nn_cfg = setup.nn;
        nn_cfg.delta_t = setup.delta_t;
        nn_cfg.rng_seed = detail::region_seed(setup.nn.rng_seed, k);
        auto dataset = build_nn_dataset(features, grid, k, extended, setup.delta_t, setup.subset);
        NNModel nn = retrain_online(models.at(k).nn, dataset, nn_cfg);

        const std::int64_t test_start = detail::abs_hour(split.test_day, 1);
        for (int hour = 1; hour <= 24; ++hour) {
            const std::int64_t target = test_start + (hour - 1);
            const std::int64_t input_time = target - setup.delta_t;
            // the observation at input_time has just been measured; pairs
            // whose target lies on the test day become available one by one
            if (setup.hourly_retrain && input_time >= test_start) {
                const auto pair_input = detail::hour_ref(input_time - setup.delta_t);
                const auto realized = detail::hour_ref(input_time);
                Sample s;
                s.x = assemble_input(features, grid, k, pair_input.day, pair_input.hour,
                                     setup.subset);
                s.y = features.at(k, realized.day, realized.hour).e_sum;
                dataset.push_back(std::move(s));
                nn = retrain_online(nn, dataset, nn_cfg);
            }
            const auto input = detail::hour_ref(input_time);
            const auto x = assemble_input(features, grid, k, input.day, input.hour, setup.subset);

            PredictionRecord rec;
            rec.region = k;
            rec.day = split.test_day;
            rec.hour = hour;
            rec.e_true = features.at(k, split.test_day, hour).e_sum;
            rec.sp = nn.predict(x);
            rec.tp = tp[static_cast<std::size_t>(hour - 1)];
            rec.stp = combine(rec.tp, rec.sp, lambda_star);
            records.push_back(rec);
        }
    }
    return records;
}

struct RegionMetrics {
    int region = 0;
    double nmse_sp = 0.0;
    double nmse_tp = 0.0;
    double nmse_stp = 0.0;
    double gain_over_sp = 0.0; // nmse_sp - nmse_stp
    double gain_over_tp = 0.0; // nmse_tp - nmse_stp
    bool excluded = false;     // truth identically zero on the test day
};

struct MetricSummary {
    double ave = 0.0;
    double min = 0.0; // best (lowest) per-region NMSE
    double max = 0.0; // worst (highest) per-region NMSE
};

struct ExperimentManifest {
    SplitPlan split;
    FeatureSubset subset;
    int delta_t = 1;
    double lambda_star = 0.0;
    double w_star = 0.0;
    double validation_objective = 0.0;
    std::vector<RegionMetrics> regions;
    MetricSummary sp, tp, stp;
    std::vector<int> excluded_regions;
    std::vector<std::pair<std::string, std::string>> config_echo;
};

/// Per-region and cross-region NMSE of the three predictors over the test
/// day. Regions whose truth is identically zero are flagged and left out of
/// the averages. Header fields (split, subset, lambda) are the caller's.
inline ExperimentManifest evaluate(std::span<const PredictionRecord> records) {
    if (records.empty()) throw DataError("evaluate: no prediction records");
    std::map<int, std::vector<PredictionRecord>> by_region;
    for (const auto& r : records) by_region[r.region].push_back(r);

    ExperimentManifest m;
    bool first = true;
    int included = 0;
    for (auto& [region, recs] : by_region) {
        std::sort(recs.begin(), recs.end(),
                  [](const PredictionRecord& a, const PredictionRecord& b) { return a.hour < b.hour; });
        std::vector<double> truth, sp, tp, stp;
        for (const auto& r : recs) {
            truth.push_back(r.e_true);
            sp.push_back(r.sp);
            tp.push_back(r.tp);
            stp.push_back(r.stp);
        }
        RegionMetrics rm;
        rm.region = region;
        double den = 0.0;
        for (double t : truth) den += t * t;
        if (den <= 0.0) {
            rm.excluded = true;
            m.excluded_regions.push_back(region);
        } else {
            rm.nmse_sp = nmse(sp, truth);
            rm.nmse_tp = nmse(tp, truth);
            rm.nmse_stp = nmse(stp, truth);
            rm.gain_over_sp = rm.nmse_sp - rm.nmse_stp;
            rm.gain_over_tp = rm.nmse_tp - rm.nmse_stp;
            ++included;
            auto fold = [first](MetricSummary& s, double v) {
                s.ave += v;
                if (first || v < s.min) s.min = v;
                if (first || v > s.max) s.max = v;
            };
            fold(m.sp, rm.nmse_sp);
            fold(m.tp, rm.nmse_tp);
            fold(m.stp, rm.nmse_stp);
            first = false;
        }
        m.regions.push_back(rm);
    }
    if (included == 0) throw DataError("evaluate: every region has zero ground truth");
    m.sp.ave /= included;
    m.tp.ave /= included;
    m.stp.ave /= included;
    return m;
}

struct PipelineResult {
    TrainedModels models;
    ValidationResult validation;
    std::vector<PredictionRecord> records;
    ExperimentManifest manifest;
};

/// All three phases plus evaluation.
inline PipelineResult run_full(const FeatureTable& features, const RegionGrid& grid,
                               const SplitPlan& split, const PipelineSetup& setup) {
    PipelineResult res;
    res.models = run_offline_training(features, grid, split, setup);
    res.validation = run_validation_combining(res.models, features, grid, split, setup);
    res.records = run_online_prediction(res.models, features, grid, split, setup,
                                        res.validation.lambda.lambda_star);
    res.manifest = evaluate(res.records);
    res.manifest.split = split;
    res.manifest.subset = setup.subset;
    res.manifest.delta_t = setup.delta_t;
    res.manifest.lambda_star = res.validation.lambda.lambda_star;
    res.manifest.w_star = res.validation.lambda.w_star;
    res.manifest.validation_objective = res.validation.lambda.objective;
    return res;
}

/// Full pipeline once per feature subset, sorted by descending average STP
/// NMSE. The temporal predictor's inputs do not depend on the subset, so its
/// metrics repeat across rows.
inline std::vector<ExperimentManifest> run_ablation(const FeatureTable& features,
                                                    const RegionGrid& grid, const SplitPlan& split,
                                                    const PipelineSetup& setup,
                                                    std::span<const FeatureSubset> subsets) {
    if (subsets.empty()) throw ConfigError("ablation: need at least one feature subset");
    std::vector<ExperimentManifest> manifests;
    for (const auto& subset : subsets) {
        if (subset.empty()) throw ConfigError("ablation: feature subset must not be empty");
        PipelineSetup s = setup;
        s.subset = subset;
        manifests.push_back(run_full(features, grid, split, s).manifest);
    }
    std::stable_sort(manifests.begin(), manifests.end(),
                     [](const ExperimentManifest& a, const ExperimentManifest& b) {
                         return a.stp.ave > b.stp.ave;
                     });
    return manifests;
}

} // namespace evcast
