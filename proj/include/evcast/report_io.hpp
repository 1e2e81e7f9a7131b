#pragma once

#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "evcast/errors.hpp"
#include "evcast/pipeline.hpp"
#include "evcast/text.hpp"
#include "evcast/time.hpp"

namespace evcast {

enum class Predictor { sp, tp, stp };

inline const char* predictor_name(Predictor p) {
    switch (p) {
        case Predictor::sp: return "SP";
        case Predictor::tp: return "TP";
        case Predictor::stp: return "STP";
    }
    throw ConfigError("bad predictor");
}

inline Predictor parse_predictor(std::string_view s) {
    if (s == "SP") return Predictor::sp;
    if (s == "TP") return Predictor::tp;
    if (s == "STP") return Predictor::stp;
    throw ConfigError("predictor must be SP, TP or STP");
}

/// Human-readable experiment report; every value is deterministic, so two
/// runs with the same config produce byte-identical files.
inline void write_manifest(std::ostream& out, const ExperimentManifest& m) {
    out << "# evcast experiment manifest v1\n";
    if (!m.config_echo.empty()) {
        out << "[config]\n";
        for (const auto& [key, value] : m.config_echo) out << key << " = " << value << '\n';
    }
    out << "[split]\n";
    out << "train_days = ";
    for (std::size_t i = 0; i < m.split.train_days.size(); ++i) {
        if (i) out << ',';
        out << format_date(m.split.train_days[i]);
    }
    out << '\n';
    out << "validation_day = " << format_date(m.split.validation_day) << '\n';
    out << "test_day = " << format_date(m.split.test_day) << '\n';
    out << "[experiment]\n";
    out << "subset = " << m.subset.str() << '\n';
    out << "delta_t = " << m.delta_t << '\n';
    out << "lambda_star = " << fmt_double(m.lambda_star) << '\n';
    out << "w_star = " << fmt_double(m.w_star) << '\n';
    out << "validation_objective = " << fmt_double(m.validation_objective) << '\n';
    out << "[metrics]\n";
    out << "# region nmse_sp nmse_tp nmse_stp gain_over_sp gain_over_tp\n";
    for (const auto& r : m.regions) {
        out << "region " << r.region;
        if (r.excluded) {
            out << " excluded\n";
        } else {
            out << ' ' << fmt_double(r.nmse_sp) << ' ' << fmt_double(r.nmse_tp) << ' '
                << fmt_double(r.nmse_stp) << ' ' << fmt_double(r.gain_over_sp) << ' '
                << fmt_double(r.gain_over_tp) << '\n';
        }
    }
    out << "[summary]\n";
    auto block = [&out](const char* name, const MetricSummary& s) {
        out << name << "_ave = " << fmt_double(s.ave) << '\n';
        out << name << "_min = " << fmt_double(s.min) << '\n';
        out << name << "_max = " << fmt_double(s.max) << '\n';
    };
    block("sp", m.sp);
    block("tp", m.tp);
    block("stp", m.stp);
    out << "excluded_regions = ";
    if (m.excluded_regions.empty()) {
        out << "(none)";
    } else {
        for (std::size_t i = 0; i < m.excluded_regions.size(); ++i) {
            if (i) out << ',';
            out << m.excluded_regions[i];
        }
    }
    out << '\n';
}

inline constexpr const char* kPredictionsHeader =
    "# evcast predictions v1\n"
    "# region date hour e_true sp tp stp\n";

inline void write_predictions(std::ostream& out, std::span<const PredictionRecord> records) {
    out << kPredictionsHeader;
    for (const auto& r : records) {
        out << r.region << ' ' << format_date(r.day) << ' ' << r.hour << ' '
            << fmt_double(r.e_true) << ' ' << fmt_double(r.sp) << ' ' << fmt_double(r.tp) << ' '
            << fmt_double(r.stp) << '\n';
    }
}

inline std::vector<PredictionRecord> read_predictions(std::istream& in) {
    std::vector<PredictionRecord> records;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string_view sv = trim(line);
        if (sv.empty() || sv.front() == '#') continue;
        const auto f = split(sv, ' ');
        if (f.size() != 7) throw ParseError(line_no, "expected 7 columns");
        PredictionRecord r;
        auto region = parse_int(f[0]);
        auto day = parse_date(f[1]);
        auto hour = parse_int(f[2]);
        auto e_true = parse_double(f[3]);
        auto sp = parse_double(f[4]);
        auto tp = parse_double(f[5]);
        auto stp = parse_double(f[6]);
        if (!region || !day || !hour || *hour < 1 || *hour > 24 || !e_true || !sp || !tp || !stp)
            throw ParseError(line_no, "bad prediction record");
        r.region = static_cast<int>(*region);
        r.day = *day;
        r.hour = static_cast<int>(*hour);
        r.e_true = *e_true;
        r.sp = *sp;
        r.tp = *tp;
        r.stp = *stp;
        records.push_back(r);
    }
    return records;
}

/// Two stacked tables (SP on top, STP below) with one row per feature
/// subset, in the order the manifests arrive (descending average STP NMSE
/// when produced by run_ablation).
inline void write_ablation(std::ostream& out, std::span<const ExperimentManifest> manifests) {
    out << "# evcast ablation v1 (rows sorted by descending average STP NMSE)\n";
    out << "[sp]\n";
    out << "# subset ave min max\n";
    for (const auto& m : manifests)
        out << m.subset.str() << ' ' << fmt_double(m.sp.ave) << ' ' << fmt_double(m.sp.min) << ' '
            << fmt_double(m.sp.max) << '\n';
    out << "[stp]\n";
    out << "# subset ave min max\n";
    for (const auto& m : manifests)
        out << m.subset.str() << ' ' << fmt_double(m.stp.ave) << ' ' << fmt_double(m.stp.min)
            << ' ' << fmt_double(m.stp.max) << '\n';
}

/// One predictor's kWh values for a single hour, laid out as the grid:
/// northernmost row first, west to east within a row, with a region-id
/// legend below.
inline void write_heatmap(std::ostream& out, std::span<const PredictionRecord> records, int rows,
                          int cols, int hour, Predictor predictor) {
    if (rows < 1 || cols < 1) throw ConfigError("heatmap: grid must have >= 1 row and column");
    if (hour < 1 || hour > 24) throw ConfigError("heatmap: hour must be in 1..24");
    const int n = rows * cols;
    std::vector<double> values(static_cast<std::size_t>(n));
    std::vector<bool> found(static_cast<std::size_t>(n), false);
    for (const auto& r : records) {
        if (r.hour != hour) continue;
        if (r.region < 1 || r.region > n)
            throw DataError("heatmap: record for region " + std::to_string(r.region) +
                            " outside the " + std::to_string(rows) + "x" + std::to_string(cols) +
                            " grid");
        const auto idx = static_cast<std::size_t>(r.region - 1);
        double v = 0.0;
        switch (predictor) {
            case Predictor::sp: v = r.sp; break;
            case Predictor::tp: v = r.tp; break;
            case Predictor::stp: v = r.stp; break;
        }
        values[idx] = v;
        found[idx] = true;
    }
    for (int k = 0; k < n; ++k)
        if (!found[static_cast<std::size_t>(k)])
            throw DataError("heatmap: no record for region " + std::to_string(k + 1) +
                            " at hour " + std::to_string(hour));
    out << "# evcast heatmap v1\n";
    out << "# predictor " << predictor_name(predictor) << ", hour " << hour
        << ", kWh per region\n";
    out << "# northernmost row first, west to east; region ids in the legend below\n";
    for (int row = rows; row >= 1; --row) {
        for (int col = 1; col <= cols; ++col) {
            if (col > 1) out << ' ';
            out << fmt_double(values[static_cast<std::size_t>((row - 1) * cols + col - 1)]);
        }
        out << '\n';
    }
    out << "# region ids\n";
    for (int row = rows; row >= 1; --row) {
        out << '#';
        for (int col = 1; col <= cols; ++col) out << ' ' << (row - 1) * cols + col;
        out << '\n';
    }
}

} // namespace evcast
