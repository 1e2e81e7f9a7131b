#pragma once

#include <cstdint>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "evcast/errors.hpp"
#include "evcast/pipeline.hpp"
#include "evcast/text.hpp"

namespace evcast {

namespace detail {

inline void write_vector(std::ostream& out, const char* tag, std::span<const double> v) {
    out << tag;
    for (double x : v) out << ' ' << fmt_double(x);
    out << '\n';
}

class ModelReader {
public:
    explicit ModelReader(std::istream& in) : in_(in) {}

    /// next non-empty, non-comment line split into tokens
    std::vector<std::string_view> next(const std::string& expected_tag) {
        while (std::getline(in_, line_)) {
            ++line_no_;
            const std::string_view sv = trim(line_);
            if (sv.empty() || sv.front() == '#') continue;
            auto tokens = split(sv, ' ');
            if (tokens.empty() || tokens.front() != expected_tag)
                throw ParseError(line_no_, "expected " + expected_tag);
            tokens.erase(tokens.begin());
            return tokens;
        }
        throw ParseError(line_no_, "unexpected end of file, expected " + expected_tag);
    }

    std::vector<double> doubles(const std::string& tag, std::size_t count) {
        const auto tokens = next(tag);
        if (tokens.size() != count)
            throw ParseError(line_no_, tag + ": expected " + std::to_string(count) + " values");
        std::vector<double> out(count);
        for (std::size_t i = 0; i < count; ++i) {
            auto v = parse_double(tokens[i]);
            if (!v) throw ParseError(line_no_, tag + ": bad number");
            out[i] = *v;
        }
        return out;
    }

    std::vector<std::int64_t> ints(const std::string& tag, std::size_t count) {
        const auto tokens = next(tag);
        if (tokens.size() != count)
            throw ParseError(line_no_, tag + ": expected " + std::to_string(count) + " values");
        std::vector<std::int64_t> out(count);
        for (std::size_t i = 0; i < count; ++i) {
            auto v = parse_int(tokens[i]);
            if (!v) throw ParseError(line_no_, tag + ": bad integer");
            out[i] = *v;
        }
        return out;
    }

    std::size_t line_no() const { return line_no_; }

private:
    std::istream& in_;
    std::string line_;
    std::size_t line_no_ = 0;
};

} // namespace detail

/// Writes every trained per-region model (network weights, scalers, CRF
/// weights, level tables) as structured text. Doubles use shortest
/// round-trip formatting, so read_models restores them bit-exactly.
inline void write_models(std::ostream& out, const TrainedModels& models) {
    out << "# evcast models v1\n";
    out << "regions " << models.regions.size() << '\n';
    for (const auto& rm : models.regions) {
        const auto& nn = rm.nn;
        out << "region " << rm.region << '\n';
        out << "nn_dims " << nn.net.input_dim << ' ' << nn.net.hidden_dim << '\n';
        out << "nn_config " << nn.config.hidden_dim << ' ' << fmt_double(nn.config.learning_rate)
            << ' ' << nn.config.max_epochs << ' ' << nn.config.patience << ' '
            << fmt_double(nn.config.l2) << ' ' << nn.config.rng_seed << ' ' << nn.config.delta_t
            << '\n';
        detail::write_vector(out, "nn_w1", nn.net.w1);
        detail::write_vector(out, "nn_b1", nn.net.b1);
        detail::write_vector(out, "nn_w2", nn.net.w2);
        out << "nn_b2 " << fmt_double(nn.net.b2) << '\n';
        out << "nn_input_scalers";
        for (const auto& s : nn.input_scalers)
            out << ' ' << fmt_double(s.mean) << ' ' << fmt_double(s.std);
        out << '\n';
        out << "nn_target_scaler " << fmt_double(nn.target_scaler.mean) << ' '
            << fmt_double(nn.target_scaler.std) << '\n';
        out << "crf_dims " << rm.crf.num_labels << ' ' << rm.crf.num_hours << ' '
            << fmt_double(rm.crf.l2) << '\n';
        detail::write_vector(out, "crf_mu", rm.crf.mu);
        detail::write_vector(out, "crf_gamma", rm.crf.gamma);
        out << "level_range " << fmt_double(rm.range.lo) << ' ' << fmt_double(rm.range.hi) << '\n';
        detail::write_vector(out, "levels", rm.levels.y);
        out << "initial_energy " << fmt_double(rm.initial_energy) << '\n';
        out << "end\n";
    }
}

inline TrainedModels read_models(std::istream& in) {
    detail::ModelReader r(in);
    const auto count = r.ints("regions", 1);
    if (count[0] < 0) throw ParseError(r.line_no(), "negative region count");
    TrainedModels models;
    for (std::int64_t n = 0; n < count[0]; ++n) {
        RegionModels rm;
        rm.region = static_cast<int>(r.ints("region", 1)[0]);

        const auto dims = r.ints("nn_dims", 2);
        const auto in_dim = static_cast<std::size_t>(dims[0]);
        const auto hidden = static_cast<std::size_t>(dims[1]);
        if (dims[0] < 1 || dims[1] < 1) throw ParseError(r.line_no(), "bad nn dimensions");
        const auto cfg_tokens = r.next("nn_config");
        if (cfg_tokens.size() != 7) throw ParseError(r.line_no(), "nn_config: expected 7 values");
        {
            auto& c = rm.nn.config;
            auto h = parse_int(cfg_tokens[0]);
            auto lr = parse_double(cfg_tokens[1]);
            auto me = parse_int(cfg_tokens[2]);
            auto pa = parse_int(cfg_tokens[3]);
            auto l2 = parse_double(cfg_tokens[4]);
            auto seed = parse_int(cfg_tokens[5]);
            auto dt = parse_int(cfg_tokens[6]);
            if (!h || !lr || !me || !pa || !l2 || !seed || !dt)
                throw ParseError(r.line_no(), "nn_config: bad value");
            c.hidden_dim = static_cast<int>(*h);
            c.learning_rate = *lr;
            c.max_epochs = static_cast<int>(*me);
            c.patience = static_cast<int>(*pa);
            c.l2 = *l2;
            c.rng_seed = static_cast<std::uint64_t>(*seed);
            c.delta_t = static_cast<int>(*dt);
        }
        rm.nn.net.input_dim = static_cast<int>(in_dim);
        rm.nn.net.hidden_dim = static_cast<int>(hidden);
        rm.nn.net.w1 = r.doubles("nn_w1", hidden * in_dim);
        rm.nn.net.b1 = r.doubles("nn_b1", hidden);
        rm.nn.net.w2 = r.doubles("nn_w2", hidden);
        rm.nn.net.b2 = r.doubles("nn_b2", 1)[0];
        const auto scalers = r.doubles("nn_input_scalers", in_dim * 2);
        rm.nn.input_scalers.resize(in_dim);
        for (std::size_t i = 0; i < in_dim; ++i)
            rm.nn.input_scalers[i] = {scalers[i * 2], scalers[i * 2 + 1]};
        const auto target = r.doubles("nn_target_scaler", 2);
        rm.nn.target_scaler = {target[0], target[1]};

        const auto crf_dims = r.next("crf_dims");
        if (crf_dims.size() != 3) throw ParseError(r.line_no(), "crf_dims: expected 3 values");
        auto labels = parse_int(crf_dims[0]);
        auto hours = parse_int(crf_dims[1]);
        auto l2 = parse_double(crf_dims[2]);
        if (!labels || !hours || !l2 || *labels < 1 || *hours < 1)
            throw ParseError(r.line_no(), "crf_dims: bad value");
        rm.crf = CrfModel(static_cast<int>(*labels), static_cast<int>(*hours), *l2);
        rm.crf.mu = r.doubles("crf_mu", static_cast<std::size_t>(*labels) *
                                            static_cast<std::size_t>(*hours));
        rm.crf.gamma = r.doubles("crf_gamma", static_cast<std::size_t>(*labels) *
                                                  static_cast<std::size_t>(*labels));
        const auto range = r.doubles("level_range", 2);
        rm.range = {range[0], range[1]};
        rm.levels.region = rm.region;
        rm.levels.y = r.doubles("levels", static_cast<std::size_t>(*labels));
        rm.initial_energy = r.doubles("initial_energy", 1)[0];
        r.next("end");
        models.regions.push_back(std::move(rm));
    }
    return models;
}

} // namespace evcast
