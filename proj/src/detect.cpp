#include "duwak/detect.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <json.hpp>
#include <limits>
#include <ostream>

#include "duwak/stats.hpp"

namespace duwak {

using nlohmann::json;

namespace {

constexpr double kMaxR = 1.0 - 0x1.0p-53;

std::vector<TokenId> joined(std::span<const TokenId> prefix, std::span<const TokenId> tokens) {
    std::vector<TokenId> full;
    full.reserve(prefix.size() + tokens.size());
    full.insert(full.end(), prefix.begin(), prefix.end());
    full.insert(full.end(), tokens.begin(), tokens.end());
    return full;
}

std::span<const TokenId> window_before(std::span<const TokenId> full, std::size_t pos, std::size_t L) {
    const std::size_t len = std::min(pos, L);
    return full.subspan(pos - len, len);
}

double cs_score(double c_sum, std::size_t c_count, double all_sum, std::size_t scored, bool& degenerate) {
    degenerate = c_count == 0 || c_count == scored;
    if (degenerate) return 0.0;
    const double mean_c = c_sum / static_cast<double>(c_count);
    const double mean_rest = (all_sum - c_sum) / static_cast<double>(scored - c_count);
    return -(mean_c - mean_rest);
}

std::vector<WatermarkKey> decoys_for(const WatermarkKeys& keys, const DuwakConfig& config) {
    if (config.M == 0) throw Error(Errc::invalid_configuration, "M must be >= 1");
    const WatermarkKey exclude[] = {keys.tp, keys.cs, exp_key(keys)};
    return derive_decoy_keys(config.detector_seed, config.M, exclude);
}

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

const char* to_string(DetectorKind d) {
    switch (d) {
        case DetectorKind::tp: return "tp";
        case DetectorKind::cs: return "cs";
        case DetectorKind::exp: return "exp";
        case DetectorKind::duwak: return "duwak";
        case DetectorKind::kgw_exp: return "kgw_exp";
        case DetectorKind::exp_cs: return "exp_cs";
    }
    return "?";
}

DetectorKind parse_detector(std::string_view name) {
    std::string norm(name);
    std::replace(norm.begin(), norm.end(), '-', '_');
    for (auto d : {DetectorKind::tp, DetectorKind::cs, DetectorKind::exp, DetectorKind::duwak, DetectorKind::kgw_exp,
                   DetectorKind::exp_cs}) {
        if (norm == to_string(d)) return d;
    }
    if (norm == "combined") return DetectorKind::duwak;
    throw Error(Errc::invalid_argument, "unknown detector '" + std::string(name) + "'");
}

DetectorKind detector_for(Scheme s) {
    switch (s) {
        case Scheme::KGW: return DetectorKind::tp;
        case Scheme::EXP: return DetectorKind::exp;
        case Scheme::CS: return DetectorKind::cs;
        case Scheme::KGW_EXP: return DetectorKind::kgw_exp;
        case Scheme::EXP_CS: return DetectorKind::exp_cs;
        case Scheme::DUWAK:
        case Scheme::NoWatermark: return DetectorKind::duwak;
    }
    return DetectorKind::duwak;
}

bool needs_model(DetectorKind d) {
    return d == DetectorKind::cs || d == DetectorKind::duwak || d == DetectorKind::exp_cs;
}

TpResult z_test(std::size_t phi, std::size_t T, double gamma) {
    if (T == 0) throw Error(Errc::undefined_test, "z-test on an empty sequence");
    const double n = static_cast<double>(T);
    TpResult out;
    out.phi = phi;
    out.T = T;
    out.z = (static_cast<double>(phi) - gamma * n) / std::sqrt(n * gamma * (1.0 - gamma));
    out.p = normal_sf(out.z);
    return out;
}

TpResult p_tp(std::span<const TokenId> tokens, const WatermarkKey& key_tp, double gamma, std::size_t h,
              std::span<const TokenId> prefix) {
    if (tokens.empty()) throw Error(Errc::undefined_test, "z-test on an empty sequence");
    const auto full = joined(prefix, tokens);
    const std::span<const TokenId> all(full);
    std::size_t phi = 0;
    for (std::size_t i = prefix.size(); i < full.size(); ++i) {
        if (is_green(key_tp, context_seed(all.first(i), h), full[i], gamma)) ++phi;
    }
    return z_test(phi, tokens.size(), gamma);
}

CsResult phi_cs(std::span<const TokenId> tokens, const WatermarkKey& key, const LanguageModel& model, double eta,
                std::size_t L, std::size_t h, std::span<const TokenId> prefix) {
    const auto full = joined(prefix, tokens);
    const std::span<const TokenId> all(full);
    CsResult out;
    double c_sum = 0.0, all_sum = 0.0;
    for (std::size_t i = prefix.size(); i < full.size(); ++i) {
        const auto window = window_before(all, i, L);
        if (window.empty()) continue;
        const double s = self_similarity(model, window, full[i]);
        ++out.scored;
        all_sum += s;
        if (u01(key, context_seed(all.first(i), h), 0) < eta) {
            ++out.c_count;
            c_sum += s;
        }
    }
    out.phi = cs_score(c_sum, out.c_count, all_sum, out.scored, out.degenerate);
    return out;
}

double permutation_p(double phi_true, std::span<const double> phi_decoys) {
    if (phi_decoys.empty()) throw Error(Errc::invalid_configuration, "permutation test needs at least one decoy");
    std::size_t at_least = 0;
    for (double v : phi_decoys) {
        if (v >= phi_true) ++at_least;
    }
    return static_cast<double>(1 + at_least) / static_cast<double>(phi_decoys.size() + 1);
}

double p_cs(std::span<const TokenId> tokens, const WatermarkKey& key_cs, std::span<const WatermarkKey> decoys,
            const LanguageModel& model, double eta, std::size_t L, std::size_t h, std::span<const TokenId> prefix) {
    if (decoys.empty()) throw Error(Errc::invalid_configuration, "M must be >= 1");
    const double phi0 = phi_cs(tokens, key_cs, model, eta, L, h, prefix).phi;
    std::vector<double> phis;
    phis.reserve(decoys.size());
    for (const auto& k : decoys) phis.push_back(phi_cs(tokens, k, model, eta, L, h, prefix).phi);
    return permutation_p(phi0, phis);
}

ExpResult exp_detect(std::span<const TokenId> tokens, const WatermarkKey& key, std::size_t h,
                     std::span<const TokenId> prefix) {
    if (tokens.empty()) throw Error(Errc::undefined_test, "EXP test on an empty sequence");
    const auto full = joined(prefix, tokens);
    const std::span<const TokenId> all(full);
    ExpResult out;
    out.T = tokens.size();
    for (std::size_t i = prefix.size(); i < full.size(); ++i) {
        const double r = std::min(u01(key, context_seed(all.first(i), h), full[i]), kMaxR);
        out.score -= std::log1p(-r);
    }
    out.p = gamma_q(static_cast<double>(out.T), out.score);
    return out;
}

DetectionReport duwak_detect(std::span<const TokenId> tokens, const WatermarkKeys& keys, const DuwakConfig& config,
                             const LanguageModel& model, std::span<const TokenId> prefix) {
    if (tokens.empty()) throw Error(Errc::undefined_test, "detection on an empty sequence");
    TextScan scan(tokens, prefix, keys, config, &model, true);
    return scan.report(scan.size());
}

TextScan::TextScan(std::span<const TokenId> tokens, std::span<const TokenId> prefix, const WatermarkKeys& keys,
                   const DuwakConfig& config, const LanguageModel* model, bool want_cs)
    : config_(config), want_cs_(want_cs) {
    if (want_cs && model == nullptr) throw Error(Errc::invalid_argument, "contrastive detection needs a model");
    const auto full = joined(prefix, tokens);
    const std::span<const TokenId> all(full);
    const std::size_t T = tokens.size();
    const std::size_t P = prefix.size();
    const WatermarkKey key_exp = exp_key(keys);

    seeds_.resize(T);
    green_.resize(T);
    r_.resize(T);
    exp_r_.resize(T);
    green_cum_.assign(T + 1, 0);
    exp_cum_.assign(T + 1, 0.0);
    for (std::size_t i = 0; i < T; ++i) {
        const std::uint64_t seed = context_seed(all.first(P + i), config.h);
        const TokenId x = full[P + i];
        seeds_[i] = seed;
        green_[i] = is_green(keys.tp, seed, x, config.gamma);
        r_[i] = u01(keys.cs, seed, 0);
        exp_r_[i] = std::min(u01(key_exp, seed, x), kMaxR);
        green_cum_[i + 1] = green_cum_[i] + (green_[i] ? 1 : 0);
        exp_cum_[i + 1] = exp_cum_[i] - std::log1p(-exp_r_[i]);
    }
    if (!want_cs) return;

    s_.assign(T, std::numeric_limits<double>::quiet_NaN());
    scored_cum_.assign(T + 1, 0);
    s_cum_.assign(T + 1, 0.0);
    for (std::size_t i = 0; i < T; ++i) {
        const auto window = window_before(all, P + i, config.L);
        const bool scored = !window.empty();
        if (scored) s_[i] = self_similarity(*model, window, full[P + i]);
        scored_cum_[i + 1] = scored_cum_[i] + (scored ? 1 : 0);
        s_cum_[i + 1] = s_cum_[i] + (scored ? s_[i] : 0.0);
    }

    std::vector<WatermarkKey> all_keys{keys.cs};
    const auto decoys = decoys_for(keys, config);
    all_keys.insert(all_keys.end(), decoys.begin(), decoys.end());
    const std::size_t stride = T + 1;
    c_count_cum_.assign(all_keys.size() * stride, 0);
    c_sum_cum_.assign(all_keys.size() * stride, 0.0);
    for (std::size_t m = 0; m < all_keys.size(); ++m) {
        std::uint32_t* cnt = c_count_cum_.data() + m * stride;
        double* sum = c_sum_cum_.data() + m * stride;
        for (std::size_t i = 0; i < T; ++i) {
            const bool in_c = !std::isnan(s_[i]) && u01(all_keys[m], seeds_[i], 0) < config.eta;
            cnt[i + 1] = cnt[i] + (in_c ? 1 : 0);
            sum[i + 1] = sum[i] + (in_c ? s_[i] : 0.0);
        }
    }
}

TpResult TextScan::tp(std::size_t t) const { return z_test(green_cum_.at(t), t, config_.gamma); }

CsResult TextScan::cs(std::size_t t, std::size_t key_index) const {
    if (!want_cs_) throw Error(Errc::invalid_argument, "scan built without contrastive state");
    const std::size_t stride = size() + 1;
    if (t > size() || key_index > config_.M) throw Error(Errc::invalid_argument, "scan index out of range");
    CsResult out;
    out.scored = scored_cum_[t];
    out.c_count = c_count_cum_[key_index * stride + t];
    out.phi = cs_score(c_sum_cum_[key_index * stride + t], out.c_count, s_cum_[t], out.scored, out.degenerate);
    return out;
}

double TextScan::p_cs(std::size_t t) const {
    const double phi0 = cs(t, 0).phi;
    std::size_t at_least = 0;
    for (std::size_t m = 1; m <= config_.M; ++m) {
        if (cs(t, m).phi >= phi0) ++at_least;
    }
    return static_cast<double>(1 + at_least) / static_cast<double>(config_.M + 1);
}

ExpResult TextScan::exp(std::size_t t) const {
    if (t == 0 || t > size()) throw Error(Errc::undefined_test, "EXP test on an empty prefix");
    ExpResult out;
    out.T = t;
    out.score = exp_cum_[t];
    out.p = gamma_q(static_cast<double>(t), out.score);
    return out;
}

DetectionReport TextScan::report(std::size_t t) const {
    DetectionReport rep;
    const auto tpr = tp(t);
    rep.T = t;
    rep.phi_tp = tpr.phi;
    rep.z_tp = tpr.z;
    rep.p_tp = tpr.p;
    const auto e = exp(t);
    rep.exp_score = e.score;
    rep.p_exp = e.p;
    if (want_cs_) {
        const auto c = cs(t, 0);
        rep.phi_cs = c.phi;
        rep.c_count = c.c_count;
        rep.degenerate_cs = c.degenerate;
        rep.p_cs = p_cs(t);
        rep.p_combined = fisher_combine(rep.p_tp, rep.p_cs);
    } else {
        rep.p_combined = rep.p_tp;
    }
    return rep;
}

double TextScan::p_value(DetectorKind d, std::size_t t) const {
    switch (d) {
        case DetectorKind::tp: return tp(t).p;
        case DetectorKind::cs: return p_cs(t);
        case DetectorKind::exp: return exp(t).p;
        case DetectorKind::duwak: return fisher_combine(tp(t).p, p_cs(t));
        case DetectorKind::kgw_exp: return fisher_combine(tp(t).p, exp(t).p);
        case DetectorKind::exp_cs: return fisher_combine(exp(t).p, p_cs(t));
    }
    throw Error(Errc::invalid_argument, "unknown detector");
}

std::string render_sentinel(std::size_t max_inspect) { return ">" + std::to_string(max_inspect); }

std::string EfficiencyResult::render() const {
    return t_star ? std::to_string(*t_star) : render_sentinel(max_inspect);
}

EfficiencyResult detection_efficiency(const TextScan& scan, DetectorKind detector, double threshold,
                                      std::size_t max_inspect) {
    if (!(threshold > 0.0 && threshold < 1.0)) throw Error(Errc::invalid_argument, "threshold must lie in (0,1)");
    EfficiencyResult out;
    out.max_inspect = max_inspect;
    const std::size_t n = std::min(scan.size(), max_inspect);
    out.trace.reserve(n);
    for (std::size_t t = 1; t <= n; ++t) {
        const double p = scan.p_value(detector, t);
        out.trace.push_back(p);
        if (p <= threshold) {
            out.t_star = t;
            break;
        }
    }
    return out;
}

EfficiencyResult detection_efficiency(std::span<const TokenId> tokens, DetectorKind detector,
                                      const WatermarkKeys& keys, const DuwakConfig& config,
                                      const LanguageModel* model, double threshold, std::size_t max_inspect,
                                      std::span<const TokenId> prefix) {
    const auto inspected = tokens.first(std::min(tokens.size(), max_inspect));
    TextScan scan(inspected, prefix, keys, config, model, needs_model(detector));
    return detection_efficiency(scan, detector, threshold, max_inspect);
}

void write_report_jsonl(std::ostream& out, const DetectionReport& r, const std::string& id) {
    json j = json::object();
    if (!id.empty()) j["id"] = id;
    j["T"] = r.T;
    j["phi_tp"] = r.phi_tp;
    j["z_tp"] = r.z_tp;
    j["p_tp"] = r.p_tp;
    j["phi_cs"] = r.phi_cs;
    j["c_count"] = r.c_count;
    j["p_cs"] = r.p_cs;
    j["degenerate_cs"] = r.degenerate_cs;
    j["p_combined"] = r.p_combined;
    j["exp_score"] = r.exp_score;
    j["p_exp"] = r.p_exp;
    out << j.dump() << '\n';
}

DetectionReport parse_report_json(const std::string& line) {
    const auto j = json::parse(line);
    DetectionReport r;
    r.T = j.at("T").get<std::size_t>();
    r.phi_tp = j.at("phi_tp").get<std::size_t>();
    r.z_tp = j.at("z_tp").get<double>();
    r.p_tp = j.at("p_tp").get<double>();
    r.phi_cs = j.at("phi_cs").get<double>();
    r.c_count = j.at("c_count").get<std::size_t>();
    r.p_cs = j.at("p_cs").get<double>();
    r.degenerate_cs = j.at("degenerate_cs").get<bool>();
    r.p_combined = j.at("p_combined").get<double>();
    r.exp_score = j.at("exp_score").get<double>();
    r.p_exp = j.at("p_exp").get<double>();
    return r;
}

std::string report_csv_header() {
    return "id,T,phi_tp,z_tp,p_tp,phi_cs,c_count,p_cs,degenerate_cs,p_combined,exp_score,p_exp";
}

std::string report_csv_row(const DetectionReport& r, const std::string& id) {
    return id + ',' + std::to_string(r.T) + ',' + std::to_string(r.phi_tp) + ',' + fmt(r.z_tp) + ',' + fmt(r.p_tp) +
           ',' + fmt(r.phi_cs) + ',' + std::to_string(r.c_count) + ',' + fmt(r.p_cs) + ',' +
           (r.degenerate_cs ? "1" : "0") + ',' + fmt(r.p_combined) + ',' + fmt(r.exp_score) + ',' + fmt(r.p_exp);
}

}  // namespace duwak
