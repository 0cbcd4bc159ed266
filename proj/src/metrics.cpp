#include "elite/metrics.hpp"

#include <cstdio>

#include <json.hpp>

#include "elite/errors.hpp"

namespace elite::metrics {

ConfusionCounts confusion(const io::EliteMask& pred, const io::EliteMask& truth) {
    if (pred.height != truth.height || pred.width != truth.width) {
        throw ShapeError("prediction is " + std::to_string(pred.height) + "x" + std::to_string(pred.width) +
                         ", truth is " + std::to_string(truth.height) + "x" + std::to_string(truth.width));
    }
    pred.validate();
    truth.validate();
    ConfusionCounts c;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        if (!pred.valid[i] || !truth.valid[i]) continue;
        const bool p = pred.elite[i] != 0, t = truth.elite[i] != 0;
        if (p && t) ++c.tp;
        else if (p) ++c.fp;
        else if (t) ++c.fn;
        else ++c.tn;
    }
    return c;
}

std::string to_string(Rounding r) { return r == Rounding::truncate ? "truncate" : "half-away"; }

Rounding rounding_from_string(const std::string& name) {
    if (name == "truncate") return Rounding::truncate;
    if (name == "half-away") return Rounding::half_away;
    throw InvalidArgument("unknown rounding mode '" + name + "' (expected truncate or half-away)");
}

std::int64_t percent_hundredths(std::uint64_t num, std::uint64_t den, Rounding rounding) {
    if (den == 0) return 0;
    using u128 = unsigned __int128;
    const u128 scaled = static_cast<u128>(num) * 10000u;
    const u128 q = rounding == Rounding::truncate ? scaled / den : (2 * scaled + den) / (2 * static_cast<u128>(den));
    return static_cast<std::int64_t>(q);
}

std::string format_hundredths(std::int64_t hundredths) {
    const bool negative = hundredths < 0;
    const std::uint64_t mag = negative ? static_cast<std::uint64_t>(-hundredths) : static_cast<std::uint64_t>(hundredths);
    char buf[48];
    std::snprintf(buf, sizeof buf, "%s%llu.%02llu", negative ? "-" : "", static_cast<unsigned long long>(mag / 100),
                  static_cast<unsigned long long>(mag % 100));
    return buf;
}

double Score::percent() const noexcept {
    return defined ? 100.0 * static_cast<double>(num) / static_cast<double>(den) : 0.0;
}

std::int64_t Score::hundredths(Rounding rounding) const {
    return defined ? percent_hundredths(num, den, rounding) : 0;
}

std::string Score::text(Rounding rounding) const { return format_hundredths(hundredths(rounding)); }

namespace {
Score ratio(std::uint64_t num, std::uint64_t den) { return {num, den, den != 0}; }
}  // namespace

Scores scores(const ConfusionCounts& c) {
    if (c.total() == 0) throw InvalidArgument("scores need at least one counted pixel");
    Scores s;
    s.accuracy = ratio(c.tp + c.tn, c.total());
    s.precision = ratio(c.tp, c.tp + c.fp);
    s.recall = ratio(c.tp, c.tp + c.fn);
    s.f1 = ratio(2 * c.tp, 2 * c.tp + c.fp + c.fn);
    // Harmonic mean of two zero-or-undefined scores is reported as undefined.
    if (c.tp == 0) s.f1.defined = false;
    return s;
}

Score pixel_density(std::uint64_t elite, std::uint64_t valid) {
    if (valid == 0) throw InvalidArgument("pixel density needs at least one valid pixel");
    return ratio(elite, valid);
}

Score pixel_density(const io::EliteMask& mask) { return pixel_density(mask.elite_count(), mask.valid_count()); }

namespace {

nlohmann::ordered_json score_json(const Score& s, Rounding rounding) {
    return {{"percent", s.percent()}, {"text", s.text(rounding)}, {"defined", s.defined}};
}

}  // namespace

std::string json_report(const ConfusionCounts& c, const Scores& s, const Score& pred_density,
                        const Score& truth_density, Rounding rounding) {
    nlohmann::ordered_json j;
    j["positive_class"] = "elite";
    j["rounding"] = to_string(rounding);
    j["counts"] = {{"tp", c.tp}, {"fp", c.fp}, {"fn", c.fn}, {"tn", c.tn}, {"total", c.total()}};
    j["scores"] = {{"accuracy", score_json(s.accuracy, rounding)},
                   {"precision", score_json(s.precision, rounding)},
                   {"recall", score_json(s.recall, rounding)},
                   {"f1", score_json(s.f1, rounding)}};
    j["density"] = {{"predicted", score_json(pred_density, rounding)}, {"truth", score_json(truth_density, rounding)}};
    return j.dump(2) + "\n";
}

std::string csv_header() { return "scene,tp,fp,fn,tn,accuracy,precision,recall,f1,density\n"; }

std::string csv_row(const std::string& scene, const ConfusionCounts& c, const Scores& s, const Score& pred_density,
                    Rounding rounding) {
    return scene + "," + std::to_string(c.tp) + "," + std::to_string(c.fp) + "," + std::to_string(c.fn) + "," +
           std::to_string(c.tn) + "," + s.accuracy.text(rounding) + "," + s.precision.text(rounding) + "," +
           s.recall.text(rounding) + "," + s.f1.text(rounding) + "," + pred_density.text(rounding) + "\n";
}

}  // namespace elite::metrics
