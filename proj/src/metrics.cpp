#include "labelrefine/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "labelrefine/errors.hpp"

namespace labelrefine {

ConfusionMatrix::ConfusionMatrix(std::vector<std::string> categories, std::vector<std::int64_t> counts)
    : categories_(std::move(categories)), counts_(std::move(counts)) {
    if (counts_.size() != categories_.size() * categories_.size())
        throw InvalidArgument("confusion matrix must be square over its categories");
    if (std::any_of(counts_.begin(), counts_.end(), [](std::int64_t c) { return c < 0; }))
        throw InvalidArgument("confusion matrix counts must be non-negative");
}

std::int64_t ConfusionMatrix::n() const { return std::accumulate(counts_.begin(), counts_.end(), std::int64_t{0}); }

std::int64_t ConfusionMatrix::row_total(std::size_t row) const {
    std::int64_t t = 0;
    for (std::size_t j = 0; j < size(); ++j) t += at(row, j);
    return t;
}

std::int64_t ConfusionMatrix::col_total(std::size_t col) const {
    std::int64_t t = 0;
    for (std::size_t i = 0; i < size(); ++i) t += at(i, col);
    return t;
}

std::int64_t ConfusionMatrix::diagonal() const {
    std::int64_t t = 0;
    for (std::size_t i = 0; i < size(); ++i) t += at(i, i);
    return t;
}

std::size_t ConfusionMatrix::index_of(std::string_view category) const {
    auto it = std::find(categories_.begin(), categories_.end(), category);
    if (it == categories_.end()) throw SchemaError("unknown category '" + std::string(category) + "'");
    return static_cast<std::size_t>(it - categories_.begin());
}

ConfusionMatrix ConfusionMatrix::transposed() const {
    ConfusionMatrix t = *this;
    for (std::size_t i = 0; i < size(); ++i)
        for (std::size_t j = 0; j < size(); ++j) t.at(i, j) = at(j, i);
    return t;
}

ConfusionMatrix ConfusionMatrix::permuted(std::span<const std::size_t> order) const {
    if (order.size() != size()) throw InvalidArgument("permutation size mismatch");
    std::vector<std::string> cats;
    for (std::size_t o : order) cats.push_back(categories_.at(o));
    ConfusionMatrix p(std::move(cats), std::vector<std::int64_t>(counts_.size()));
    for (std::size_t i = 0; i < size(); ++i)
        for (std::size_t j = 0; j < size(); ++j) p.at(i, j) = at(order[i], order[j]);
    return p;
}

ConfusionMatrix ConfusionMatrix::scaled(std::int64_t factor) const {
    if (factor < 1) throw InvalidArgument("scale factor must be positive");
    ConfusionMatrix s = *this;
    for (auto& c : s.counts_) c *= factor;
    return s;
}

ConfusionMatrix confusion_matrix(std::span<const int> pred, std::span<const int> gold,
                                 std::span<const std::string> categories) {
    if (pred.size() != gold.size())
        throw InvalidArgument("prediction and gold lists differ in length (" + std::to_string(pred.size()) +
                              " vs " + std::to_string(gold.size()) + ")");
    const std::size_t k = categories.size();
    std::vector<std::string> cats(categories.begin(), categories.end());
    cats.emplace_back(kUnparsed);
    ConfusionMatrix m(std::move(cats), std::vector<std::int64_t>((k + 1) * (k + 1)));
    for (std::size_t i = 0; i < pred.size(); ++i) {
        if (gold[i] < 0 || static_cast<std::size_t>(gold[i]) >= k)
            throw SchemaError("gold category index out of range");
        if (pred[i] >= static_cast<int>(k) || pred[i] < -1)
            throw SchemaError("predicted category index out of range");
        const std::size_t row = pred[i] < 0 ? k : static_cast<std::size_t>(pred[i]);
        ++m.at(row, static_cast<std::size_t>(gold[i]));
    }
    return m;
}

ConfusionMatrix confusion_matrix(std::span<const std::string> pred, std::span<const std::string> gold,
                                 std::span<const std::string_view> categories) {
    if (pred.size() != gold.size())
        throw InvalidArgument("prediction and gold lists differ in length (" + std::to_string(pred.size()) +
                              " vs " + std::to_string(gold.size()) + ")");
    auto find = [&](std::string_view s, bool allow_unparsed) -> int {
        if (allow_unparsed && s == kUnparsed) return -1;
        auto it = std::find(categories.begin(), categories.end(), s);
        if (it == categories.end()) throw SchemaError("unknown category '" + std::string(s) + "'");
        return static_cast<int>(it - categories.begin());
    };
    std::vector<int> p, g;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        p.push_back(find(pred[i], true));
        g.push_back(find(gold[i], false));
    }
    std::vector<std::string> cats(categories.begin(), categories.end());
    return confusion_matrix(std::span<const int>(p), std::span<const int>(g), cats);
}

double cohen_kappa(const ConfusionMatrix& m) {
    const std::int64_t n = m.n();
    if (n < 1) throw InvalidArgument("kappa needs at least one rated item");
    // n^2 * p_e and n^2 * p_o in integers; a single division at the end.
    std::int64_t chance = 0;
    for (std::size_t i = 0; i < m.size(); ++i) chance += m.row_total(i) * m.col_total(i);
    const std::int64_t n2 = n * n;
    if (chance == n2) throw UndefinedKappa("kappa undefined: expected agreement is 1 (both raters constant)");
    return static_cast<double>(n * m.diagonal() - chance) / static_cast<double>(n2 - chance);
}

double macro_f1(const ConfusionMatrix& m) {
    if (m.n() < 1) throw InvalidArgument("F1 needs at least one rated item");
    double sum = 0.0;
    int terms = 0;
    for (std::size_t c = 0; c < m.size(); ++c) {
        if (m.categories()[c] == kUnparsed) continue;
        const std::int64_t tp = m.at(c, c);
        const std::int64_t predicted = m.row_total(c);
        const std::int64_t actual = m.col_total(c);
        if (predicted == 0 && actual == 0) continue;
        sum += 2.0 * static_cast<double>(tp) / static_cast<double>(predicted + actual);
        ++terms;
    }
    return terms ? sum / terms : 0.0;
}

namespace {

template <typename IndexFn>
ConfusionMatrix build(const PredictionMap& preds, const GoldLabels& gold, std::vector<std::string> cats,
                      IndexFn index) {
    std::vector<int> p, g;
    p.reserve(gold.size());
    g.reserve(gold.size());
    for (const auto& [id, label] : gold) {
        auto it = preds.find(id);
        if (it == preds.end()) throw InvalidArgument("no prediction for session '" + id + "'");
        const auto* parsed = std::get_if<LabelSet>(&it->second);
        p.push_back(parsed ? index(*parsed) : -1);
        g.push_back(index(label));
    }
    return confusion_matrix(std::span<const int>(p), std::span<const int>(g), cats);
}

std::vector<std::string> joint_categories() {
    std::vector<std::string> cats;
    for (int i = 0; i < 3; ++i)
        for (int t = 0; t < 2; ++t)
            for (int f = 0; f < 3; ++f) cats.push_back(joint_code(label_from_indices(i, t, f)));
    return cats;
}

}  // namespace

std::string joint_code(const LabelSet& l) {
    return std::string(to_string(l.intent)) + "/" + std::string(to_string(l.topic)) + "/" +
           std::string(to_string(l.followup));
}

ConfusionMatrix dimension_matrix(Dimension d, const PredictionMap& preds, const GoldLabels& gold) {
    auto cats_view = categories(d);
    return build(preds, gold, std::vector<std::string>(cats_view.begin(), cats_view.end()),
                 [d](const LabelSet& l) { return l.index(d); });
}

ConfusionMatrix joint_matrix(const PredictionMap& preds, const GoldLabels& gold) {
    static const std::vector<std::string> cats = joint_categories();
    return build(preds, gold, cats, [](const LabelSet& l) {
        return l.index(Dimension::intent) * 6 + l.index(Dimension::topic) * 3 + l.index(Dimension::followup);
    });
}

std::map<Dimension, double> per_dimension_kappa(const PredictionMap& preds, const GoldLabels& gold) {
    std::map<Dimension, double> out;
    for (Dimension d : kDimensions) {
        try {
            out[d] = cohen_kappa(dimension_matrix(d, preds, gold));
        } catch (const UndefinedKappa& e) {
            throw UndefinedKappa(std::string(to_string(d)) + ": " + e.what());
        }
    }
    return out;
}

double overall_kappa(const PredictionMap& preds, const GoldLabels& gold) {
    try {
        return cohen_kappa(joint_matrix(preds, gold));
    } catch (const UndefinedKappa& e) {
        throw UndefinedKappa(std::string("overall: ") + e.what());
    }
}

std::string_view to_string(Band b) {
    switch (b) {
        case Band::poor: return "poor";
        case Band::slight: return "slight";
        case Band::fair: return "fair";
        case Band::moderate: return "moderate";
        case Band::substantial: return "substantial";
        case Band::almost_perfect: return "almost_perfect";
    }
    return "unknown";
}

Band landis_koch_band(double kappa) {
    if (!(kappa >= -1.0 && kappa <= 1.0)) throw InvalidArgument("kappa out of range [-1, 1]");
    if (kappa < 0.0) return Band::poor;
    if (kappa <= 0.20) return Band::slight;
    if (kappa <= 0.40) return Band::fair;
    if (kappa <= 0.60) return Band::moderate;
    if (kappa <= 0.80) return Band::substantial;
    return Band::almost_perfect;
}

double mean(std::span<const double> values) {
    if (values.empty()) throw InvalidArgument("mean of an empty list");
    return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
}

MeanSd mean_sd(std::span<const double> values) {
    if (values.size() < 2) throw InvalidArgument("standard deviation needs at least two values");
    const double mu = mean(values);
    double ss = 0.0;
    for (double v : values) ss += (v - mu) * (v - mu);
    return {mu, std::sqrt(ss / static_cast<double>(values.size() - 1))};
}

double round_to(double value, int decimals) {
    const double scale = std::pow(10.0, decimals);
    const double nudge = value >= 0 ? 1e-9 : -1e-9;
    return std::round(value * scale + nudge) / scale;
}

std::string format_fixed(double value, int decimals) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", decimals, round_to(value, decimals));
    // avoid "-0.00"
    std::string s = buf;
    if (s.starts_with("-") && s.find_first_not_of("-0.") == std::string::npos) s.erase(0, 1);
    return s;
}

EvalResult score_predictions(int prompt_version, const PredictionMap& preds, const GoldLabels& gold) {
    if (gold.empty()) throw InvalidArgument("cannot score an empty dataset");
    EvalResult r;
    r.prompt_version = prompt_version;
    r.total = static_cast<std::int64_t>(gold.size());
    for (Dimension d : kDimensions) {
        ConfusionMatrix m = dimension_matrix(d, preds, gold);
        try {
            r.per_dimension_kappa[d] = cohen_kappa(m);
        } catch (const UndefinedKappa& e) {
            throw UndefinedKappa(std::string(to_string(d)) + ": " + e.what());
        }
        r.per_dimension_f1[d] = macro_f1(m);
    }
    r.overall_kappa = overall_kappa(preds, gold);
    double f1 = 0.0;
    for (Dimension d : kDimensions) f1 += r.per_dimension_f1[d];
    r.overall_f1 = f1 / 3.0;

    for (const auto& [id, label] : gold) {
        const auto* parsed = std::get_if<LabelSet>(&preds.at(id));
        if (parsed) ++r.parsed;
        for (Dimension d : kDimensions) {
            if (parsed && parsed->index(d) == label.index(d)) continue;
            r.disagreements.push_back({id, d, parsed ? std::string(parsed->code(d)) : std::string(kUnparsed),
                                       std::string(label.code(d))});
        }
    }
    r.parse_rate = static_cast<double>(r.parsed) / static_cast<double>(r.total);
    return r;
}

}  // namespace labelrefine
