#include "curator/metrics.hpp"

#include <cstdio>

#include "curator/errors.hpp"

namespace curator {

std::string to_string(Label l) { return l == Label::accept ? "accept" : "reject"; }

Label parse_label(const std::string& s) {
    if (s == "accept") return Label::accept;
    if (s == "reject") return Label::reject;
    throw ValidationError("label must be 'accept' or 'reject', got '" + s + "'");
}

ConfusionCounts confusion(std::span<const Label> preds, std::span<const Label> labels) {
    if (preds.size() != labels.size())
        throw ValidationError("confusion: " + std::to_string(preds.size()) + " predictions vs " +
                              std::to_string(labels.size()) + " labels");
    if (preds.empty()) throw ValidationError("confusion: no examples");
    ConfusionCounts c;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        const bool p = preds[i] == Label::accept;
        const bool y = labels[i] == Label::accept;
        if (p && y) ++c.tp;
        else if (p) ++c.fp;
        else if (y) ++c.fn;
        else ++c.tn;
    }
    return c;
}

double f1_from(double precision, double recall) {
    const double s = precision + recall;
    return s > 0.0 ? 2.0 * precision * recall / s : 0.0;
}

PrecisionRecallF1 precision_recall_f1(const ConfusionCounts& c) {
    PrecisionRecallF1 m;
    if (c.tp + c.fp > 0) m.precision = double(c.tp) / double(c.tp + c.fp);
    if (c.tp + c.fn > 0) m.recall = double(c.tp) / double(c.tp + c.fn);
    m.f1 = f1_from(m.precision, m.recall);
    return m;
}

nlohmann::json metrics_json(const ConfusionCounts& c) {
    const auto m = precision_recall_f1(c);
    return {{"tp", c.tp},           {"fp", c.fp},         {"tn", c.tn},  {"fn", c.fn},
            {"n", c.total()},       {"precision", m.precision},
            {"recall", m.recall},   {"f1", m.f1}};
}

std::string metrics_table(const ConfusionCounts& c) {
    const auto m = precision_recall_f1(c);
    char buf[512];
    std::snprintf(buf, sizeof buf,
                  "%6s %6s %6s %6s %6s | %9s %9s %9s\n"
                  "%6lld %6lld %6lld %6lld %6lld | %9.4f %9.4f %9.4f\n",
                  "n", "tp", "fp", "tn", "fn", "precision", "recall", "f1",
                  static_cast<long long>(c.total()), static_cast<long long>(c.tp),
                  static_cast<long long>(c.fp), static_cast<long long>(c.tn),
                  static_cast<long long>(c.fn), m.precision, m.recall, m.f1);
    return buf;
}

}  // namespace curator
