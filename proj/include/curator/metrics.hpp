#pragma once

#include <cstdint>
#include <span>
#include <string>

#include <json.hpp>

namespace curator {

/// Human or model verdict on a candidate. Accept is the positive class.
enum class Label { reject = 0, accept = 1 };

std::string to_string(Label l);
/// Parses "accept"/"reject"; throws ValidationError otherwise.
Label parse_label(const std::string& s);

struct ConfusionCounts {
    std::int64_t tp = 0;
    std::int64_t fp = 0;
    std::int64_t tn = 0;
    std::int64_t fn = 0;

    std::int64_t total() const noexcept { return tp + fp + tn + fn; }
    friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

struct PrecisionRecallF1 {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

/// Throws ValidationError on length mismatch or empty input.
ConfusionCounts confusion(std::span<const Label> preds, std::span<const Label> labels);

/// Each ratio is 0 when its denominator is 0.
PrecisionRecallF1 precision_recall_f1(const ConfusionCounts& c);

/// Harmonic mean of precision and recall; 0 when both are 0.
double f1_from(double precision, double recall);

nlohmann::json metrics_json(const ConfusionCounts& c);
/// Fixed-width plain-text table for terminals.
std::string metrics_table(const ConfusionCounts& c);

}  // namespace curator
