#pragma once

// Average precision, macro mAP per task and the mAP* material subset.

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "latentfuse/model.hpp"
#include "latentfuse/taxonomy.hpp"

namespace latentfuse {

// Non-interpolated step AP: sum over ranks of (R_n - R_{n-1}) * P_n with
// scores sorted descending. Tied scores form one group, admitted at once.
// Returns nullopt when no label is positive.
std::optional<double> average_precision(std::span<const double> scores, std::span<const std::uint8_t> labels);

struct EvalReport {
    std::array<std::optional<double>, kClassCount> ap{};
    std::optional<double> map_elements;
    std::optional<double> map_materials;
    std::optional<double> map_materials_star;

    // Mean of the two task mAPs that are defined, 0 when neither is.
    double mean_map() const;

    bool operator==(const EvalReport&) const = default;
};

// Per-sample sigmoid scores and labels, 13 columns each.
struct ScoreTable {
    std::vector<std::array<double, kClassCount>> scores;
    std::vector<std::array<std::uint8_t, kClassCount>> labels;

    void append(const std::array<double, kClassCount>& s, const std::array<std::uint8_t, kClassCount>& l) {
        scores.push_back(s);
        labels.push_back(l);
    }
    std::size_t size() const { return scores.size(); }
};

EvalReport evaluate_scores(const ScoreTable& table);

// Inference over samples in N-homogeneous batches (no tape). Throws
// ContractError for an empty dataset.
template <typename T>
ScoreTable score_dataset(const Classifier<T>& model, std::span<const PreparedSample> samples,
                         std::size_t batch_size = 64);

template <typename T>
EvalReport evaluate(const Classifier<T>& model, std::span<const PreparedSample> samples,
                    std::size_t batch_size = 64);

std::string report_json(const EvalReport& report);
EvalReport parse_report_json(const std::string& text);  // ValidationError on taxonomy mismatch
EvalReport read_report(const std::string& path);

// Table-5 style rows: one row per named report, classes as columns.
std::string report_csv(std::span<const std::pair<std::string, EvalReport>> rows);

struct DeltaRow {
    std::string name;
    std::array<std::optional<double>, kClassCount> ap{};  // percentage points
    std::optional<double> map_elements;
    std::optional<double> map_materials;
    std::optional<double> map_materials_star;
};

// Candidate minus baseline, in percentage points. Undefined on either side
// gives an undefined delta.
DeltaRow delta(const std::string& name, const EvalReport& baseline, const EvalReport& candidate);

// "+11.3", "-0.4", "0.0"; "n/a" for undefined.
std::string format_delta(std::optional<double> points);

std::string delta_table(std::span<const DeltaRow> rows);

} // namespace latentfuse
