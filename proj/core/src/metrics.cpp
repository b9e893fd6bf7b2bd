#include "latentfuse/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

namespace latentfuse {

std::optional<double> average_precision(std::span<const double> scores, std::span<const std::uint8_t> labels) {
    if (scores.size() != labels.size()) {
        throw DimensionError("average_precision: " + std::to_string(scores.size()) + " scores vs " +
                             std::to_string(labels.size()) + " labels");
    }
    std::size_t positives = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] > 1) throw ValidationError("average_precision: labels must be 0 or 1");
        if (!std::isfinite(scores[i])) throw ValidationError("average_precision: non-finite score");
        positives += labels[i];
    }
    if (positives == 0) return std::nullopt;

    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

    double ap = 0.0;
    double prev_recall = 0.0;
    std::size_t seen = 0, hits = 0;
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j < order.size() && scores[order[j]] == scores[order[i]]) {
            hits += labels[order[j]];
            ++j;
        }
        seen = j;
        const double recall = double(hits) / double(positives);
        const double precision = double(hits) / double(seen);
        ap += (recall - prev_recall) * precision;
        prev_recall = recall;
        i = j;
    }
    return ap;
}

double EvalReport::mean_map() const {
    if (map_elements && map_materials) return 0.5 * (*map_elements + *map_materials);
    if (map_elements) return *map_elements;
    if (map_materials) return *map_materials;
    return 0.0;
}

namespace {

double logistic(double z) {
    return z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
}

template <typename Range>
std::optional<double> macro(const std::array<std::optional<double>, kClassCount>& ap, const Range& classes) {
    double total = 0.0;
    std::size_t n = 0;
    for (std::size_t c : classes) {
        if (ap[c]) {
            total += *ap[c];
            ++n;
        }
    }
    if (n == 0) return std::nullopt;
    return total / double(n);
}

std::vector<std::size_t> class_range(std::size_t first, std::size_t count) {
    std::vector<std::size_t> out(count);
    std::iota(out.begin(), out.end(), first);
    return out;
}

} // namespace

EvalReport evaluate_scores(const ScoreTable& table) {
    if (table.scores.size() != table.labels.size()) throw DimensionError("evaluate: score/label row mismatch");
    EvalReport report;
    std::vector<double> s(table.size());
    std::vector<std::uint8_t> l(table.size());
    for (std::size_t c = 0; c < kClassCount; ++c) {
        for (std::size_t i = 0; i < table.size(); ++i) {
            s[i] = table.scores[i][c];
            l[i] = table.labels[i][c];
        }
        report.ap[c] = average_precision(s, l);
    }
    report.map_elements = macro(report.ap, class_range(0, kElementClasses));
    report.map_materials = macro(report.ap, class_range(kElementClasses, kMaterialClasses));
    report.map_materials_star = macro(report.ap, kReliableMaterials);
    return report;
}

template <typename T>
ScoreTable score_dataset(const Classifier<T>& model, std::span<const PreparedSample> samples,
                         std::size_t batch_size) {
    if (samples.empty()) throw ContractError("evaluate: empty dataset");
    if (batch_size == 0) throw ConfigurationError("evaluate: batch size must be >= 1");
    NoGradScope<T> no_grad;

    std::map<std::size_t, std::vector<std::size_t>> by_views;
    for (std::size_t i = 0; i < samples.size(); ++i) by_views[samples[i].street_views()].push_back(i);

    ScoreTable table;
    table.scores.resize(samples.size());
    table.labels.resize(samples.size());
    std::vector<const PreparedSample*> chunk;
    for (const auto& [n, indices] : by_views) {
        for (std::size_t start = 0; start < indices.size(); start += batch_size) {
            const std::size_t stop = std::min(indices.size(), start + batch_size);
            chunk.clear();
            for (std::size_t k = start; k < stop; ++k) chunk.push_back(&samples[indices[k]]);
            const Batch<T> batch = make_batch<T>(chunk, model.tokenizer_config());
            const HeadLogits<T> logits = model.forward(batch);
            const auto pe = logits.elements.data();
            const auto pm = logits.materials.data();
            for (std::size_t k = 0; k < chunk.size(); ++k) {
                const std::size_t i = indices[start + k];
                auto& row = table.scores[i];
                for (std::size_t c = 0; c < kElementClasses; ++c) row[c] = logistic(double(pe[k * kElementClasses + c]));
                for (std::size_t c = 0; c < kMaterialClasses; ++c)
                    row[kElementClasses + c] = logistic(double(pm[k * kMaterialClasses + c]));
                auto& lab = table.labels[i];
                std::copy(samples[i].elements.begin(), samples[i].elements.end(), lab.begin());
                std::copy(samples[i].materials.begin(), samples[i].materials.end(), lab.begin() + kElementClasses);
            }
        }
    }
    return table;
}

template <typename T>
EvalReport evaluate(const Classifier<T>& model, std::span<const PreparedSample> samples, std::size_t batch_size) {
    return evaluate_scores(score_dataset(model, samples, batch_size));
}

template ScoreTable score_dataset<float>(const Classifier<float>&, std::span<const PreparedSample>, std::size_t);
template ScoreTable score_dataset<double>(const Classifier<double>&, std::span<const PreparedSample>, std::size_t);
template EvalReport evaluate<float>(const Classifier<float>&, std::span<const PreparedSample>, std::size_t);
template EvalReport evaluate<double>(const Classifier<double>&, std::span<const PreparedSample>, std::size_t);

namespace {

using ojson = nlohmann::ordered_json;

ojson optional_json(const std::optional<double>& v) {
    return v ? ojson(*v) : ojson(nullptr);
}

std::optional<double> optional_value(const nlohmann::json& j, const std::string& key) {
    if (!j.contains(key)) throw ValidationError("report: missing field '" + key + "'");
    const auto& v = j.at(key);
    if (v.is_null()) return std::nullopt;
    if (!v.is_number()) throw ValidationError("report: field '" + key + "' is not a number");
    return v.get<double>();
}

} // namespace

std::string report_json(const EvalReport& report) {
    ojson ap = ojson::object();
    for (std::size_t c = 0; c < kClassCount; ++c) ap[std::string(kClassNames[c])] = optional_json(report.ap[c]);
    ojson j;
    j["ap"] = ap;
    j["map_elements"] = optional_json(report.map_elements);
    j["map_materials"] = optional_json(report.map_materials);
    j["map_materials_star"] = optional_json(report.map_materials_star);
    return j.dump(2) + "\n";
}

EvalReport parse_report_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ValidationError(std::string("report: malformed JSON: ") + e.what());
    }
    if (!j.is_object() || !j.contains("ap") || !j["ap"].is_object()) {
        throw ValidationError("report: missing per-class 'ap' object");
    }
    const auto& ap = j["ap"];
    for (const auto& [key, value] : ap.items()) {
        if (!class_index(key)) throw ValidationError("report: class '" + key + "' is not in the taxonomy");
    }
    EvalReport report;
    for (std::size_t c = 0; c < kClassCount; ++c) {
        const std::string name(kClassNames[c]);
        if (!ap.contains(name)) throw ValidationError("report: taxonomy mismatch, class '" + name + "' missing");
        report.ap[c] = optional_value(ap, name);
    }
    report.map_elements = optional_value(j, "map_elements");
    report.map_materials = optional_value(j, "map_materials");
    report.map_materials_star = optional_value(j, "map_materials_star");
    return report;
}

EvalReport read_report(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot read report '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_report_json(ss.str());
}

namespace {

std::string csv_value(const std::optional<double>& v) {
    if (!v) return "";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", *v);
    return buf;
}

} // namespace

std::string report_csv(std::span<const std::pair<std::string, EvalReport>> rows) {
    std::ostringstream os;
    os << "model";
    for (auto name : kClassNames) os << ',' << name;
    os << ",map_elements,map_materials,map_materials_star\n";
    for (const auto& [name, r] : rows) {
        os << name;
        for (const auto& ap : r.ap) os << ',' << csv_value(ap);
        os << ',' << csv_value(r.map_elements) << ',' << csv_value(r.map_materials) << ','
           << csv_value(r.map_materials_star) << '\n';
    }
    return os.str();
}

namespace {

std::optional<double> diff_points(const std::optional<double>& base, const std::optional<double>& cand) {
    if (!base || !cand) return std::nullopt;
    return 100.0 * (*cand - *base);
}

} // namespace

DeltaRow delta(const std::string& name, const EvalReport& baseline, const EvalReport& candidate) {
    DeltaRow row;
    row.name = name;
    for (std::size_t c = 0; c < kClassCount; ++c) row.ap[c] = diff_points(baseline.ap[c], candidate.ap[c]);
    row.map_elements = diff_points(baseline.map_elements, candidate.map_elements);
    row.map_materials = diff_points(baseline.map_materials, candidate.map_materials);
    row.map_materials_star = diff_points(baseline.map_materials_star, candidate.map_materials_star);
    return row;
}

std::string format_delta(std::optional<double> points) {
    if (!points) return "n/a";
    const double rounded = std::round(*points * 10.0) / 10.0;
    if (rounded == 0.0) return "0.0";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%+.1f", rounded);
    return buf;
}

std::string delta_table(std::span<const DeltaRow> rows) {
    std::ostringstream os;
    os << "model";
    for (auto name : kClassNames) os << ',' << name;
    os << ",map_elements,map_materials,map_materials_star\n";
    for (const auto& row : rows) {
        os << row.name;
        for (const auto& d : row.ap) os << ',' << format_delta(d);
        os << ',' << format_delta(row.map_elements) << ',' << format_delta(row.map_materials) << ','
           << format_delta(row.map_materials_star) << '\n';
    }
    return os.str();
}

} // namespace latentfuse
