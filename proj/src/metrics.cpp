#include "kdiff/metrics.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cstdint>
#include <unordered_map>

namespace kdiff {

namespace {

void check_inputs(const std::vector<int>& pred, const std::vector<int>& truth) {
    if (pred.size() != truth.size()) {
        throw std::invalid_argument("scores: pred/truth length mismatch (" +
                                    std::to_string(pred.size()) + " vs " +
                                    std::to_string(truth.size()) + ")");
    }
    for (int t : truth) {
        if (t < 0) throw std::invalid_argument("scores: truth labels must not contain noise ids");
    }
}

// Noise points become singleton clusters.
std::vector<int> expand_noise(const std::vector<int>& pred) {
    int next = 0;
    for (int p : pred) next = std::max(next, p + 1);
    std::vector<int> out = pred;
    for (int& p : out) {
        if (p < 0) p = next++;
    }
    return out;
}

double harmonic(double p, double r) { return (p + r) > 0.0 ? 2.0 * p * r / (p + r) : 0.0; }

std::int64_t pairs(std::int64_t m) { return m * (m - 1) / 2; }

struct Contingency {
    std::unordered_map<std::int64_t, std::int64_t> cells;  // (pred, truth) -> count
    std::unordered_map<int, std::int64_t> pred_sizes;
    std::unordered_map<int, std::int64_t> truth_sizes;

    Contingency(const std::vector<int>& pred, const std::vector<int>& truth) {
        for (std::size_t i = 0; i < pred.size(); ++i) {
            const std::int64_t key =
                (static_cast<std::int64_t>(pred[i]) << 32) | static_cast<std::uint32_t>(truth[i]);
            ++cells[key];
            ++pred_sizes[pred[i]];
            ++truth_sizes[truth[i]];
        }
    }
};

}  // namespace

Scores pairwise_scores(const std::vector<int>& pred, const std::vector<int>& truth) {
    check_inputs(pred, truth);
    const auto p = expand_noise(pred);
    const Contingency table(p, truth);

    std::int64_t tp = 0;
    for (const auto& [key, count] : table.cells) tp += pairs(count);
    std::int64_t pred_pairs = 0;
    for (const auto& [id, count] : table.pred_sizes) pred_pairs += pairs(count);
    std::int64_t truth_pairs = 0;
    for (const auto& [id, count] : table.truth_sizes) truth_pairs += pairs(count);

    Scores s;
    s.precision = pred_pairs > 0 ? static_cast<double>(tp) / static_cast<double>(pred_pairs) : 0.0;
    s.recall = truth_pairs > 0 ? static_cast<double>(tp) / static_cast<double>(truth_pairs) : 0.0;
    s.f = harmonic(s.precision, s.recall);
    return s;
}

Scores bcubed_scores(const std::vector<int>& pred, const std::vector<int>& truth) {
    check_inputs(pred, truth);
    const auto p = expand_noise(pred);
    const Contingency table(p, truth);
    const double n = static_cast<double>(pred.size());

    // sum_x |C(x) & L(x)| / |C(x)| == sum over cells of o^2 / |C|.
    double precision_sum = 0.0;
    double recall_sum = 0.0;
    for (const auto& [key, count] : table.cells) {
        const int pid = static_cast<int>(key >> 32);
        const int tid = static_cast<int>(key & 0xffffffff);
        const double o = static_cast<double>(count);
        precision_sum += o * o / static_cast<double>(table.pred_sizes.at(pid));
        recall_sum += o * o / static_cast<double>(table.truth_sizes.at(tid));
    }

    Scores s;
    s.precision = precision_sum / n;
    s.recall = recall_sum / n;
    s.f = harmonic(s.precision, s.recall);
    return s;
}

EvalReport evaluate(const ClusterResult& result, const std::vector<int>& truth) {
    EvalReport report;
    report.pairwise = pairwise_scores(result.labels, truth);
    report.bcubed = bcubed_scores(result.labels, truth);
    report.n = static_cast<Index>(result.labels.size());
    report.provenance = result.provenance;
    return report;
}

std::string eval_report_json(const EvalReport& report) {
    nlohmann::json j;
    j["pairwise"] = {{"precision", report.pairwise.precision},
                     {"recall", report.pairwise.recall},
                     {"f", report.pairwise.f}};
    j["bcubed"] = {{"precision", report.bcubed.precision},
                   {"recall", report.bcubed.recall},
                   {"f", report.bcubed.f}};
    j["n"] = report.n;
    j["provenance"] = {{"algorithm", report.provenance.algorithm},
                       {"density", report.provenance.density},
                       {"params", report.provenance.params}};
    return j.dump(2);
}

}  // namespace kdiff
