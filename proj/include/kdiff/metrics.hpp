#pragma once

#include "kdiff/clustering.hpp"

#include <string>
#include <vector>

namespace kdiff {

struct Scores {
    double precision = 0.0;
    double recall = 0.0;
    double f = 0.0;
};

/// Pairwise precision/recall/F over all unordered point pairs. Noise points
/// in pred are expanded to singleton clusters first; 0/0 ratios are 0.
Scores pairwise_scores(const std::vector<int>& pred, const std::vector<int>& truth);

/// BCubed precision/recall/F with unweighted per-point means.
Scores bcubed_scores(const std::vector<int>& pred, const std::vector<int>& truth);

struct EvalReport {
    Scores pairwise;
    Scores bcubed;
    Index n = 0;
    Provenance provenance;
};

EvalReport evaluate(const ClusterResult& result, const std::vector<int>& truth);

std::string eval_report_json(const EvalReport& report);

}  // namespace kdiff
