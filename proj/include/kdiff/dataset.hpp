#pragma once

#include "kdiff/common.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace kdiff {

/// A point set with optional ground-truth labels. Rows of `points` are
/// observations; labels, when present, are dense ids 0..c-1.
struct Dataset {
    Matrix points;                              // n x d
    std::optional<std::vector<int>> labels;     // length n, ids 0..c-1
    std::string name;

    Index size() const { return points.rows(); }
    Index dim() const { return points.cols(); }

    /// Number of distinct label ids (0 when unlabeled).
    int num_classes() const;
};

/// Selects which CSV column holds the class label.
struct LabelColumn {
    enum class Kind { None, Last, ByIndex, ByName };
    Kind kind = Kind::Last;
    int index = -1;
    std::string name;

    static LabelColumn none() { return {Kind::None, -1, {}}; }
    static LabelColumn last() { return {Kind::Last, -1, {}}; }
    static LabelColumn by_index(int i) { return {Kind::ByIndex, i, {}}; }
    static LabelColumn by_name(std::string n) { return {Kind::ByName, -1, std::move(n)}; }

    /// Parses a CLI selector: "none", "last", a 0-based integer, or a header name.
    static LabelColumn parse(const std::string& selector);
};

/// Loads a CSV point set. The header row is optional (detected by non-numeric
/// cells); label values may be strings and are re-encoded to 0..c-1 in
/// first-appearance order.
Dataset load_dataset(const std::string& path, const LabelColumn& label = LabelColumn::last());

/// Centers every feature column to mean 0 and scales it to standard deviation
/// 1, using the population convention (divide by n). Constant columns map to
/// all-zeros. Idempotent up to rounding.
Dataset standardize(const Dataset& ds);

struct GmmComponent {
    double weight = 0.0;
    Vector mean;
    double variance = 0.0;  // isotropic
};

/// Mixture specification for synthetic data. Weights must sum to 1 within
/// 1e-12 and variances must be positive.
struct GmmSpec {
    std::vector<GmmComponent> components;
    Index n = 0;
    std::uint64_t seed = 0;

    Index dim() const { return components.empty() ? 0 : components.front().mean.size(); }
    void validate() const;  // throws std::invalid_argument
};

/// Reads a GmmSpec from JSON text of the form
/// {"components":[{"weight":w,"mean":[..],"variance":v},..],"n":..,"seed":..}.
GmmSpec gmm_spec_from_json_text(const std::string& text);

/// Draws n labeled points from the mixture. The label of a point is the index
/// of the component that generated it. Deterministic for a fixed seed (the
/// normal sampler is self-contained, not the standard library's).
Dataset sample_gmm(const GmmSpec& spec);

}  // namespace kdiff
