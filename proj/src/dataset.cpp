#include "kdiff/dataset.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

namespace kdiff {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::stringstream ss(line);
    while (std::getline(ss, cell, ',')) {
        // trim surrounding whitespace and a trailing \r
        auto b = cell.find_first_not_of(" \t\r");
        auto e = cell.find_last_not_of(" \t\r");
        cells.push_back(b == std::string::npos ? std::string{} : cell.substr(b, e - b + 1));
    }
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
}

bool parse_finite_double(const std::string& s, double& out) {
    if (s.empty()) return false;
    const char* first = s.data();
    const char* last = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(first, last, out);
    return ec == std::errc{} && ptr == last && std::isfinite(out);
}

// Deterministic uniform/normal sampling independent of the standard library's
// distribution implementations.
class Sampler {
public:
    explicit Sampler(std::uint64_t seed) : state_(seed ^ 0x9e3779b97f4a7c15ULL) {}

    double uniform() {  // [0, 1)
        return static_cast<double>(next() >> 11) * 0x1.0p-53;
    }

    double normal() {  // Marsaglia polar
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u, v, s;
        do {
            u = 2.0 * uniform() - 1.0;
            v = 2.0 * uniform() - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        const double m = std::sqrt(-2.0 * std::log(s) / s);
        spare_ = v * m;
        have_spare_ = true;
        return u * m;
    }

private:
    std::uint64_t next() {  // splitmix64
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    std::uint64_t state_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace

int Dataset::num_classes() const {
    if (!labels) return 0;
    int top = -1;
    for (int id : *labels) top = std::max(top, id);
    return top + 1;
}

LabelColumn LabelColumn::parse(const std::string& selector) {
    if (selector == "none") return none();
    if (selector == "last") return last();
    int idx = 0;
    auto [ptr, ec] = std::from_chars(selector.data(), selector.data() + selector.size(), idx);
    if (ec == std::errc{} && ptr == selector.data() + selector.size()) {
        if (idx < 0) throw std::invalid_argument("label column index must be nonnegative");
        return by_index(idx);
    }
    return by_name(selector);
}

Dataset load_dataset(const std::string& path, const LabelColumn& label) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open dataset file: " + path);

    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> header;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        auto cells = split_csv_line(line);
        if (cells.empty() || (cells.size() == 1 && cells[0].empty())) continue;
        if (first) {
            first = false;
            double tmp;
            const bool all_numeric = std::all_of(cells.begin(), cells.end(), [&](const auto& c) {
                return parse_finite_double(c, tmp);
            });
            if (!all_numeric) {
                header = cells;
                continue;
            }
        }
        rows.push_back(std::move(cells));
    }
    if (rows.empty()) throw std::runtime_error("empty dataset: " + path);

    const std::size_t cols = rows.front().size();
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r].size() != cols) {
            throw std::runtime_error("row " + std::to_string(r + 1) + " has " +
                                     std::to_string(rows[r].size()) + " cells, expected " +
                                     std::to_string(cols));
        }
    }
    if (!header.empty() && header.size() != cols) {
        throw std::runtime_error("header has " + std::to_string(header.size()) +
                                 " cells but rows have " + std::to_string(cols));
    }

    int label_col = -1;
    switch (label.kind) {
        case LabelColumn::Kind::None:
            break;
        case LabelColumn::Kind::Last:
            label_col = static_cast<int>(cols) - 1;
            break;
        case LabelColumn::Kind::ByIndex:
            if (label.index >= static_cast<int>(cols)) {
                throw std::runtime_error("label column index " + std::to_string(label.index) +
                                         " out of range (file has " + std::to_string(cols) +
                                         " columns)");
            }
            label_col = label.index;
            break;
        case LabelColumn::Kind::ByName: {
            auto it = std::find(header.begin(), header.end(), label.name);
            if (it == header.end()) {
                throw std::runtime_error("label column '" + label.name + "' not found in header");
            }
            label_col = static_cast<int>(it - header.begin());
            break;
        }
    }

    const Index n = static_cast<Index>(rows.size());
    const Index d = static_cast<Index>(cols) - (label_col >= 0 ? 1 : 0);
    if (d < 1) throw std::runtime_error("dataset has no feature columns");

    Dataset ds;
    ds.points.resize(n, d);
    std::vector<int> labels;
    std::map<std::string, int> label_ids;  // first-appearance encoding
    std::vector<std::string> appearance;

    for (Index r = 0; r < n; ++r) {
        Index j = 0;
        for (std::size_t col = 0; col < cols; ++col) {
            if (static_cast<int>(col) == label_col) continue;
            double v;
            if (!parse_finite_double(rows[r][col], v)) {
                throw std::runtime_error("non-numeric feature cell at row " + std::to_string(r + 1) +
                                         ", column " + std::to_string(col + 1) + ": '" +
                                         rows[r][col] + "'");
            }
            ds.points(r, j++) = v;
        }
        if (label_col >= 0) {
            const std::string& raw = rows[r][label_col];
            auto [it, inserted] = label_ids.try_emplace(raw, static_cast<int>(appearance.size()));
            if (inserted) appearance.push_back(raw);
            labels.push_back(it->second);
        }
    }
    if (label_col >= 0) ds.labels = std::move(labels);
    ds.name = std::filesystem::path(path).stem().string();
    return ds;
}

Dataset standardize(const Dataset& ds) {
    Dataset out = ds;
    const Index n = ds.size();
    for (Index j = 0; j < ds.dim(); ++j) {
        auto col = out.points.col(j);
        const double lo = col.minCoeff();
        const double hi = col.maxCoeff();
        if (lo == hi) {
            col.setZero();
            continue;
        }
        const double mean = col.mean();
        const double sd = std::sqrt((col.array() - mean).square().sum() / static_cast<double>(n));
        col = (col.array() - mean) / sd;
    }
    return out;
}

void GmmSpec::validate() const {
    if (components.empty()) throw std::invalid_argument("gmm: components must be non-empty");
    if (n < 1) throw std::invalid_argument("gmm: n must be >= 1");
    const Index d = components.front().mean.size();
    if (d < 1) throw std::invalid_argument("gmm: component means must be non-empty vectors");
    double wsum = 0.0;
    for (const auto& comp : components) {
        if (comp.mean.size() != d) {
            throw std::invalid_argument("gmm: component means must all have the same dimension");
        }
        if (!(comp.variance > 0.0)) {
            throw std::invalid_argument("gmm: component variances must be positive");
        }
        if (comp.weight < 0.0) throw std::invalid_argument("gmm: weights must be nonnegative");
        wsum += comp.weight;
    }
    if (std::abs(wsum - 1.0) > 1e-12) {
        throw std::invalid_argument("gmm: weights must sum to 1 (got " + std::to_string(wsum) + ")");
    }
}

GmmSpec gmm_spec_from_json_text(const std::string& text) {
    const auto j = nlohmann::json::parse(text);
    GmmSpec spec;
    spec.n = j.at("n").get<Index>();
    spec.seed = j.value("seed", std::uint64_t{0});
    for (const auto& cj : j.at("components")) {
        GmmComponent comp;
        comp.weight = cj.at("weight").get<double>();
        comp.variance = cj.at("variance").get<double>();
        const auto mean = cj.at("mean").get<std::vector<double>>();
        comp.mean = Eigen::Map<const Vector>(mean.data(), static_cast<Index>(mean.size()));
        spec.components.push_back(std::move(comp));
    }
    spec.validate();
    return spec;
}

Dataset sample_gmm(const GmmSpec& spec) {
    spec.validate();
    const Index d = spec.dim();
    Sampler rng(spec.seed);

    std::vector<double> cumulative;
    double acc = 0.0;
    for (const auto& comp : spec.components) {
        acc += comp.weight;
        cumulative.push_back(acc);
    }
    cumulative.back() = 1.0;

    Dataset ds;
    ds.points.resize(spec.n, d);
    std::vector<int> labels(spec.n);
    for (Index i = 0; i < spec.n; ++i) {
        const double u = rng.uniform();
        int comp = 0;
        while (u >= cumulative[comp]) ++comp;
        const auto& component = spec.components[comp];
        const double sd = std::sqrt(component.variance);
        for (Index j = 0; j < d; ++j) {
            ds.points(i, j) = component.mean[j] + sd * rng.normal();
        }
        labels[i] = comp;
    }
    ds.labels = std::move(labels);
    ds.name = "gmm";
    return ds;
}

}  // namespace kdiff
