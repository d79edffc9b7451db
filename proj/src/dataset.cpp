// SPDX-License-Identifier: Apache-2.0

#include "mmfs/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include "mmfs/rng.hpp"

#include "json.hpp"

namespace mmfs {

namespace {

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::stringstream ss(line);
    while (std::getline(ss, field, ',')) out.push_back(field);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r\n");
    if (begin == std::string::npos) return "";
    const auto end = s.find_last_not_of(" \t\r\n");
    return s.substr(begin, end - begin + 1);
}

double parse_double(const std::string& raw, std::size_t line_no, const std::string& col) {
    const std::string s = trim(raw);
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (ec != std::errc{} || ptr != s.data() + s.size()) {
        throw std::runtime_error("non-numeric value '" + raw + "' in column '" + col +
                                 "' at line " + std::to_string(line_no));
    }
    return value;
}

// Shortest representation that round-trips the double exactly.
std::string format_double(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

} // namespace

Dataset Dataset::subset(const std::vector<int>& rows) const {
    Dataset out;
    out.feature_names = feature_names;
    out.X = Matrix(rows.size(), n_features());
    out.y.resize(rows.size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        const int src = rows[r];
        std::copy(X.row(src), X.row(src) + n_features(), out.X.row(r));
        out.y[r] = y[src];
    }
    return out;
}

std::vector<int> FoldPlan::test_indices(int fold) const {
    std::vector<int> out;
    for (std::size_t i = 0; i < assignments.size(); ++i) {
        if (assignments[i] == fold) out.push_back(static_cast<int>(i));
    }
    return out;
}

std::vector<int> FoldPlan::train_indices(int fold) const {
    std::vector<int> out;
    for (std::size_t i = 0; i < assignments.size(); ++i) {
        if (assignments[i] != fold) out.push_back(static_cast<int>(i));
    }
    return out;
}

std::string FoldPlan::to_json() const {
    nlohmann::json j;
    j["seed"] = seed;
    j["k"] = k;
    j["assignments"] = assignments;
    return j.dump();
}

Dataset load_csv(const std::string& path, const std::string& label_column) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open dataset file: " + path);

    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("empty dataset file: " + path);
    const auto header = split_line(line);

    std::size_t label_idx = header.size();
    std::vector<std::string> names;
    for (std::size_t c = 0; c < header.size(); ++c) {
        const std::string name = trim(header[c]);
        if (name == label_column) {
            label_idx = c;
        } else {
            names.push_back(name);
        }
    }
    if (label_idx == header.size()) {
        throw std::runtime_error("label column '" + label_column + "' not found in " + path);
    }
    {
        std::set<std::string> uniq(names.begin(), names.end());
        if (uniq.size() != names.size()) {
            throw std::runtime_error("duplicate feature names in " + path);
        }
    }

    std::vector<std::vector<double>> rows;
    std::vector<std::string> raw_labels;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const auto fields = split_line(line);
        if (fields.size() != header.size()) {
            throw std::runtime_error("row with " + std::to_string(fields.size()) +
                                     " fields, expected " + std::to_string(header.size()) +
                                     " at line " + std::to_string(line_no));
        }
        std::vector<double> row;
        row.reserve(names.size());
        for (std::size_t c = 0; c < fields.size(); ++c) {
            if (c == label_idx) {
                raw_labels.push_back(trim(fields[c]));
            } else {
                row.push_back(parse_double(fields[c], line_no, trim(header[c])));
            }
        }
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw std::runtime_error("no data rows in " + path);

    std::set<std::string> classes(raw_labels.begin(), raw_labels.end());
    if (classes.size() != 2) {
        throw std::runtime_error("label column '" + label_column + "' has " +
                                 std::to_string(classes.size()) + " distinct values, need 2");
    }
    const std::string positive = *classes.rbegin(); // lexicographically larger -> +1

    Dataset ds;
    ds.feature_names = std::move(names);
    ds.X = Matrix(rows.size(), ds.feature_names.size());
    ds.y.resize(rows.size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        std::copy(rows[r].begin(), rows[r].end(), ds.X.row(r));
        ds.y[r] = (raw_labels[r] == positive) ? 1.0 : -1.0;
    }
    return ds;
}

void write_csv(const Dataset& ds, const std::string& path, const std::string& label_column) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    for (const auto& name : ds.feature_names) out << name << ',';
    out << label_column << '\n';
    for (std::size_t r = 0; r < ds.n_rows(); ++r) {
        for (std::size_t c = 0; c < ds.n_features(); ++c) out << format_double(ds.X(r, c)) << ',';
        out << (ds.y[r] > 0 ? "1" : "-1") << '\n';
    }
}

ScalingSpec fit_scaling(const Dataset& ds) {
    ScalingSpec spec;
    const std::size_t m = ds.n_features();
    spec.lo.assign(m, 0.0);
    spec.hi.assign(m, 0.0);
    for (std::size_t j = 0; j < m; ++j) {
        double lo = ds.X(0, j);
        double hi = ds.X(0, j);
        for (std::size_t i = 1; i < ds.n_rows(); ++i) {
            lo = std::min(lo, ds.X(i, j));
            hi = std::max(hi, ds.X(i, j));
        }
        spec.lo[j] = lo;
        spec.hi[j] = hi;
    }
    return spec;
}

Dataset apply_scaling(const Dataset& ds, const ScalingSpec& spec) {
    if (spec.lo.size() != ds.n_features()) {
        throw std::invalid_argument("scaling spec does not match feature count");
    }
    Dataset out = ds;
    for (std::size_t j = 0; j < ds.n_features(); ++j) {
        const double range = spec.hi[j] - spec.lo[j];
        for (std::size_t i = 0; i < ds.n_rows(); ++i) {
            out.X(i, j) = (range == 0.0) ? 0.0 : 2.0 * (ds.X(i, j) - spec.lo[j]) / range - 1.0;
        }
    }
    return out;
}

FoldPlan make_folds(const std::vector<double>& y, int k, std::uint64_t seed) {
    const int n = static_cast<int>(y.size());
    if (k < 2) throw std::invalid_argument("fold count must be at least 2");
    if (k > n) throw std::invalid_argument("fold count exceeds sample size");

    // Group indices by label (-1 first), shuffle each group, then deal the
    // concatenation round-robin. The cumulative offset keeps overall fold
    // sizes within one as well, so every fold is nonempty for n >= k.
    std::map<double, std::vector<int>> by_class;
    for (int i = 0; i < n; ++i) by_class[y[i]].push_back(i);

    Rng rng(derive_seed(seed, 0x0f01d5));
    FoldPlan plan;
    plan.k = k;
    plan.seed = seed;
    plan.assignments.assign(n, 0);

    int offset = 0;
    for (auto& [label, idx] : by_class) {
        for (std::size_t i = idx.size(); i > 1; --i) {
            const std::size_t j = rng.uniform_below(i);
            std::swap(idx[i - 1], idx[j]);
        }
        for (std::size_t i = 0; i < idx.size(); ++i) {
            plan.assignments[idx[i]] = static_cast<int>((i + offset) % k);
        }
        offset = static_cast<int>((offset + idx.size()) % k);
    }
    return plan;
}

Dataset make_synthetic(int n, int informative, int noise, std::uint64_t seed, double separation) {
    if (informative < 1) throw std::invalid_argument("need at least one informative feature");
    if (n < 2) throw std::invalid_argument("need at least two points");

    const int m = informative + noise;
    Dataset ds;
    ds.X = Matrix(n, m);
    ds.y.resize(n);
    for (int j = 0; j < informative; ++j) ds.feature_names.push_back("inf" + std::to_string(j + 1));
    for (int j = 0; j < noise; ++j) ds.feature_names.push_back("noise" + std::to_string(j + 1));

    Rng rng(derive_seed(seed, 0x5f17e7));
    const double shift = separation / 2.0;
    for (int i = 0; i < n; ++i) {
        const double label = (i % 2 == 0) ? 1.0 : -1.0;
        ds.y[i] = label;
        for (int j = 0; j < m; ++j) {
            const double center = (j < informative) ? label * shift : 0.0;
            ds.X(i, j) = center + rng.normal();
        }
    }
    return ds;
}

} // namespace mmfs
