#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "tbrf/random_stream.hpp"

namespace tbrf {

struct Sample {
    std::vector<double> features;
    double target = 0.0;
};

/// n samples of dimension d stored row-major, plus the target bound M.
///
/// M defaults to max |Y_i| over the samples and is kept current as samples
/// are added; set_target_bound() overrides it with a caller-supplied value,
/// which must still dominate every target.
class Dataset {
public:
    explicit Dataset(std::size_t dim);
    Dataset(std::size_t dim, std::vector<double> features, std::vector<double> targets);

    void add(std::span<const double> features, double target);
    void add(const Sample& sample) { add(sample.features, sample.target); }

    std::size_t size() const { return targets_.size(); }
    bool empty() const { return targets_.empty(); }
    std::size_t dim() const { return dim_; }

    std::span<const double> features(std::size_t i) const
    {
        return {features_.data() + i * dim_, dim_};
    }
    double target(std::size_t i) const { return targets_[i]; }
    Sample sample(std::size_t i) const;

    const std::vector<double>& feature_data() const { return features_; }
    const std::vector<double>& targets() const { return targets_; }

    double target_bound() const;
    void set_target_bound(double bound);

    /// Rows selected by `indices`, in that order.
    Dataset subset(std::span<const std::size_t> indices) const;

private:
    std::size_t dim_;
    std::vector<double> features_;
    std::vector<double> targets_;
    double max_abs_target_ = 0.0;
    double explicit_bound_ = 0.0;
};

enum class HeaderMode { Absent, Present, Detect };

/// Raw numeric CSV table: optional header names plus rows of equal width.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;
    std::size_t columns = 0;
};

/// Comma-separated, decimal point, optional single header row. Fields must
/// be finite numbers. Errors name the 1-based data row.
CsvTable read_csv_table(const std::filesystem::path& path, HeaderMode header);

/// Load features + target (last column).
Dataset load_csv(const std::filesystem::path& path, bool has_header);
Dataset load_csv(const std::filesystem::path& path, HeaderMode header = HeaderMode::Detect);

/// Writes "x0,...,x{d-1},y" followed by the rows; values are printed with
/// enough digits to round-trip exactly.
void write_csv(const Dataset& data, const std::filesystem::path& path);

/// Shortest decimal text that parses back to the same double.
std::string format_double(double value);

/// Shuffled disjoint split. The training part has round((1 - f) n) rows.
std::pair<Dataset, Dataset> train_test_split(const Dataset& data, double test_fraction,
                                             RandomStream stream);

} // namespace tbrf
