#include "tbrf/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "tbrf/error.hpp"

namespace tbrf {

Dataset::Dataset(std::size_t dim) : dim_{dim}
{
    if (dim == 0)
        throw ValidationError("dataset dimension must be positive");
}

Dataset::Dataset(std::size_t dim, std::vector<double> features, std::vector<double> targets)
    : Dataset(dim)
{
    if (features.size() != dim * targets.size())
        throw ValidationError("feature buffer size does not match dim * n");
    for (std::size_t i = 0; i < targets.size(); ++i)
        add(std::span<const double>(features.data() + i * dim, dim), targets[i]);
}

void Dataset::add(std::span<const double> features, double target)
{
    if (features.size() != dim_)
        throw ValidationError("sample has " + std::to_string(features.size()) +
                              " features, dataset dimension is " + std::to_string(dim_));
    if (!std::isfinite(target) ||
        !std::all_of(features.begin(), features.end(), [](double v) { return std::isfinite(v); }))
        throw ValidationError("sample contains a non-finite value");
    if (explicit_bound_ > 0.0 && std::abs(target) > explicit_bound_)
        throw ValidationError("target exceeds the declared bound");
    features_.insert(features_.end(), features.begin(), features.end());
    targets_.push_back(target);
    max_abs_target_ = std::max(max_abs_target_, std::abs(target));
}

Sample Dataset::sample(std::size_t i) const
{
    auto x = features(i);
    return Sample{{x.begin(), x.end()}, targets_[i]};
}

double Dataset::target_bound() const
{
    if (explicit_bound_ > 0.0)
        return explicit_bound_;
    // An all-zero target set still needs a positive codomain.
    return max_abs_target_ > 0.0 ? max_abs_target_ : 1.0;
}

void Dataset::set_target_bound(double bound)
{
    if (!(bound > 0.0) || !std::isfinite(bound))
        throw ValidationError("target bound must be positive and finite");
    if (max_abs_target_ > bound)
        throw ValidationError("target bound is smaller than max |target|");
    explicit_bound_ = bound;
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const
{
    Dataset out(dim_);
    out.features_.reserve(indices.size() * dim_);
    out.targets_.reserve(indices.size());
    for (std::size_t i : indices)
        out.add(features(i), targets_[i]);
    out.explicit_bound_ = explicit_bound_;
    return out;
}

namespace {

std::vector<std::string_view> split_fields(std::string_view line)
{
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    for (;;) {
        std::size_t comma = line.find(',', start);
        if (comma == std::string_view::npos) {
            fields.push_back(line.substr(start));
            return fields;
        }
        fields.push_back(line.substr(start, comma - start));
        start = comma + 1;
    }
}

std::string_view trim(std::string_view s)
{
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t'))
        s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
        s.remove_suffix(1);
    return s;
}

bool parse_number(std::string_view text, double& value)
{
    text = trim(text);
    if (!text.empty() && text.front() == '+')
        text.remove_prefix(1);
    if (text.empty())
        return false;
    auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    return ec == std::errc{} && end == text.data() + text.size() && std::isfinite(value);
}

bool all_numeric(const std::vector<std::string_view>& fields)
{
    double scratch;
    return std::all_of(fields.begin(), fields.end(),
                       [&](std::string_view f) { return parse_number(f, scratch); });
}

} // namespace

CsvTable read_csv_table(const std::filesystem::path& path, HeaderMode header)
{
    std::ifstream in(path);
    if (!in)
        throw IoError("cannot open '" + path.string() + "'");

    CsvTable table;
    std::string line;
    std::size_t data_row = 0;
    bool first = true;
    while (std::getline(in, line)) {
        if (trim(line).empty())
            continue;
        // UTF-8 byte order mark
        if (first && line.starts_with("\xEF\xBB\xBF"))
            line.erase(0, 3);
        auto fields = split_fields(line);
        if (first) {
            first = false;
            bool is_header = header == HeaderMode::Present ||
                             (header == HeaderMode::Detect && !all_numeric(fields));
            table.columns = fields.size();
            if (is_header) {
                for (auto f : fields)
                    table.header.emplace_back(trim(f));
                continue;
            }
        }
        ++data_row;
        if (fields.size() != table.columns)
            throw ValidationError(path.string() + ": row " + std::to_string(data_row) + " has " +
                                  std::to_string(fields.size()) + " fields, expected " +
                                  std::to_string(table.columns));
        std::vector<double> row(fields.size());
        for (std::size_t c = 0; c < fields.size(); ++c) {
            if (!parse_number(fields[c], row[c]))
                throw ValidationError(path.string() + ": row " + std::to_string(data_row) +
                                      ", column " + std::to_string(c + 1) + ": '" +
                                      std::string(trim(fields[c])) + "' is not a finite number");
        }
        table.rows.push_back(std::move(row));
    }
    if (in.bad())
        throw IoError("read error on '" + path.string() + "'");
    if (first)
        throw ValidationError(path.string() + ": file is empty");
    return table;
}

Dataset load_csv(const std::filesystem::path& path, bool has_header)
{
    return load_csv(path, has_header ? HeaderMode::Present : HeaderMode::Absent);
}

Dataset load_csv(const std::filesystem::path& path, HeaderMode header)
{
    CsvTable table = read_csv_table(path, header);
    if (table.rows.empty())
        throw ValidationError(path.string() + ": no data rows");
    if (table.columns < 2)
        throw ValidationError(path.string() + ": need at least one feature column and a target");
    Dataset data(table.columns - 1);
    for (const auto& row : table.rows)
        data.add(std::span<const double>(row.data(), row.size() - 1), row.back());
    return data;
}

std::string format_double(double value)
{
    char buffer[64];
    auto [end, ec] = std::to_chars(buffer, buffer + sizeof buffer, value);
    return std::string(buffer, end);
}

void write_csv(const Dataset& data, const std::filesystem::path& path)
{
    std::ofstream out(path);
    if (!out)
        throw IoError("cannot write '" + path.string() + "'");
    for (std::size_t c = 0; c < data.dim(); ++c)
        out << 'x' << c << ',';
    out << "y\n";
    for (std::size_t i = 0; i < data.size(); ++i) {
        for (double v : data.features(i))
            out << format_double(v) << ',';
        out << format_double(data.target(i)) << '\n';
    }
    if (!out)
        throw IoError("write failed for '" + path.string() + "'");
}

std::pair<Dataset, Dataset> train_test_split(const Dataset& data, double test_fraction,
                                             RandomStream stream)
{
    if (!(test_fraction > 0.0 && test_fraction < 1.0))
        throw ValidationError("test fraction must lie in (0, 1)");
    const std::size_t n = data.size();
    if (n < 2)
        throw ValidationError("need at least two samples to split");
    const auto n_train = static_cast<std::size_t>(std::llround((1.0 - test_fraction) * n));
    if (n_train == 0 || n_train == n)
        throw ValidationError("test fraction " + format_double(test_fraction) + " leaves an empty part for n = " +
                              std::to_string(n));
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    stream.shuffle(order);
    std::span<const std::size_t> all(order);
    return {data.subset(all.first(n_train)), data.subset(all.subspan(n_train))};
}

} // namespace tbrf
