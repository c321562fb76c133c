#include "tbrf/hyper_params.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "tbrf/dataset.hpp"
#include "tbrf/error.hpp"

namespace tbrf {

std::string_view to_string(LeafKind kind)
{
    switch (kind) {
    case LeafKind::Constant: return "constant";
    case LeafKind::Linear: return "linear";
    case LeafKind::Gaussian: return "gaussian";
    }
    return "?";
}

std::string_view to_string(VacancyFill fill)
{
    return fill == VacancyFill::Mean ? "mean" : "one_nn";
}

std::string_view to_string(Geometry geometry)
{
    return geometry == Geometry::AxisParallel ? "axis_parallel" : "oblique";
}

std::string_view to_string(Scoring scoring)
{
    return scoring == Scoring::Holdout ? "holdout" : "penalized_risk";
}

namespace {

std::string normalize(std::string_view text)
{
    std::string out(text);
    for (char& c : out) {
        if (c == '-')
            c = '_';
        c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
    return out;
}

std::string_view trim(std::string_view s)
{
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front())))
        s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back())))
        s.remove_suffix(1);
    return s;
}

double parse_real(std::string_view key, std::string_view text)
{
    text = trim(text);
    double value = 0.0;
    auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || end != text.data() + text.size() || !std::isfinite(value))
        throw ValidationError(std::string(key) + ": '" + std::string(text) + "' is not a number");
    return value;
}

std::uint64_t parse_unsigned(std::string_view key, std::string_view text)
{
    text = trim(text);
    std::uint64_t value = 0;
    auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || end != text.data() + text.size())
        throw ValidationError(std::string(key) + ": '" + std::string(text) +
                              "' is not a nonnegative integer");
    return value;
}

bool parse_bool(std::string_view key, std::string_view text)
{
    std::string v = normalize(trim(text));
    if (v == "1" || v == "true" || v == "yes" || v == "on")
        return true;
    if (v == "0" || v == "false" || v == "no" || v == "off")
        return false;
    throw ValidationError(std::string(key) + ": '" + std::string(text) + "' is not a boolean");
}

std::string join(const std::vector<double>& values)
{
    std::string out;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i)
            out += ',';
        out += format_double(values[i]);
    }
    return out;
}

} // namespace

LeafKind parse_leaf_kind(std::string_view text)
{
    std::string v = normalize(trim(text));
    if (v == "constant" || v == "c")
        return LeafKind::Constant;
    if (v == "linear" || v == "l")
        return LeafKind::Linear;
    if (v == "gaussian" || v == "g" || v == "rbf")
        return LeafKind::Gaussian;
    throw ValidationError("leaf_model: unknown value '" + std::string(text) + "'");
}

VacancyFill parse_vacancy_fill(std::string_view text)
{
    std::string v = normalize(trim(text));
    if (v == "mean")
        return VacancyFill::Mean;
    if (v == "one_nn" || v == "1nn" || v == "1_nn")
        return VacancyFill::OneNearestNeighbor;
    throw ValidationError("vacancy_fill: unknown value '" + std::string(text) + "'");
}

Geometry parse_geometry(std::string_view text)
{
    std::string v = normalize(trim(text));
    if (v == "axis_parallel" || v == "axis")
        return Geometry::AxisParallel;
    if (v == "oblique")
        return Geometry::Oblique;
    throw ValidationError("geometry: unknown value '" + std::string(text) + "'");
}

Scoring parse_scoring(std::string_view text)
{
    std::string v = normalize(trim(text));
    if (v == "holdout")
        return Scoring::Holdout;
    if (v == "penalized_risk" || v == "penalized")
        return Scoring::PenalizedRisk;
    throw ValidationError("scoring: unknown value '" + std::string(text) + "'");
}

std::vector<double> parse_real_list(std::string_view text)
{
    std::vector<double> values;
    std::string_view rest = trim(text);
    while (!rest.empty()) {
        std::size_t comma = rest.find(',');
        std::string_view item = trim(rest.substr(0, comma));
        if (!item.empty())
            values.push_back(parse_real("list", item));
        if (comma == std::string_view::npos)
            break;
        rest = rest.substr(comma + 1);
    }
    return values;
}

double HyperParams::lambda_for_cell(std::size_t cell) const
{
    auto it = cell_lambda.find(cell);
    return it == cell_lambda.end() ? lambda : it->second;
}

std::size_t HyperParams::effective_min_leaf() const
{
    if (min_leaf_for_model > 0)
        return min_leaf_for_model;
    switch (leaf_model) {
    case LeafKind::Constant: return 1;
    case LeafKind::Linear: return 10;
    case LeafKind::Gaussian: return 2 * c_grid.size() * gamma_grid.size();
    }
    return 1;
}

void HyperParams::validate() const
{
    auto fail = [](const std::string& what) { throw ValidationError(what); };
    if (trees == 0)
        fail("trees must be positive");
    if (cells == 0)
        fail("cells must be positive");
    if (candidates == 0)
        fail("candidates must be positive");
    if (!(split_fraction > 0.0 && split_fraction <= 1.0))
        fail("split_fraction must lie in (0, 1]");
    if (adaptive_votes == 0)
        fail("adaptive_votes must be positive");
    if (!(lambda > 0.0) || !std::isfinite(lambda))
        fail("lambda must be positive");
    for (const auto& [cell, value] : cell_lambda)
        if (!(value > 0.0) || !std::isfinite(value))
            fail("lambda." + std::to_string(cell) + " must be positive");
    if (!(holdout_fraction > 0.0 && holdout_fraction < 1.0))
        fail("holdout_fraction must lie in (0, 1)");
    if (vacancy_fill == VacancyFill::OneNearestNeighbor && geometry != Geometry::AxisParallel)
        fail("vacancy_fill=one_nn requires geometry=axis_parallel");
    auto positive = [](const std::vector<double>& grid) {
        return std::all_of(grid.begin(), grid.end(), [](double v) { return v > 0.0 && std::isfinite(v); });
    };
    if (leaf_model != LeafKind::Constant && (c_grid.empty() || !positive(c_grid)))
        fail("c_grid must be a non-empty list of positive values");
    if (leaf_model == LeafKind::Gaussian && (gamma_grid.empty() || !positive(gamma_grid)))
        fail("gamma_grid must be a non-empty list of positive values");
}

void HyperParams::set(std::string_view raw_key, std::string_view value)
{
    std::string key = normalize(trim(raw_key));
    if (key.starts_with("lambda.")) {
        auto cell = parse_unsigned(key, std::string_view(key).substr(7));
        cell_lambda[cell] = parse_real(key, value);
        return;
    }
    if (key == "trees")
        trees = parse_unsigned(key, value);
    else if (key == "cells")
        cells = parse_unsigned(key, value);
    else if (key == "candidates")
        candidates = parse_unsigned(key, value);
    else if (key == "split_fraction" || key == "pro")
        split_fraction = parse_real(key, value);
    else if (key == "adaptive_votes" || key == "votes")
        adaptive_votes = parse_unsigned(key, value);
    else if (key == "lambda")
        lambda = parse_real(key, value);
    else if (key == "leaf_model")
        leaf_model = parse_leaf_kind(value);
    else if (key == "vacancy_fill")
        vacancy_fill = parse_vacancy_fill(value);
    else if (key == "geometry")
        geometry = parse_geometry(value);
    else if (key == "scoring")
        scoring = parse_scoring(value);
    else if (key == "holdout_fraction")
        holdout_fraction = parse_real(key, value);
    else if (key == "c_grid")
        c_grid = parse_real_list(value);
    else if (key == "gamma_grid")
        gamma_grid = parse_real_list(value);
    else if (key == "min_leaf_for_model" || key == "min_leaf")
        min_leaf_for_model = parse_unsigned(key, value);
    else if (key == "pure_stage_two" || key == "pure")
        pure_stage_two = parse_bool(key, value);
    else if (key == "master_seed" || key == "seed")
        master_seed = parse_unsigned(key, value);
    else
        throw ValidationError("unknown parameter '" + std::string(raw_key) + "'");
}

std::string HyperParams::to_config() const
{
    std::ostringstream out;
    out << "trees=" << trees << '\n'
        << "cells=" << cells << '\n'
        << "candidates=" << candidates << '\n'
        << "split_fraction=" << format_double(split_fraction) << '\n'
        << "adaptive_votes=" << adaptive_votes << '\n'
        << "lambda=" << format_double(lambda) << '\n';
    for (const auto& [cell, value] : cell_lambda)
        out << "lambda." << cell << '=' << format_double(value) << '\n';
    out << "leaf_model=" << to_string(leaf_model) << '\n'
        << "vacancy_fill=" << to_string(vacancy_fill) << '\n'
        << "geometry=" << to_string(geometry) << '\n'
        << "scoring=" << to_string(scoring) << '\n'
        << "holdout_fraction=" << format_double(holdout_fraction) << '\n'
        << "c_grid=" << join(c_grid) << '\n'
        << "gamma_grid=" << join(gamma_grid) << '\n'
        << "min_leaf_for_model=" << min_leaf_for_model << '\n'
        << "pure_stage_two=" << (pure_stage_two ? "true" : "false") << '\n'
        << "master_seed=" << master_seed << '\n';
    return out.str();
}

void apply_config_text(HyperParams& params, std::string_view text, std::string_view origin)
{
    std::size_t line_number = 0;
    while (!text.empty()) {
        std::size_t eol = text.find('\n');
        std::string_view line = text.substr(0, eol);
        text = eol == std::string_view::npos ? std::string_view{} : text.substr(eol + 1);
        ++line_number;
        if (auto hash = line.find('#'); hash != std::string_view::npos)
            line = line.substr(0, hash);
        line = trim(line);
        if (line.empty())
            continue;
        std::size_t eq = line.find('=');
        if (eq == std::string_view::npos)
            throw ValidationError(std::string(origin) + ":" + std::to_string(line_number) +
                                  ": expected key=value");
        try {
            params.set(line.substr(0, eq), line.substr(eq + 1));
        } catch (const ValidationError& e) {
            throw ValidationError(std::string(origin) + ":" + std::to_string(line_number) + ": " +
                                  e.what());
        }
    }
}

HyperParams load_config(const std::filesystem::path& path, HyperParams base)
{
    std::ifstream in(path);
    if (!in)
        throw IoError("cannot open config '" + path.string() + "'");
    std::stringstream buffer;
    buffer << in.rdbuf();
    apply_config_text(base, buffer.str(), path.string());
    return base;
}

} // namespace tbrf
