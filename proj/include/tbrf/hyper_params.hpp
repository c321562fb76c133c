#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace tbrf {

enum class LeafKind { Constant, Linear, Gaussian };
enum class VacancyFill { Mean, OneNearestNeighbor };
enum class Geometry { AxisParallel, Oblique };
enum class Scoring { PenalizedRisk, Holdout };

std::string_view to_string(LeafKind kind);
std::string_view to_string(VacancyFill fill);
std::string_view to_string(Geometry geometry);
std::string_view to_string(Scoring scoring);

LeafKind parse_leaf_kind(std::string_view text);
VacancyFill parse_vacancy_fill(std::string_view text);
Geometry parse_geometry(std::string_view text);
Scoring parse_scoring(std::string_view text);

struct HyperParams {
    std::size_t trees = 20;           // T
    std::size_t cells = 20;           // m
    std::size_t candidates = 10;      // k
    double split_fraction = 0.5;      // pro
    std::size_t adaptive_votes = 1;   // t
    double lambda = 1e-8;
    // Optional per-cell override of lambda, indexed by stage-one cell id.
    std::map<std::size_t, double> cell_lambda;
    LeafKind leaf_model = LeafKind::Constant;
    VacancyFill vacancy_fill = VacancyFill::Mean;
    Geometry geometry = Geometry::AxisParallel;
    Scoring scoring = Scoring::Holdout;
    double holdout_fraction = 0.3;
    std::vector<double> c_grid = {0.1, 1.0, 10.0, 100.0};
    std::vector<double> gamma_grid = {0.01, 0.1, 1.0, 10.0};
    // 0 selects the per-model default (10 for linear, 2 * grid size for gaussian).
    std::size_t min_leaf_for_model = 0;
    // Stage-two leaf choice: uniform when true, sampled plurality vote otherwise.
    bool pure_stage_two = false;
    std::uint64_t master_seed = 42;

    double lambda_for_cell(std::size_t cell) const;
    std::size_t effective_min_leaf() const;

    /// Throws ValidationError naming the first offending field.
    void validate() const;

    /// Apply one key=value setting; keys are the field names above
    /// (dashes accepted for underscores) or "lambda.<cell>".
    void set(std::string_view key, std::string_view value);

    /// Flat key=value listing, one per line, readable by load_config().
    std::string to_config() const;
};

/// Parse a flat key=value config file ('#' comments, blank lines ignored).
HyperParams load_config(const std::filesystem::path& path, HyperParams base = {});
void apply_config_text(HyperParams& params, std::string_view text, std::string_view origin);

std::vector<double> parse_real_list(std::string_view text);

} // namespace tbrf
