#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "tbrf/dataset.hpp"
#include "tbrf/hyper_params.hpp"
#include "tbrf/leaf_model.hpp"
#include "tbrf/partition.hpp"
#include "tbrf/random_stream.hpp"

namespace tbrf {

/// Everything a child-tree build needs to know about the training run.
struct TrainingContext {
    const Dataset& data;
    const HyperParams& params;
    double bound;        // M: predictions are clamped to [-M, M]
    double global_mean;  // fallback for cells without samples
};

TrainingContext make_context(const Dataset& data, const HyperParams& params);

/// Stage-two tree over one stage-one cell.
struct ChildTree {
    PartitionTree partition;           // root is the stage-one cell
    std::vector<LeafModel> leaf_models; // one per leaf
    std::vector<std::uint8_t> pending;  // 1 while a leaf without samples awaits a vacancy fill
    std::size_t splits_used = 0;
    double score = 0.0;
    std::size_t candidate_index = 0;

    const Cell& cell() const { return partition.root(); }
    bool has_pending() const;
    double predict(std::span<const double> x, double bound) const;
};

/// Rows of one stage-one cell, split into the part used to grow and fit
/// candidates and the part withheld for holdout scoring.
struct CellSamples {
    std::vector<std::size_t> fit;
    std::vector<std::size_t> holdout; // empty when scoring by penalized risk

    bool uses_holdout() const { return !holdout.empty(); }
    std::vector<std::size_t> all() const;
};

/// Holdout scoring withholds a fixed fraction of the cell once, shared by all
/// candidates. Cells with fewer than four rows, and penalized scoring, keep
/// every row for fitting.
CellSamples prepare_cell_samples(std::vector<std::size_t> cell_rows, const HyperParams& params,
                                 RandomStream stream);

inline constexpr std::size_t kMinHoldoutCell = 4;

/// One random candidate: grows the stage-two partition with the split budget
/// of the fitting rows, fits a model on every non-empty leaf and scores it.
/// Under holdout scoring the empty leaves are filled first so the holdout
/// rows can be predicted.
ChildTree build_candidate(const Cell& cell, const CellSamples& samples, const TrainingContext& context,
                          std::size_t cell_id, std::size_t candidate_index, RandomStream stream);

/// Penalized mode: lambda_j p^2 + (1/n) sum over the cell's fitting rows of
/// squared residuals, n being the full training size. Holdout mode: MSE on
/// the withheld rows.
double score_candidate(const ChildTree& child, const CellSamples& samples, const TrainingContext& context,
                       std::size_t cell_id);

/// Index of the lowest score; ties go to the earlier candidate.
std::size_t best_scored_index(std::span<const ChildTree> candidates);
const ChildTree& best_scored(std::span<const ChildTree> candidates);

/// Give every pending leaf a constant: the mean of `cell_rows` (or the
/// global mean when the cell is empty), or the value of the non-empty leaf
/// whose center is nearest, evaluated at that center.
void fill_vacancies(ChildTree& child, VacancyFill mode, const Dataset& data,
                    std::span<const std::size_t> cell_rows, double global_mean, double bound);

/// Best of k candidates on one stage-one cell, vacancies filled. Under
/// holdout scoring the winner's leaves are refit on every row of the cell.
ChildTree build_child(const Cell& cell, std::vector<std::size_t> cell_rows, const TrainingContext& context,
                      std::size_t cell_id, RandomStream stream);

/// Stage-one partition plus one child per cell. Prediction is the child of
/// the containing cell, i.e. the sum of zero-extended children.
struct ParentTree {
    PartitionTree stage_one;
    std::vector<ChildTree> children;

    /// x must already be clamped into the stage-one root.
    double predict(std::span<const double> x, double bound) const;
    /// sum_j lambda_j p_j^2
    double aggregate_penalty(const HyperParams& params) const;
};

RandomStream tree_stream(std::uint64_t master_seed, std::size_t tree_index);
RandomStream cell_stream(const RandomStream& tree, std::size_t cell_id);

ParentTree build_parent(const TrainingContext& context, std::size_t tree_index);

/// Prediction for an arbitrary point: clamps into the root first.
double predict_parent(const ParentTree& tree, std::span<const double> x, double bound);

} // namespace tbrf
