#include "tbrf/tree.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "tbrf/error.hpp"
#include "tbrf/metrics.hpp"

namespace tbrf {
namespace {

double mean_of(const Dataset& data, std::span<const std::size_t> rows, double fallback)
{
    if (rows.empty())
        return fallback;
    double sum = 0.0;
    for (std::size_t row : rows)
        sum += data.target(row);
    return sum / static_cast<double>(rows.size());
}

ModelSearchSpec search_spec(const HyperParams& params)
{
    return ModelSearchSpec{params.c_grid, params.gamma_grid, 0.3};
}

std::vector<std::vector<std::size_t>> assign_rows(const PartitionTree& partition, const Dataset& data,
                                                  std::span<const std::size_t> rows)
{
    std::vector<std::vector<std::size_t>> members(partition.leaf_count());
    for (std::size_t row : rows)
        members[partition.locate(data.features(row))].push_back(row);
    return members;
}

// Fit every leaf that holds rows; mark the rest pending.
void fit_leaves(ChildTree& child, const std::vector<std::vector<std::size_t>>& members,
                const TrainingContext& context, const RandomStream& stream)
{
    const HyperParams& params = context.params;
    const ModelSearchSpec spec = search_spec(params);
    const std::size_t leaves = child.partition.leaf_count();
    child.leaf_models.assign(leaves, ConstantModel{0.0});
    child.pending.assign(leaves, 0);
    for (std::size_t leaf = 0; leaf < leaves; ++leaf) {
        if (members[leaf].empty()) {
            child.pending[leaf] = 1;
            continue;
        }
        child.leaf_models[leaf] = fit_leaf(context.data, members[leaf], params.leaf_model, spec,
                                           stream.child(leaf), params.effective_min_leaf());
    }
}

} // namespace

TrainingContext make_context(const Dataset& data, const HyperParams& params)
{
    if (data.empty())
        throw ValidationError("training data is empty");
    double sum = 0.0;
    for (double y : data.targets())
        sum += y;
    return TrainingContext{data, params, data.target_bound(), sum / static_cast<double>(data.size())};
}

bool ChildTree::has_pending() const
{
    return std::find(pending.begin(), pending.end(), std::uint8_t{1}) != pending.end();
}

double ChildTree::predict(std::span<const double> x, double bound) const
{
    const std::size_t leaf = partition.locate(x);
    if (pending[leaf])
        throw ValidationError("prediction reached an unfilled empty leaf");
    return predict_leaf(leaf_models[leaf], x, bound);
}

std::vector<std::size_t> CellSamples::all() const
{
    std::vector<std::size_t> rows = fit;
    rows.insert(rows.end(), holdout.begin(), holdout.end());
    std::sort(rows.begin(), rows.end());
    return rows;
}

CellSamples prepare_cell_samples(std::vector<std::size_t> cell_rows, const HyperParams& params,
                                 RandomStream stream)
{
    CellSamples samples;
    const std::size_t n = cell_rows.size();
    if (params.scoring != Scoring::Holdout || n < kMinHoldoutCell) {
        samples.fit = std::move(cell_rows);
        return samples;
    }
    stream.shuffle(cell_rows);
    auto n_holdout = static_cast<std::size_t>(std::llround(params.holdout_fraction * static_cast<double>(n)));
    n_holdout = std::clamp<std::size_t>(n_holdout, 1, n - 1);
    samples.fit.assign(cell_rows.begin(), cell_rows.end() - static_cast<std::ptrdiff_t>(n_holdout));
    samples.holdout.assign(cell_rows.end() - static_cast<std::ptrdiff_t>(n_holdout), cell_rows.end());
    std::sort(samples.fit.begin(), samples.fit.end());
    std::sort(samples.holdout.begin(), samples.holdout.end());
    return samples;
}

ChildTree build_candidate(const Cell& cell, const CellSamples& samples, const TrainingContext& context,
                          std::size_t cell_id, std::size_t candidate_index, RandomStream stream)
{
    const HyperParams& params = context.params;
    if (samples.fit.empty()) {
        // No data anywhere in the cell: predict the global training mean.
        ChildTree child{PartitionTree(cell, params.geometry), {ConstantModel{context.global_mean}}, {0}, 0, 0.0,
                        candidate_index};
        child.score = score_candidate(child, samples, context, cell_id);
        return child;
    }

    const std::size_t cap = max_splits(context.bound, params.lambda_for_cell(cell_id));
    const std::size_t budget = split_budget(samples.fit.size(), params.split_fraction, cap);
    GrownPartition grown = build_stage_two(cell, context.data, samples.fit, budget, params.adaptive_votes,
                                           params.geometry, params.pure_stage_two, stream.child(Purpose::Split));

    ChildTree child{std::move(grown.tree), {}, {}, budget, 0.0, candidate_index};
    fit_leaves(child, grown.members, context, stream.child(Purpose::LeafFit));
    if (samples.uses_holdout())
        fill_vacancies(child, params.vacancy_fill, context.data, samples.fit, context.global_mean, context.bound);
    child.score = score_candidate(child, samples, context, cell_id);
    return child;
}

double score_candidate(const ChildTree& child, const CellSamples& samples, const TrainingContext& context,
                       std::size_t cell_id)
{
    const Dataset& data = context.data;
    if (samples.uses_holdout()) {
        double sum = 0.0;
        for (std::size_t row : samples.holdout) {
            double r = data.target(row) - child.predict(data.features(row), context.bound);
            sum += r * r;
        }
        return sum / static_cast<double>(samples.holdout.size());
    }
    double sum = 0.0;
    for (std::size_t row : samples.fit) {
        double r = data.target(row) - child.predict(data.features(row), context.bound);
        sum += r * r;
    }
    const double risk = sum / static_cast<double>(data.size());
    return penalized_score(risk, child.splits_used, context.params.lambda_for_cell(cell_id));
}

std::size_t best_scored_index(std::span<const ChildTree> candidates)
{
    if (candidates.empty())
        throw ValidationError("best_scored: no candidates");
    std::size_t best = 0;
    for (std::size_t i = 1; i < candidates.size(); ++i)
        if (candidates[i].score < candidates[best].score)
            best = i;
    return best;
}

const ChildTree& best_scored(std::span<const ChildTree> candidates)
{
    return candidates[best_scored_index(candidates)];
}

void fill_vacancies(ChildTree& child, VacancyFill mode, const Dataset& data,
                    std::span<const std::size_t> cell_rows, double global_mean, double bound)
{
    if (!child.has_pending())
        return;
    const std::size_t leaves = child.partition.leaf_count();
    if (mode == VacancyFill::Mean) {
        const double value = mean_of(data, cell_rows, global_mean);
        for (std::size_t leaf = 0; leaf < leaves; ++leaf) {
            if (child.pending[leaf]) {
                child.leaf_models[leaf] = ConstantModel{value};
                child.pending[leaf] = 0;
            }
        }
        return;
    }

    if (child.partition.geometry() != Geometry::AxisParallel)
        throw ValidationError("one_nn vacancy filling requires axis-parallel leaves");
    struct Donor {
        std::size_t leaf;
        std::vector<double> center;
        double value;
    };
    std::vector<Donor> donors;
    for (std::size_t leaf = 0; leaf < leaves; ++leaf) {
        if (child.pending[leaf])
            continue;
        std::vector<double> center = child.partition.leaf_bounds(leaf).center();
        double value = predict_leaf(child.leaf_models[leaf], center, bound);
        donors.push_back(Donor{leaf, std::move(center), value});
    }
    if (donors.empty())
        throw ValidationError("one_nn vacancy filling needs at least one non-empty leaf");

    for (std::size_t leaf = 0; leaf < leaves; ++leaf) {
        if (!child.pending[leaf])
            continue;
        const std::vector<double> center = child.partition.leaf_bounds(leaf).center();
        double best_distance = std::numeric_limits<double>::infinity();
        double value = 0.0;
        for (const Donor& donor : donors) { // ascending leaf id, so ties keep the smaller id
            double distance = 0.0;
            for (std::size_t i = 0; i < center.size(); ++i) {
                double diff = center[i] - donor.center[i];
                distance += diff * diff;
            }
            if (distance < best_distance) {
                best_distance = distance;
                value = donor.value;
            }
        }
        child.leaf_models[leaf] = ConstantModel{value};
    }
    std::fill(child.pending.begin(), child.pending.end(), std::uint8_t{0});
}

ChildTree build_child(const Cell& cell, std::vector<std::size_t> cell_rows, const TrainingContext& context,
                      std::size_t cell_id, RandomStream stream)
{
    const HyperParams& params = context.params;
    const CellSamples samples = prepare_cell_samples(std::move(cell_rows), params, stream.child(Purpose::Holdout));

    const RandomStream candidates = stream.child(Purpose::Candidate);
    ChildTree best = build_candidate(cell, samples, context, cell_id, 0, candidates.child(0));
    for (std::size_t c = 1; c < params.candidates; ++c) {
        ChildTree next = build_candidate(cell, samples, context, cell_id, c, candidates.child(c));
        if (next.score < best.score)
            best = std::move(next);
    }

    if (samples.uses_holdout()) {
        // The winner keeps its partition; its leaves are refit on every row.
        const std::vector<std::size_t> rows = samples.all();
        fit_leaves(best, assign_rows(best.partition, context.data, rows), context,
                   stream.child(Purpose::LeafRefit));
        fill_vacancies(best, params.vacancy_fill, context.data, rows, context.global_mean, context.bound);
    } else {
        fill_vacancies(best, params.vacancy_fill, context.data, samples.fit, context.global_mean, context.bound);
    }
    return best;
}

double ParentTree::predict(std::span<const double> x, double bound) const
{
    return children[stage_one.locate(x)].predict(x, bound);
}

double ParentTree::aggregate_penalty(const HyperParams& params) const
{
    double sum = 0.0;
    for (std::size_t j = 0; j < children.size(); ++j) {
        const double p = static_cast<double>(children[j].splits_used);
        sum += params.lambda_for_cell(j) * p * p;
    }
    return sum;
}

RandomStream tree_stream(std::uint64_t master_seed, std::size_t tree_index)
{
    return RandomStream(master_seed, {static_cast<std::uint64_t>(tree_index)});
}

RandomStream cell_stream(const RandomStream& tree, std::size_t cell_id)
{
    return tree.child(Purpose::Cell).child(cell_id);
}

ParentTree build_parent(const TrainingContext& context, std::size_t tree_index)
{
    const HyperParams& params = context.params;
    const RandomStream stream = tree_stream(params.master_seed, tree_index);
    GrownPartition stage = build_stage_one(context.data, params.cells, params.adaptive_votes, params.geometry,
                                           stream.child(Purpose::StageOne));
    ParentTree parent{std::move(stage.tree), {}};
    parent.children.reserve(parent.stage_one.leaf_count());
    for (std::size_t j = 0; j < parent.stage_one.leaf_count(); ++j)
        parent.children.push_back(build_child(parent.stage_one.leaf(j), std::move(stage.members[j]), context, j,
                                              cell_stream(stream, j)));
    return parent;
}

double predict_parent(const ParentTree& tree, std::span<const double> x, double bound)
{
    const std::vector<double> clamped = tree.stage_one.root().bounds.clamp(x);
    return tree.predict(clamped, bound);
}

} // namespace tbrf
