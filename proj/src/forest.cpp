#include "tbrf/forest.hpp"

#include <cstdlib>
#include <exception>
#include <fstream>
#include <optional>
#include <omp.h>
#include <sstream>

#include "tbrf/error.hpp"

namespace tbrf {
namespace {

TrainingMeta make_meta(const Dataset& data, const TrainingContext& context)
{
    return TrainingMeta{data.size(), data.dim(), context.bound, context.global_mean,
                        bounding_box(data.feature_data(), data.dim(), kRootMargin)};
}

void check_dim(const Forest& forest, std::size_t got, std::size_t index)
{
    if (got != forest.dim())
        throw ValidationError("point " + std::to_string(index) + " has " + std::to_string(got) +
                              " features, model expects " + std::to_string(forest.dim()));
}

// Runs body(i) for i in [0, n) on `workers` threads; the first exception
// (lowest index) is rethrown after the loop.
template <typename Body>
void parallel_for(std::size_t n, std::size_t workers, Body body)
{
    std::vector<std::exception_ptr> errors(n);
    const auto count = static_cast<std::int64_t>(n);
#pragma omp parallel for schedule(dynamic, 1) num_threads(static_cast<int>(workers))
    for (std::int64_t i = 0; i < count; ++i) {
        try {
            body(static_cast<std::size_t>(i));
        } catch (...) {
            errors[static_cast<std::size_t>(i)] = std::current_exception();
        }
    }
    for (auto& error : errors)
        if (error)
            std::rethrow_exception(error);
}

} // namespace

double Forest::predict_parent(std::size_t tree, std::span<const double> x) const
{
    check_dim(*this, x.size(), 0);
    const std::vector<double> clamped = meta.root.clamp(x);
    return parents.at(tree).predict(clamped, meta.bound);
}

double Forest::predict(std::span<const double> x) const
{
    check_dim(*this, x.size(), 0);
    const std::vector<double> clamped = meta.root.clamp(x);
    double sum = 0.0;
    for (const ParentTree& parent : parents)
        sum += parent.predict(clamped, meta.bound);
    return sum / static_cast<double>(parents.size());
}

std::size_t resolve_workers(std::size_t requested)
{
    if (requested > 0)
        return requested;
    if (const char* env = std::getenv("TBRF_WORKERS"); env && *env) {
        char* end = nullptr;
        long value = std::strtol(env, &end, 10);
        if (end == env || *end != '\0' || value <= 0)
            throw ValidationError("TBRF_WORKERS must be a positive integer, got '" + std::string(env) + "'");
        return static_cast<std::size_t>(value);
    }
    return static_cast<std::size_t>(std::max(1, omp_get_max_threads()));
}

Forest train(const Dataset& data, const HyperParams& params, std::size_t workers)
{
    params.validate();
    workers = resolve_workers(workers);
    const TrainingContext context = make_context(data, params);
    const std::size_t T = params.trees;

    std::vector<std::optional<GrownPartition>> stages(T);
    parallel_for(T, workers, [&](std::size_t t) {
        stages[t] = build_stage_one(data, params.cells, params.adaptive_votes, params.geometry,
                                    tree_stream(params.master_seed, t).child(Purpose::StageOne));
    });

    struct Task {
        std::size_t tree;
        std::size_t cell;
        Cell region;
    };
    std::vector<Task> tasks;
    std::vector<std::vector<std::optional<ChildTree>>> children(T);
    for (std::size_t t = 0; t < T; ++t) {
        const std::size_t m = stages[t]->tree.leaf_count();
        children[t].resize(m);
        for (std::size_t j = 0; j < m; ++j)
            tasks.push_back(Task{t, j, stages[t]->tree.leaf(j)});
    }
    parallel_for(tasks.size(), workers, [&](std::size_t i) {
        const Task& task = tasks[i];
        children[task.tree][task.cell] =
            build_child(task.region, std::move(stages[task.tree]->members[task.cell]), context, task.cell,
                        cell_stream(tree_stream(params.master_seed, task.tree), task.cell));
    });

    Forest forest;
    forest.params = params;
    forest.meta = make_meta(data, context);
    forest.parents.reserve(T);
    for (std::size_t t = 0; t < T; ++t) {
        ParentTree parent{std::move(stages[t]->tree), {}};
        for (auto& child : children[t])
            parent.children.push_back(std::move(*child));
        forest.parents.push_back(std::move(parent));
    }
    return forest;
}

std::vector<double> predict_batch(const Forest& forest, std::span<const std::vector<double>> xs,
                                  std::size_t workers)
{
    for (std::size_t i = 0; i < xs.size(); ++i)
        check_dim(forest, xs[i].size(), i);
    std::vector<double> out(xs.size());
    const auto count = static_cast<std::int64_t>(xs.size());
#pragma omp parallel for schedule(static) num_threads(static_cast<int>(resolve_workers(workers)))
    for (std::int64_t i = 0; i < count; ++i)
        out[static_cast<std::size_t>(i)] = forest.predict(xs[static_cast<std::size_t>(i)]);
    return out;
}

std::vector<double> predict_batch(const Forest& forest, const Dataset& data, std::size_t workers)
{
    if (data.dim() != forest.dim())
        throw ValidationError("data has " + std::to_string(data.dim()) + " features, model expects " +
                              std::to_string(forest.dim()));
    std::vector<double> out(data.size());
    const auto count = static_cast<std::int64_t>(data.size());
#pragma omp parallel for schedule(static) num_threads(static_cast<int>(resolve_workers(workers)))
    for (std::int64_t i = 0; i < count; ++i)
        out[static_cast<std::size_t>(i)] = forest.predict(data.features(static_cast<std::size_t>(i)));
    return out;
}

Forest first_trees(const Forest& forest, std::size_t trees)
{
    if (trees == 0 || trees > forest.parents.size())
        throw ValidationError("first_trees: need 1 <= trees <= " + std::to_string(forest.parents.size()));
    Forest out;
    out.params = forest.params;
    out.params.trees = trees;
    out.meta = forest.meta;
    out.parents.assign(forest.parents.begin(), forest.parents.begin() + static_cast<std::ptrdiff_t>(trees));
    return out;
}

namespace reference {

Forest train(const Dataset& data, const HyperParams& params)
{
    params.validate();
    const TrainingContext context = make_context(data, params);
    Forest forest;
    forest.params = params;
    forest.meta = make_meta(data, context);
    for (std::size_t t = 0; t < params.trees; ++t)
        forest.parents.push_back(build_parent(context, t));
    return forest;
}

std::vector<double> predict_batch(const Forest& forest, std::span<const std::vector<double>> xs)
{
    std::vector<double> out;
    out.reserve(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) {
        check_dim(forest, xs[i].size(), i);
        out.push_back(forest.predict(xs[i]));
    }
    return out;
}

} // namespace reference

void save(const Forest& forest, const std::filesystem::path& path)
{
    const std::string bytes = serialize(forest);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw IoError("cannot write model '" + path.string() + "'");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out)
        throw IoError("write failed for model '" + path.string() + "'");
}

Forest load(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot open model '" + path.string() + "'");
    std::ostringstream buffer;
    buffer << in.rdbuf();
    try {
        return deserialize(buffer.str());
    } catch (const IoError& e) {
        throw IoError(path.string() + ": " + e.what());
    }
}

void write_metadata(const Forest& forest, const std::filesystem::path& path,
                    const std::vector<std::pair<std::string, std::string>>& extra)
{
    std::ofstream out(path);
    if (!out)
        throw IoError("cannot write metadata '" + path.string() + "'");
    out << "format_version=" << Forest::kFormatVersion << '\n'
        << "n=" << forest.meta.n << '\n'
        << "d=" << forest.meta.dim << '\n'
        << "target_bound=" << format_double(forest.meta.bound) << '\n'
        << "global_mean=" << format_double(forest.meta.global_mean) << '\n'
        << forest.params.to_config();
    for (const auto& [key, value] : extra)
        out << key << '=' << value << '\n';
    if (!out)
        throw IoError("write failed for metadata '" + path.string() + "'");
}

std::string export_traces(const Forest& forest)
{
    std::ostringstream out;
    for (std::size_t t = 0; t < forest.parents.size(); ++t) {
        const ParentTree& parent = forest.parents[t];
        out << "# tree " << t << " stage one\n" << parent.stage_one.trace();
        for (std::size_t j = 0; j < parent.children.size(); ++j)
            out << "# tree " << t << " cell " << j << '\n' << parent.children[j].partition.trace();
    }
    return out.str();
}

} // namespace tbrf
