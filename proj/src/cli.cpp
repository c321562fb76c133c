#include "tbrf/cli.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <numbers>
#include <sstream>

#include <CLI11.hpp>

#include "tbrf/error.hpp"
#include "tbrf/forest.hpp"
#include "tbrf/metrics.hpp"

namespace tbrf::cli {
namespace {

std::string join(const std::vector<double>& values, char separator)
{
    std::string out;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i)
            out += separator;
        out += format_double(values[i]);
    }
    return out;
}

std::ofstream open_output(const std::filesystem::path& path)
{
    std::ofstream out(path, std::ios::trunc);
    if (!out)
        throw IoError("cannot write '" + path.string() + "'");
    return out;
}

void finish_output(std::ofstream& out, const std::filesystem::path& path)
{
    out.flush();
    if (!out)
        throw IoError("write failed for '" + path.string() + "'");
}

void check_readable(const std::filesystem::path& path)
{
    if (!std::filesystem::exists(path))
        throw IoError("no such file '" + path.string() + "'");
}

double mean(const std::vector<double>& v)
{
    double s = 0.0;
    for (double x : v)
        s += x;
    return v.empty() ? std::nan("") : s / static_cast<double>(v.size());
}

double sample_sd(const std::vector<double>& v)
{
    if (v.size() < 2)
        return 0.0;
    const double m = mean(v);
    double s = 0.0;
    for (double x : v)
        s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(v.size() - 1));
}

struct TrainOutcome {
    RunReport report;
    Forest forest;
};

TrainOutcome train_and_evaluate(const Dataset& data, const HyperParams& params, double test_fraction,
                                std::size_t workers)
{
    auto [train_part, test_part] = train_test_split(data, test_fraction, data_split_stream(params.master_seed));
    const auto start = std::chrono::steady_clock::now();
    Forest forest = train(train_part, params, workers);
    const auto stop = std::chrono::steady_clock::now();

    RunReport report;
    report.params = params;
    report.seed = params.master_seed;
    report.n_train = train_part.size();
    report.n_test = test_part.size();
    report.train_time_seconds = std::chrono::duration<double>(stop - start).count();
    report.test_mse = mse(predict_batch(forest, test_part, workers), test_part.targets());
    for (std::size_t t = 0; t < forest.parents.size(); ++t) {
        std::vector<double> predictions(test_part.size());
        for (std::size_t i = 0; i < test_part.size(); ++i)
            predictions[i] = forest.predict_parent(t, test_part.features(i));
        report.per_tree_mse.push_back(mse(predictions, test_part.targets()));
    }
    return {std::move(report), std::move(forest)};
}

} // namespace

RandomStream data_split_stream(std::uint64_t seed)
{
    return RandomStream(seed, {static_cast<std::uint64_t>(Purpose::DataSplit)});
}

std::string RunReport::to_text() const
{
    std::ostringstream out;
    out << params.to_config() << "train_time_seconds=" << format_double(train_time_seconds) << '\n'
        << "test_mse=" << format_double(test_mse) << '\n'
        << "per_tree_mse=" << join(per_tree_mse, ',') << '\n'
        << "n_train=" << n_train << '\n'
        << "n_test=" << n_test << '\n'
        << "seed=" << seed << '\n';
    return out.str();
}

std::string RunReport::csv_header()
{
    return "trees,cells,candidates,pro,votes,lambda,leaf_model,vacancy_fill,geometry,scoring,seed,n_train,n_test,"
           "train_time_seconds,test_mse";
}

std::string RunReport::csv_row() const
{
    std::ostringstream out;
    out << params.trees << ',' << params.cells << ',' << params.candidates << ','
        << format_double(params.split_fraction) << ',' << params.adaptive_votes << ','
        << format_double(params.lambda) << ',' << to_string(params.leaf_model) << ','
        << to_string(params.vacancy_fill) << ',' << to_string(params.geometry) << ','
        << to_string(params.scoring) << ',' << seed << ',' << n_train << ',' << n_test << ','
        << format_double(train_time_seconds) << ',' << format_double(test_mse);
    return out.str();
}

RunReport cmd_train(const TrainRequest& request)
{
    check_readable(request.data);
    request.params.validate();
    const Dataset data = load_csv(request.data);
    TrainOutcome outcome = train_and_evaluate(data, request.params, request.test_fraction, request.workers);

    if (request.train_out || request.test_out) {
        auto [train_part, test_part] =
            train_test_split(data, request.test_fraction, data_split_stream(request.params.master_seed));
        if (request.train_out)
            write_csv(train_part, *request.train_out);
        if (request.test_out)
            write_csv(test_part, *request.test_out);
    }

    save(outcome.forest, request.model_out);
    std::filesystem::path meta = request.model_out;
    meta += ".meta";
    write_metadata(outcome.forest, meta,
                   {{"train_time_seconds", format_double(outcome.report.train_time_seconds)},
                    {"test_mse", format_double(outcome.report.test_mse)},
                    {"n_train", std::to_string(outcome.report.n_train)},
                    {"n_test", std::to_string(outcome.report.n_test)}});
    return outcome.report;
}

void cmd_predict(const std::filesystem::path& model_path, const std::filesystem::path& data,
                 const std::filesystem::path& out_path, std::size_t workers)
{
    check_readable(model_path);
    check_readable(data);
    const Forest forest = load(model_path);
    const CsvTable table = read_csv_table(data, HeaderMode::Detect);
    const std::size_t d = forest.dim();
    if (table.columns != d && table.columns != d + 1)
        throw ValidationError(data.string() + " has " + std::to_string(table.columns) + " columns; model expects " +
                              std::to_string(d) + " features (optionally followed by a target)");

    std::vector<std::vector<double>> xs;
    xs.reserve(table.rows.size());
    for (const auto& row : table.rows)
        xs.emplace_back(row.begin(), row.begin() + static_cast<std::ptrdiff_t>(d));
    const std::vector<double> predictions = predict_batch(forest, xs, workers);

    std::ofstream out = open_output(out_path);
    if (!table.header.empty()) {
        for (const auto& name : table.header)
            out << name << ',';
    } else {
        for (std::size_t c = 0; c < d; ++c)
            out << 'x' << c << ',';
        if (table.columns == d + 1)
            out << "y,";
    }
    out << "prediction\n";
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
        for (double v : table.rows[i])
            out << format_double(v) << ',';
        out << format_double(predictions[i]) << '\n';
    }
    finish_output(out, out_path);
}

double cmd_evaluate(const std::filesystem::path& model_path, const std::filesystem::path& data_path,
                    std::optional<double> test_fraction, std::optional<std::uint64_t> split_seed,
                    std::size_t workers)
{
    check_readable(model_path);
    check_readable(data_path);
    const Forest forest = load(model_path);
    Dataset data = load_csv(data_path);
    if (data.dim() != forest.dim())
        throw ValidationError(data_path.string() + " has " + std::to_string(data.dim()) +
                              " features, model expects " + std::to_string(forest.dim()));
    if (test_fraction) {
        const std::uint64_t seed = split_seed.value_or(forest.params.master_seed);
        data = train_test_split(data, *test_fraction, data_split_stream(seed)).second;
    }
    return mse(predict_batch(forest, data, workers), data.targets());
}

Dataset synth_sin(std::size_t n, double noise_sd, std::uint64_t seed)
{
    if (n == 0)
        throw ValidationError("synth: n must be positive");
    if (!(noise_sd >= 0.0) || !std::isfinite(noise_sd))
        throw ValidationError("synth: noise_sd must be nonnegative");
    RandomStream stream(seed, {static_cast<std::uint64_t>(Purpose::Synth)});
    Dataset data(1);
    for (std::size_t i = 0; i < n; ++i) {
        const double x = stream.uniform(0.0, 10.0);
        const double noise = stream.normal();
        const double features[1] = {x};
        data.add(features, std::sin(x) + noise_sd * noise);
    }
    return data;
}

void cmd_synth(const std::string& kind, std::size_t n, double noise_sd, std::uint64_t seed,
               const std::filesystem::path& out)
{
    if (kind != "sin")
        throw ValidationError("synth: unknown kind '" + kind + "' (available: sin)");
    write_csv(synth_sin(n, noise_sd, seed), out);
}

void cmd_bench(const BenchRequest& request, std::ostream& log)
{
    std::optional<Dataset> fixed;
    if (request.data) {
        check_readable(*request.data);
        fixed = load_csv(*request.data);
    }
    auto or_default = [](auto grid, auto fallback) {
        return grid.empty() ? decltype(grid){fallback} : grid;
    };
    const auto trees = or_default(request.trees, request.base.trees);
    const auto cells = or_default(request.cells, request.base.cells);
    const auto candidates = or_default(request.candidates, request.base.candidates);
    const auto pro = or_default(request.pro, request.base.split_fraction);
    if (request.repeats == 0)
        throw ValidationError("bench: repeats must be positive");

    std::ofstream out = open_output(request.out);
    out << "trees,cells,candidates,pro,repeats,completed,mse_mean,mse_sd,time_mean,time_sd,error\n";
    for (std::size_t T : trees)
        for (std::size_t m : cells)
            for (std::size_t k : candidates)
                for (double p : pro) {
                    HyperParams params = request.base;
                    params.trees = T;
                    params.cells = m;
                    params.candidates = k;
                    params.split_fraction = p;
                    std::vector<double> errors;
                    std::vector<double> times;
                    std::string failure;
                    for (std::size_t r = 0; r < request.repeats; ++r) {
                        params.master_seed = request.base.master_seed + r;
                        try {
                            const Dataset data =
                                fixed ? *fixed : synth_sin(request.synth_n, request.noise_sd, params.master_seed);
                            TrainOutcome outcome =
                                train_and_evaluate(data, params, request.test_fraction, request.workers);
                            errors.push_back(outcome.report.test_mse);
                            times.push_back(outcome.report.train_time_seconds);
                        } catch (const std::exception& e) {
                            if (failure.empty())
                                failure = e.what();
                        }
                    }
                    // Keep the table machine-readable: no commas or quotes in the message.
                    for (char& c : failure)
                        if (c == ',' || c == '"' || c == '\n')
                            c = ' ';
                    out << T << ',' << m << ',' << k << ',' << format_double(p) << ',' << request.repeats << ','
                        << errors.size() << ',' << format_double(mean(errors)) << ','
                        << format_double(sample_sd(errors)) << ',' << format_double(mean(times)) << ','
                        << format_double(sample_sd(times)) << ',' << failure << '\n';
                    log << "T=" << T << " m=" << m << " k=" << k << " pro=" << format_double(p)
                        << " mse=" << format_double(mean(errors)) << " time=" << format_double(mean(times)) << "s\n";
                }
    finish_output(out, request.out);
}

void cmd_grid_export(const GridRequest& request)
{
    check_readable(request.model);
    const Forest forest = load(request.model);
    const std::size_t d = forest.dim();
    if (d > 2)
        throw ValidationError("grid-export supports models with 1 or 2 features, this one has " + std::to_string(d));
    if (request.resolution == 0)
        throw ValidationError("grid-export: resolution must be positive");
    const std::vector<double> lower = request.lower.empty() ? forest.meta.root.lower : request.lower;
    const std::vector<double> upper = request.upper.empty() ? forest.meta.root.upper : request.upper;
    if (lower.size() != d || upper.size() != d)
        throw ValidationError("grid-export: ranges must have one value per feature");

    auto axis = [&](std::size_t c) {
        std::vector<double> values(request.resolution);
        for (std::size_t i = 0; i < request.resolution; ++i)
            values[i] = request.resolution == 1
                            ? lower[c]
                            : lower[c] + (upper[c] - lower[c]) * static_cast<double>(i) /
                                             static_cast<double>(request.resolution - 1);
        return values;
    };
    std::vector<std::vector<double>> points;
    const std::vector<double> first = axis(0);
    if (d == 1) {
        for (double x : first)
            points.push_back({x});
    } else {
        const std::vector<double> second = axis(1);
        for (double x : first)
            for (double y : second)
                points.push_back({x, y});
    }
    const std::vector<double> predictions = predict_batch(forest, points, request.workers);

    std::ofstream out = open_output(request.out);
    out << (d == 1 ? "x0,prediction\n" : "x0,x1,prediction\n");
    for (std::size_t i = 0; i < points.size(); ++i) {
        for (double v : points[i])
            out << format_double(v) << ',';
        out << format_double(predictions[i]) << '\n';
    }
    finish_output(out, request.out);
}

namespace {

// Command-line flag -> HyperParams key.
const std::vector<std::pair<std::string, std::string>> kParamFlags = {
    {"--trees", "trees"},
    {"--cells", "cells"},
    {"--candidates", "candidates"},
    {"--pro", "split_fraction"},
    {"--votes", "adaptive_votes"},
    {"--lambda", "lambda"},
    {"--leaf-model", "leaf_model"},
    {"--vacancy-fill", "vacancy_fill"},
    {"--geometry", "geometry"},
    {"--scoring", "scoring"},
    {"--holdout-fraction", "holdout_fraction"},
    {"--c-grid", "c_grid"},
    {"--gamma-grid", "gamma_grid"},
    {"--min-leaf", "min_leaf_for_model"},
    {"--seed", "master_seed"},
};

struct ParamOptions {
    std::map<std::string, std::string> values;
    std::string config;
    bool pure = false;

    void attach(CLI::App& app)
    {
        app.add_option("--config", config, "key=value parameter file");
        for (const auto& [flag, key] : kParamFlags)
            app.add_option(flag, values[key], "sets " + key);
        app.add_flag("--pure", pure, "uniform stage-two leaf choice");
    }

    HyperParams resolve(CLI::App& app) const
    {
        HyperParams params;
        if (!config.empty())
            params = load_config(config, params);
        for (const auto& [flag, key] : kParamFlags)
            if (app.count(flag) > 0)
                params.set(key, values.at(key));
        if (pure)
            params.pure_stage_two = true;
        params.validate();
        return params;
    }
};

template <typename T>
std::vector<T> parse_list(const std::string& text)
{
    std::vector<T> out;
    for (double v : parse_real_list(text)) {
        if constexpr (std::is_integral_v<T>) {
            if (v < 0 || v != std::floor(v))
                throw ValidationError("'" + text + "' must list nonnegative integers");
            out.push_back(static_cast<T>(v));
        } else {
            out.push_back(v);
        }
    }
    return out;
}

} // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Two-stage best-scored random forest regression"};
    app.require_subcommand(1);
    std::size_t workers = 0;
    app.add_option("--workers", workers, "worker threads (0: $TBRF_WORKERS or all cores)");

    // train
    CLI::App* train_cmd = app.add_subcommand("train", "train a forest, save it and report test MSE");
    ParamOptions train_params;
    train_params.attach(*train_cmd);
    TrainRequest train_request;
    std::string train_data, train_model, report_path, report_row, train_out, test_out;
    train_cmd->add_option("--data", train_data, "training CSV (target last)")->required();
    train_cmd->add_option("--model", train_model, "model output path")->required();
    train_cmd->add_option("--test-fraction", train_request.test_fraction, "held-out fraction");
    train_cmd->add_option("--report", report_path, "write key=value report here");
    train_cmd->add_option("--report-row", report_row, "append a CSV report row here");
    train_cmd->add_option("--train-out", train_out, "write the training split here");
    train_cmd->add_option("--test-out", test_out, "write the held-out split here");
    train_cmd->add_option("--workers", workers, "worker threads");

    // predict
    CLI::App* predict_cmd = app.add_subcommand("predict", "append predictions to a CSV");
    std::string predict_model, predict_data, predict_out;
    predict_cmd->add_option("--model", predict_model)->required();
    predict_cmd->add_option("--data", predict_data)->required();
    predict_cmd->add_option("--out", predict_out)->required();
    predict_cmd->add_option("--workers", workers, "worker threads");

    // evaluate
    CLI::App* evaluate_cmd = app.add_subcommand("evaluate", "MSE of a model on labelled data");
    std::string evaluate_model, evaluate_data;
    double evaluate_fraction = 0.3;
    std::uint64_t evaluate_seed = 0;
    bool evaluate_split = false;
    evaluate_cmd->add_option("--model", evaluate_model)->required();
    evaluate_cmd->add_option("--data", evaluate_data)->required();
    evaluate_cmd->add_flag("--split", evaluate_split, "evaluate on the held-out part of the train split");
    evaluate_cmd->add_option("--test-fraction", evaluate_fraction, "held-out fraction used with --split");
    evaluate_cmd->add_option("--seed", evaluate_seed, "split seed (default: the model's seed)");
    evaluate_cmd->add_option("--workers", workers, "worker threads");

    // synth
    CLI::App* synth_cmd = app.add_subcommand("synth", "generate a synthetic regression data set");
    std::string synth_kind = "sin", synth_out;
    std::size_t synth_n = 50000;
    double synth_noise = 0.2;
    std::uint64_t synth_seed = 1;
    synth_cmd->add_option("--kind", synth_kind, "data set kind (sin)");
    synth_cmd->add_option("--n", synth_n, "number of rows");
    synth_cmd->add_option("--noise-sd", synth_noise, "noise standard deviation");
    synth_cmd->add_option("--seed", synth_seed, "random seed");
    synth_cmd->add_option("--out", synth_out)->required();

    // bench
    CLI::App* bench_cmd = app.add_subcommand("bench", "hyperparameter grid sweep with timing");
    ParamOptions bench_params;
    bench_params.attach(*bench_cmd);
    BenchRequest bench_request;
    std::string bench_data, bench_out, grid_trees, grid_cells, grid_candidates, grid_pro;
    bench_cmd->add_option("--data", bench_data, "CSV data (default: synthetic sin)");
    bench_cmd->add_option("--synth-n", bench_request.synth_n, "rows of synthetic data per repeat");
    bench_cmd->add_option("--noise-sd", bench_request.noise_sd, "noise of synthetic data");
    bench_cmd->add_option("--grid-trees", grid_trees, "comma-separated T values");
    bench_cmd->add_option("--grid-cells", grid_cells, "comma-separated m values");
    bench_cmd->add_option("--grid-candidates", grid_candidates, "comma-separated k values");
    bench_cmd->add_option("--grid-pro", grid_pro, "comma-separated pro values");
    bench_cmd->add_option("--repeats", bench_request.repeats, "repeats per grid point");
    bench_cmd->add_option("--test-fraction", bench_request.test_fraction, "held-out fraction");
    bench_cmd->add_option("--out", bench_out)->required();
    bench_cmd->add_option("--workers", workers, "worker threads");

    // grid-export
    CLI::App* grid_cmd = app.add_subcommand("grid-export", "predictions on a regular grid (d <= 2)");
    GridRequest grid_request;
    std::string grid_model, grid_out, grid_lo, grid_hi;
    grid_cmd->add_option("--model", grid_model)->required();
    grid_cmd->add_option("--out", grid_out)->required();
    grid_cmd->add_option("--lo", grid_lo, "lower corner, comma-separated");
    grid_cmd->add_option("--hi", grid_hi, "upper corner, comma-separated");
    grid_cmd->add_option("--resolution", grid_request.resolution, "points per axis");
    grid_cmd->add_option("--workers", workers, "worker threads");

    // trace
    CLI::App* trace_cmd = app.add_subcommand("trace", "print the split sequence of every partition");
    std::string trace_model;
    trace_cmd->add_option("--model", trace_model)->required();

    std::vector<const char*> argv;
    for (const auto& a : args)
        argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kSuccess : kUsageError;
    }

    try {
        if (*train_cmd) {
            train_request.data = train_data;
            train_request.model_out = train_model;
            train_request.params = train_params.resolve(*train_cmd);
            train_request.workers = workers;
            if (!train_out.empty())
                train_request.train_out = train_out;
            if (!test_out.empty())
                train_request.test_out = test_out;
            const RunReport report = cmd_train(train_request);
            out << report.to_text();
            if (!report_path.empty()) {
                std::ofstream file = open_output(report_path);
                file << report.to_text();
                finish_output(file, report_path);
            }
            if (!report_row.empty()) {
                const bool fresh = !std::filesystem::exists(report_row) || std::filesystem::file_size(report_row) == 0;
                std::ofstream file(report_row, std::ios::app);
                if (!file)
                    throw IoError("cannot write '" + report_row + "'");
                if (fresh)
                    file << RunReport::csv_header() << '\n';
                file << report.csv_row() << '\n';
            }
        } else if (*predict_cmd) {
            cmd_predict(predict_model, predict_data, predict_out, workers);
        } else if (*evaluate_cmd) {
            std::optional<double> fraction;
            std::optional<std::uint64_t> seed;
            if (evaluate_split) {
                fraction = evaluate_fraction;
                if (evaluate_cmd->count("--seed") > 0)
                    seed = evaluate_seed;
            }
            out << "mse=" << format_double(cmd_evaluate(evaluate_model, evaluate_data, fraction, seed, workers))
                << '\n';
        } else if (*synth_cmd) {
            cmd_synth(synth_kind, synth_n, synth_noise, synth_seed, synth_out);
        } else if (*bench_cmd) {
            bench_request.base = bench_params.resolve(*bench_cmd);
            if (!bench_data.empty())
                bench_request.data = bench_data;
            bench_request.trees = parse_list<std::size_t>(grid_trees);
            bench_request.cells = parse_list<std::size_t>(grid_cells);
            bench_request.candidates = parse_list<std::size_t>(grid_candidates);
            bench_request.pro = parse_list<double>(grid_pro);
            bench_request.workers = workers;
            bench_request.out = bench_out;
            cmd_bench(bench_request, err);
        } else if (*grid_cmd) {
            grid_request.model = grid_model;
            grid_request.out = grid_out;
            grid_request.lower = parse_real_list(grid_lo);
            grid_request.upper = parse_real_list(grid_hi);
            grid_request.workers = workers;
            cmd_grid_export(grid_request);
        } else if (*trace_cmd) {
            check_readable(trace_model);
            out << export_traces(load(trace_model));
        }
    } catch (const IoError& e) {
        err << "error: " << e.what() << '\n';
        return kIoError;
    } catch (const NumericError& e) {
        err << "numeric failure: " << e.what() << '\n';
        return kNumericError;
    } catch (const ValidationError& e) {
        err << "invalid input: " << e.what() << '\n';
        return kValidationError;
    } catch (const std::exception& e) {
        err << "internal error: " << e.what() << '\n';
        return kInternalFailure;
    }
    return kSuccess;
}

} // namespace tbrf::cli
