#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "tbrf/dataset.hpp"
#include "tbrf/hyper_params.hpp"

namespace tbrf::cli {

enum ExitCode : int {
    kSuccess = 0,
    kInternalFailure = 1,
    kUsageError = 2,
    kIoError = 3,
    kValidationError = 4,
    kNumericError = 5,
};

struct RunReport {
    HyperParams params;
    double train_time_seconds = 0.0;
    double test_mse = 0.0;
    std::vector<double> per_tree_mse;
    std::size_t n_train = 0;
    std::size_t n_test = 0;
    std::uint64_t seed = 0;

    std::string to_text() const;           // key=value lines
    static std::string csv_header();
    std::string csv_row() const;
};

/// Split stream used by train and by evaluate --split.
RandomStream data_split_stream(std::uint64_t seed);

struct TrainRequest {
    std::filesystem::path data;
    std::filesystem::path model_out;
    HyperParams params;
    double test_fraction = 0.3;
    std::size_t workers = 0;
    std::optional<std::filesystem::path> train_out;
    std::optional<std::filesystem::path> test_out;
};

/// Split, train, save the model and its .meta sidecar, evaluate on the test part.
RunReport cmd_train(const TrainRequest& request);

/// Append a prediction column to every row of a features-only or
/// features+target CSV.
void cmd_predict(const std::filesystem::path& model, const std::filesystem::path& data,
                 const std::filesystem::path& out, std::size_t workers = 0);

/// MSE of the model on a labelled CSV, or on its test part when
/// `test_fraction` is set (the split is redrawn from `split_seed`).
double cmd_evaluate(const std::filesystem::path& model, const std::filesystem::path& data,
                    std::optional<double> test_fraction, std::optional<std::uint64_t> split_seed,
                    std::size_t workers = 0);

/// y = sin(x) + N(0, noise_sd^2), x ~ U(0, 10).
Dataset synth_sin(std::size_t n, double noise_sd, std::uint64_t seed);
void cmd_synth(const std::string& kind, std::size_t n, double noise_sd, std::uint64_t seed,
               const std::filesystem::path& out);

struct BenchRequest {
    std::optional<std::filesystem::path> data;
    std::size_t synth_n = 50000;
    double noise_sd = 0.2;
    HyperParams base;
    std::vector<std::size_t> trees;
    std::vector<std::size_t> cells;
    std::vector<std::size_t> candidates;
    std::vector<double> pro;
    std::size_t repeats = 10;
    double test_fraction = 0.3;
    std::size_t workers = 0;
    std::filesystem::path out;
};

/// One row per grid point with mean and standard deviation over the repeats.
/// Failed repeats are counted and their first message recorded.
void cmd_bench(const BenchRequest& request, std::ostream& log);

struct GridRequest {
    std::filesystem::path model;
    std::vector<double> lower; // empty: the model's root box
    std::vector<double> upper;
    std::size_t resolution = 200;
    std::filesystem::path out;
    std::size_t workers = 0;
};

void cmd_grid_export(const GridRequest& request);

/// Parse and dispatch a full command line (args[0] is the program name).
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace tbrf::cli
