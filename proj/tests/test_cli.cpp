#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <numbers>
#include <sstream>

#include <sys/wait.h>

#include "support.hpp"
#include "tbrf/cli.hpp"
#include "tbrf/error.hpp"
#include "tbrf/forest.hpp"
#include "tbrf/metrics.hpp"

using namespace tbrf;
using test::TempDir;

namespace {

struct Result {
    int code;
    std::string out;
    std::string err;
};

Result run(std::vector<std::string> args)
{
    args.insert(args.begin(), "tbrf");
    std::ostringstream out;
    std::ostringstream err;
    const int code = cli::run(args, out, err);
    return {code, out.str(), err.str()};
}

std::string value_of(const std::string& report, const std::string& key)
{
    std::istringstream in(report);
    std::string line;
    while (std::getline(in, line))
        if (line.rfind(key + "=", 0) == 0)
            return line.substr(key.size() + 1);
    return {};
}

std::vector<std::string> lines(const std::string& text)
{
    std::vector<std::string> out;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line))
        out.push_back(line);
    return out;
}

std::string small_flags() { return "--trees=3 --cells=3 --candidates=2"; }

std::vector<std::string> split_words(const std::string& text)
{
    std::istringstream in(text);
    std::vector<std::string> words;
    std::string w;
    while (in >> w)
        words.push_back(w);
    return words;
}

std::vector<std::string> with(std::vector<std::string> args, const std::string& extra)
{
    for (const auto& w : split_words(extra))
        args.push_back(w);
    return args;
}

} // namespace

TEST_CASE("train on a tiny csv")
{
    TempDir dir;
    test::write_text(dir / "d.csv", "0,0\n1,1\n2,4\n3,9\n4,16\n5,25\n6,36\n7,49\n8,64\n9,81\n");
    const Result r = run({"train", "--data", (dir / "d.csv").string(), "--model", (dir / "m.bin").string()});
    CHECK(r.code == 0);
    CHECK(std::filesystem::exists(dir / "m.bin"));
    CHECK(std::filesystem::exists(dir / "m.bin.meta"));
    CHECK(value_of(r.out, "n_train") == "7");
    CHECK(value_of(r.out, "n_test") == "3");
    const std::string per_tree = value_of(r.out, "per_tree_mse");
    CHECK(std::count(per_tree.begin(), per_tree.end(), ',') == 19); // default T = 20
}

TEST_CASE("missing input is an I/O error naming the path")
{
    TempDir dir;
    const std::string missing = (dir / "nope.csv").string();
    const Result r = run({"train", "--data", missing, "--model", (dir / "m.bin").string()});
    CHECK(r.code == cli::kIoError);
    CHECK(r.err.find(missing) != std::string::npos);
}

TEST_CASE("exit code classes")
{
    TempDir dir;
    write_csv(test::smooth_dataset(100, 2, 1), dir / "d.csv");
    const std::string data = (dir / "d.csv").string();
    const std::string model = (dir / "m.bin").string();

    CHECK(run({"train", "--data", data, "--model", model, "--bogus"}).code == cli::kUsageError);
    CHECK(run({"frobnicate"}).code == cli::kUsageError);
    CHECK(run({}).code == cli::kUsageError);
    CHECK(run({"train", "--model", model}).code == cli::kUsageError);
    CHECK(run({"--help"}).code == cli::kSuccess);

    const Result bad_pro = run({"train", "--data", data, "--model", model, "--pro", "2"});
    CHECK(bad_pro.code == cli::kValidationError);
    CHECK(bad_pro.err.find("split_fraction") != std::string::npos);
    CHECK(run({"train", "--data", data, "--model", model, "--leaf-model", "cubic"}).code == cli::kValidationError);
    CHECK(run({"train", "--data", data, "--model", model, "--geometry", "oblique", "--vacancy-fill", "one_nn"}).code ==
          cli::kValidationError);

    test::write_text(dir / "bad.csv", "1,2,3\n4,x,6\n");
    CHECK(run({"train", "--data", (dir / "bad.csv").string(), "--model", model}).code == cli::kValidationError);

    REQUIRE(run(with({"train", "--data", data, "--model", model}, small_flags())).code == 0);
    test::write_text(dir / "wide.csv", "1,2,3,4\n");
    CHECK(run({"predict", "--model", model, "--data", (dir / "wide.csv").string(), "--out",
               (dir / "p.csv").string()})
              .code == cli::kValidationError);
    CHECK(run({"predict", "--model", (dir / "none.bin").string(), "--data", data, "--out", (dir / "p.csv").string()})
              .code == cli::kIoError);
}

TEST_CASE("the executable reports exit codes")
{
    const std::string exe = TBRF_EXE;
    auto status = [](const std::string& command) {
        const int raw = std::system((command + " >/dev/null 2>&1").c_str());
        return WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
    };
    CHECK(status(exe + " --help") == 0);
    CHECK(status(exe + " frobnicate") == 2);
    CHECK(status(exe + " train --data /nonexistent/x.csv --model /tmp/unused.bin") == 3);
}

TEST_CASE("train, evaluate and predict agree on the test split")
{
    TempDir dir;
    write_csv(test::smooth_dataset(400, 2, 2), dir / "d.csv");
    const std::string model = (dir / "m.bin").string();
    const Result r = run(with({"train", "--data", (dir / "d.csv").string(), "--model", model, "--test-out",
                               (dir / "test.csv").string(), "--train-out", (dir / "train.csv").string(), "--seed",
                               "9"},
                              small_flags()));
    REQUIRE(r.code == 0);
    const double reported = std::stod(value_of(r.out, "test_mse"));

    const Result ev = run({"evaluate", "--model", model, "--data", (dir / "d.csv").string(), "--split"});
    REQUIRE(ev.code == 0);
    CHECK(std::stod(value_of(ev.out, "mse")) == reported);

    const Result ev_test = run({"evaluate", "--model", model, "--data", (dir / "test.csv").string()});
    CHECK(std::stod(value_of(ev_test.out, "mse")) == reported);

    REQUIRE(run({"predict", "--model", model, "--data", (dir / "test.csv").string(), "--out",
                 (dir / "p.csv").string()})
                .code == 0);
    const CsvTable table = read_csv_table(dir / "p.csv", HeaderMode::Present);
    CHECK(table.header == std::vector<std::string>{"x0", "x1", "y", "prediction"});
    std::vector<double> preds;
    std::vector<double> targets;
    for (const auto& row : table.rows) {
        targets.push_back(row[2]);
        preds.push_back(row[3]);
    }
    CHECK(mse(preds, targets) == reported);

    const Dataset train_part = load_csv(dir / "train.csv");
    const Dataset test_part = load_csv(dir / "test.csv");
    CHECK(train_part.size() == 280);
    CHECK(test_part.size() == 120);

    // The per-tree errors come from the same split.
    const Forest forest = load(model);
    std::vector<double> first(test_part.size());
    for (std::size_t i = 0; i < test_part.size(); ++i)
        first[i] = forest.predict_parent(0, test_part.features(i));
    CHECK(value_of(r.out, "per_tree_mse").rfind(format_double(mse(first, test_part.targets())) + ",", 0) == 0);
}

TEST_CASE("predict output")
{
    TempDir dir;
    write_csv(test::smooth_dataset(200, 1, 3), dir / "d.csv");
    const std::string model = (dir / "m.bin").string();
    REQUIRE(run(with({"train", "--data", (dir / "d.csv").string(), "--model", model}, small_flags())).code == 0);

    test::write_text(dir / "empty.csv", "x0\n");
    REQUIRE(run({"predict", "--model", model, "--data", (dir / "empty.csv").string(), "--out",
                 (dir / "p0.csv").string()})
                .code == 0);
    CHECK(test::read_text(dir / "p0.csv") == "x0,prediction\n");

    test::write_text(dir / "same.csv", "0.25\n0.7\n0.25\n");
    REQUIRE(run({"predict", "--model", model, "--data", (dir / "same.csv").string(), "--out",
                 (dir / "p1.csv").string()})
                .code == 0);
    const CsvTable t = read_csv_table(dir / "p1.csv", HeaderMode::Present);
    REQUIRE(t.rows.size() == 3);
    CHECK(t.rows[0][1] == t.rows[2][1]);
    CHECK(t.rows[0][0] == 0.25);

    const Forest forest = load(model);
    const std::vector<double> expect =
        predict_batch(forest, std::vector<std::vector<double>>{{0.25}, {0.7}, {0.25}}, 1);
    for (std::size_t i = 0; i < 3; ++i)
        CHECK(t.rows[i][1] == expect[i]);
}

TEST_CASE("synthetic sin data")
{
    TempDir dir;
    const Dataset clean = cli::synth_sin(5, 0.0, 1);
    for (std::size_t i = 0; i < clean.size(); ++i) {
        const double x = clean.features(i)[0];
        CHECK(x >= 0.0);
        CHECK(x < 10.0);
        CHECK(clean.target(i) == std::sin(x));
    }

    constexpr std::size_t n = 100000;
    const Dataset noisy = cli::synth_sin(n, 0.2, 2);
    double mean = 0.0;
    for (double y : noisy.targets())
        mean += y / static_cast<double>(n);
    const double mu = (1.0 - std::cos(10.0)) / 10.0;
    const double second = 0.5 - std::sin(20.0) / 40.0;
    const double sigma = std::sqrt(second - mu * mu + 0.04);
    CHECK(std::abs(mean - mu) <= 3.0 * sigma / std::sqrt(static_cast<double>(n)));

    REQUIRE(run({"synth", "--n", "50", "--seed", "4", "--out", (dir / "a.csv").string()}).code == 0);
    REQUIRE(run({"synth", "--n", "50", "--seed", "4", "--out", (dir / "b.csv").string()}).code == 0);
    CHECK(test::read_text(dir / "a.csv") == test::read_text(dir / "b.csv"));
    CHECK(lines(test::read_text(dir / "a.csv")).size() == 51);
    CHECK(run({"synth", "--kind", "cos", "--out", (dir / "c.csv").string()}).code == cli::kValidationError);
    CHECK(run({"synth", "--n", "0", "--out", (dir / "c.csv").string()}).code == cli::kValidationError);
}

TEST_CASE("bench table")
{
    TempDir dir;
    const Result one = run({"bench", "--synth-n", "300", "--grid-trees", "2", "--cells", "3", "--candidates", "2",
                            "--repeats", "2", "--out", (dir / "one.csv").string()});
    REQUIRE(one.code == 0);
    const auto rows = lines(test::read_text(dir / "one.csv"));
    REQUIRE(rows.size() == 2);
    CHECK(rows[1].rfind("2,3,2,0.5,2,2,", 0) == 0);

    const Result grid = run({"bench", "--synth-n", "300", "--grid-trees", "1,3", "--grid-cells", "2,4",
                             "--candidates", "2", "--repeats", "1", "--out", (dir / "grid.csv").string()});
    REQUIRE(grid.code == 0);
    CHECK(lines(test::read_text(dir / "grid.csv")).size() == 1 + 4);

    // A failing grid point is recorded and the sweep continues.
    write_csv(test::smooth_dataset(3, 1, 5), dir / "tiny.csv");
    const Result failing = run({"bench", "--data", (dir / "tiny.csv").string(), "--grid-trees", "1",
                                "--test-fraction", "0.1", "--repeats", "1", "--out", (dir / "f.csv").string()});
    CHECK(failing.code == 0);
    const auto frows = lines(test::read_text(dir / "f.csv"));
    REQUIRE(frows.size() == 2);
    CHECK(frows[1].find(",1,0,") != std::string::npos);
}

TEST_CASE("bench mean error falls with more trees on the sin benchmark")
{
    TempDir dir;
    REQUIRE(run({"bench", "--synth-n", "3000", "--grid-trees", "1,10", "--cells", "5", "--candidates", "3",
                 "--repeats", "3", "--out", (dir / "t.csv").string()})
                .code == 0);
    const auto rows = lines(test::read_text(dir / "t.csv"));
    REQUIRE(rows.size() == 3);
    auto mse_mean = [](const std::string& row) {
        std::istringstream in(row);
        std::string field;
        for (int i = 0; i <= 6; ++i)
            std::getline(in, field, ',');
        return std::stod(field);
    };
    CHECK(mse_mean(rows[2]) <= mse_mean(rows[1]));
}

TEST_CASE("grid export")
{
    TempDir dir;
    test::write_text(dir / "flat.csv", "0,2\n0.5,2\n1,2\n0.2,2\n0.9,2\n0.4,2\n0.3,2\n0.8,2\n0.1,2\n0.6,2\n");
    const std::string model = (dir / "m.bin").string();
    REQUIRE(run({"train", "--data", (dir / "flat.csv").string(), "--model", model, "--trees", "2"}).code == 0);
    REQUIRE(run({"grid-export", "--model", model, "--lo", "0", "--hi", "1", "--resolution", "3", "--out",
                 (dir / "g.csv").string()})
                .code == 0);
    CHECK(test::read_text(dir / "g.csv") == "x0,prediction\n0,2\n0.5,2\n1,2\n");

    write_csv(test::smooth_dataset(200, 2, 6), dir / "d2.csv");
    REQUIRE(run(with({"train", "--data", (dir / "d2.csv").string(), "--model", model}, small_flags())).code == 0);
    REQUIRE(run({"grid-export", "--model", model, "--resolution", "4", "--out", (dir / "g2.csv").string()}).code == 0);
    const CsvTable g = read_csv_table(dir / "g2.csv", HeaderMode::Present);
    REQUIRE(g.rows.size() == 16);
    for (std::size_t i = 1; i < g.rows.size(); ++i)
        CHECK(std::lexicographical_compare(g.rows[i - 1].begin(), g.rows[i - 1].begin() + 2, g.rows[i].begin(),
                                           g.rows[i].begin() + 2));

    write_csv(test::smooth_dataset(200, 3, 7), dir / "d3.csv");
    REQUIRE(run(with({"train", "--data", (dir / "d3.csv").string(), "--model", model}, small_flags())).code == 0);
    CHECK(run({"grid-export", "--model", model, "--out", (dir / "g3.csv").string()}).code == cli::kValidationError);
}

TEST_CASE("flags override the config file")
{
    TempDir dir;
    write_csv(test::smooth_dataset(150, 1, 8), dir / "d.csv");
    test::write_text(dir / "c.conf", "trees=3\ncells=2\ncandidates=2\nleaf_model=linear\n");
    const Result r = run({"train", "--data", (dir / "d.csv").string(), "--model", (dir / "m.bin").string(),
                          "--config", (dir / "c.conf").string(), "--trees", "2", "--report",
                          (dir / "r.txt").string(), "--report-row", (dir / "rows.csv").string()});
    REQUIRE(r.code == 0);
    CHECK(value_of(r.out, "trees") == "2");
    CHECK(value_of(r.out, "cells") == "2");
    CHECK(value_of(r.out, "leaf_model") == "linear");
    CHECK(test::read_text(dir / "r.txt") == r.out);
    const auto rows = lines(test::read_text(dir / "rows.csv"));
    REQUIRE(rows.size() == 2);
    CHECK(rows[0] == cli::RunReport::csv_header());
}

TEST_CASE("trace subcommand")
{
    TempDir dir;
    write_csv(test::smooth_dataset(150, 2, 9), dir / "d.csv");
    REQUIRE(run(with({"train", "--data", (dir / "d.csv").string(), "--model", (dir / "m.bin").string()},
                     small_flags()))
                .code == 0);
    const Result r = run({"trace", "--model", (dir / "m.bin").string()});
    CHECK(r.code == 0);
    CHECK(r.out == export_traces(load(dir / "m.bin")));
}

TEST_CASE("worker count from the environment")
{
    ::setenv("TBRF_WORKERS", "3", 1);
    CHECK(resolve_workers(0) == 3);
    CHECK(resolve_workers(2) == 2);
    ::setenv("TBRF_WORKERS", "zero", 1);
    CHECK_THROWS_AS(resolve_workers(0), ValidationError);
    ::unsetenv("TBRF_WORKERS");
}
