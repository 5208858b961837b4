#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "arlb/config_space.hpp"
#include "arlb/csv.hpp"
#include "arlb/env.hpp"

using namespace arlb;
namespace fs = std::filesystem;

namespace {

std::string cli_path() {
    const char* env = std::getenv("ARLB_CLI");
    REQUIRE_MESSAGE(env != nullptr, "ARLB_CLI must point at the arlb binary");
    return env;
}

struct RunResult {
    int exit_code;
    std::string output;
};

RunResult run_cli(const std::string& args) {
    const fs::path tmp = fs::temp_directory_path() / "arlb-cli-out.txt";
    const std::string command = cli_path() + " " + args + " > " + tmp.string() + " 2>&1";
    const int raw = std::system(command.c_str());
    std::ifstream in(tmp);
    std::stringstream buf;
    buf << in.rdbuf();
    return {WEXITSTATUS(raw), buf.str()};
}

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& tag) : path(fs::temp_directory_path() / ("arlb-cli-" + tag)) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

}  // namespace

TEST_CASE("cli: envs list emits the registry as CSV") {
    const auto result = run_cli("envs list --format csv");
    CHECK(result.exit_code == 0);
    const CsvTable table = parse_csv(result.output);
    CHECK(table.rows.size() == registered_envs().size());
    CHECK(result.output.find("cartpole") != std::string::npos);
}

TEST_CASE("cli: space show prints a parseable space") {
    const auto result = run_cli("space show ppo classic-control");
    CHECK(result.exit_code == 0);
    const ConfigurationSpace space = space_from_yaml(result.output);
    CHECK(space.id == "ppo-classic-control");
    CHECK(space.dim() == 9);
}

TEST_CASE("cli: usage errors exit with code 1") {
    CHECK(run_cli("train sac cartpole --default --steps 100 --out /tmp/arlb-sac-x").exit_code == 1);
    const auto unknown = run_cli("train ppo atari --default --steps 100 --out /tmp/arlb-x");
    CHECK(unknown.exit_code == 1);
    CHECK(unknown.output.find("cartpole") != std::string::npos);  // registry listing
    CHECK(run_cli("space show ppo atari-domain").exit_code == 1);
    CHECK(run_cli("definitely-not-a-command").exit_code == 1);
}

TEST_CASE("cli: train runs are replayable to identical metrics") {
    TempDir dir("train");
    const std::string base = "train ppo cartpole --default --steps 2048 --seed 3 --out ";
    const auto first = run_cli(base + (dir.path / "a").string());
    CHECK(first.exit_code == 0);
    const auto second = run_cli(base + (dir.path / "b").string());
    CHECK(second.exit_code == 0);
    CHECK(slurp(dir.path / "a" / "metrics.csv") == slurp(dir.path / "b" / "metrics.csv"));
    CHECK(fs::exists(dir.path / "a" / "checkpoint" / "manifest.json"));
    CHECK(fs::exists(dir.path / "a" / "manifest.json"));
}

TEST_CASE("cli: collect then select produce reports") {
    TempDir dir("pipeline");
    const std::string collect =
        "collect --algo ppo --envs cartpole,pendulum --configs 8 --seeds 1 --eval-episodes 2 "
        "--fractions 0.5,1.0 --steps 256 --seed 1 --out " +
        (dir.path / "land").string();
    const auto collected = run_cli(collect);
    CHECK(collected.exit_code == 0);
    REQUIRE(fs::exists(dir.path / "land" / "landscape.csv"));

    const auto resumed = run_cli(collect + " --resume");
    CHECK(resumed.exit_code == 0);
    CHECK(resumed.output.find("complete") != std::string::npos);

    const auto selected = run_cli("select --data " + (dir.path / "land" / "landscape.csv").string() +
                                  " --size 2 --distance spearman --norm rank --folds 2 --out " +
                                  (dir.path / "sel").string());
    CHECK(selected.exit_code == 0);
    CHECK(fs::exists(dir.path / "sel" / "selection_report.csv"));
    CHECK(fs::exists(dir.path / "sel" / "correlation_vs_size.csv"));

    const auto mse = run_cli("select --data " + (dir.path / "land" / "landscape.csv").string() +
                             " --size 2 --distance mse --norm minmax --folds 2 --out " +
                             (dir.path / "sel2").string());
    CHECK(mse.exit_code == 0);

    const auto report = run_cli("report --in " + (dir.path / "land").string() + " --kind budget-corr --out " +
                                (dir.path / "rep").string());
    CHECK(report.exit_code == 0);
    CHECK(fs::exists(dir.path / "rep" / "budget_correlation.csv"));
}

TEST_CASE("cli: tune rs writes one trial row per seed and a monotone incumbent") {
    TempDir dir("tune");
    const auto result = run_cli(
        "tune --method rs --algo ppo --env cartpole --trials 2 --opt-seeds 2 --eval-seeds 1 --budget 512 "
        "--seed 5 --out " +
        (dir.path / "rs").string());
    CHECK(result.exit_code == 0);
    for (int seed = 0; seed < 2; ++seed) {
        const fs::path trace = dir.path / "rs" / ("rs-seed" + std::to_string(seed) + "-trace.csv");
        REQUIRE(fs::exists(trace));
        CHECK(read_csv(trace).rows.size() == 2);  // trials x eval seeds
        const CsvTable incumbent =
            read_csv(dir.path / "rs" / ("rs-seed" + std::to_string(seed) + "-incumbent.csv"));
        const int col = incumbent.require_column("best_objective");
        double last = -1e300;
        for (std::size_t row = 0; row < incumbent.rows.size(); ++row) {
            const double v = parse_double(incumbent.cell(row, col));
            CHECK(v >= last);
            last = v;
        }
    }

    const auto report = run_cli("report --in " + (dir.path / "rs").string() + " --kind anytime --out " +
                                (dir.path / "rep").string());
    CHECK(report.exit_code == 0);
    const CsvTable anytime = read_csv(dir.path / "rep" / "anytime.csv");
    CHECK(anytime.rows.size() >= 1);
    CHECK(anytime.column_index("ci_lo") >= 0);
}

TEST_CASE("cli: report anytime CI matches the hand-computed golden values") {
    // Five fixed single-point incumbent curves -> mean 10, se = sd/sqrt(5)
    // with sample sd over {8, 9, 10, 11, 12} = sqrt(2.5).
    TempDir dir("golden-ci");
    const double values[5] = {8, 9, 10, 11, 12};
    for (int i = 0; i < 5; ++i) {
        std::ofstream out(dir.path / ("run" + std::to_string(i) + "-incumbent.csv"));
        out << "cumulative_budget,best_objective\n100," << values[i] << "\n";
    }
    const auto result =
        run_cli("report --in " + dir.path.string() + " --kind anytime --out " + (dir.path / "rep").string());
    CHECK(result.exit_code == 0);
    const CsvTable table = read_csv(dir.path / "rep" / "anytime.csv");
    REQUIRE(table.rows.size() == 1);
    const double mean = parse_double(table.cell(0, table.require_column("mean_best_objective")));
    const double lo = parse_double(table.cell(0, table.require_column("ci_lo")));
    const double hi = parse_double(table.cell(0, table.require_column("ci_hi")));
    const double se = std::sqrt(2.5 / 5.0);
    CHECK(mean == doctest::Approx(10.0).epsilon(1e-12));
    CHECK(lo == doctest::Approx(10.0 - 1.96 * se).epsilon(1e-9));
    CHECK(hi == doctest::Approx(10.0 + 1.96 * se).epsilon(1e-9));
}

TEST_CASE("cli: single-seed report degenerates with a warning") {
    TempDir dir("single");
    {
        std::ofstream out(dir.path / "only-incumbent.csv");
        out << "cumulative_budget,best_objective\n100,5\n200,6\n";
    }
    const auto result =
        run_cli("report --in " + dir.path.string() + " --kind anytime --out " + (dir.path / "rep").string());
    CHECK(result.exit_code == 0);
    const CsvTable table = read_csv(dir.path / "rep" / "anytime.csv");
    REQUIRE(table.rows.size() == 2);
    CHECK(table.cell(0, table.require_column("ci_lo")) == table.cell(0, table.require_column("mean_best_objective")));
    CHECK(table.cell(0, table.require_column("warning")).find("single-seed") != std::string::npos);
}
