#include <moac/experiment.hpp>
#include <moac/metrics_io.hpp>

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace moac;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const auto dir = fs::temp_directory_path() / ("moac_bench_test_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

ExperimentConfig tiny(const fs::path& out) {
    ExperimentConfig cfg;
    cfg.environment.name = "two_state";
    cfg.moac.actor_iterations = 1;
    cfg.moac.actor_batch_size = 8;
    cfg.moac.critic_batch_size = 8;
    cfg.moac.critic_iterations = 2;
    cfg.moac.setting = Setting::Average;
    cfg.seeds = 1;
    cfg.output_dir = out.string();
    return cfg;
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(MOAC_BENCH_PATH) + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
}

void write_run(const fs::path& dir, const std::string& stem, const std::string& csv, bool done = true) {
    std::ofstream(dir / (stem + ".csv")) << csv;
    if (done) std::ofstream(dir / (stem + ".DONE")) << "ok\n";
}

}  // namespace

TEST(Config, RoundTripsThroughText) {
    ExperimentConfig cfg;
    cfg.environment.name = "random";
    cfg.environment.discounts = {0.9, 0.123456789012345678, 0.5};
    cfg.environment.states = 7;
    cfg.environment.objectives = 3;
    cfg.environment.env_seed = 18446744073709551615ull;
    cfg.moac.actor_step_size = 0.1 + 0.2;
    cfg.moac.critic_step_size = 1e-7;
    cfg.moac.setting = Setting::Average;
    cfg.moac.oracle_diagnostics = true;
    cfg.moac.oracle_every = 3;
    cfg.schedules = {MomentumSchedule::power(2), MomentumSchedule::constant(1.0 / 3.0), MomentumSchedule::zero()};
    cfg.moac.momentum = cfg.schedules.front();
    cfg.seeds = 4;
    cfg.jsonl = true;
    std::istringstream in(serialize_config(cfg));
    EXPECT_EQ(parse_config(in), cfg);
}

TEST(Config, TheoryStepsRoundTrip) {
    std::istringstream in("[actor]\nstep_size = theory\nlipschitz = 12.5\n[critic]\nstep_size = theory\n");
    const auto cfg = parse_config(in);
    EXPECT_TRUE(cfg.moac.theory_actor_step);
    EXPECT_TRUE(cfg.moac.theory_critic_step);
    EXPECT_DOUBLE_EQ(cfg.moac.effective_actor_step(), 1.0 / 37.5);
    std::istringstream again(serialize_config(cfg));
    EXPECT_EQ(parse_config(again), cfg);
}

TEST(Config, SampleConfigsParse) {
    for (const char* name : {"fishwood.ini", "resource_gathering.ini", "smoke.ini"}) {
        const auto cfg = parse_config_file(std::string(MOAC_SOURCE_DIR) + "/configs/" + name);
        EXPECT_NO_THROW(validate_config(cfg)) << name;
    }
}

TEST(Config, UnknownKeyRejectedWithLine) {
    std::istringstream in("[actor]\niterations = 5\n\n[critic]\nstepsize = 0.1\n");
    try {
        parse_config(in);
        FAIL();
    } catch (const ConfigError& e) {
        const std::string what = e.what();
        EXPECT_NE(what.find("line 5"), std::string::npos) << what;
        EXPECT_NE(what.find("critic.stepsize"), std::string::npos) << what;
    }
}

TEST(Config, Diagnostics) {
    auto message = [](const std::string& text) {
        std::istringstream in(text);
        try {
            parse_config(in);
        } catch (const ConfigError& e) {
            return std::string(e.what());
        }
        return std::string();
    };
    EXPECT_NE(message("[actor]\niterations = ten\n").find("line 2, field actor.iterations"), std::string::npos);
    EXPECT_NE(message("[bogus]\n").find("unknown section"), std::string::npos);
    EXPECT_NE(message("iterations = 3\n").find("outside any section"), std::string::npos);
    EXPECT_NE(message("[run]\nsetting = episodic\n").find("run.setting"), std::string::npos);
    EXPECT_NE(message("[run]\noracle = yes\n").find("run.oracle"), std::string::npos);
    EXPECT_NE(message("[actor]\nmomentum = power:1, linear\n").find("actor.momentum"), std::string::npos);
    EXPECT_NE(message("[run]\nseed = 1\nseed = 2\n").find("duplicate"), std::string::npos);
    EXPECT_NE(message("[run]\nseed = -4\n").find("run.seed"), std::string::npos);
    EXPECT_EQ(message("# only a comment\n[run] # trailing\nseeds = 2 # two\n"), "");
}

TEST(Config, SemanticValidation) {
    ExperimentConfig cfg;
    cfg.environment.name = "mountain_car";
    EXPECT_THROW(validate_config(cfg), ConfigError);
    cfg = ExperimentConfig{};
    cfg.environment.discounts = {0.9};
    EXPECT_THROW(validate_config(cfg), ConfigError);
    cfg = ExperimentConfig{};
    cfg.features = "full_one_hot";
    cfg.moac.setting = Setting::Average;
    EXPECT_THROW(validate_config(cfg), ConfigError);
    cfg = ExperimentConfig{};
    cfg.moac.actor_batch_size = 0;
    EXPECT_THROW(validate_config(cfg), ConfigError);
}

TEST(MetricsCsv, HeaderAndFormatting) {
    const auto cols = metrics_columns(2, true);
    const std::vector<std::string> expected{"t",        "reward_mean_1", "reward_mean_2", "grad_norm_sq",
                                            "lambda_1", "lambda_2",      "eta_t",         "critic_err_1",
                                            "critic_err_2", "J_exact_1", "J_exact_2",     "pareto_gap"};
    EXPECT_EQ(cols, expected);
    std::stringstream out;
    CsvMetricsWriter writer(out, 2, true);
    MetricsRecord rec;
    rec.t = 1;
    rec.reward_mean = Eigen::Vector2d(0.1, 1.0 / 3.0);
    rec.grad_norm_sq = 2.5;
    rec.lambda = Eigen::Vector2d(0.25, 0.75);
    rec.eta = 1;
    writer.write(rec);
    const auto table = read_metrics_csv(out);
    ASSERT_EQ(table.rows.size(), 1u);
    EXPECT_EQ(*table.rows[0][2], 1.0 / 3.0);
    EXPECT_FALSE(table.rows[0][11].has_value());
    EXPECT_EQ(format_double(0.1), "0.10000000000000001");
}

TEST(MetricsCsv, ReaderRejectsMalformedRows) {
    std::istringstream short_row("t,a,b\n1,2\n");
    EXPECT_THROW(read_metrics_csv(short_row), DataError);
    std::istringstream bad_number("t,a\n1,x\n");
    EXPECT_THROW(read_metrics_csv(bad_number), DataError);
    std::istringstream no_t("a,b\n");
    EXPECT_THROW(read_metrics_csv(no_t), DataError);
}

TEST(MetricsJsonl, OptionalFieldsOnlyWhenPresent) {
    MetricsRecord rec;
    rec.t = 3;
    rec.reward_mean = Eigen::Vector2d(0.5, 0.5);
    rec.lambda = Eigen::Vector2d(1, 0);
    auto doc = to_json(rec);
    EXPECT_FALSE(doc.contains("pareto_gap"));
    rec.pareto_gap = 0.01;
    doc = to_json(rec);
    EXPECT_DOUBLE_EQ(doc["pareto_gap"].get<double>(), 0.01);
}

TEST(Experiment, SingleIterationWritesOneRow) {
    const auto dir = scratch("single");
    const auto outcome = run_experiment(tiny(dir));
    ASSERT_EQ(outcome.exit_code, 0) << outcome.message;
    std::ifstream in(dir / "power-1_seed1.csv");
    std::string line;
    int lines = 0;
    while (std::getline(in, line)) ++lines;
    EXPECT_EQ(lines, 2);
    EXPECT_TRUE(fs::exists(dir / "power-1_seed1.DONE"));
    EXPECT_TRUE(fs::exists(dir / "power-1_seed1.policy.json"));
    EXPECT_TRUE(fs::exists(dir / "summary.json"));
}

TEST(Experiment, SameConfigTwiceIsByteIdentical) {
    auto cfg = tiny(scratch("determinism_a"));
    cfg.moac.actor_iterations = 15;
    cfg.moac.oracle_diagnostics = true;
    cfg.seeds = 3;
    cfg.schedules = {MomentumSchedule::power(1), MomentumSchedule::constant(0.5)};
    cfg.jsonl = true;
    ASSERT_EQ(run_experiment(cfg).exit_code, 0);
    const fs::path a = cfg.output_dir;
    cfg.output_dir = scratch("determinism_b").string();
    ASSERT_EQ(run_experiment(cfg).exit_code, 0);
    const fs::path b = cfg.output_dir;
    for (const char* stem : {"power-1_seed1", "power-1_seed3", "constant-0.5_seed2"}) {
        EXPECT_EQ(slurp(a / (std::string(stem) + ".csv")), slurp(b / (std::string(stem) + ".csv")));
        EXPECT_EQ(slurp(a / (std::string(stem) + ".jsonl")), slurp(b / (std::string(stem) + ".jsonl")));
    }
    EXPECT_EQ(slurp(a / "summary.json"), slurp(b / "summary.json"));
    // different seeds differ
    EXPECT_NE(slurp(a / "power-1_seed1.csv"), slurp(a / "power-1_seed2.csv"));
}

TEST(Experiment, DeterministicRegardlessOfWorkerCount) {
    auto cfg = tiny(scratch("workers_a"));
    cfg.moac.actor_iterations = 10;
    cfg.seeds = 4;
    setenv("MOAC_WORKERS", "1", 1);
    ASSERT_EQ(run_experiment(cfg).exit_code, 0);
    const fs::path a = cfg.output_dir;
    cfg.output_dir = scratch("workers_b").string();
    setenv("MOAC_WORKERS", "4", 1);
    ASSERT_EQ(run_experiment(cfg).exit_code, 0);
    unsetenv("MOAC_WORKERS");
    for (int k = 1; k <= 4; ++k) {
        const std::string name = "power-1_seed" + std::to_string(k) + ".csv";
        EXPECT_EQ(slurp(a / name), slurp(fs::path(cfg.output_dir) / name));
    }
}

TEST(Experiment, DivergenceExitsThreeNamingSeedAndIteration) {
    auto cfg = tiny(scratch("diverge"));
    cfg.moac.critic_step_size = 1e7;
    cfg.moac.critic_iterations = 1000;
    cfg.moac.setting = Setting::Discounted;
    const auto outcome = run_experiment(cfg);
    EXPECT_EQ(outcome.exit_code, 3);
    EXPECT_NE(outcome.message.find("seed 1"), std::string::npos) << outcome.message;
    EXPECT_NE(outcome.message.find("iteration 1"), std::string::npos) << outcome.message;
}

TEST(Experiment, InvalidConfigExitsTwo) {
    auto cfg = tiny(scratch("invalid"));
    cfg.environment.name = "nowhere";
    EXPECT_EQ(run_experiment(cfg).exit_code, 2);
}

TEST(Experiment, FishwoodSummaryHasCrossingPerSchedule) {
    auto cfg = parse_config_file(std::string(MOAC_SOURCE_DIR) + "/configs/fishwood.ini");
    cfg.seeds = 3;
    cfg.moac.actor_iterations = 60;
    cfg.output_dir = scratch("fishwood").string();
    ASSERT_EQ(run_experiment(cfg).exit_code, 0);
    const auto summary = nlohmann::json::parse(slurp(fs::path(cfg.output_dir) / "summary.json"));
    for (const char* arm : {"power-2", "power-1", "power-0.5"}) {
        ASSERT_TRUE(summary["arms"].contains(arm)) << arm;
        EXPECT_TRUE(summary["arms"][arm]["trend"].contains("half_initial_gradient_crossing"));
        EXPECT_TRUE(summary["arms"][arm]["trend"].contains("pareto_gap_time_mean_median"));
    }
}

TEST(Summary, MedianOfThreeRunsByHand) {
    const auto dir = scratch("median");
    write_run(dir, "a_seed1", "t,grad_norm_sq\n1,5\n2,1\n");
    write_run(dir, "a_seed2", "t,grad_norm_sq\n1,5\n2,3\n");
    write_run(dir, "a_seed3", "t,grad_norm_sq\n1,5\n2,2\n");
    const auto s = summarize_directory(dir);
    const auto& g = s["arms"]["a"]["per_t"]["grad_norm_sq"];
    EXPECT_DOUBLE_EQ(g["median"][1].get<double>(), 2.0);
    EXPECT_DOUBLE_EQ(g["mean"][1].get<double>(), 2.0);
    EXPECT_DOUBLE_EQ(g["q25"][1].get<double>(), 1.5);
    EXPECT_DOUBLE_EQ(g["q75"][1].get<double>(), 2.5);
    EXPECT_DOUBLE_EQ(s["arms"]["a"]["trend"]["final"]["grad_norm_sq"]["median"].get<double>(), 2.0);
}

TEST(Summary, SingleRunEqualsItsOwnStats) {
    const auto dir = scratch("single_summary");
    write_run(dir, "x_seed4", "t,grad_norm_sq,pareto_gap\n1,4,\n2,3,0.5\n3,1,0.25\n");
    const auto s = summarize_directory(dir);
    const auto& g = s["arms"]["x"]["per_t"]["grad_norm_sq"];
    EXPECT_EQ(g["mean"], g["median"]);
    EXPECT_EQ(g["median"], nlohmann::json({4.0, 3.0, 1.0}));
    EXPECT_EQ(g["iqr"], nlohmann::json({0.0, 0.0, 0.0}));
    EXPECT_TRUE(s["arms"]["x"]["per_t"]["pareto_gap"]["median"][0].is_null());
    EXPECT_DOUBLE_EQ(s["arms"]["x"]["trend"]["pareto_gap_time_mean_median"].get<double>(), 0.375);
    EXPECT_EQ(s["arms"]["x"]["seeds"], nlohmann::json({4}));
}

TEST(Summary, InvariantToFileOrderAndIdempotent) {
    const auto a = scratch("order_a"), b = scratch("order_b");
    const std::vector<std::string> runs{"t,grad_norm_sq\n1,4\n2,1\n", "t,grad_norm_sq\n1,6\n2,2\n",
                                        "t,grad_norm_sq\n1,9\n2,8\n"};
    for (int k = 0; k < 3; ++k) write_run(a, "r_seed" + std::to_string(k + 1), runs[std::size_t(k)]);
    for (int k = 2; k >= 0; --k) write_run(b, "r_seed" + std::to_string(k + 1), runs[std::size_t(k)]);
    EXPECT_EQ(summarize_directory(a).dump(), summarize_directory(b).dump());
    EXPECT_EQ(summarize_directory(a).dump(), summarize_directory(a).dump());
}

TEST(Summary, SkipsIncompleteSeedsWithWarning) {
    const auto dir = scratch("incomplete");
    write_run(dir, "r_seed1", "t,grad_norm_sq\n1,4\n");
    write_run(dir, "r_seed2", "t,grad_norm_sq\n1,", false);
    std::vector<std::string> warnings;
    const auto s = summarize_directory(dir, &warnings);
    ASSERT_EQ(warnings.size(), 1u);
    EXPECT_NE(warnings[0].find("r_seed2"), std::string::npos);
    EXPECT_EQ(s["arms"]["r"]["seeds"], nlohmann::json({1}));
}

TEST(Summary, SchemaMismatchRejected) {
    const auto dir = scratch("mismatch");
    write_run(dir, "r_seed1", "t,grad_norm_sq\n1,4\n");
    write_run(dir, "r_seed2", "t,grad_norm_sq,eta_t\n1,4,1\n");
    EXPECT_THROW(summarize_directory(dir), DataError);
    const auto empty = scratch("empty");
    EXPECT_THROW(summarize_directory(empty), DataError);
}

TEST(Summary, CrossingUsesSmoothedCurve) {
    const auto dir = scratch("crossing");
    std::string csv = "t,grad_norm_sq\n";
    const double values[] = {10, 10, 10, 10, 10, 1, 10, 6, 4, 4, 4, 4, 4, 4};
    for (int k = 0; k < 14; ++k) csv += std::to_string(k + 1) + "," + format_double(values[k]) + "\n";
    write_run(dir, "c_seed1", csv);
    const auto s = summarize_directory(dir);
    // the single dip at t=6 is smoothed away; the 5-point average first reaches 5 at t=8
    EXPECT_EQ(s["arms"]["c"]["trend"]["half_initial_gradient_crossing"].get<double>(), 8.0);
}

TEST(Cli, ExitCodes) {
    const auto dir = scratch("cli");
    std::ofstream(dir / "bad.ini") << "[actor]\nwhatever = 1\n";
    EXPECT_EQ(run_cli("run " + (dir / "bad.ini").string()), 2);
    EXPECT_EQ(run_cli("run " + (dir / "missing.ini").string()), 2);
    std::ofstream(dir / "diverge.ini") << "[environment]\nname = two_state\n[actor]\niterations = 3\n"
                                          "[critic]\nstep_size = 1e7\niterations = 1000\nbatch_size = 5\n";
    EXPECT_EQ(run_cli("run " + (dir / "diverge.ini").string() + " --out " + (dir / "div").string()), 3);
    std::ofstream(dir / "ok.ini") << "[environment]\nname = two_state\n[actor]\niterations = 3\n";
    EXPECT_EQ(run_cli("run " + (dir / "ok.ini").string() + " --seeds 2 --oracle --out " + (dir / "ok").string()), 0);
    EXPECT_TRUE(fs::exists(dir / "ok" / "power-1_seed2.csv"));
    EXPECT_EQ(run_cli("summarize " + (dir / "ok").string()), 0);
    std::ofstream(dir / "ok" / "power-1_seed9.csv") << "t,other\n1,2\n";
    std::ofstream(dir / "ok" / "power-1_seed9.DONE") << "ok\n";
    EXPECT_EQ(run_cli("summarize " + (dir / "ok").string()), 2);
    EXPECT_EQ(run_cli("generate-log " + (dir / "ok.ini").string() + " -n 500 --out " + (dir / "log.jsonl").string() +
                      " --policy-out " + (dir / "beh.json").string()),
              0);
    EXPECT_EQ(run_cli("ncis " + (dir / "log.jsonl").string() + " " + (dir / "beh.json").string() + " --cap 10"), 0);
    EXPECT_EQ(run_cli("ncis " + (dir / "log.jsonl").string() + " " + (dir / "ok" / "power-1_seed1.policy.json").string()),
              0);
    EXPECT_EQ(run_cli("ncis " + (dir / "nope.jsonl").string() + " " + (dir / "beh.json").string()), 2);
    EXPECT_EQ(run_cli("frobnicate"), 2);
}
