#pragma once

#include "anchorquad/anchored_function.hpp"
#include "anchorquad/cost_models.hpp"
#include "anchorquad/kernel.hpp"
#include "anchorquad/lower_bounds.hpp"
#include "anchorquad/weights.hpp"

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

namespace anchorquad {

/// "wiener", "wiener:c", or "tabulated-wiener[:c[:grid]]" (a tabulated copy of the Wiener kernel);
/// JSON form {"family": "wiener", "scale": c, "grid": n}.
Kernel1D parse_kernel(const std::string& text);
Kernel1D kernel_from_json(const nlohmann::json& j);

struct TestFunction {
    std::string id;
    AnchoredFunction f;
};

struct AlgorithmSpec {
    std::string name;  ///< mc | uni3 | ml | cd
    nlohmann::json params = nlohmann::json::object();
};

struct BoundSpec {
    BoundModel model = BoundModel::UnrRes;
    double alpha = 3.0;
    double s = 1.0;
    std::vector<int> sigmas;
    std::optional<int> omega;
    double slack = 0.2;
};

struct ExperimentConfig {
    std::shared_ptr<const Kernel1D> kernel;
    std::optional<WeightFamily> weights;  ///< bound to the kernel's C0
    std::optional<CostModel> cost;
    AlgorithmSpec algorithm;
    std::vector<TestFunction> tests;
    std::vector<double> budgets;
    std::size_t replications = 30;
    std::uint64_t seed = 0;
    std::optional<BoundSpec> bound;
    std::filesystem::path output_dir;
    nlohmann::json source;  ///< the parsed document, echoed into summary.json

    void validate() const;
    /// Parses a "schema": 1 document; relative paths resolve against base_dir.
    static ExperimentConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
    static ExperimentConfig load(const std::filesystem::path& file);
};

/// Builds the test family from its JSON description: a list of
///   {"kind": "representer", "rank_cap": K}
///   {"kind": "random_translates", "count": n, "terms": t, "pool": P, "seed": s}
///   {"kind": "explicit", "id": name, "function": {...}}
///   {"kind": "zero"}
/// Every function except the zero function is scaled to unit norm.
std::vector<TestFunction> build_test_family(const nlohmann::json& spec, std::shared_ptr<const Kernel1D> k,
                                            const WeightFamily& w);

/// Algorithm configured for budget N; throws BudgetError when N is below its minimum cost.
QuadratureRule make_algorithm(const ExperimentConfig& cfg, double budget);

struct FunctionCell {
    std::string id;
    double rmse = 0.0;
    double se = 0.0;
    double mean_cost = 0.0;
};

struct BudgetRow {
    double budget = 0.0;
    double realized_cost_mean = 0.0;
    double realized_cost_max = 0.0;
    std::vector<FunctionCell> cells;
    double worst_rmse = 0.0;
    std::string worst_id;
    bool skipped = false;
    std::string note;
};

struct RateFit {
    double r = 0.0;
    double c = 0.0;
    double residual = 0.0;
    std::size_t rows_used = 0;
    std::vector<std::string> notes;
};

enum class Verdict { Pass, Fail, Vacuous };
std::string to_string(Verdict v);

struct BoundComparison {
    Verdict verdict = Verdict::Vacuous;
    double rate_cap = 0.0;  ///< 1 / bound
    double margin = 0.0;    ///< rate_cap - r
    double slack = 0.0;
};

struct ExperimentRun {
    std::vector<BudgetRow> rows;
    std::optional<RateFit> fit;
    std::optional<ExponentBound> bound;
    std::optional<BoundComparison> comparison;
};

/// RMSE of the errors and its jackknife standard error.
std::pair<double, double> rmse_with_jackknife(const std::vector<double>& errors);

/// Least squares log rmse = log c - r log N; zero-error rows are excluded with a note.
RateFit fit_rate(const std::vector<double>& budgets, const std::vector<double>& rmse);
RateFit fit_rate(const ExperimentRun& run);

/// PASS iff r <= 1/bound + slack; VACUOUS for an infinite bound.
BoundComparison compare_with_bounds(double r, const ExponentBound& bound, double slack);

/// Worker count: hardware concurrency capped by ANCHORQUAD_THREADS.
unsigned worker_count();

ExperimentRun run_experiment(const ExperimentConfig& cfg);

/// runs.csv, summary.json and plotdata.csv.
void write_outputs(const ExperimentRun& run, const ExperimentConfig& cfg, const std::filesystem::path& dir);
std::string runs_csv(const ExperimentRun& run);
std::string plotdata_csv(const ExperimentRun& run);
nlohmann::ordered_json summary_json(const ExperimentRun& run, const ExperimentConfig& cfg);

}  // namespace anchorquad
