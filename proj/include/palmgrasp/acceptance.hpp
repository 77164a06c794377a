#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

namespace palmgrasp {

struct CriterionResult {
    int id = 0;
    std::string name;
    bool pass = false;
    std::string detail;
    double seconds = 0.0;
};

struct AcceptanceOptions {
    int workers = 1;
    /// Criterion 10 writes two pipeline runs here; removed afterwards.
    std::filesystem::path scratch = std::filesystem::temp_directory_path() / "palmgrasp_acceptance";
    /// Run only these criteria (all when empty). Criteria a selected one
    /// depends on still run their setup, not their checks.
    std::vector<int> only;
    /// Called as each criterion finishes.
    std::function<void(const CriterionResult&)> on_result;
};

/// Runs the acceptance suite (criteria 1 to 10) in order.
std::vector<CriterionResult> run_acceptance(const AcceptanceOptions& opts);

/// `PASS 4 pose estimation: ... (12.3 s)`.
std::string format_result(const CriterionResult& r);

}  // namespace palmgrasp
