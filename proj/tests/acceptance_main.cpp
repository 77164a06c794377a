// Acceptance runner: one PASS/FAIL line per criterion.
//   acceptance [--workers N] [criterion ids...]
#include <cstdio>
#include <cstdlib>
#include <string>

#include "palmgrasp/acceptance.hpp"
#include "palmgrasp/parallel.hpp"

int main(int argc, char** argv) {
    palmgrasp::AcceptanceOptions opts;
    opts.workers = palmgrasp::default_workers();
    for (int i = 1; i < argc; ++i) {
        const std::string a = argv[i];
        if (a == "--workers" && i + 1 < argc)
            opts.workers = std::atoi(argv[++i]);
        else
            opts.only.push_back(std::atoi(a.c_str()));
    }
    opts.on_result = [](const palmgrasp::CriterionResult& r) {
        std::printf("%s\n", palmgrasp::format_result(r).c_str());
        std::fflush(stdout);
    };
    int failed = 0;
    for (const auto& r : palmgrasp::run_acceptance(opts)) failed += !r.pass;
    return failed == 0 ? 0 : 1;
}
