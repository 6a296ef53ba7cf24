#include <cstdio>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "gperm/acceptance.hpp"

int main(int argc, char** argv) {
    gperm::AcceptanceOptions opt;
    std::vector<int> only;
    CLI::App app{"Acceptance criteria"};
    app.add_option("--seed", opt.seed, "master seed");
    app.add_option("--replicas", opt.replicas, "base replica count")->check(CLI::PositiveNumber);
    app.add_option("--threads", opt.threads, "worker threads, 0 for all cores");
    app.add_option("--only", only, "criterion ids to run")->check(CLI::Range(1, 17));
    CLI11_PARSE(app, argc, argv);
    opt.only = std::set<int>(only.begin(), only.end());
    int failed = 0;
    const auto results = gperm::run_acceptance(opt, [&](const gperm::CriterionResult& r) {
        std::printf("%s\n", gperm::format_result(r).c_str());
        std::fflush(stdout);
        failed += r.passed ? 0 : 1;
    });
    std::printf("%zu criteria, %d failed\n", results.size(), failed);
    return failed == 0 ? 0 : 1;
}
