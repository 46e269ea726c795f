// Acceptance suite: one test case per acceptance criterion, each printing
// a single pass/fail line with the observed worst case, its tolerance and
// the wall time. Criterion 9 runs the Monte-Carlo saturation experiment
// natively; criterion 11 drives the built CLI end to end.

#include <catch2/catch_amalgamated.hpp>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <numeric>
#include <string>

#ifndef _WIN32
#include <sys/wait.h>
#endif

#include "cdsense/estimation.hpp"
#include "cdsense/validate.hpp"

using namespace cdsense;

namespace {

class Stopwatch {
public:
    Stopwatch() : start_(std::chrono::steady_clock::now()) {}
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_;
};

void report(int criterion, const std::string& what, bool pass, double observed,
            double tolerance, double seconds) {
    std::printf("criterion %2d: %-44s %s  (observed %.3e, tolerance %.3e, %.2f s)\n",
                criterion, what.c_str(), pass ? "PASS" : "FAIL", observed, tolerance, seconds);
    std::fflush(stdout);
}

void require_check(int criterion, const CheckResult& r, double seconds,
                   double runtime_limit = 0.0) {
    report(criterion, r.name, r.pass, r.observed, r.tolerance, seconds);
    CHECK(r.pass);
    if (runtime_limit > 0.0) CHECK(seconds < runtime_limit);
}

} // namespace

TEST_CASE("criterion 1: analytic TMSV QFIM matches the fidelity oracle") {
    Stopwatch sw;
    const CheckResult r = check_qfim_tmsv_fidelity_oracle();
    require_check(1, r, sw.seconds(), 10.0);
}

TEST_CASE("criterion 2: PNRD is optimal for the coherent probe") {
    Stopwatch sw;
    require_check(2, check_fim_coherent_equals_qfim(), sw.seconds());
}

TEST_CASE("criterion 3: PNRD is optimal for the Fock probe") {
    Stopwatch sw;
    require_check(3, check_fim_fock_equals_qfim(), sw.seconds());
}

TEST_CASE("criterion 4: ancilla-assisted twin beams attain the lossy maximum") {
    Stopwatch sw;
    require_check(4, check_ancilla_uql(), sw.seconds());
}

TEST_CASE("criterion 5: TMSV QCR, PNRD CR and UQL coincide on the diagonal") {
    Stopwatch sw;
    require_check(5, check_diagonal_coincidence(), sw.seconds());
}

TEST_CASE("criterion 6: enhancement factor spot values") {
    Stopwatch sw;
    require_check(6, check_enhancement_spots(), sw.seconds());
}

TEST_CASE("criterion 7: large-N limit of the TMSV bound") {
    Stopwatch sw;
    require_check(7, check_large_n_limit(), sw.seconds());
}

TEST_CASE("criterion 8: first-order flatness of Var_TMSV - UQL") {
    Stopwatch sw;
    require_check(8, check_first_order_flatness(), sw.seconds());
}

TEST_CASE("criterion 9: Fock-probe MLE saturates the CR bound") {
    Stopwatch sw;
    const Scenario s(0.5, 0.45, 0.8, 0.8);
    const PhotonBudget b(1.0, 1.0);
    std::vector<std::uint64_t> seeds(200);
    std::iota(seeds.begin(), seeds.end(), 1u);
    const EstimationReport rep = saturation_report(Probe::Fock, s, b, 10000, seeds);
    const double seconds = sw.seconds();
    const bool pass = rep.ratio >= 0.9 && rep.ratio <= 1.1 && seconds < 30.0;
    report(9, "fock_mle_cr_saturation", pass, rep.ratio, 1.1, seconds);
    CHECK(rep.ratio >= 0.9);
    CHECK(rep.ratio <= 1.1);
    CHECK(seconds < 30.0);
}

TEST_CASE("criterion 10: property suites run clean") {
    Stopwatch sw;
    std::vector<CheckResult> props;
    props.push_back(check_chi_bounds());
    for (auto& r : check_fidelity_axioms()) props.push_back(std::move(r));
    props.push_back(check_pnrd_sanity());
    props.push_back(check_fim_psd_dominance());
    props.push_back(check_tmsv_p00_geometric());
    props.push_back(check_ordering_chain());
    const double seconds = sw.seconds();
    bool all = true;
    double worst_margin = -kInf; // observed - tolerance, most offending
    for (const auto& r : props) {
        all = all && r.pass;
        worst_margin = std::max(worst_margin, r.observed - r.tolerance);
        if (!r.pass)
            std::printf("criterion 10:   failing property: %s (observed %.3e, tolerance %.3e)\n",
                        r.name.c_str(), r.observed, r.tolerance);
    }
    report(10, "property_suites_zero_failures", all, worst_margin, 0.0, seconds);
    for (const auto& r : props) {
        INFO(r.name);
        CHECK(r.pass);
    }
}

TEST_CASE("criterion 11: validate subcommand exits 0 in under 60 s") {
    Stopwatch sw;
    const char* exe = std::getenv("CDSENSE_CLI");
    REQUIRE(exe != nullptr);
    const std::string cmd = std::string(exe) + " validate > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    const int exit_code = WEXITSTATUS(status);
    const double seconds = sw.seconds();
    const bool pass = exit_code == 0 && seconds < 60.0;
    report(11, "cli_validate_end_to_end", pass, static_cast<double>(exit_code), 0.0, seconds);
    CHECK(exit_code == 0);
    CHECK(seconds < 60.0);
}
