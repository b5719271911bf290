#include <doctest.h>

#include "radseq/gradcheck.hpp"

using namespace radseq;

TEST_CASE("gradient_rel_error floors the denominator") {
    CHECK(gradient_rel_error(0.0, 0.0) == 0.0);
    CHECK(gradient_rel_error(1.0, 1.0) == 0.0);
    CHECK(gradient_rel_error(2.0, 1.0) == doctest::Approx(0.5));
    // Finite-difference noise on a zero gradient must not register.
    CHECK(gradient_rel_error(0.0, 1e-10) < 1e-4);
}

TEST_CASE("every kernel matches central finite differences (64-bit, eps 1e-5)") {
    const GradCheckOptions opt;
    for (const GradCheckResult& r : run_kernel_gradient_checks(opt)) {
        INFO(r.name, ": max_rel_err=", r.max_rel_err);
        CHECK(r.checked > 0);
        CHECK(r.max_rel_err < opt.tolerance);
    }
}

TEST_CASE("reduced-scale whole network matches finite differences") {
    GradCheckOptions opt;
    opt.samples_per_tensor = 6;  // the acceptance suite runs the full sampling
    const GradCheckResult r = run_network_gradient_check(reduced_spec(), opt);
    INFO("max_rel_err=", r.max_rel_err, " over ", r.checked, " coordinates");
    CHECK(r.checked > 0);
    CHECK(r.max_rel_err < opt.tolerance);
}
