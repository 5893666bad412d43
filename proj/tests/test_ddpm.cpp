#include <doctest.h>

#include <cmath>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "modiff/ddpm.hpp"
#include "modiff/rng.hpp"
#include "modiff/schedule.hpp"

using modiff::Mat;
using modiff::NoiseSchedule;

namespace {

Mat scalar_mat(double v) {
    Mat m(1, 1);
    m(0, 0) = v;
    return m;
}

// Three steps of constant beta = 0.1 give hand-checkable tables.
NoiseSchedule const_schedule() { return NoiseSchedule(std::vector<double>{0.1, 0.1, 0.1}); }

}  // namespace

TEST_CASE("schedule tables match hand-computed constants") {
    NoiseSchedule s = const_schedule();
    CHECK(s.steps() == 3);
    CHECK(s.alpha_bar(0) == 1.0);
    CHECK(s.one_minus_alpha_bar(0) == 0.0);
    CHECK(s.alpha_bar(1) == doctest::Approx(0.9).epsilon(1e-15));
    CHECK(s.alpha_bar(2) == doctest::Approx(0.81).epsilon(1e-15));
    CHECK(s.alpha_bar(3) == doctest::Approx(0.729).epsilon(1e-15));
    // the first complement equals beta_1 exactly by construction
    CHECK(s.one_minus_alpha_bar(1) == 0.1);
    CHECK(s.beta_tilde(1) == 0.0);
    CHECK(s.beta_tilde(2) == doctest::Approx(0.05263157894736842).epsilon(1e-14));
    for (std::size_t step = 1; step <= 3; ++step)
        CHECK(s.one_minus_alpha_bar(step) ==
              doctest::Approx(1.0 - s.alpha_bar(step)).epsilon(1e-14));
}

TEST_CASE("default linear schedule matches an exact-arithmetic oracle") {
    NoiseSchedule s = modiff::build_schedule(100, 1e-4, 0.02);
    CHECK(s.steps() == 100);
    CHECK(s.beta(1) == 1e-4);
    CHECK(s.beta(100) == doctest::Approx(0.02).epsilon(1e-15));
    // product of (1 - beta_s) evaluated in extended precision
    CHECK(s.alpha_bar(100) == doctest::Approx(0.3635632480554919).epsilon(1e-12));
    for (std::size_t step = 2; step <= 100; ++step) {
        CHECK(s.beta(step) > s.beta(step - 1));
        CHECK(s.alpha_bar(step) < s.alpha_bar(step - 1));
        // the posterior variance never exceeds the forward variance
        CHECK(s.beta_tilde(step) < s.beta(step));
    }
}

TEST_CASE("schedule construction rejects bad inputs") {
    CHECK_THROWS_AS(modiff::build_schedule(0, 1e-4, 0.02), std::invalid_argument);
    CHECK_THROWS_AS(modiff::build_schedule(10, 0.0, 0.02), std::invalid_argument);
    CHECK_THROWS_AS(modiff::build_schedule(10, 1e-4, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(modiff::build_schedule(10, 0.05, 0.02), std::invalid_argument);
    CHECK_THROWS_AS(modiff::build_schedule(10, 1e-4, 0.02, "cosine"), std::invalid_argument);
    CHECK_THROWS_AS(NoiseSchedule(std::vector<double>{}), std::invalid_argument);
    CHECK_THROWS_AS(NoiseSchedule(std::vector<double>{1.5}), std::invalid_argument);
}

TEST_CASE("content hash separates schedules and is stable") {
    NoiseSchedule a = modiff::build_schedule(100, 1e-4, 0.02);
    NoiseSchedule b = modiff::build_schedule(100, 1e-4, 0.02);
    NoiseSchedule c = modiff::build_schedule(100, 1e-4, 0.1);
    NoiseSchedule d = modiff::build_schedule(99, 1e-4, 0.02);
    CHECK(a.content_hash() == b.content_hash());
    CHECK(a.content_hash() != c.content_hash());
    CHECK(a.content_hash() != d.content_hash());
}

TEST_CASE("schedule csv starts with the expected header and first row") {
    NoiseSchedule s = const_schedule();
    std::ostringstream os;
    modiff::write_schedule_csv(s, os);
    std::istringstream is(os.str());
    std::string line;
    std::getline(is, line);
    CHECK(line == "s,beta,alpha,alpha_bar,beta_tilde");
    std::getline(is, line);
    // %.17g spells 0.1 out to full precision
    CHECK(line.substr(0, 22) == "1,0.10000000000000001,");
}

TEST_CASE("forward sample matches the closed form at a fixed step") {
    NoiseSchedule s = const_schedule();
    Mat y = modiff::forward_sample(scalar_mat(1.0), 2, scalar_mat(1.0), s);
    // sqrt(0.81) + sqrt(0.19)
    CHECK(y(0, 0) == doctest::Approx(1.3358898943540674).epsilon(1e-14));

    CHECK_THROWS_AS(modiff::forward_sample(scalar_mat(1.0), 0, scalar_mat(1.0), s),
                    std::out_of_range);
    CHECK_THROWS_AS(modiff::forward_sample(scalar_mat(1.0), 4, scalar_mat(1.0), s),
                    std::out_of_range);
    Mat wrong(2, 1);
    CHECK_THROWS_AS(modiff::forward_sample(scalar_mat(1.0), 2, wrong, s), std::invalid_argument);
}

TEST_CASE("forward marginals have the scheduled mean and variance") {
    NoiseSchedule s = modiff::build_schedule(100, 1e-4, 0.02);
    modiff::RandomStream rng(404);
    const double y0 = 0.8;
    const std::size_t N = 100000;
    for (std::size_t step : {std::size_t(1), std::size_t(10), std::size_t(50), std::size_t(100)}) {
        double sum = 0.0, sumsq = 0.0;
        for (std::size_t i = 0; i < N; ++i) {
            double v = modiff::forward_sample(scalar_mat(y0), step, scalar_mat(rng.normal()), s)(0, 0);
            sum += v;
            sumsq += v * v;
        }
        double mean = sum / N;
        double var = sumsq / N - mean * mean;
        double want_mean = std::sqrt(s.alpha_bar(step)) * y0;
        double want_var = s.one_minus_alpha_bar(step);
        double se_mean = std::sqrt(want_var / N);
        double se_var = want_var * std::sqrt(2.0 / N);
        CHECK(std::abs(mean - want_mean) < 3.0 * se_mean + 1e-12);
        CHECK(std::abs(var - want_var) < 3.0 * se_var + 1e-12);
    }
}

TEST_CASE("posterior collapses exactly at the first step") {
    NoiseSchedule s = modiff::build_schedule(100, 1e-4, 0.02);
    Mat y0 = scalar_mat(0.7), y1 = scalar_mat(1.1);
    auto post = modiff::posterior_params(y1, y0, 1, s);
    // u_1 == beta_1 bit for bit makes the mean coefficient exactly one
    CHECK(post.mu_tilde(0, 0) == 0.7);
    CHECK(post.beta_tilde == 0.0);
}

TEST_CASE("posterior mean matches the two-coefficient formula") {
    NoiseSchedule s = const_schedule();
    Mat y0 = scalar_mat(0.7), ys = scalar_mat(1.1);
    auto post = modiff::posterior_params(ys, y0, 2, s);
    double u1 = s.one_minus_alpha_bar(1), u2 = s.one_minus_alpha_bar(2);
    double want = std::sqrt(s.alpha_bar(1)) * 0.1 / u2 * 0.7 +
                  std::sqrt(s.alpha(2)) * u1 / u2 * 1.1;
    CHECK(post.mu_tilde(0, 0) == doctest::Approx(want).epsilon(1e-14));
    CHECK(post.beta_tilde == doctest::Approx(0.1 * u1 / u2).epsilon(1e-14));
}

TEST_CASE("recover_y0 inverts forward_sample") {
    NoiseSchedule s = modiff::build_schedule(100, 1e-4, 0.02);
    modiff::RandomStream rng(7);
    Mat y0 = rng.normal_matrix(3, 4);
    for (std::size_t step : {std::size_t(1), std::size_t(37), std::size_t(100)}) {
        Mat eps = rng.normal_matrix(3, 4);
        Mat ys = modiff::forward_sample(y0, step, eps, s);
        Mat back = modiff::recover_y0(ys, step, eps, s);
        for (std::size_t i = 0; i < y0.size(); ++i)
            CHECK(back[i] == doctest::Approx(y0[i]).epsilon(1e-10));
    }
}

TEST_CASE("predicted mean equals the posterior mean through recover_y0") {
    // the epsilon parameterization and the y0 parameterization are the
    // same formula written two ways; they must agree for arbitrary inputs
    NoiseSchedule s = modiff::build_schedule(100, 1e-4, 0.02);
    modiff::RandomStream rng(99);
    for (std::size_t step = 1; step <= 100; ++step) {
        Mat ys = rng.normal_matrix(2, 3);
        Mat eps_hat = rng.normal_matrix(2, 3);
        Mat mu = modiff::predict_mu(ys, step, eps_hat, s);
        Mat y0 = modiff::recover_y0(ys, step, eps_hat, s);
        auto post = modiff::posterior_params(ys, y0, step, s);
        for (std::size_t i = 0; i < mu.size(); ++i)
            CHECK(mu[i] == doctest::Approx(post.mu_tilde[i]).epsilon(1e-10));
    }
}

TEST_CASE("reverse step adds exactly the scheduled noise scale") {
    NoiseSchedule s = const_schedule();
    Mat ys = scalar_mat(0.9), eps_hat = scalar_mat(0.2);
    Mat z0 = scalar_mat(0.0), z1 = scalar_mat(1.7);
    Mat base = modiff::reverse_step(ys, 2, eps_hat, z0, s);
    Mat moved = modiff::reverse_step(ys, 2, eps_hat, z1, s);
    CHECK(base(0, 0) == modiff::predict_mu(ys, 2, eps_hat, s)(0, 0));
    CHECK(moved(0, 0) - base(0, 0) ==
          doctest::Approx(std::sqrt(0.1) * 1.7).epsilon(1e-14));

    // posterior_variance swaps in beta_tilde
    Mat moved_p = modiff::reverse_step(ys, 2, eps_hat, z1, s, /*posterior_variance=*/true);
    CHECK(moved_p(0, 0) - base(0, 0) ==
          doctest::Approx(std::sqrt(s.beta_tilde(2)) * 1.7).epsilon(1e-14));
}

TEST_CASE("reverse step refuses noise at the last denoising step") {
    NoiseSchedule s = const_schedule();
    Mat ys = scalar_mat(0.9), eps_hat = scalar_mat(0.2);
    CHECK_THROWS_AS(modiff::reverse_step(ys, 1, eps_hat, scalar_mat(0.5), s),
                    std::invalid_argument);
    Mat out = modiff::reverse_step(ys, 1, eps_hat, scalar_mat(0.0), s);
    CHECK(out(0, 0) == modiff::predict_mu(ys, 1, eps_hat, s)(0, 0));
}

TEST_CASE("one exact reverse step undoes one forward step in the mean") {
    // at s=1, mu = (y_1 - beta_1/sqrt(u_1) * eps)/sqrt(alpha_1) recovers y0
    // up to rounding when eps_hat is the true noise
    NoiseSchedule s = modiff::build_schedule(100, 1e-4, 0.02);
    modiff::RandomStream rng(3);
    Mat y0 = rng.normal_matrix(2, 2);
    Mat eps = rng.normal_matrix(2, 2);
    Mat y1 = modiff::forward_sample(y0, 1, eps, s);
    Mat mu = modiff::predict_mu(y1, 1, eps, s);
    for (std::size_t i = 0; i < y0.size(); ++i)
        CHECK(mu[i] == doctest::Approx(y0[i]).epsilon(1e-12));
}

TEST_CASE("simple_loss is the elementwise mean squared error") {
    Mat a(2, 2), b(2, 2);
    a(0, 0) = 1.0; a(0, 1) = 2.0; a(1, 0) = 3.0; a(1, 1) = 4.0;
    b(0, 0) = 1.0; b(0, 1) = 2.5; b(1, 0) = 2.0; b(1, 1) = 4.0;
    // (0 + 0.25 + 1 + 0) / 4
    CHECK(modiff::simple_loss(a, b) == doctest::Approx(0.3125).epsilon(1e-15));
    Mat c(1, 2);
    CHECK_THROWS_AS(modiff::simple_loss(a, c), std::invalid_argument);
}
