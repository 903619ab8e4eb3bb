#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "olia/dsp.hpp"
#include "olia/error.hpp"

using namespace olia;
using namespace olia::dsp;

namespace {

constexpr double kPi = std::numbers::pi;

// alpha straight from the closed form, no cancellation-avoiding rewrite.
double alpha_textbook(double tau, double f_d) {
  const double g = 2.0 * kPi * (1.0 / (2.0 * kPi * tau)) / f_d;
  const double c = std::cos(g);
  return c - 1.0 + std::sqrt(c * c - 4.0 * c + 3.0);
}

} // namespace

TEST_SUITE("dsp") {

TEST_CASE("alpha at the default settings is close to 1/(tau f_d)") {
  const auto fc = compute_alpha(0.6, 200000.0);
  CHECK(fc.tau == 0.6);
  CHECK(fc.f_d == 200000.0);
  const double g = 1.0 / (0.6 * 200000.0);
  CHECK(std::abs(fc.alpha - 8.3333e-6) / 8.3333e-6 < 1e-4);
  // alpha = g - g^2/2 + O(g^3) for small g
  CHECK(std::abs(fc.alpha - (g - g * g / 2.0)) < 1e-15);
}

TEST_CASE("alpha at quarter-rate cutoff is sqrt(3) - 1") {
  const double tau = 1.0 / (2.0 * kPi * 1.0); // f_c = 1 Hz
  CHECK(compute_alpha(tau, 4.0).alpha == doctest::Approx(std::sqrt(3.0) - 1.0).epsilon(1e-14));
}

TEST_CASE("alpha agrees with the textbook expression where that is well conditioned") {
  for (double tau : {0.001, 0.003, 0.01, 0.05}) {
    for (double f_d : {1000.0, 5000.0, 20000.0}) {
      if (1.0 / (2.0 * kPi * tau) >= f_d / 2.0) continue;
      CHECK(compute_alpha(tau, f_d).alpha == doctest::Approx(alpha_textbook(tau, f_d)).epsilon(1e-9));
    }
  }
}

TEST_CASE("alpha is in (0, 1] and decreases with tau") {
  double previous = 2.0;
  for (double tau = 0.01; tau <= 10.0; tau *= 1.3) {
    const double a = compute_alpha(tau, 200000.0).alpha;
    CHECK(a > 0.0);
    CHECK(a <= 1.0);
    CHECK(a < previous);
    previous = a;
  }
}

TEST_CASE("alpha rejects invalid settings") {
  CHECK_THROWS_AS(compute_alpha(0.0, 200000.0), Error);
  CHECK_THROWS_AS(compute_alpha(-1.0, 200000.0), Error);
  CHECK_THROWS_AS(compute_alpha(0.6, 0.0), Error);
  // f_c = f_d/2 exactly
  CHECK_THROWS_AS(compute_alpha(1.0 / (2.0 * kPi * 100.0), 200.0), Error);
}

TEST_CASE("reference pair matches the direct trigonometric definition") {
  for (std::uint32_t m : {3u, 4u, 200u, 667u}) {
    for (std::uint32_t k : {1u, 2u, 5u}) {
      for (std::uint64_t n = 0; n < 3 * m; n += 7) {
        const auto q = reference_pair(n, m, k);
        const double angle = 2.0 * kPi * static_cast<double>(k) * static_cast<double>(n) / m;
        CHECK(q.qx == doctest::Approx(2.0 * std::sin(angle)).epsilon(1e-12));
        CHECK(q.qy == doctest::Approx(2.0 * std::cos(angle)).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("reference pair is periodic in n and exact far from the origin") {
  const auto a = reference_pair(17, 200, 3);
  const auto b = reference_pair(17 + 200ull * 1000000007ull, 200, 3);
  CHECK(a.qx == b.qx);
  CHECK(a.qy == b.qy);
  CHECK_THROWS_AS(reference_pair(0, 2, 1), Error);
  CHECK_THROWS_AS(reference_pair(0, 200, 0), Error);
}

TEST_CASE("mixing an in-phase sine averages to the amplitude over one period") {
  // s = A sin(2 pi n/m + phi): mean(qx s) = A cos(phi), mean(qy s) = A sin(phi)
  const std::uint32_t m = 200;
  const double A = 3.7;
  const double phi = 0.4;
  double sx = 0.0;
  double sy = 0.0;
  for (std::uint64_t n = 0; n < m; ++n) {
    const double s = A * std::sin(2.0 * kPi * n / m + phi);
    const auto xy = mix(s, reference_pair(n, m, 1));
    sx += xy.x0;
    sy += xy.y0;
  }
  CHECK(sx / m == doctest::Approx(A * std::cos(phi)).epsilon(1e-12));
  CHECK(sy / m == doctest::Approx(A * std::sin(phi)).epsilon(1e-12));
}

TEST_CASE("a single filter stage follows the geometric closed form") {
  const double a = 0.01;
  double state = 0.0;
  for (int n = 1; n <= 1000; ++n) state = filter_step(state, 1.0, a);
  CHECK(std::abs(state - (1.0 - std::pow(1.0 - a, 1000))) < 1e-12);
}

TEST_CASE("the cascade impulse response equals the self-convolution of one stage") {
  const double a = 0.003;
  const int n = 10000;
  std::vector<double> h1(n);
  for (int i = 0; i < n; ++i) h1[i] = a * std::pow(1.0 - a, i);
  std::vector<double> conv(n, 0.0);
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i <= j; ++i) conv[j] += h1[i] * h1[j - i];
  }

  double x1 = 0.0;
  double x2 = 0.0;
  double worst = 0.0;
  for (int j = 0; j < n; ++j) {
    const double in = j == 0 ? 1.0 : 0.0;
    x1 = filter_step(x1, in, a);
    x2 = filter_step(x2, x1, a);
    worst = std::max(worst, std::abs(x2 - conv[j]));
  }
  CHECK(worst < 1e-9);
}

TEST_CASE("amplitude and phase cover all quadrants") {
  CHECK(amplitude_phase(3.0, 4.0).r2 == doctest::Approx(5.0));
  CHECK(amplitude_phase(1.0, 0.0).phi2 == 0.0);
  CHECK(amplitude_phase(0.0, 1.0).phi2 == doctest::Approx(kPi / 2));
  CHECK(amplitude_phase(-1.0, 1.0).phi2 == doctest::Approx(3 * kPi / 4));
  CHECK(amplitude_phase(-1.0, -1.0).phi2 == doctest::Approx(-3 * kPi / 4));
  CHECK(amplitude_phase(-1.0, -0.0).phi2 == doctest::Approx(kPi));
  const auto zero = amplitude_phase(0.0, 0.0);
  CHECK(zero.r2 == 0.0);
  CHECK(zero.phi2 == 0.0);
}

TEST_CASE("sync filter averages exactly one period and nulls other harmonics") {
  const std::uint32_t m = 100;
  SyncAccumulator acc;
  acc.m = m;
  std::optional<SyncOutput> out;
  int outputs = 0;
  for (std::uint64_t n = 0; n < 3 * m; ++n) {
    // fundamental at phase 0.3 plus 2nd and 7th harmonics and a DC offset
    const double t = 2.0 * kPi * n / m;
    const double s = 2.0 * std::sin(t + 0.3) + 5.0 * std::sin(2 * t) + 1.5 * std::cos(7 * t) + 9.0;
    const auto xy = mix(s, reference_pair(n, m, 1));
    const auto r = sync_update(acc, xy.x0, xy.y0);
    if (r) {
      ++outputs;
      out = r;
      CHECK((n + 1) % m == 0);
    }
  }
  CHECK(outputs == 3);
  REQUIRE(out);
  CHECK(out->x == doctest::Approx(2.0 * std::cos(0.3)).epsilon(1e-12));
  CHECK(out->y == doctest::Approx(2.0 * std::sin(0.3)).epsilon(1e-12));
}

TEST_CASE("noise tracker by hand") {
  // R alternates 0, 2, 0, 2, 0 with alpha = 1/2
  NoiseTracker t;
  const double rs[] = {0.0, 2.0, 0.0, 2.0, 0.0};
  const double means[] = {0.0, 1.0, 0.5, 1.25, 0.625};
  const double vars[] = {0.0, 1.0, 0.75, 0.9375, 0.859375};
  for (int i = 0; i < 5; ++i) {
    const double sd = noise_update(t, rs[i], 0.5);
    CHECK(t.mean_r == doctest::Approx(means[i]));
    CHECK(t.var_r == doctest::Approx(vars[i]));
    CHECK(sd == doctest::Approx(std::sqrt(vars[i])));
  }
}

TEST_CASE("noise tracker equals the exponentially weighted variance by definition") {
  // Observations x_1..x_n with weights alpha (1-alpha)^(n-i), plus the zero
  // starting state carrying the remaining weight (1-alpha)^n.
  const double a = 0.002;
  const int n = 10000;
  std::mt19937_64 rng(7);
  std::normal_distribution<double> dist(3.0, 0.5);
  std::vector<double> x(n + 1, 0.0);
  for (int i = 1; i <= n; ++i) x[i] = dist(rng);

  NoiseTracker t;
  for (int i = 1; i <= n; ++i) noise_update(t, x[i], a);

  std::vector<double> w(n + 1);
  w[0] = std::pow(1.0 - a, n);
  for (int i = 1; i <= n; ++i) w[i] = a * std::pow(1.0 - a, n - i);
  double mean = 0.0;
  for (int i = 0; i <= n; ++i) mean += w[i] * x[i];
  double var = 0.0;
  for (int i = 0; i <= n; ++i) var += w[i] * (x[i] - mean) * (x[i] - mean);

  CHECK(std::abs(t.mean_r - mean) < 1e-9);
  CHECK(std::abs(t.var_r - var) < 1e-9);
}

TEST_CASE("noise tracker stays finite and non-negative") {
  NoiseTracker t;
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 1e6);
  for (int i = 0; i < 100000; ++i) {
    const double sd = noise_update(t, u(rng), 0.9);
    CHECK_FALSE(std::isnan(sd));
    CHECK(t.var_r >= 0.0);
  }
}

TEST_CASE("step response model values") {
  CHECK(step_response_model(0.0, 0.6, 1.0) == 0.0);
  CHECK(step_response_model(0.6, 0.6, 1.0) == doctest::Approx(0.26424).epsilon(1e-4));
  CHECK(step_response_model(6.0, 0.6, 1.0) == doctest::Approx(0.9995).epsilon(1e-4));
  CHECK(step_response_model(1.2, 0.6, 2.0) == doctest::Approx(2.0 * (1.0 - 3.0 * std::exp(-2.0))));
}

TEST_CASE("the sampled cascade converges to the continuous step model") {
  const double f_d = 20000.0;
  const double tau = 0.05;
  const double a = compute_alpha(tau, f_d).alpha;
  double x1 = 0.0;
  double x2 = 0.0;
  double worst = 0.0;
  for (int n = 1; n <= 20000; ++n) {
    x1 = filter_step(x1, 1.0, a);
    x2 = filter_step(x2, x1, a);
    worst = std::max(worst, std::abs(x2 - step_response_model(n / f_d, tau, 1.0)));
  }
  CHECK(worst < 2e-4);
}

TEST_CASE("demodulation is linear and rotation covariant") {
  const std::uint32_t m = 50;
  const double a = 1e-4;
  auto run = [&](auto signal) {
    std::vector<HarmonicChannel> ch(1);
    for (std::uint64_t n = 0; n < 200000; ++n) demod_update(ch, signal(n), n, m, a);
    return ch[0];
  };
  auto sine = [&](double amp, double phase) {
    return [=](std::uint64_t n) { return amp * std::sin(2.0 * kPi * n / m + phase); };
  };
  const auto c1 = run(sine(1.0, 0.2));
  const auto c2 = run(sine(3.0, 0.2));
  CHECK(c2.x2 == doctest::Approx(3.0 * c1.x2).epsilon(1e-12));
  CHECK(c2.y2 == doctest::Approx(3.0 * c1.y2).epsilon(1e-12));

  const auto both = run([&](std::uint64_t n) { return sine(1.0, 0.2)(n) + sine(2.0, -1.0)(n); });
  const auto c3 = run(sine(2.0, -1.0));
  CHECK(both.x2 == doctest::Approx(c1.x2 + c3.x2).epsilon(1e-12));

  // Shifting the input by d samples rotates the (x, y) output by 2 pi d / m
  // once transients have decayed (the 2f ripple left is ~2e-7 here).
  const auto shifted = run(sine(1.0, 0.2 + 2.0 * kPi * 7 / m));
  const double rot = 2.0 * kPi * 7 / m;
  CHECK(std::abs(shifted.x2 - (c1.x2 * std::cos(rot) - c1.y2 * std::sin(rot))) < 1e-6);
  CHECK(std::abs(shifted.y2 - (c1.x2 * std::sin(rot) + c1.y2 * std::cos(rot))) < 1e-6);
}

TEST_CASE("zero input leaves all state at zero") {
  std::vector<HarmonicChannel> ch(3);
  ch[1].k = 2;
  ch[2].k = 3;
  for (std::uint64_t n = 0; n < 1000; ++n) demod_update(ch, 0.0, n, 200, 0.1);
  for (const auto& c : ch) {
    CHECK(c.x2 == 0.0);
    CHECK(c.y2 == 0.0);
  }
}

TEST_CASE("table-driven demodulator is bit-identical to demod_update") {
  const std::uint32_t m = 667;
  const double a = compute_alpha(0.01, 200000.0).alpha;
  Demodulator d(m, {1, 2, 3, 4}, a);
  std::vector<HarmonicChannel> ref(4);
  for (std::uint32_t i = 0; i < 4; ++i) ref[i].k = i + 1;
  std::mt19937_64 rng(3);
  std::normal_distribution<double> dist(0.0, 100.0);
  for (std::uint64_t n = 0; n < 50000; ++n) {
    const double s = dist(rng);
    d.update(s, n);
    demod_update(ref, s, n, m, a);
  }
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(d.channels()[i].x1 == ref[i].x1);
    CHECK(d.channels()[i].y2 == ref[i].y2);
    CHECK(d.channels()[i].x2 == ref[i].x2);
  }
  const auto q = d.fundamental(12345);
  const auto r = reference_pair(12345, m, 1);
  CHECK(q.qx == r.qx);
  CHECK(q.qy == r.qy);
  d.reset();
  CHECK(d.channels()[2].x2 == 0.0);
}

} // TEST_SUITE
