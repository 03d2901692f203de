#include <doctest.h>

#include <cmath>

#include "finkey/errors.hpp"
#include "finkey/losses.hpp"
#include "finkey/rng.hpp"

using namespace finkey;

namespace {

double rel(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-12}); }

}  // namespace

TEST_CASE("cross_entropy values and gradient") {
  const double zero[2] = {0.0, 0.0};
  CHECK(cross_entropy(zero, 0).loss == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(cross_entropy(zero, 1).loss == doctest::Approx(0.693147).epsilon(1e-6));

  const double wide[2] = {10.0, -10.0};
  const double expected = std::log1p(std::exp(-20.0));  // about 2.06e-9
  CHECK(rel(cross_entropy(wide, 0).loss, expected) < 1e-9);
  CHECK(rel(cross_entropy(wide, 1).loss, 20.0 + expected) < 1e-12);

  Rng rng(2);
  for (int t = 0; t < 200; ++t) {
    std::vector<double> z(2 + rng.below(4));
    for (auto& v : z) v = rng.uniform(-5, 5);
    const std::size_t gold = rng.below(z.size());
    const auto l = cross_entropy(z, gold);
    double sum = 0;
    for (std::size_t i = 0; i < z.size(); ++i) {
      auto up = z, down = z;
      up[i] += 1e-6;
      down[i] -= 1e-6;
      const double numeric = (cross_entropy(up, gold).loss - cross_entropy(down, gold).loss) / 2e-6;
      CHECK(std::abs(l.grad[i] - numeric) <= 1e-6 * std::max(1.0, std::abs(numeric)));
      sum += l.grad[i];
    }
    CHECK(std::abs(sum) < 1e-12);
  }
  CHECK_THROWS_AS(cross_entropy(zero, 2), ConfigError);
}

TEST_CASE("focal loss reduces to binary cross-entropy at gamma 0") {
  const FocalConfig plain{0.0, std::nullopt};
  for (int i = 1; i <= 99; ++i) {
    const double p = i / 100.0;
    for (int y : {0, 1}) {
      const double bce = y == 1 ? -std::log(p) : -std::log(1.0 - p);
      CHECK(std::abs(focal_loss(p, y, plain) - bce) <= 1e-9);
      CHECK(std::abs(binary_cross_entropy(p, y) - bce) <= 1e-12);
    }
  }
}

TEST_CASE("focal loss values") {
  const FocalConfig g2{2.0, std::nullopt};
  const double expected = 0.01 * -std::log(0.9);
  CHECK(focal_loss(0.9, 1, g2) == doctest::Approx(expected).epsilon(1e-12));
  CHECK(focal_loss(0.1, 0, g2) == doctest::Approx(expected).epsilon(1e-12));
  CHECK(focal_loss(0.9, 1, g2) == doctest::Approx(0.00105361).epsilon(1e-5));

  const FocalConfig weighted{2.0, 0.25};
  CHECK(focal_loss(0.9, 1, weighted) == doctest::Approx(0.25 * expected).epsilon(1e-12));
  CHECK(focal_loss(0.1, 0, weighted) == doctest::Approx(0.75 * expected).epsilon(1e-12));

  SUBCASE("non-increasing in p_t and vanishing at 1") {
    for (const auto& cfg : {g2, weighted, FocalConfig{0.5, 0.6}}) {
      double prev = std::numeric_limits<double>::infinity();
      for (int i = 1; i <= 1000; ++i) {
        const double pt = i / 1000.0 - 1e-9;
        const double l = focal_loss(pt, 1, cfg);
        CHECK(l <= prev);
        prev = l;
      }
      CHECK(prev < 1e-12);
    }
  }
  CHECK_THROWS_AS(FocalConfig({-1.0, std::nullopt}).validate(), ConfigError);
  CHECK_THROWS_AS(FocalConfig({2.0, 1.5}).validate(), ConfigError);
}

TEST_CASE("logit forms agree with the probability forms and have correct derivatives") {
  Rng rng(6);
  for (int t = 0; t < 500; ++t) {
    const double z = rng.uniform(-12, 12);
    const int y = static_cast<int>(rng.below(2));
    const FocalConfig cfg{rng.uniform(0, 3), rng.bernoulli(0.5) ? std::optional<double>(rng.uniform(0.05, 0.95)) : std::nullopt};
    const double p = sigmoid(z);
    if (p > 1e-6 && p < 1 - 1e-6) {
      CHECK(rel(binary_cross_entropy_logit(z, y).loss, binary_cross_entropy(p, y)) < 1e-8);
      CHECK(rel(focal_loss_logit(z, y, cfg).loss, focal_loss(p, y, cfg)) < 1e-8);
    }
    const double h = 1e-5;
    const double nb = (binary_cross_entropy_logit(z + h, y).loss - binary_cross_entropy_logit(z - h, y).loss) / (2 * h);
    const double nf = (focal_loss_logit(z + h, y, cfg).loss - focal_loss_logit(z - h, y, cfg).loss) / (2 * h);
    CHECK(std::abs(binary_cross_entropy_logit(z, y).d_logit - nb) <= 1e-6 * std::max(1.0, std::abs(nb)));
    CHECK(std::abs(focal_loss_logit(z, y, cfg).d_logit - nf) <= 1e-6 * std::max(1.0, std::abs(nf)));
  }
  // far tails stay finite
  CHECK(std::isfinite(focal_loss_logit(-800.0, 1, {2.0, std::nullopt}).loss));
  CHECK(std::isfinite(binary_cross_entropy_logit(800.0, 0).loss));
}

TEST_CASE("span loss") {
  const std::vector<std::uint8_t> valid = {0, 1, 1, 1, 1, 0};
  const std::vector<double> flat(6, 0.3);
  CHECK(span_loss(flat, flat, valid, 1, 3).loss == doctest::Approx(std::log(4.0)).epsilon(1e-12));

  std::vector<double> start(6, -50.0), end(6, -50.0);
  start[2] = 50.0;
  end[3] = 50.0;
  CHECK(span_loss(start, end, valid, 2, 3).loss < 1e-12);

  // padded positions do not matter
  auto noisy = flat;
  noisy[0] = 100.0;
  noisy[5] = -7.0;
  CHECK(span_loss(noisy, noisy, valid, 1, 3).loss == doctest::Approx(std::log(4.0)).epsilon(1e-12));
  const auto g = span_loss(noisy, noisy, valid, 1, 3);
  CHECK(g.d_start[0] == 0.0);
  CHECK(g.d_end[5] == 0.0);

  Rng rng(3);
  for (int t = 0; t < 100; ++t) {
    std::vector<double> s(6), e(6);
    for (auto& v : s) v = rng.uniform(-3, 3);
    for (auto& v : e) v = rng.uniform(-3, 3);
    const auto l = span_loss(s, e, valid, 2, 4);
    for (std::size_t i = 0; i < 6; ++i) {
      auto up = s, down = s;
      up[i] += 1e-6;
      down[i] -= 1e-6;
      const double n = (span_loss(up, e, valid, 2, 4).loss - span_loss(down, e, valid, 2, 4).loss) / 2e-6;
      CHECK(std::abs(l.d_start[i] - n) <= 1e-4 * std::max(1e-3, std::abs(n)));
      auto eu = e, ed = e;
      eu[i] += 1e-6;
      ed[i] -= 1e-6;
      const double m = (span_loss(s, eu, valid, 2, 4).loss - span_loss(s, ed, valid, 2, 4).loss) / 2e-6;
      CHECK(std::abs(l.d_end[i] - m) <= 1e-4 * std::max(1e-3, std::abs(m)));
    }
  }
  CHECK_THROWS_AS(span_loss(flat, flat, valid, 0, 3), ConfigError);
}
