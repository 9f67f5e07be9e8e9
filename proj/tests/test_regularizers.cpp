#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>

#include "doctest.h"
#include "disent/errors.hpp"
#include "disent/regularizers.hpp"
#include "disent/vae.hpp"

using namespace disent;

namespace {

MatrixD random_matrix(std::size_t r, std::size_t c, Rng& rng, double scale = 1.0) {
  MatrixD m(r, c);
  for (auto& v : m.data) v = scale * rng.normal();
  return m;
}

MatrixD matrix(std::size_t r, std::size_t c, std::vector<double> values) {
  MatrixD m(r, c);
  m.data = std::move(values);
  return m;
}

double rel_err(double fd, double an) { return std::abs(fd - an) / std::max(1.0, std::abs(fd)); }

}  // namespace

TEST_CASE("kind strings round-trip") {
  for (auto k : {RegularizerKind::beta, RegularizerKind::annealed, RegularizerKind::factor,
                 RegularizerKind::dip_i, RegularizerKind::dip_ii, RegularizerKind::btc})
    CHECK(parse_regularizer_kind(to_string(k)) == k);
  CHECK_THROWS_AS(parse_regularizer_kind("bottleneck"), ConfigError);
}

TEST_CASE("literature defaults") {
  CHECK(RegularizerConfig::defaults_for(RegularizerKind::beta).beta == 4.0);
  const auto a = RegularizerConfig::defaults_for(RegularizerKind::annealed);
  CHECK(a.gamma == 1000.0);
  CHECK(a.c_max == 25.0);
  CHECK(RegularizerConfig::defaults_for(RegularizerKind::factor).gamma == 20.0);
  CHECK(RegularizerConfig::defaults_for(RegularizerKind::dip_i).lambda_d == 100.0);
  CHECK(RegularizerConfig::defaults_for(RegularizerKind::dip_ii).lambda_d == 10.0);
  CHECK(RegularizerConfig::defaults_for(RegularizerKind::btc).beta == 6.0);
  RegularizerConfig bad;
  bad.beta = -1;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  DiscriminatorConfig disc;
  disc.num_layers = 1;
  CHECK_THROWS_AS(disc.validate(), ConfigError);
}

TEST_CASE("beta_reg") {
  CHECK(beta_reg(2.0, 1.0) == 2.0);
  CHECK(beta_reg(2.0, 4.0) == 8.0);
  CHECK(beta_reg(0.0, 7.0) == 0.0);
}

TEST_CASE("capacity schedule") {
  CHECK(capacity_at(0, 25, 1000) == 0.0);
  CHECK(capacity_at(1000, 25, 1000) == 25.0);
  CHECK(capacity_at(5000, 25, 1000) == 25.0);
  CHECK(capacity_at(500, 25, 1000) == 12.5);
  CHECK_THROWS_AS(capacity_at(1, 25, 0), ConfigError);
}

TEST_CASE("annealed_reg") {
  CHECK(annealed_reg(2.0, 10, 2.0) == 0.0);
  CHECK(annealed_reg(3.0, 10, 1.0) == 20.0);
  CHECK(annealed_reg(1.0, 10, 3.0) == 20.0);
  double dkl = 0;
  annealed_reg(1.0, 10, 3.0, &dkl);
  CHECK(dkl == -10.0);
  const double h = 1e-6;
  for (double kl : {0.3, 2.5, 7.0}) {
    annealed_reg(kl, 3.0, 1.0, &dkl);
    const double fd = (annealed_reg(kl + h, 3.0, 1.0) - annealed_reg(kl - h, 3.0, 1.0)) / (2 * h);
    CHECK(rel_err(fd, dkl) < 1e-4);
  }
}

TEST_CASE("factor_vae_reg") {
  CHECK(factor_vae_reg(1.5, 0.0, 9.0) == 1.5);
  CHECK(std::abs(factor_vae_reg(1.0, 10.0, 0.2) - 3.0) < 1e-12);
  CHECK(factor_vae_reg(1.0, 10.0, 0.0) == 1.0);
  CHECK(factor_vae_reg(1.0, 10.0, -0.05) < 1.0);
}

TEST_CASE("tc_estimate") {
  CHECK(tc_estimate(matrix(3, 2, {1, 1, -2, -2, 0.5, 0.5})) == 0.0);
  CHECK(tc_estimate(matrix(2, 2, {2, 0, 2, 0})) == 2.0);
  CHECK(tc_estimate(matrix(2, 2, {1, 0, 0, 1})) == 0.0);
  const auto a = matrix(3, 2, {0.3, -1, 2, 0.1, -0.4, 0.9});
  const auto b = matrix(3, 2, {-0.4, 0.9, 0.3, -1, 2, 0.1});
  CHECK(std::abs(tc_estimate(a) - tc_estimate(b)) < 1e-15);
}

TEST_CASE("discriminator_loss") {
  CHECK(std::abs(discriminator_loss(MatrixD(3, 2), MatrixD(4, 2)) - std::numbers::ln2) < 1e-12);
  const auto real = matrix(2, 2, {20, -20, 20, -20});
  const auto perm = matrix(2, 2, {-20, 20, -20, 20});
  CHECK(discriminator_loss(real, perm) < 1e-6);

  Rng rng(3);
  const auto r = random_matrix(3, 2, rng), p = random_matrix(3, 2, rng);
  double oracle_r = 0, oracle_p = 0;
  for (std::size_t i = 0; i < 3; ++i) {
    const double zr = std::exp(r(i, 0)) + std::exp(r(i, 1));
    oracle_r += -std::log(std::exp(r(i, 0)) / zr);
    const double zp = std::exp(p(i, 0)) + std::exp(p(i, 1));
    oracle_p += -std::log(std::exp(p(i, 1)) / zp);
  }
  CHECK(std::abs(discriminator_loss(r, p) - 0.5 * (oracle_r / 3 + oracle_p / 3)) < 1e-12);

  MatrixD rr = r;
  std::swap_ranges(rr.data.begin(), rr.data.begin() + 2, rr.data.begin() + 4);
  CHECK(std::abs(discriminator_loss(rr, p) - discriminator_loss(r, p)) < 1e-15);

  MatrixD dr, dp;
  discriminator_loss(r, p, &dr, &dp);
  const double h = 1e-6;
  for (std::size_t i = 0; i < r.data.size(); ++i) {
    auto up = r, down = r;
    up.data[i] += h;
    down.data[i] -= h;
    CHECK(rel_err((discriminator_loss(up, p) - discriminator_loss(down, p)) / (2 * h), dr.data[i]) < 1e-4);
  }
}

TEST_CASE("permute_dims preserves columns and is the identity for n = 1") {
  Rng rng(1);
  const auto z = random_matrix(1, 4, rng);
  CHECK(permute_dims(LatentBatch{z}, rng).z.data == z.data);
  const auto big = random_matrix(50, 3, rng);
  const auto out = permute_dims(LatentBatch{big}, rng).z;
  for (std::size_t j = 0; j < 3; ++j) {
    auto a = big.column(j), b = out.column(j);
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    CHECK(a == b);
  }
}

TEST_CASE("permute_dims matches the enumerated permutation oracle") {
  // d = 2, n = 3: 36 pairs of row permutations. A Fisher-Yates pass on three
  // rows draws uniform_index(3) then uniform_index(2).
  const auto z = matrix(3, 2, {0, 10, 1, 11, 2, 12});
  std::vector<std::array<int, 3>> perms;
  std::array<int, 3> p{0, 1, 2};
  do perms.push_back(p);
  while (std::next_permutation(p.begin(), p.end()));

  std::map<std::pair<int, int>, int> seen;
  for (std::uint64_t seed = 0; seed < 3600; ++seed) {
    Rng rng(seed), replay(seed);
    const auto out = permute_dims(LatentBatch{z}, rng).z;
    int match = -1;
    for (int a = 0; a < 6; ++a)
      for (int b = 0; b < 6; ++b) {
        bool ok = true;
        for (int i = 0; i < 3; ++i)
          ok = ok && out(i, 0) == z(perms[a][i], 0) && out(i, 1) == z(perms[b][i], 1);
        if (ok) {
          CHECK(match == -1);
          match = a * 6 + b;
        }
      }
    REQUIRE(match >= 0);
    std::array<std::array<int, 3>, 2> expect;
    for (auto& col : expect) {
      col = {0, 1, 2};
      std::swap(col[2], col[replay.uniform_index(3)]);
      std::swap(col[1], col[replay.uniform_index(2)]);
    }
    CHECK(perms[match / 6] == expect[0]);
    CHECK(perms[match % 6] == expect[1]);
    ++seen[{match / 6, match % 6}];
  }
  CHECK(seen.size() == 36);
  for (const auto& [pair, count] : seen) CHECK(std::abs(count - 100) < 45);
}

TEST_CASE("latent_covariance") {
  const auto c = latent_covariance(matrix(2, 2, {1, 0, -1, 0})).cov;
  CHECK(c.data == std::vector<double>{1, 0, 0, 0});
  for (double v : latent_covariance(MatrixD(4, 3, 2.5)).cov.data) CHECK(v == 0.0);
  CHECK_THROWS_AS(latent_covariance(MatrixD(1, 2)), DomainError);

  Rng rng(5);
  const auto s = random_matrix(5, 3, rng);
  const auto cov = latent_covariance(s).cov;
  for (std::size_t a = 0; a < 3; ++a)
    for (std::size_t b = 0; b < 3; ++b) {
      double ma = 0, mb = 0;
      for (std::size_t i = 0; i < 5; ++i) ma += s(i, a), mb += s(i, b);
      ma /= 5, mb /= 5;
      double acc = 0;
      for (std::size_t i = 0; i < 5; ++i) acc += (s(i, a) - ma) * (s(i, b) - mb);
      CHECK(std::abs(cov(a, b) - acc / 5) < 1e-10);
      CHECK(std::abs(cov(a, b) - cov(b, a)) < 1e-12);
    }
}

TEST_CASE("dip_penalty closed forms") {
  const CovarianceMatrix eye{matrix(2, 2, {1, 0, 0, 1})};
  CHECK(dip_penalty(eye, 10, 10) == 0.0);
  CHECK(std::abs(dip_penalty(CovarianceMatrix{matrix(2, 2, {1, 0.5, 0.5, 1})}, 10, 10) - 5.0) < 1e-12);
  CHECK(std::abs(dip_penalty(CovarianceMatrix{matrix(2, 2, {2, 0, 0, 1})}, 0, 10) - 10.0) < 1e-12);
  Rng rng(2);
  for (int t = 0; t < 20; ++t) {
    const auto s = random_matrix(6, 3, rng);
    CHECK(dip_penalty(latent_covariance(s), 1, 1) > 0);
  }
}

TEST_CASE("dip penalty gradient through the covariance") {
  Rng rng(7);
  for (std::size_t d : {2u, 4u}) {
    const auto s = random_matrix(6, d, rng);
    auto f = [&](const MatrixD& x) { return dip_penalty(latent_covariance(x), 10, 5); };
    MatrixD dcov;
    dip_penalty(latent_covariance(s), 10, 5, &dcov);
    MatrixD ds(6, d);
    latent_covariance_backward(s, dcov, ds);
    const double h = 1e-6;
    for (std::size_t i = 0; i < s.data.size(); ++i) {
      auto up = s, down = s;
      up.data[i] += h;
      down.data[i] -= h;
      CHECK(rel_err((f(up) - f(down)) / (2 * h), ds.data[i]) < 1e-4);
    }
  }
}

TEST_CASE("total correlation: one dimension has none") {
  Rng rng(4);
  EncoderOutput e{random_matrix(2, 1, rng), random_matrix(2, 1, rng, 0.3)};
  const auto z = reparameterize(e, random_matrix(2, 1, rng));
  CHECK(std::abs(total_correlation_mws(e, z, 10)) < 1e-12);
}

TEST_CASE("total correlation matches a hand-expanded estimator on two points") {
  // n = 2, d = 2: log q(z_i) and log q(z_ik) spelled out term by term.
  const auto e = EncoderOutput{matrix(2, 2, {0.2, -0.4, 1.1, 0.3}), matrix(2, 2, {-0.2, 0.1, 0.4, -0.6})};
  const LatentBatch z{matrix(2, 2, {0.5, 0.0, 0.9, -0.7})};
  const double N = 100;
  auto logn = [&](double x, double mu, double lv) {
    return -0.5 * (std::log(2 * std::numbers::pi) + lv + (x - mu) * (x - mu) / std::exp(lv));
  };
  double tc = 0;
  for (int i = 0; i < 2; ++i) {
    double joint = 0;
    for (int j = 0; j < 2; ++j)
      joint += std::exp(logn(z.z(i, 0), e.mu(j, 0), e.logvar(j, 0)) + logn(z.z(i, 1), e.mu(j, 1), e.logvar(j, 1)));
    double marg = 0;
    for (int k = 0; k < 2; ++k) {
      double s = 0;
      for (int j = 0; j < 2; ++j) s += std::exp(logn(z.z(i, k), e.mu(j, k), e.logvar(j, k)));
      marg += std::log(s / (2 * N));
    }
    tc += std::log(joint / (2 * N)) - marg;
  }
  CHECK(std::abs(total_correlation_mws(e, z, 100) - tc / 2) < 1e-12);
}

TEST_CASE("btc_reg gradient and monotonicity in beta") {
  Rng rng(11);
  const std::size_t n = 5, d = 3;
  EncoderOutput e{random_matrix(n, d, rng, 0.7), random_matrix(n, d, rng, 0.4)};
  const auto z = reparameterize(e, random_matrix(n, d, rng)).z;
  const double beta = 6.0;
  auto f = [&](const EncoderOutput& enc, const MatrixD& zz) {
    return btc_reg(enc, LatentBatch{zz}, beta, 1000);
  };
  auto g = EncoderGrad::zeros(n, d);
  MatrixD dz(n, d);
  btc_reg(e, LatentBatch{z}, beta, 1000, &g, &dz);
  const double h = 1e-6;
  for (std::size_t i = 0; i < n * d; ++i) {
    auto up = e, down = e;
    up.mu.data[i] += h;
    down.mu.data[i] -= h;
    CHECK(rel_err((f(up, z) - f(down, z)) / (2 * h), g.dmu.data[i]) < 1e-4);
    up = e, down = e;
    up.logvar.data[i] += h;
    down.logvar.data[i] -= h;
    CHECK(rel_err((f(up, z) - f(down, z)) / (2 * h), g.dlogvar.data[i]) < 1e-4);
    auto zu = z, zd = z;
    zu.data[i] += h;
    zd.data[i] -= h;
    CHECK(rel_err((f(e, zu) - f(e, zd)) / (2 * h), dz.data[i]) < 1e-4);
  }
  const double tc = total_correlation_mws(e, LatentBatch{z}, 1000);
  if (tc > 0) CHECK(btc_reg(e, LatentBatch{z}, 8.0, 1000) > btc_reg(e, LatentBatch{z}, 6.0, 1000));
  CHECK_THROWS_AS(total_correlation_mws(e, LatentBatch{z}, 2), DomainError);
}

TEST_CASE("factor_vae_reg gradient through kl and the critic logits") {
  Rng rng(12);
  const std::size_t n = 4, d = 3;
  EncoderOutput e{random_matrix(n, d, rng), random_matrix(n, d, rng, 0.5)};
  const auto logits = random_matrix(n, 2, rng);
  const double gamma = 20;
  auto f = [&](const EncoderOutput& enc, const MatrixD& lg) {
    return factor_vae_reg(kl_to_prior(enc), gamma, tc_estimate(lg));
  };
  auto g = EncoderGrad::zeros(n, d);
  kl_to_prior(e, &g);
  MatrixD dlog(n, 2);
  tc_estimate(logits, &dlog, gamma);
  const double h = 1e-6;
  for (std::size_t i = 0; i < n * d; ++i) {
    auto up = e, down = e;
    up.mu.data[i] += h;
    down.mu.data[i] -= h;
    CHECK(rel_err((f(up, logits) - f(down, logits)) / (2 * h), g.dmu.data[i]) < 1e-4);
    up = e, down = e;
    up.logvar.data[i] += h;
    down.logvar.data[i] -= h;
    CHECK(rel_err((f(up, logits) - f(down, logits)) / (2 * h), g.dlogvar.data[i]) < 1e-4);
  }
  for (std::size_t i = 0; i < logits.data.size(); ++i) {
    auto up = logits, down = logits;
    up.data[i] += h;
    down.data[i] -= h;
    CHECK(rel_err((f(e, up) - f(e, down)) / (2 * h), dlog.data[i]) < 1e-4);
  }
}

TEST_CASE("discriminator shapes and determinism") {
  DiscriminatorConfig cfg;
  cfg.hidden_width = 16;
  cfg.num_layers = 3;
  Discriminator a(cfg, 4, 9), b(cfg, 4, 9);
  Rng rng(1);
  const auto z = random_matrix(5, 4, rng);
  const auto la = a.logits(z);
  CHECK(la.rows == 5);
  CHECK(la.cols == 2);
  CHECK(la.data == b.logits(z).data);
}
