#include <catch2/catch_amalgamated.hpp>

#include <set>

#include <cfm/dataset.hpp>
#include <cfm/rng.hpp>

using cfm::Mat;
using cfm::Normalizer;
using cfm::PairedDataset;
using cfm::SourceKind;
using cfm::Vec;

TEST_CASE("normalizer maps the fitted range onto [-1, 1]") {
  Mat x(3, 1), y(3, 1);
  x << 0.0, 5.0, 10.0;
  y << -2.0, 0.0, 2.0;
  const auto norm = Normalizer::fit({x, y});

  Mat probe(3, 1);
  probe << 5.0, 10.0, 0.0;
  const Mat mapped = norm.apply_x(probe);
  CHECK(mapped(0, 0) == Catch::Approx(0.0).margin(1e-15));
  CHECK(mapped(1, 0) == 1.0);
  CHECK(mapped(2, 0) == -1.0);
}

TEST_CASE("normalizer round-trips in-range data") {
  cfm::Rng rng(8);
  const PairedDataset data{rng.normal_matrix(50, 3),
                           rng.normal_matrix(50, 2)};
  const auto norm = Normalizer::fit(data);
  const Mat back = norm.invert_x(norm.apply_x(data.x));
  CHECK((back - data.x).lpNorm<Eigen::Infinity>() < 1e-12);
  const Mat back_y = norm.invert_y(norm.apply_y(data.y));
  CHECK((back_y - data.y).lpNorm<Eigen::Infinity>() < 1e-12);
}

TEST_CASE("constant dimensions map to zero and invert to the constant") {
  Mat x(3, 2), y(3, 1);
  x << 4.0, 1.0, 4.0, 2.0, 4.0, 3.0;
  y << 0.0, 1.0, 2.0;
  const auto norm = Normalizer::fit({x, y});
  REQUIRE(norm.constant_x_dims() == std::vector<Eigen::Index>{0});

  const Mat mapped = norm.apply_x(x);
  CHECK(mapped.col(0).isZero(0.0));
  const Mat back = norm.invert_x(mapped);
  CHECK(back.col(0).isConstant(4.0));
}

TEST_CASE("paired dataset sanity checks") {
  Mat x(2, 1), y(3, 1);
  x << 0.0, 1.0;
  y << 0.0, 1.0, 2.0;
  CHECK_THROWS_AS(PairedDataset(x, y), std::invalid_argument);

  Mat bad(2, 1);
  bad << 0.0, std::numeric_limits<double>::quiet_NaN();
  Mat okxy(2, 1);
  okxy << 0.0, 1.0;
  CHECK_THROWS_AS(PairedDataset(bad, okxy), cfm::NumericError);
}

TEST_CASE("prior scrambling is the documented cyclic shift") {
  Mat rows(3, 2);
  rows << 1.0, 10.0, 2.0, 20.0, 3.0, 30.0;
  cfm::Rng rng(1);
  const Mat z = cfm::sample_source_batch(SourceKind::prior_scrambled, rows, rng);
  CHECK(z(0, 0) == 2.0);
  CHECK(z(1, 0) == 3.0);
  CHECK(z(2, 0) == 1.0);
  CHECK(z(0, 1) == 20.0);
  CHECK(z(2, 1) == 10.0);
}

TEST_CASE("scrambling preserves the row multiset and derangement") {
  cfm::Rng rng(44);
  for (int rep = 0; rep < 20; ++rep) {
    const int b = 2 + static_cast<int>(rng.index(30));
    const Mat rows = rng.normal_matrix(b, 1);
    cfm::Rng unused(0);
    const Mat z =
        cfm::sample_source_batch(SourceKind::prior_scrambled, rows, unused);
    std::multiset<double> before(rows.data(), rows.data() + b);
    std::multiset<double> after(z.data(), z.data() + b);
    CHECK(before == after);
    // Continuous draws are distinct, so no row may map to itself.
    for (int r = 0; r < b; ++r) CHECK(z(r, 0) != rows(r, 0));
  }
}

TEST_CASE("scrambling a single row is rejected") {
  cfm::Rng rng(1);
  CHECK_THROWS_AS(
      cfm::sample_source_batch(SourceKind::prior_scrambled, Mat::Zero(1, 2), rng),
      std::invalid_argument);
}

TEST_CASE("gaussian source batches are reproducible under a fixed seed") {
  const Mat shape = Mat::Zero(5, 3);
  cfm::Rng r1(123), r2(123);
  const Mat a = cfm::sample_source_batch(SourceKind::gaussian, shape, r1);
  const Mat b = cfm::sample_source_batch(SourceKind::gaussian, shape, r2);
  CHECK(std::memcmp(a.data(), b.data(), sizeof(double) * 15) == 0);
}
