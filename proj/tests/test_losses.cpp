#include "support.hpp"

#include "layersep/losses.hpp"

#include <doctest.h>

#include <functional>

using namespace layersep;
using namespace testing_support;

namespace {

Image img(std::initializer_list<std::initializer_list<double>> rows) {
  Image out(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.begin()->size()));
  Eigen::Index r = 0;
  for (const auto& row : rows) {
    Eigen::Index c = 0;
    for (double v : row) out(r, c++) = v;
    ++r;
  }
  return out;
}

Mask msk(std::initializer_list<std::initializer_list<int>> rows) {
  Mask out(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.begin()->size()));
  Eigen::Index r = 0;
  for (const auto& row : rows) {
    Eigen::Index c = 0;
    for (int v : row) out(r, c++) = v != 0;
    ++r;
  }
  return out;
}

/// Central differences of f at every pixel of x.
Image numeric_gradient(const std::function<double(const Image&)>& f, const Image& x, double eps = 1e-6) {
  Image g(x.rows(), x.cols());
  for (Eigen::Index p = 0; p < x.size(); ++p) {
    Image a = x, b = x;
    a(p) += eps;
    b(p) -= eps;
    g(p) = (f(a) - f(b)) / (2 * eps);
  }
  return g;
}

}  // namespace

TEST_CASE("rmse") {
  const Image z = Image::Zero(3, 3), o = Image::Ones(3, 3);
  CHECK(rmse(o, o) == 0.0);
  CHECK(rmse(z, o) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(rmse(img({{0, 0, 1, 1}}), img({{0, 1, 1, 1}})) == doctest::Approx(0.5).epsilon(1e-15));
  const Mask none = empty_mask(3, 3);
  CHECK_THROWS_AS(rmse(z, o, &none), ValidationError);
  CHECK_THROWS_AS(rmse(z, Image::Zero(2, 3)), ValidationError);

  Rng rng(31);
  for (int t = 0; t < 20; ++t) {
    const Image y = random_image(8, 8, rng), yh = random_image(8, 8, rng);
    const Mask s = random_mask(8, 8, rng);
    CHECK(std::abs(rmse(y, yh) - rmse_oracle(y, yh)) <= 1e-12);
    if (s.any()) CHECK(std::abs(rmse(y, yh, &s) - rmse_oracle(y, yh, &s)) <= 1e-12);
    const Image g = rmse_gradient(y, yh, &s);
    const Image fd = numeric_gradient([&](const Image& x) { return rmse(x, yh, &s); }, y);
    CHECK(max_abs_diff(g, fd) <= 1e-7);
  }
}

TEST_CASE("bce") {
  Rng rng(32);
  const Mask any = random_mask(4, 4, rng);
  CHECK(bce(Image::Constant(4, 4, 0.5), any) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  const double floor = bce(Image::Ones(4, 4), full_mask(4, 4));
  CHECK(floor == doctest::Approx(-std::log(1.0 - 1e-7)).epsilon(1e-12));
  CHECK(floor == doctest::Approx(1e-7).epsilon(1e-6));
  CHECK(std::isfinite(bce(Image::Zero(4, 4), full_mask(4, 4))));
  for (int t = 0; t < 20; ++t) {
    const Image y = random_image(8, 8, rng, 0.01, 0.99);
    const Mask tgt = random_mask(8, 8, rng), s = random_mask(8, 8, rng, 0.7);
    CHECK(std::abs(bce(y, tgt) - bce_oracle(y, tgt)) <= 1e-12);
    CHECK(std::abs(bce(y, tgt, &s) - bce_oracle(y, tgt, &s)) <= 1e-12);
    const Image g = bce_gradient(y, tgt, &s);
    const Image fd = numeric_gradient([&](const Image& x) { return bce(x, tgt, &s); }, y);
    CHECK(max_abs_diff(g, fd) <= 1e-6);
  }
}

TEST_CASE("segmentation targets") {
  const Mask lower = msk({{0, 1, 1, 0}}), upper = msk({{0, 0, 1, 1}});
  const auto t = segmentation_targets(lower, upper);
  CHECK(masks_equal(t[0], msk({{1, 0, 0, 0}})));
  CHECK(masks_equal(t[1], msk({{0, 1, 0, 0}})));
  CHECK(masks_equal(t[2], msk({{0, 0, 0, 1}})));
}

TEST_CASE("loss_l0") {
  const Image j = Image::Constant(4, 4, 0.3);
  CHECK(loss_l0(j, j, full_mask(4, 4)) == 0.0);
  CHECK(loss_l0(j + 0.1, j, empty_mask(4, 4)) == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(loss_l0(j + 0.1, j, full_mask(4, 4)) == doctest::Approx(0.2).epsilon(1e-12));

  // hand-computed fixture: differences {0.1, 0, -0.2, 0}, overlap on the left column
  const Image r = img({{0.5, 0.2}, {0.7, 0.1}}), target = img({{0.4, 0.2}, {0.9, 0.1}});
  const Mask overlap = msk({{1, 0}, {1, 0}});
  const double expected = std::sqrt((0.01 + 0.04) / 4.0) + std::sqrt((0.01 + 0.04) / 2.0);
  CHECK(std::abs(loss_l0(r, target, overlap) - expected) <= 1e-9);

  Rng rng(33);
  const Image a = random_image(6, 6, rng), b = random_image(6, 6, rng);
  const Mask m = random_mask(6, 6, rng);
  const Image fd = numeric_gradient([&](const Image& x) { return loss_l0(x, b, m); }, a);
  CHECK(max_abs_diff(loss_l0_gradient(a, b, m), fd) <= 1e-7);
}

TEST_CASE("loss_l1 and supervision") {
  const std::vector<Image> seg{img({{0.9, 0.2}}), img({{0.3, 0.6}}), img({{0.5, 0.5}})};
  const std::vector<Mask> tgt{msk({{1, 0}}), msk({{0, 1}}), msk({{1, 0}})};
  const double expected =
      ((-std::log(0.9) - std::log(0.8)) / 2 + (-std::log(0.7) - std::log(0.6)) / 2 + std::log(2.0)) / 3.0;
  CHECK(std::abs(loss_l1(seg, tgt) - expected) <= 1e-9);
  CHECK(std::abs(loss_supervision(seg, tgt) - expected) <= 1e-9);

  const std::vector<Image> perfect{tgt[0].cast<double>(), tgt[1].cast<double>(), tgt[2].cast<double>()};
  CHECK(loss_l1(perfect, tgt) == doctest::Approx(1e-7).epsilon(1e-6));
  const std::vector<Image> half(3, Image::Constant(1, 2, 0.5));
  CHECK(loss_l1(half, tgt) == doctest::Approx(std::log(2.0)).epsilon(1e-14));

  Rng rng(34);
  std::vector<Image> ry;
  std::vector<Mask> rt;
  for (int c = 0; c < 3; ++c) {
    ry.push_back(random_image(8, 8, rng, 0.01, 0.99));
    rt.push_back(random_mask(8, 8, rng));
  }
  const double oracle = (bce_oracle(ry[0], rt[0]) + bce_oracle(ry[1], rt[1]) + bce_oracle(ry[2], rt[2])) / 3.0;
  CHECK(std::abs(loss_l1(ry, rt) - oracle) <= 1e-12);
  CHECK_THROWS_AS(loss_l1(std::span<const Image>(ry).first(2), rt), ValidationError);
}

TEST_CASE("loss_l2 and the discriminator are dual") {
  const Mask u = msk({{1, 0}});
  // shadow finder is perfect: bce ~ 0, generator sees ~1
  CHECK(loss_l2(img({{1.0, 0.0}}), u) == doctest::Approx(1.0).epsilon(1e-6));
  // bce = 1 exactly: p with -ln p = 1 on both pixels
  const double p = std::exp(-1.0);
  CHECK(loss_l2(img({{p, 1.0 - p}}), u) == doctest::Approx(0.0).epsilon(1e-12));
  // bce = 2.5 clamps to 0
  const double q = std::exp(-2.5);
  CHECK(loss_discriminator(img({{q, 1.0 - q}}), u) == doctest::Approx(2.5).epsilon(1e-12));
  CHECK(loss_l2(img({{q, 1.0 - q}}), u) == 0.0);

  Rng rng(35);
  for (int t = 0; t < 50; ++t) {
    const Image y = random_image(8, 8, rng, 0.01, 0.99);
    const Mask m = random_mask(8, 8, rng);
    const double d = loss_discriminator(y, m);
    CHECK(std::abs(d - bce_oracle(y, m)) <= 1e-12);
    const double g = loss_l2(y, m);
    CHECK(g >= 0.0);
    if (d <= 1.0) CHECK(g + d == doctest::Approx(1.0).epsilon(1e-12));
    else CHECK(g + d >= 1.0);
  }
}

TEST_CASE("loss_l3") {
  const Mask all = full_mask(2, 2);
  const Image b = Image::Constant(2, 2, 0.4);
  BoneComparison same{{b, b}, {b, b}, {all, all}};
  CHECK(loss_l3(same, same) == 0.0);
  BoneComparison off{{b + 0.2, b + 0.2}, {b, b}, {all, all}};
  CHECK(loss_l3(off, same) == doctest::Approx(0.1).epsilon(1e-12));

  // supports restrict the comparison: only the masked pixels count
  const Mask lower = msk({{1, 1}, {0, 0}}), upper = msk({{0, 0}, {1, 0}});
  BoneComparison fixture{{img({{0.3, 0.5}, {0.9, 0.9}}), img({{0.9, 0.9}, {0.6, 0.9}})},
                         {img({{0.1, 0.5}, {0.0, 0.0}}), img({{0.0, 0.0}, {0.3, 0.0}})},
                         {lower, upper}};
  const double unshifted = std::sqrt((0.04 + 0.0 + 0.09) / 3.0);
  CHECK(std::abs(bone_rmse(fixture) - unshifted) <= 1e-9);
  CHECK(std::abs(loss_l3(fixture, same) - 0.5 * unshifted) <= 1e-9);

  Rng rng(36);
  for (int t = 0; t < 10; ++t) {
    BoneComparison u, s;
    for (int i = 0; i < 2; ++i) {
      u.predicted.push_back(random_image(8, 8, rng));
      u.target.push_back(random_image(8, 8, rng));
      u.support.push_back(random_mask(8, 8, rng));
      s.predicted.push_back(random_image(8, 8, rng));
      s.target.push_back(random_image(8, 8, rng));
      s.support.push_back(random_mask(8, 8, rng));
    }
    auto oracle = [](const BoneComparison& c) {
      double sum = 0.0;
      long n = 0;
      for (int i = 0; i < 2; ++i)
        for (Eigen::Index p = 0; p < c.predicted[i].size(); ++p)
          if (c.support[i](p)) {
            sum += (c.predicted[i](p) - c.target[i](p)) * (c.predicted[i](p) - c.target[i](p));
            ++n;
          }
      return std::sqrt(sum / static_cast<double>(n));
    };
    CHECK(std::abs(loss_l3(u, s) - (0.5 * oracle(u) + 0.5 * oracle(s))) <= 1e-12);
    const auto grads = bone_rmse_gradient(u);
    for (int i = 0; i < 2; ++i) {
      const Image fd = numeric_gradient(
          [&](const Image& x) {
            BoneComparison v = u;
            v.predicted[i] = x;
            return bone_rmse(v);
          },
          u.predicted[i]);
      CHECK(max_abs_diff(grads[i], fd) <= 1e-7);
    }
  }
  BoneComparison empty{{b}, {b}, {empty_mask(2, 2)}};
  CHECK_THROWS_AS(bone_rmse(empty), ValidationError);
}

TEST_CASE("loss_preseg") {
  const std::vector<Mask> tgt{msk({{1, 0}}), msk({{0, 1}}), msk({{0, 0}})};
  const std::vector<Image> perfect{tgt[0].cast<double>(), tgt[1].cast<double>(), tgt[2].cast<double>()};
  const std::vector<Image> half(3, Image::Constant(1, 2, 0.5));
  CHECK(loss_preseg(perfect, tgt, perfect, tgt) == doctest::Approx(1e-7).epsilon(1e-6));
  CHECK(loss_preseg(half, tgt, half, tgt) == doctest::Approx(std::log(2.0)).epsilon(1e-14));
  CHECK(loss_preseg(half, tgt, perfect, tgt) == doctest::Approx(0.5 * std::log(2.0) + 0.5e-7).epsilon(1e-6));

  Rng rng(37);
  std::vector<Image> a, b;
  std::vector<Mask> ta, tb;
  for (int c = 0; c < 3; ++c) {
    a.push_back(random_image(8, 8, rng, 0.01, 0.99));
    b.push_back(random_image(8, 8, rng, 0.01, 0.99));
    ta.push_back(random_mask(8, 8, rng));
    tb.push_back(random_mask(8, 8, rng));
  }
  double oa = 0, ob = 0;
  for (int c = 0; c < 3; ++c) {
    oa += bce_oracle(a[c], ta[c]) / 3.0;
    ob += bce_oracle(b[c], tb[c]) / 3.0;
  }
  CHECK(std::abs(loss_preseg(a, ta, b, tb) - (0.5 * oa + 0.5 * ob)) <= 1e-12);
}

TEST_CASE("loss_hybrid") {
  const LossWeights w;
  const LossComponents unit{1.0, 1.0, 1.0, 1.0};
  CHECK(loss_hybrid(unit, w, Stage::Stage2).total == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(std::abs(loss_hybrid(unit, w, Stage::Stage2).total - (0.6 + 0.3 + 0.1)) <= 1e-9);
  CHECK(std::abs(loss_hybrid(unit, w, Stage::Stage1Late).total - (0.5 + 0.2 + 0.2 + 0.1)) <= 1e-9);
  CHECK(std::abs(loss_hybrid(unit, w, Stage::Stage1Early).total - (1.0 + 0.4 + 0.4)) <= 1e-9);
  LossWeights printed = w;
  printed.early_l3_uses_delta_prime = false;
  CHECK(std::abs(loss_hybrid(unit, printed, Stage::Stage1Early).total - 1.5) <= 1e-9);

  const LossComponents zero{0.0, 0.0, 0.0, 0.0};
  for (Stage s : {Stage::Stage2, Stage::Stage1Late, Stage::Stage1Early}) {
    CHECK(loss_hybrid(zero, w, s).total == 0.0);
  }

  SUBCASE("active components") {
    const LossReport early = loss_hybrid(unit, w, Stage::Stage1Early);
    CHECK(early.l1.has_value());
    CHECK_FALSE(early.l2.has_value());
    CHECK(early.l3.has_value());
    const LossReport s2 = loss_hybrid(unit, w, Stage::Stage2);
    CHECK(s2.l2.has_value());
    CHECK_FALSE(s2.l3.has_value());
    CHECK_THROWS_AS(loss_hybrid(LossComponents{1.0, 1.0, std::nullopt, 1.0}, w, Stage::Stage1Late), ValidationError);
    CHECK_THROWS_AS(loss_hybrid(LossComponents{1.0, 1.0, 1.0, std::nullopt}, w, Stage::Stage1Early), ValidationError);
  }

  SUBCASE("linearity and weighted-sum invariant") {
    Rng rng(38);
    for (int t = 0; t < 20; ++t) {
      const LossComponents c{rng.uniform(), rng.uniform(), rng.uniform(), rng.uniform()};
      const LossComponents c2{2 * c.l0, 2 * *c.l1, 2 * *c.l2, 2 * *c.l3};
      for (Stage s : {Stage::Stage2, Stage::Stage1Late, Stage::Stage1Early}) {
        const LossReport r = loss_hybrid(c, w, s);
        CHECK(loss_hybrid(c2, w, s).total == doctest::Approx(2 * r.total).epsilon(1e-14));
        const ComponentWeights k = hybrid_weights(w, s);
        const double sum = k.l0 * r.l0 + k.l1 * r.l1.value_or(0) + k.l2 * r.l2.value_or(0) + k.l3 * r.l3.value_or(0);
        CHECK(std::abs(r.total - sum) <= 1e-9);
      }
    }
  }

  SUBCASE("weights validation and stage names") {
    LossWeights bad;
    bad.beta = -0.1;
    CHECK_THROWS_AS(loss_hybrid(unit, bad, Stage::Stage2), ValidationError);
    for (Stage s : {Stage::Stage2, Stage::Stage1Late, Stage::Stage1Early}) {
      CHECK(stage_from_string(to_string(s)) == s);
    }
    CHECK_THROWS_AS(stage_from_string("stage3"), ValidationError);
  }
}
