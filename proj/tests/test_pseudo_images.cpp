#include "support.hpp"

#include "layersep/compositing.hpp"
#include "layersep/filters.hpp"
#include "layersep/phantom.hpp"
#include "layersep/pseudo_images.hpp"

#include <doctest.h>

using namespace layersep;
using namespace testing_support;

namespace {

PhantomConfig open_joint_config() {
  PhantomConfig cfg;
  cfg.gap_min = 4.0;
  cfg.gap_max = 8.0;
  return cfg;
}

std::vector<Phantom> open_joint_phantoms(int n, std::uint64_t seed) {
  return make_phantom_suite(open_joint_config(), n, seed);
}

std::vector<JointCase> sources_from(const std::vector<Phantom>& phantoms) {
  std::vector<JointCase> out;
  for (const auto& p : phantoms) out.push_back(p.to_joint_case());
  return out;
}

/// GT layers of a phantom moved by a placement: soft tissue stays, bones move.
Image placed_ground_truth(const Phantom& ph, const PseudoCase& pc) {
  std::vector<Image> layers{ph.gt_stack.layers[0]};
  for (int b = 0; b < kNumBones; ++b) {
    const BonePlacement& bp = pc.placement[b];
    const WarpOperator op = warp_operator(ph.composed.rows(), ph.composed.cols(), bp.transform(),
                                          Interpolation::Bilinear, bp.center, EdgeMode::Clamp);
    layers.push_back(warp(ph.gt_stack.layers[b + 1], op) * pc.masks[b].cast<double>());
  }
  return composite_oracle(layers);
}

double rmse_on(const Image& a, const Image& b, const Mask& where) {
  double s = 0.0;
  for (Eigen::Index p = 0; p < a.size(); ++p)
    if (where(p)) s += (a(p) - b(p)) * (a(p) - b(p));
  return std::sqrt(s / static_cast<double>(where.count()));
}

}  // namespace

TEST_CASE("extract_bone_regions") {
  Rng rng(51);
  const Image j = random_image(8, 8, rng);
  std::vector<Mask> masks{empty_mask(8, 8), full_mask(8, 8), rect_mask(8, 8, 0, 8, 0, 4)};
  const auto b = extract_bone_regions(Image::Constant(8, 8, 0.6), masks);
  CHECK((b[0] == 0.0).all());
  CHECK((b[1] == 0.6).all());
  for (int r = 0; r < 8; ++r)
    for (int c = 0; c < 8; ++c) CHECK(b[2](r, c) == (c < 4 ? 0.6 : 0.0));
  CHECK(max_abs_diff(extract_bone_regions(j, std::span(masks).subspan(1, 1))[0], j) == 0.0);
}

TEST_CASE("solve_k") {
  SUBCASE("constant boundary value") {
    // (1 - J') / 1 = 0.7 on the whole ring
    const Image placed = Image::Constant(20, 20, 0.3);
    std::vector<Mask> masks{rect_mask(20, 20, 4, 12, 5, 15), rect_mask(20, 20, 9, 16, 5, 15)};
    std::vector<Image> sources(2, Image::Zero(20, 20));
    const LaplaceResult k = solve_k(placed, sources, masks);
    const Mask u = masks[0] || masks[1];
    for (Eigen::Index p = 0; p < u.size(); ++p)
      if (u(p)) CHECK(std::abs(k.solution(p) - 0.7) <= 1e-6);
  }
  SUBCASE("strip gives a linear ramp") {
    const Eigen::Index cols = 15;
    Image placed = Image::Zero(7, cols);
    placed.col(0).setOnes();  // k = 0 on the left ring, 1 on the right
    std::vector<Mask> masks{rect_mask(7, cols, 0, 7, 1, 8), rect_mask(7, cols, 0, 7, 6, cols - 1)};
    std::vector<Image> sources(2, Image::Zero(7, cols));
    const LaplaceResult k = solve_k(placed, sources, masks);
    double dev = 0.0;
    for (Eigen::Index r = 0; r < 7; ++r)
      for (Eigen::Index c = 1; c < cols - 1; ++c)
        dev = std::max(dev, std::abs(k.solution(r, c) - static_cast<double>(c) / (cols - 1)));
    CHECK(dev <= 1e-3);
  }
  SUBCASE("disk against a dense solve") {
    Rng rng(52);
    const Eigen::Index n = 30;
    Mask left(n, n), right(n, n);
    for (Eigen::Index r = 0; r < n; ++r) {
      for (Eigen::Index c = 0; c < n; ++c) {
        const bool in = std::hypot(r - 14.5, c - 14.5) <= 11.0;
        left(r, c) = in && c < 17;
        right(r, c) = in && c > 12;
      }
    }
    const Image placed = gaussian_blur(random_image(n, n, rng, 0.1, 0.5), 3.0);
    std::vector<Image> sources{gaussian_blur(random_image(n, n, rng, 0.0, 0.3), 3.0),
                               gaussian_blur(random_image(n, n, rng, 0.0, 0.3), 3.0)};
    std::vector<Mask> masks{left, right};
    const LaplaceResult k = solve_k(placed, sources, masks);
    // rebuild the Dirichlet data independently
    const Mask u = left || right;
    Image boundary = Image::Ones(n, n);
    for (Eigen::Index r = 0; r < n; ++r) {
      for (Eigen::Index c = 0; c < n; ++c) {
        if (u(r, c)) continue;
        bool touches = false;
        double denom = 1.0;
        for (int b = 0; b < 2; ++b) {
          const Mask& m = masks[b];
          const bool adj = (r > 0 && m(r - 1, c)) || (r + 1 < n && m(r + 1, c)) || (c > 0 && m(r, c - 1)) ||
                           (c + 1 < n && m(r, c + 1));
          if (adj) denom *= 1.0 - sources[b](r, c);
          touches = touches || adj;
        }
        if (touches) boundary(r, c) = (1.0 - placed(r, c)) / std::max(denom, 1e-4);
      }
    }
    const Image oracle = direct_solve(boundary, u);
    double worst = 0.0;
    for (Eigen::Index p = 0; p < u.size(); ++p)
      if (u(p)) worst = std::max(worst, std::abs(k.solution(p) - oracle(p)));
    CHECK(worst <= 1e-3);
  }
  SUBCASE("errors") {
    std::vector<Mask> masks{rect_mask(10, 10, 2, 8, 2, 8), rect_mask(10, 10, 4, 9, 2, 8)};
    std::vector<Image> one(1, Image::Zero(10, 10));
    CHECK_THROWS_AS(solve_k(Image::Zero(10, 10), one, masks), ValidationError);
    std::vector<Image> sources(2, Image::Zero(10, 10));
    LaplaceOptions opts;
    opts.max_iterations = 1;
    Rng rng(53);
    CHECK_THROWS_AS(solve_k(random_image(10, 10, rng), sources, masks, opts), RuntimeFailure);
    std::vector<Mask> empty{empty_mask(10, 10), empty_mask(10, 10)};
    CHECK_THROWS_AS(solve_k(Image::Zero(10, 10), sources, empty), ValidationError);
  }
}

TEST_CASE("compose_pseudo on phantom sources") {
  const auto phantoms = open_joint_phantoms(6, 54);
  const auto sources = sources_from(phantoms);
  for (std::size_t i = 0; i < sources.size(); ++i) {
    Rng rng(100 + i);
    const Placement placement = sample_placement(sources[i], PseudoOptions{}, rng);
    const PseudoCase pc = compose_pseudo(sources[i], placement);
    CHECK_NOTHROW(validate_pseudo_case(pc, 1e-4));
    CHECK(pc.solver_residual <= 1e-4);
    CHECK(pc.overlap_fraction >= 0.02);
    CHECK(pc.overlap_fraction <= 0.35);
    CHECK(pc.source_id == sources[i].id);

    const SpliceContinuity s = splice_continuity(pc);
    CHECK(s.outer == 0.0);
    // outside the bone union the pseudo-image is the background, bit for bit
    const Mask u = pc.bone_union();
    for (Eigen::Index p = 0; p < u.size(); ++p)
      if (!u(p)) CHECK(pc.image(p) == pc.background(p));

    // bone GT is the placed texture restricted to each mask
    for (int b = 0; b < kNumBones; ++b) {
      CHECK(((!pc.masks[b]) && (pc.bone_gt[b] != 0.0)).count() == 0);
      CHECK_NOTHROW(validate_image(pc.bone_gt[b]));
    }

    // Away from the overlap the pseudo-image matches the phantom's own layers
    // moved by the same placement.
    const Image gt = placed_ground_truth(phantoms[i], pc);
    const Mask single = u && !(pc.masks[0] && pc.masks[1]);
    CHECK(rmse_on(gt, pc.image, single) <= 0.03);
    // Inside the overlap both B_i carry soft tissue, so it is counted twice
    // wherever k has not risen to compensate.
    CHECK(rmse_on(gt, pc.image, pc.masks[0] && pc.masks[1]) <= 0.1);
  }
}

TEST_CASE("pseudo GT reproduces itself through a bone-only stack") {
  const auto sources = sources_from(open_joint_phantoms(1, 55));
  Rng rng(56);
  const PseudoCase pc = compose_pseudo(sources[0], sample_placement(sources[0], PseudoOptions{}, rng));
  for (int b = 0; b < kNumBones; ++b) {
    const std::vector<Image> bone_only{Image::Zero(64, 64), pc.bone_gt[b]};
    const Image r = reconstruct<double>(std::span<const Image>(bone_only));
    CHECK(rmse_oracle(r, pc.bone_gt[b], &pc.masks[b]) <= 1e-15);
  }
}

TEST_CASE("compose_pseudo rejections") {
  const Phantom overlapping = make_phantom(PhantomConfig{}, 57);
  Placement identity;
  CHECK_THROWS_AS(compose_pseudo(overlapping.to_joint_case(), identity), ValidationError);

  const JointCase open = open_joint_phantoms(1, 58)[0].to_joint_case();
  identity[0].center = identity[1].center = Eigen::Vector2d(32, 32);
  CHECK_THROWS_AS(compose_pseudo(open, identity), ValidationError);  // no overlap

  JointCase boneless = open;
  boneless.lower = boneless.upper = empty_mask(64, 64);
  CHECK_THROWS_AS(compose_pseudo(boneless, identity), ValidationError);
}

TEST_CASE("literal formula adds the bone texture a second time") {
  const JointCase src = open_joint_phantoms(1, 59)[0].to_joint_case();
  Rng rng(60);
  const Placement p = sample_placement(src, PseudoOptions{}, rng);
  PseudoOptions literal;
  literal.literal_formula = true;
  const PseudoCase spliced = compose_pseudo(src, p);
  const PseudoCase printed = compose_pseudo(src, p, literal);
  const Mask u = spliced.bone_union();
  double mean_diff = 0.0;
  for (Eigen::Index i = 0; i < u.size(); ++i)
    if (u(i)) mean_diff += (printed.image(i) - spliced.image(i)) / static_cast<double>(u.count());
  CHECK(mean_diff > 0.1);
}

TEST_CASE("build_pseudo_dataset") {
  const auto sources = sources_from(open_joint_phantoms(10, 61));
  CHECK(build_pseudo_dataset(sources, 0, 1).empty());
  CHECK_THROWS_AS(build_pseudo_dataset(sources, -1, 1), ValidationError);

  const auto a = build_pseudo_dataset(sources, 100, 62, {}, 4);
  const auto b = build_pseudo_dataset(sources, 100, 62, {}, 1);
  REQUIRE(a.size() == 100);
  double lo = 1.0, hi = 0.0, mean = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK((a[i].image == b[i].image).all());
    CHECK(a[i].id == b[i].id);
    CHECK(a[i].source_id == sources[i % sources.size()].id);
    CHECK_NOTHROW(validate_pseudo_case(a[i]));
    CHECK(splice_continuity(a[i]).outer == 0.0);
    lo = std::min(lo, a[i].overlap_fraction);
    hi = std::max(hi, a[i].overlap_fraction);
    mean += a[i].overlap_fraction / 100.0;
  }
  MESSAGE("overlap fraction min " << lo << " mean " << mean << " max " << hi);
  CHECK(lo >= 0.02);
  CHECK(hi <= 0.35);

  const JointCase jc = a[0].to_joint_case(0.2, default_joint_axis());
  CHECK(jc.kind == CaseKind::Pseudo);
  CHECK(jc.bone_gt.has_value());
  CHECK(jc.source_id == sources[0].id);
  CHECK(jc.pixel_spacing_mm == 0.2);

  std::vector<JointCase> bad{make_phantom(PhantomConfig{}, 63).to_joint_case()};
  CHECK_THROWS_AS(build_pseudo_dataset(bad, 1, 1), ValidationError);
}
