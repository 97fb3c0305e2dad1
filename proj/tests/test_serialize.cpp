#include "nfcp/data.hpp"
#include "nfcp/serialize.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

#include <filesystem>

namespace nfcp {
namespace {

using testing::random_features;
using testing::random_transform;

std::string parse_error(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ParseError);
    return e.what();
  }
  ADD_FAILURE() << "no exception thrown";
  return {};
}

void expect_same_outputs(const ConformityTransform& a, const ConformityTransform& b, const MatrixXd& x) {
  ASSERT_EQ(a.family, b.family);
  EXPECT_EQ(a.gamma, b.gamma);
  EXPECT_EQ(a.exponent, b.exponent);
  for (Index i = 0; i < x.rows(); ++i) {
    const VectorXd xi = x.row(i).transpose();
    EXPECT_EQ(a.scale(xi), b.scale(xi));
    EXPECT_EQ(eval(a, 0.3, xi), eval(b, 0.3, xi));
  }
}

TEST(Serialize, MlpTransformRoundTripIsBitIdentical) {
  for (Family f : {Family::ER, Family::Gauss, Family::Uniform}) {
    for (int p : {1, 2}) {
      const auto t = random_transform(f, 4, 17, p, 0.0123);
      const auto back = parse_transform(serialize(t));
      expect_same_outputs(t, back, random_features(50, 4, 3));
      EXPECT_EQ(parameters(*back.localizer), parameters(*t.localizer));
      EXPECT_EQ(serialize(back), serialize(t));
    }
  }
}

TEST(Serialize, CubicAndBaselineRoundTrip) {
  const auto cubic = ConformityTransform::make(Family::Gauss, 0.01, CubicLocalizer{Eigen::Vector3d(0.1, -1.0 / 3, 2.5)}, 2);
  const auto back = parse_transform(serialize(cubic));
  expect_same_outputs(cubic, back, random_features(20, 1, 4, 0.0, 1.0));
  EXPECT_EQ(std::get<CubicLocalizer>(*back.localizer).theta, std::get<CubicLocalizer>(*cubic.localizer).theta);
  const auto base = parse_transform(serialize(ConformityTransform::baseline()));
  EXPECT_EQ(base.family, Family::Baseline);
  EXPECT_FALSE(base.localizer.has_value());
}

TEST(Serialize, ForestRoundTripPredictsIdentically) {
  SynthSpec spec;
  spec.kind = SynthKind::Cos;
  spec.n = 300;
  spec.seed = 8;
  const auto ds = gen_synth(spec);
  const auto forest = fit_forest(ds, {.n_trees = 7, .max_depth = 5, .seed = 9});
  const auto back = parse_forest(serialize(forest));
  EXPECT_EQ(back.predict_batch(ds.features), forest.predict_batch(ds.features));
  EXPECT_EQ(back.params.seed, 9u);
  EXPECT_EQ(back.trees.size(), 7u);
}

TEST(Serialize, FilesRoundTrip) {
  const auto dir = std::filesystem::temp_directory_path() / "nfcp_test_serialize";
  std::filesystem::create_directories(dir);
  const auto t = random_transform(Family::ER, 2, 5);
  save(t, (dir / "t.params").string());
  expect_same_outputs(t, load_transform((dir / "t.params").string()), random_features(10, 2, 6));
  EXPECT_THROW(load_transform((dir / "missing.params").string()), Error);
}

TEST(Serialize, ParseErrorsNameTheLine) {
  const std::string good = serialize(ConformityTransform::make(Family::Gauss, 0.5, CubicLocalizer{}));
  EXPECT_NE(parse_error([] { parse_transform(""); }).find("end of file"), std::string::npos);
  EXPECT_NE(parse_error([] { parse_transform("hello 1\n"); }).find("line 1"), std::string::npos);
  EXPECT_NE(parse_error([] { parse_transform("nfcp-params 9\nkind transform\n"); }).find("unsupported version"),
            std::string::npos);

  std::string bad_gamma = good;
  bad_gamma.replace(bad_gamma.find("gamma 0.5"), 9, "gamma abc");
  EXPECT_NE(parse_error([&] { parse_transform(bad_gamma); }).find("line 4"), std::string::npos);

  std::string bad_family = good;
  bad_family.replace(bad_family.find("gauss"), 5, "spline");
  EXPECT_NE(parse_error([&] { parse_transform(bad_family); }).find("line 3"), std::string::npos);

  std::string short_theta = good;
  short_theta.replace(short_theta.find("theta 0 0 0"), 11, "theta 0 0");
  EXPECT_NE(parse_error([&] { parse_transform(short_theta); }).find("line 7"), std::string::npos);

  EXPECT_NE(parse_error([&] { parse_forest(good); }).find("expected kind 'forest'"), std::string::npos);
}

TEST(Serialize, ForestStructureIsValidated) {
  const std::string text =
      "nfcp-params 1\nkind forest\ninput_dim 1\nparams 1 3 1 0 1 0\ntrees 1\ntree 3\n"
      "node 0 0.5 0 2 0 4\nnode -1 0 -1 -1 1 2\nnode -1 0 -1 -1 2 2\nend\n";
  EXPECT_NE(parse_error([&] { parse_forest(text); }).find("line 7"), std::string::npos);
  std::string ok = text;
  ok.replace(ok.find("node 0 0.5 0 2"), 14, "node 0 0.5 1 2");
  const auto f = parse_forest(ok);
  EXPECT_EQ(f.predict(VectorXd::Constant(1, 0.2)), 1.0);
  EXPECT_EQ(f.predict(VectorXd::Constant(1, 0.7)), 2.0);
}

}  // namespace
}  // namespace nfcp
