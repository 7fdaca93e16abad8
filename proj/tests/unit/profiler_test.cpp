#include <cmath>

#include <gtest/gtest.h>

#include "lpp/error.hpp"
#include "lpp/profiler.hpp"
#include "lpp/serialize.hpp"
#include "support.hpp"

namespace lpp {
namespace {

TraceManifest manifest_for(std::size_t samples, std::size_t context, std::size_t prefix,
                           std::vector<int> layers, std::size_t vocab) {
  TraceManifest m;
  m.model_id = "hand";
  m.dataset_id = "hand";
  m.tokenizer_id = "none";
  m.context_length = context;
  m.prefix_length = prefix;
  m.num_samples = samples;
  m.layers = std::move(layers);
  m.vocab_size = vocab;
  return m;
}

TEST(Aggregate, Examples) {
  const std::vector<double> v{3, 1, 2};
  EXPECT_EQ(aggregate(v, Stat::min), 1);
  EXPECT_EQ(aggregate(v, Stat::max), 3);
  EXPECT_EQ(aggregate(v, Stat::median), 2);
  EXPECT_EQ(aggregate(v, Stat::mean), 2);
  EXPECT_EQ(aggregate(std::vector<double>{1, 2, 3, 4}, Stat::median), 2.5);
  EXPECT_THROW(aggregate(std::vector<double>{}, Stat::min), PreconditionError);
}

TEST(Scheme, PresetsAndParsing) {
  const auto& presets = scheme_presets();
  ASSERT_EQ(presets.size(), 5u);
  EXPECT_EQ(presets[0].name, "canonical");
  EXPECT_EQ(presets[0].scheme, AggregationScheme::canonical());
  EXPECT_EQ(parse_scheme("all-median"), AggregationScheme::uniform(Stat::median));
  EXPECT_EQ(parse_scheme("min:max:max"), AggregationScheme::canonical());
  EXPECT_EQ(scheme_name(AggregationScheme::canonical()), "canonical");
  EXPECT_EQ(scheme_name(parse_scheme("median:max:min")), "median:max:min");
  EXPECT_THROW(parse_scheme("fancy"), Error);
}

TEST(EntropyFloor, WindowExamples) {
  const EntropySeries s{{2.0, 1.5, 0.7, 0.9}};
  EXPECT_EQ(sample_entropy_floor(s, 2, 5), 0.7);
  EXPECT_EQ(sample_entropy_floor(s, 2, 3), 1.5);  // one evaluable position
  EXPECT_EQ(sample_entropy_floor(s, 1, 2), 2.0);
  EXPECT_THROW(sample_entropy_floor(s, 5, 5), PreconditionError);
  EXPECT_THROW(sample_entropy_floor(s, 2, 6), PreconditionError);
}

TEST(EntropyFloor, NonIncreasingInContext) {
  test::Rng rng(17);
  for (int trial = 0; trial < 1000; ++trial) {
    EntropySeries s;
    s.values.resize(2 + rng.index(60));
    for (double& v : s.values) v = rng.uniform(0, 5);
    const std::size_t prefix = 1 + rng.index(s.size());
    double previous = INFINITY;
    for (std::size_t c = prefix + 1; c <= s.size() + 1; ++c) {
      const double f = sample_entropy_floor(s, prefix, c);
      EXPECT_LE(f, previous);
      previous = f;
    }
  }
}

TEST(LayerMetrics, HandSpectrum) {
  test::TempDir dir;
  test::RunBuilder b(dir.path(), manifest_for(2, 8, 2, {kLastLayer}, 4));
  for (std::size_t s = 0; s < 2; ++s) {
    b.hidden(s, kLastLayer, test::matrix_blob(3, 2, {1, 0, -1, 0, 0, 0}));
    b.logits(s, test::matrix_blob(3, 4, std::vector<double>(12, 0.0)));
  }
  const TraceRun run = b.finish();
  const LayerMetrics lm = layer_metrics(run, kLastLayer, 8);
  ASSERT_EQ(lm.per_sample.size(), 2u);
  EXPECT_DOUBLE_EQ(lm.per_sample[0].pr, 1.0);
  EXPECT_DOUBLE_EQ(lm.per_sample[0].er, 1.0);
  EXPECT_EQ(lm.pooled_pr, 1.0);
  const LayerMetrics mn = layer_metrics(run, kLastLayer, 8, AggregationScheme::uniform(Stat::min));
  EXPECT_EQ(mn.pooled_pr, lm.pooled_pr);
  try {
    layer_metrics(run, 7, 8);
    FAIL();
  } catch (const PreconditionError& e) {
    EXPECT_NE(std::string(e.what()).find("layer 7"), std::string::npos);
  }
}

TEST(LayerMetrics, ShortSamplesAreSkipped) {
  test::TempDir dir;
  test::SyntheticRun shape;
  shape.samples = 3;
  shape.tokens = {24, 1, 20};
  const TraceRun run = write_synthetic_run(dir.path(), shape);
  const LayerMetrics lm = layer_metrics(run, kLastLayer, 24);
  EXPECT_EQ(lm.per_sample.size(), 2u);
  EXPECT_EQ(lm.skipped, std::vector<std::size_t>{1});
}

TEST(Profile, PlantedOneSampleRun) {
  test::TempDir dir;
  test::RunBuilder b(dir.path(), manifest_for(1, 5, 2, {kLastLayer}, 16));
  // Covariance diag(8/3, 2/3): eigenvalues in ratio 4:1.
  b.hidden(0, kLastLayer, test::matrix_blob(4, 2, {2, 0, -2, 0, 0, 1, 0, -1}));
  b.entropy(0, {2.0, 0.7, 1.5, 0.9});
  const TraceRun run = b.finish();
  const LatentProfile p = latent_profile(run);
  EXPECT_DOUBLE_EQ(p.entropy_floor, static_cast<double>(0.7f));
  EXPECT_NEAR(p.max_pr, 1.470588, 1e-6);
  EXPECT_NEAR(p.max_er, 1.649385, 1e-6);
  EXPECT_NEAR(p.max_er, std::exp(-(0.8 * std::log(0.8) + 0.2 * std::log(0.2))), 1e-12);
  EXPECT_EQ(p.pooled_entropy_floor, p.entropy_floor);
  EXPECT_EQ(p.per_scheme.size(), 5u);
}

TEST(Profile, DefaultsFollowReferenceSetup) {
  test::TempDir dir;
  test::SyntheticRun shape;
  shape.samples = 101;
  shape.context = 210;
  shape.prefix = 120;
  shape.layers = {0, kLastLayer};
  shape.width = 4;
  shape.vocab = 6;
  const TraceRun run = write_synthetic_run(dir.path(), shape);
  const LatentProfile p = latent_profile(run);
  EXPECT_EQ(p.provenance.context_length, 200u);
  EXPECT_EQ(p.provenance.prefix_length, 100u);
  EXPECT_EQ(p.provenance.num_samples, 100u);
  EXPECT_EQ(p.provenance.layers, std::vector<int>{kLastLayer});
  EXPECT_EQ(p.scheme, "canonical");
  EXPECT_EQ(p.per_sample_entropy_floors.size(), 100u);
}

TEST(Profile, DefaultsAreCappedBySmallRuns) {
  const LatentProfile p = latent_profile(load_run(test::fixture_dir()));
  EXPECT_EQ(p.provenance.context_length, 32u);
  EXPECT_EQ(p.provenance.prefix_length, 16u);
  EXPECT_EQ(p.provenance.num_samples, 4u);
  EXPECT_EQ(p.provenance.layers, std::vector<int>{kLastLayer});
}

TEST(Profile, EntropyAndLogitsPathsAgree) {
  const TraceRun run = load_run(test::fixture_dir());
  ProfileOptions a;
  a.entropy_source = EntropySource::entropy_payload;
  ProfileOptions b;
  b.entropy_source = EntropySource::logits;
  const LatentProfile pa = latent_profile(run, AggregationScheme::canonical(), a);
  const LatentProfile pb = latent_profile(run, AggregationScheme::canonical(), b);
  EXPECT_NEAR(pa.entropy_floor, pb.entropy_floor, 1e-4);
  ASSERT_EQ(pa.per_sample_entropy_floors.size(), pb.per_sample_entropy_floors.size());
  for (std::size_t i = 0; i < pa.per_sample_entropy_floors.size(); ++i) {
    EXPECT_NEAR(pa.per_sample_entropy_floors[i].floor, pb.per_sample_entropy_floors[i].floor, 1e-4);
  }
  EXPECT_EQ(pa.max_pr, pb.max_pr);
}

TEST(Profile, NeedsAnEntropySource) {
  test::TempDir dir;
  test::SyntheticRun shape;
  shape.with_logits = false;
  const TraceRun run = write_synthetic_run(dir.path(), shape);
  EXPECT_THROW(latent_profile(run), PreconditionError);
  EXPECT_NO_THROW(layer_metrics(run, kLastLayer, 24));
}

TEST(Profile, SchemeOrderingAcrossPresets) {
  ProfileOptions o;
  o.layers = std::vector<int>{0, 1, 2, kLastLayer};
  o.context_grid = {20, 24, 28};
  const LatentProfile p = latent_profile(load_run(test::fixture_dir()), AggregationScheme::canonical(), o);
  std::map<std::string, MetricTriple> by;
  for (const auto& [name, t] : p.per_scheme) by[name] = t;
  ASSERT_EQ(by.size(), 5u);
  auto check = [&](double MetricTriple::*f) {
    const double lo = by["all-min"].*f, hi = by["all-max"].*f;
    EXPECT_LE(lo, by["all-median"].*f);
    EXPECT_LE(by["all-median"].*f, hi);
    EXPECT_LE(lo, by["all-mean"].*f);
    EXPECT_LE(by["all-mean"].*f, hi);
  };
  check(&MetricTriple::entropy);
  check(&MetricTriple::pr);
  check(&MetricTriple::er);
  EXPECT_EQ(by["canonical"].entropy, p.entropy_floor);
  EXPECT_EQ(by["canonical"].pr, p.max_pr);
  EXPECT_EQ(by["canonical"].er, p.max_er);
  EXPECT_EQ(p.per_layer_table.size(), 4u);
  EXPECT_EQ(p.per_context_table.size(), 4u);  // grid plus the resolved context
}

TEST(Profile, DeterministicAcrossThreadCounts) {
  const TraceRun run = load_run(test::fixture_dir());
  ProfileOptions one;
  one.layers = std::vector<int>{0, 1, 2, kLastLayer};
  ProfileOptions many = one;
  many.threads = 4;
  const std::string a = to_json(latent_profile(run, AggregationScheme::canonical(), one)).dump();
  const std::string b = to_json(latent_profile(run, AggregationScheme::canonical(), one)).dump();
  const std::string c = to_json(latent_profile(run, AggregationScheme::canonical(), many)).dump();
  EXPECT_EQ(a, b);
  EXPECT_EQ(a, c);
}

TEST(Profile, ProfileJsonRoundTrips) {
  const LatentProfile p = latent_profile(load_run(test::fixture_dir()));
  const auto doc = to_json(p);
  const LatentProfile back = latent_profile_from_json(nlohmann::json::parse(doc.dump()));
  EXPECT_EQ(to_json(back).dump(), doc.dump());
}

TEST(Hourglass, Detector) {
  const std::vector<double> depths{0.0, 0.5, 1.0};
  EXPECT_TRUE(detect_hourglass(depths, std::vector<double>{5, 2, 5}));
  EXPECT_FALSE(detect_hourglass(depths, std::vector<double>{2, 5, 2}));
  EXPECT_FALSE(detect_hourglass(depths, std::vector<double>{5, 5, 5}));
  EXPECT_FALSE(detect_hourglass(depths, std::vector<double>{5, 3, 3}));
  // Only depths strictly inside (0.2, 0.8) count as interior.
  const std::vector<double> five{0.0, 0.2, 0.5, 0.8, 1.0};
  EXPECT_FALSE(detect_hourglass(five, std::vector<double>{5, 1, 6, 1, 5}));
  EXPECT_TRUE(detect_hourglass(five, std::vector<double>{5, 9, 4, 9, 5}));
}

TEST(Hourglass, LayerCurveOnFixture) {
  const LayerCurve c = layer_curve(load_run(test::fixture_dir()));
  EXPECT_EQ(c.layers, (std::vector<int>{0, 1, 2, kLastLayer}));
  ASSERT_EQ(c.layer_depths.size(), 4u);
  EXPECT_EQ(c.layer_depths.front(), 0.0);
  EXPECT_EQ(c.layer_depths.back(), 1.0);
  EXPECT_TRUE(std::is_sorted(c.layer_depths.begin(), c.layer_depths.end()));
  EXPECT_TRUE(c.hourglass_flag);
}

TEST(Hourglass, NeedsThreeLayers) {
  test::TempDir dir;
  test::SyntheticRun shape;
  shape.layers = {0, kLastLayer};
  EXPECT_THROW(layer_curve(write_synthetic_run(dir.path(), shape)), PreconditionError);
}

}  // namespace
}  // namespace lpp
