// Copyright 2026 The CountPath Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "corpus.hpp"
#include "countpath/synthgen.hpp"
#include "oracles.hpp"

namespace countpath {
namespace {

void expect_scene_invariants(const SyntheticScene& s) {
  ASSERT_EQ(static_cast<int>(s.set_boxes.size()), s.n_sets);
  ASSERT_EQ(static_cast<int>(s.fragment_boxes.size()), s.n_sets);
  for (int a = 0; a < s.n_sets; ++a) {
    for (int b = a + 1; b < s.n_sets; ++b) {
      EXPECT_EQ(intersection_area(s.set_boxes[a], s.set_boxes[b]), 0.0);
    }
    const auto& frags = s.fragment_boxes[a];
    ASSERT_EQ(static_cast<int>(frags.size()), s.n_fragments_per_set);
    for (std::size_t i = 0; i < frags.size(); ++i) {
      EXPECT_TRUE(s.set_boxes[a].contains(frags[i]));
      for (std::size_t j = i + 1; j < frags.size(); ++j) {
        EXPECT_EQ(intersection_area(frags[i], frags[j]), 0.0);
      }
      // Same layout in every set, relative to the set box.
      const auto& ref = s.fragment_boxes[0][i];
      const auto& set0 = s.set_boxes[0];
      const auto& seta = s.set_boxes[a];
      EXPECT_NEAR((frags[i].x_min() - seta.x_min()) / seta.width(),
                  (ref.x_min() - set0.x_min()) / set0.width(), 1e-9);
      EXPECT_NEAR((frags[i].y_max() - seta.y_min()) / seta.height(),
                  (ref.y_max() - set0.y_min()) / set0.height(), 1e-9);
    }
  }
  EXPECT_EQ(s.true_label, clamp_class(s.n_fragments_per_set));
}

TEST(GenerateScene, InvariantsOverManySeeds) {
  for (std::uint64_t seed = 1; seed <= 500; ++seed) {
    expect_scene_invariants(generate_random_scene(seed));
  }
  for (int sets = 1; sets <= 4; ++sets) {
    for (int frags = 1; frags <= 12; ++frags) {
      expect_scene_invariants(generate_scene(99, {sets, frags}));
    }
  }
}

TEST(GenerateScene, Examples) {
  const auto one = generate_scene(7, {1, 1});
  EXPECT_EQ(one.set_boxes.size(), 1u);
  EXPECT_EQ(one.fragment_boxes[0].size(), 1u);
  const auto two = generate_scene(7, {2, 3});
  EXPECT_EQ(two.set_boxes.size(), 2u);
  EXPECT_EQ(two.fragment_boxes[1].size(), 3u);
  EXPECT_EQ(two.true_label, ClassLabel(3));
  EXPECT_EQ(generate_scene(7, {2, 3}), two);
  EXPECT_NE(generate_scene(8, {2, 3}), two);
}

TEST(GenerateScene, ParameterRangesAndInfeasiblePacking) {
  EXPECT_THROW(generate_scene(1, {0, 3}), ContractViolation);
  EXPECT_THROW(generate_scene(1, {5, 3}), ContractViolation);
  EXPECT_THROW(generate_scene(1, {1, 13}), ContractViolation);
  Rng rng(1);
  int budget = kMaxPlacementAttempts;
  EXPECT_THROW(detail::place_rects(rng, 10, 0.4, 0.5, 0.0, 0.01, budget), Error);
  for (std::uint64_t seed = 1; seed <= 200; ++seed) {
    const auto p = random_scene_params(seed);
    EXPECT_GE(p.n_sets, 1);
    EXPECT_LE(p.n_sets, 4);
    EXPECT_GE(p.n_fragments_per_set, 1);
    EXPECT_LE(p.n_fragments_per_set, 12);
  }
}

TEST(Rng, RangesAndDeterminism) {
  Rng a = Rng::derive({1, 2, 3});
  Rng b = Rng::derive({1, 2, 3});
  Rng c = Rng::derive({1, 2, 4});
  double sum = 0.0;
  int poisson_sum = 0;
  bool differs = false;
  for (int i = 0; i < 20000; ++i) {
    const double u = a.uniform();
    EXPECT_EQ(u, b.uniform());
    differs = differs || u != c.uniform();
    EXPECT_GE(u, 0.0);
    EXPECT_LT(u, 1.0);
    sum += u;
    const int k = a.uniform_int(3, 5);
    b.uniform_int(3, 5);
    EXPECT_GE(k, 3);
    EXPECT_LE(k, 5);
    poisson_sum += a.poisson(2.0);
    b.poisson(2.0);
  }
  EXPECT_TRUE(differs);
  EXPECT_NEAR(sum / 20000, 0.5, 0.01);
  EXPECT_NEAR(poisson_sum / 20000.0, 2.0, 0.05);
  EXPECT_EQ(Rng(5).poisson(0.0), 0);
}

TEST(ExactDetections, Examples) {
  const auto scene = generate_scene(3, {2, 3});
  const auto in = exact_detections(scene);
  EXPECT_EQ(in.classifier_set_count, ClassLabel(2));
  ASSERT_TRUE(in.crop_fragment_detections);
  EXPECT_EQ(in.crop_fragment_detections->size(), 2u);
  for (const auto& d : in.set_detections) EXPECT_EQ(d.confidence, 1.0);
  EXPECT_EQ(run_hybrid(in, {}, RejectionPolicy::RejectInconsistentCrops).label(),
            ClassLabel(3));

  const auto single = exact_detections(generate_scene(3, {1, 7}));
  const auto d = run_detection_only(single, {}, RejectionPolicy::RejectNonInteger);
  EXPECT_EQ(d.label(), ClassLabel(7));
  EXPECT_DOUBLE_EQ(*d.diagnostics.raw_ratio, 7.0);

  const auto twelve = exact_detections(generate_scene(3, {2, 12}));
  EXPECT_EQ(run_hybrid(twelve, {}, RejectionPolicy::NoRejection).label(), ClassLabel(10));
}

TEST(ExactDetections, OracleRecoveryInEveryMode) {
  for (std::uint64_t seed = 1; seed <= 1000; ++seed) {
    const auto scene = generate_random_scene(seed);
    const auto in = exact_detections(scene);
    EXPECT_EQ(run_hybrid(in, {}, RejectionPolicy::RejectInconsistentCrops).label(),
              scene.true_label)
        << seed;
    EXPECT_EQ(run_detection_only(in, {}, RejectionPolicy::RejectNonInteger).label(),
              scene.true_label)
        << seed;
    EXPECT_EQ(run_classification_only(in).label(), scene.true_label);
  }
}

TEST(Perturb, ZeroNoiseEqualsExact) {
  for (std::uint64_t seed = 1; seed <= 200; ++seed) {
    const auto scene = generate_random_scene(seed);
    EXPECT_EQ(perturb(scene, NoiseProfile::none(), 12345), exact_detections(scene));
  }
}

TEST(Perturb, DeterministicPerSeed) {
  const auto scene = generate_random_scene(17);
  EXPECT_EQ(perturb(scene, NoiseProfile::heavy(), 3), perturb(scene, NoiseProfile::heavy(), 3));
  bool any_diff = false;
  for (std::uint64_t s = 0; s < 10 && !any_diff; ++s) {
    any_diff = perturb(scene, NoiseProfile::heavy(), s) != perturb(scene, NoiseProfile::heavy(), 3);
  }
  EXPECT_TRUE(any_diff);
}

TEST(Perturb, TotalMissRate) {
  NoiseProfile all_missed;
  all_missed.miss_rate = 1.0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto in = perturb(generate_random_scene(seed), all_missed, 1);
    EXPECT_TRUE(in.set_detections.empty());
    EXPECT_TRUE(in.fragment_detections.empty());
    EXPECT_EQ(run_hybrid(in, {}, RejectionPolicy::NoRejection).rejection(),
              RejectionReason::NoSetsDetected);
  }
  // Sets kept, fragments all missed: the zero-count path.
  const auto scene = generate_scene(5, {2, 3});
  auto in = perturb(scene, NoiseProfile::none(), 1);
  for (auto& crop : *in.crop_fragment_detections) crop.clear();
  EXPECT_EQ(run_hybrid(in, {}, RejectionPolicy::NoRejection).rejection(),
            RejectionReason::NoFragmentsDetected);
}

TEST(Perturb, CropListsFollowRetainedSets) {
  for (std::uint64_t seed = 1; seed <= 300; ++seed) {
    const auto in = perturb(generate_random_scene(seed), NoiseProfile::heavy(), 9);
    const auto retained =
        prune_set_detections(in.set_detections, *in.classifier_set_count, {});
    EXPECT_EQ(in.crop_fragment_detections->size(), retained.size());
  }
}

TEST(Perturb, ValidatesProfile) {
  NoiseProfile bad;
  bad.miss_rate = 1.5;
  EXPECT_THROW(perturb(generate_random_scene(1), bad, 1), ContractViolation);
  EXPECT_FALSE(NoiseProfile::named("extreme"));
  EXPECT_EQ(NoiseProfile::named("moderate"), NoiseProfile::moderate());
}

TEST(NoisyCorpus, AccuracyDegradesMonotonicallyWithMissRate) {
  double previous = 2.0;
  for (double miss : {0.0, 0.05, 0.1, 0.2}) {
    auto noise = NoiseProfile::moderate();
    noise.miss_rate = miss;
    const auto corpus = testing::run_noisy_corpus(noise);
    const double acc = corpus.accuracy_all();
    EXPECT_LE(acc, previous) << "miss_rate " << miss;
    previous = acc;
  }
}

std::string read_golden(const std::string& name) {
  std::ifstream in(std::string(COUNTPATH_GOLDEN_DIR) + "/" + name);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

TEST(NoisyCorpus, MatchesFrozenGolden) {
  const auto corpus = testing::run_noisy_corpus();
  EXPECT_EQ(corpus.verdicts_csv(), read_golden("moderate_verdicts.csv"));
  const auto golden = json::parse(read_golden("moderate_corpus.json"));
  EXPECT_EQ(corpus.summary_json(), golden);
  EXPECT_GE(corpus.accuracy_accepted(), corpus.accuracy_all());
}

TEST(RenderThumbnail, DimensionsDeterminismAndComponents) {
  const auto one = generate_scene(11, {1, 1});
  const auto img = render_thumbnail(one);
  EXPECT_EQ(img.width(), 1024);
  EXPECT_EQ(img.height(), 1024);
  EXPECT_EQ(oracle::count_components(img), 1);
  EXPECT_EQ(render_thumbnail(one), img);
  for (std::uint64_t seed = 1; seed <= 6; ++seed) {
    const auto scene = generate_random_scene(seed);
    EXPECT_EQ(oracle::count_components(render_thumbnail(scene)), scene.n_sets) << seed;
  }
}

TEST(RenderThumbnail, PngRoundTripsDimensions) {
  const auto png = encode_png(render_thumbnail(generate_scene(2, {2, 2})));
  EXPECT_EQ(png_dimensions(png), (std::pair<int, int>{1024, 1024}));
}

}  // namespace
}  // namespace countpath
