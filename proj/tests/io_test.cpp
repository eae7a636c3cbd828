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

#include <filesystem>

#include "countpath/countpath.hpp"
#include "random_instances.hpp"

namespace countpath {
namespace {

using testing::Gen;

// ---- detection files ----

TEST(DetectionFile, Examples) {
  const auto set = parse_detection_file("0 0.5 0.5 1.0 1.0 0.97\n");
  ASSERT_EQ(set.detections.size(), 1u);
  EXPECT_EQ(set.detections[0].kind, DetectionKind::Set);
  EXPECT_EQ(set.detections[0].box, BoundingBox::unit());
  EXPECT_DOUBLE_EQ(set.detections[0].confidence, 0.97);

  const auto frag = parse_detection_file("1 0.25 0.25 0.1 0.1 0.8\n");
  const auto& b = frag.detections.at(0).box;
  EXPECT_EQ(frag.detections[0].kind, DetectionKind::Fragment);
  EXPECT_NEAR(b.x_min(), 0.2, 1e-15);
  EXPECT_NEAR(b.y_min(), 0.2, 1e-15);
  EXPECT_NEAR(b.x_max(), 0.3, 1e-15);
  EXPECT_NEAR(b.y_max(), 0.3, 1e-15);
}

TEST(DetectionFile, PositionedErrors) {
  try {
    parse_detection_file("0 0.5 0.5 0.2 0.2 0.9\n2 0.5 0.5 0.1 0.1 0.5\n", "a.txt");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
    EXPECT_EQ(e.column(), 1u);
    EXPECT_NE(std::string(e.what()).find("a.txt:2:1"), std::string::npos);
  }
  try {
    parse_detection_file("\n1 0.5 zz 0.1 0.1 0.5\n", "b.txt");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
    EXPECT_EQ(e.column(), 7u);
  }
  EXPECT_THROW(parse_detection_file("1 0.5 0.5 0.1\n"), ParseError);
  EXPECT_THROW(parse_detection_file("1 0.5 0.5 0.1 0.1 0.5 7\n"), ParseError);
  EXPECT_THROW(parse_detection_file("1 0.5 0.5 -0.1 0.1 0.5\n"), ParseError);
  EXPECT_THROW(parse_detection_file("1 0.5 0.5 nan 0.1 0.5\n"), ParseError);
  EXPECT_THROW(parse_detection_file("1 1.5 1.5 0.1 0.1 0.5\n"), ParseError);
}

TEST(DetectionFile, ClampsOutOfRangeWithCounter) {
  const auto p = parse_detection_file("1 0.02 0.5 0.1 0.1 1.2\r\n\n  \n0 0.5 0.5 1.2 1.0 0.5\n");
  ASSERT_EQ(p.detections.size(), 2u);
  EXPECT_EQ(p.clamped_values, 4);  // x0 and conf; x0 and x1
  EXPECT_DOUBLE_EQ(p.detections[0].box.x_min(), 0.0);
  EXPECT_DOUBLE_EQ(p.detections[0].confidence, 1.0);
  EXPECT_EQ(p.detections[1].box, BoundingBox::unit());
}

TEST(DetectionFile, LineRoundTripIsIdentity) {
  Gen g(1);
  for (int i = 0; i < 300; ++i) {
    const auto lines = testing::random_detection_lines(g);
    const auto text = format_detection_lines(lines);
    EXPECT_EQ(parse_detection_lines(text), lines);
    EXPECT_EQ(format_detection_lines(parse_detection_lines(text)), text);
  }
}

TEST(DetectionFile, DetectionRoundTripIsClose) {
  Gen g(2);
  for (int i = 0; i < 300; ++i) {
    std::vector<Detection> dets;
    for (int k = 0; k < 5; ++k) {
      dets.push_back({k % 2 ? DetectionKind::Set : DetectionKind::Fragment, testing::random_box(g),
                      testing::unit(g), {}});
    }
    const auto back = parse_detection_file(format_detection_file(dets)).detections;
    ASSERT_EQ(back.size(), dets.size());
    for (std::size_t k = 0; k < dets.size(); ++k) {
      EXPECT_EQ(back[k].kind, dets[k].kind);
      EXPECT_NEAR(back[k].box.x_min(), dets[k].box.x_min(), 1e-12);
      EXPECT_NEAR(back[k].box.y_max(), dets[k].box.y_max(), 1e-12);
      EXPECT_EQ(back[k].confidence, dets[k].confidence);
    }
  }
}

TEST(DetectionFile, FuzzOnlyRaisesParseErrors) {
  Gen g(3);
  for (int i = 0; i < 2000; ++i) {
    const auto text = testing::fuzz_case(g);
    try {
      const auto p = parse_detection_file(text);
      for (const auto& d : p.detections) {
        EXPECT_GE(d.confidence, 0.0);
        EXPECT_LE(d.confidence, 1.0);
      }
    } catch (const ParseError&) {
    }
  }
}

// ---- classifier files ----

TEST(ClassifierFile, ParseAndClamp) {
  const auto c = parse_classifier_file("sets 2\nfragments 14\n");
  EXPECT_EQ(c.sets, ClassLabel(2));
  EXPECT_EQ(c.fragments, ClassLabel(10));
  EXPECT_THROW(parse_classifier_file("sets 0\n"), ParseError);
  EXPECT_THROW(parse_classifier_file("widgets 2\n"), ParseError);
  EXPECT_THROW(parse_classifier_file("sets\n"), ParseError);
}

TEST(ClassifierFile, RoundTrip) {
  Gen g(4);
  for (int i = 0; i < 200; ++i) {
    const auto c = testing::random_classifier(g);
    EXPECT_EQ(parse_classifier_file(format_classifier_file(c)), c);
  }
}

// ---- manifests, macro reports, rater tables ----

TEST(Manifest, ParseWithMetadataAndBlankTruths) {
  const auto m = parse_manifest(
      "#dataset_id=demo\n#split=val\nslide_id,thumbnail_path,truth_label,truth_set_count\n"
      "S1,a.png,3,2\nS2,,,\n");
  EXPECT_EQ(m.dataset_id, "demo");
  EXPECT_EQ(m.split, Split::Val);
  ASSERT_EQ(m.entries.size(), 2u);
  EXPECT_EQ(m.entries[0].truth_label, ClassLabel(3));
  EXPECT_EQ(m.entries[0].truth_set_count, 2);
  EXPECT_FALSE(m.entries[1].truth_label);
  EXPECT_EQ(m.find("S2"), &m.entries[1]);
}

TEST(Manifest, Errors) {
  const std::string header = "slide_id,thumbnail_path,truth_label,truth_set_count\n";
  EXPECT_THROW(parse_manifest(header + "S1,a,3,1\nS1,b,3,1\n"), ParseError);
  EXPECT_THROW(parse_manifest(header + "S1,a,11,1\n"), ParseError);
  EXPECT_THROW(parse_manifest(header + "S1,a,x,1\n"), ParseError);
  EXPECT_THROW(parse_manifest(header + "S1,a,3\n"), ParseError);
  EXPECT_THROW(parse_manifest("id,path\nS1,a\n"), ParseError);
  EXPECT_THROW(parse_manifest("#split=holdout\n" + header), ParseError);
}

TEST(Manifest, RoundTrip) {
  Gen g(5);
  for (int i = 0; i < 200; ++i) {
    const auto m = testing::random_manifest(g);
    EXPECT_EQ(parse_manifest(format_manifest(m)), m);
  }
}

TEST(MacroReport, Examples) {
  const auto r = parse_macro_report("slide_id,fragments,sets\nS1,3,2\nS2,14,1\n");
  ASSERT_EQ(r.entries.size(), 2u);
  EXPECT_EQ(r.entries[0], (MacroReportEntry{"S1", ClassLabel(3), 2}));
  EXPECT_EQ(r.entries[1], (MacroReportEntry{"S2", ClassLabel(10), 1}));
  EXPECT_EQ(r.warnings.size(), 1u);
  EXPECT_THROW(parse_macro_report("slide_id,fragments,sets\nS1,3,2\nS1,4,2\n"), ParseError);
  EXPECT_THROW(parse_macro_report("slide_id,fragments,sets\nS1,three,2\n"), ParseError);
  EXPECT_THROW(parse_macro_report("slide_id,fragments,sets\nS1,3,0\n"), ParseError);
}

TEST(MacroReport, RoundTrip) {
  Gen g(6);
  for (int i = 0; i < 200; ++i) {
    const auto entries = testing::random_macro(g);
    EXPECT_EQ(parse_macro_report(format_macro_report(entries)).entries, entries);
  }
}

TEST(RaterTableFile, Examples) {
  const auto t = parse_rater_table("item_id,A,B\ni1,3,4\ni2,5,5\n");
  EXPECT_EQ(t.n_items(), 2u);
  EXPECT_EQ(t.raters(), (std::vector<std::string>{"A", "B"}));
  EXPECT_EQ(t.at(0, 1), ClassLabel(4));
  try {
    parse_rater_table("item_id,A,B\ni1,3,\ni2,5,5\n", "r.csv");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
  EXPECT_THROW(parse_rater_table("item_id,A,B\ni1,3,11\ni2,5,5\n"), ParseError);
  EXPECT_THROW(parse_rater_table("item_id,A\ni1,3\ni2,5\n"), ParseError);
  EXPECT_THROW(parse_rater_table("item_id,A,B\ni1,3,3\n"), ParseError);
}

TEST(RaterTableFile, RoundTrip) {
  Gen g(7);
  for (int i = 0; i < 200; ++i) {
    const auto t = testing::random_rater_table(g);
    EXPECT_EQ(parse_rater_table(format_rater_table(t)), t);
  }
}

// ---- run records ----

TEST(RunRecord, RoundTripAndStableBytes) {
  Gen g(8);
  for (int i = 0; i < 200; ++i) {
    const auto r = testing::random_run_record(g);
    const auto text = save_run(r);
    EXPECT_EQ(save_run(r), text);
    const auto back = load_run(text);
    EXPECT_EQ(back, r);
    EXPECT_EQ(save_run(back), text);
  }
}

TEST(RunRecord, TamperAndVersionChecks) {
  Gen g(9);
  const auto text = save_run(testing::random_run_record(g));
  auto j = json::parse(text);
  auto tampered = j;
  tampered["checksum"] = "sha256:" + std::string(64, '0');
  EXPECT_THROW(load_run(tampered.dump(2)), IntegrityError);
  auto edited = j;
  edited["manifest_id"] = "other";
  EXPECT_THROW(load_run(edited.dump(2)), IntegrityError);
  auto future = j;
  future["format_version"] = 2;
  EXPECT_THROW(load_run(future.dump(2)), IntegrityError);
  auto no_version = j;
  no_version.erase("format_version");
  EXPECT_THROW(load_run(no_version.dump(2)), IntegrityError);
  EXPECT_THROW(load_run("{\n  \"run_id\": \n"), ParseError);
}

TEST(RunRecord, ChecksumIsSha256) {
  EXPECT_EQ(sha256_hex("abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(ConfigJson, RejectsUnknownAndInvalidFields) {
  EXPECT_EQ(config_from_json(json::object()), PipelineConfig{});
  EXPECT_THROW(config_from_json(json{{"tau", 0.3}}), ContractViolation);
  EXPECT_THROW(config_from_json(json{{"set_confidence_threshold", 2.0}}), ContractViolation);
  EXPECT_THROW(config_from_json(json{{"rounding", "banker"}}), ContractViolation);
  const auto c = config_from_json(json{{"fragment_overlap", 0.5}});
  EXPECT_FALSE(c.fragment_overlap.is_strict());
  EXPECT_DOUBLE_EQ(c.fragment_overlap.threshold(), 0.5);
}

// ---- QC ----

SlideVerdict verdict(const std::string& id, std::optional<int> label,
                     RejectionReason reason = RejectionReason::NonIntegerRatio) {
  SlideVerdict v;
  v.slide_id = id;
  if (label) {
    v.outcome = Accepted{ClassLabel(*label)};
  } else {
    v.outcome = Rejected{reason};
  }
  return v;
}

TEST(QcCompare, Examples) {
  const std::vector<SlideVerdict> verdicts = {verdict("A", 3), verdict("B", 4),
                                              verdict("C", std::nullopt), verdict("D", 2)};
  const std::vector<MacroReportEntry> macro = {
      {"A", ClassLabel(3), 1}, {"B", ClassLabel(3), 2}, {"C", ClassLabel(5), 1}};
  const auto qc = qc_compare(verdicts, macro);
  ASSERT_EQ(qc.size(), 4u);
  EXPECT_EQ(qc[0].status, QcStatus::Match);
  EXPECT_EQ(qc[1].status, QcStatus::Discrepancy);
  EXPECT_EQ(qc[1].predicted, 4);
  EXPECT_EQ(qc[1].reported, 3);
  EXPECT_EQ(qc[2].status, QcStatus::NeedsReview);
  EXPECT_EQ(qc[2].rejection, RejectionReason::NonIntegerRatio);
  EXPECT_EQ(qc[3].status, QcStatus::NeedsReview);
  EXPECT_TRUE(qc[3].missing_report);
  const auto t = tally(qc);
  EXPECT_EQ(t.match + t.discrepancy + t.needs_review, 4);
  EXPECT_EQ(qc_record_to_json(qc[3])["rejection_reason"], "missing_report");
}

TEST(QcCompare, CardinalityEqualsVerdicts) {
  Gen g(10);
  for (int i = 0; i < 100; ++i) {
    const auto r = testing::random_run_record(g);
    const auto macro = testing::random_macro(g);
    EXPECT_EQ(qc_compare(r.verdicts, macro).size(), r.verdicts.size());
  }
}

// ---- slide store ----

class SlideStoreTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("countpath-io-" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) +
            "-" + ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  fs::path dir_;
};

TEST_F(SlideStoreTest, WrittenSlidesGiveTheSameVerdicts) {
  for (std::uint64_t seed = 1; seed <= 60; ++seed) {
    const auto in = perturb(generate_random_scene(seed), NoiseProfile::moderate(), 4);
    write_slide_input(dir_, in);
    const auto loaded = load_slide_input(dir_, in.slide_id, PipelineMode::Hybrid).input;
    EXPECT_EQ(loaded.classifier_set_count, in.classifier_set_count);
    EXPECT_EQ(loaded.crop_fragment_detections->size(), in.crop_fragment_detections->size());
    for (auto mode : {PipelineMode::Hybrid, PipelineMode::DetectionOnly}) {
      const auto policy = rejecting_policy_for(mode);
      EXPECT_EQ(run_slide(loaded, mode, {}, policy).outcome,
                run_slide(in, mode, {}, policy).outcome);
    }
  }
}

TEST_F(SlideStoreTest, MissingFilesAreReported) {
  EXPECT_THROW(load_slide_input(dir_, "nope", PipelineMode::DetectionOnly), ParseError);
  write_file(dir_ / "x.txt", "0 0.5 0.5 0.5 0.5 0.9\n");
  EXPECT_NO_THROW(load_slide_input(dir_, "x", PipelineMode::DetectionOnly));
  EXPECT_THROW(load_slide_input(dir_, "x", PipelineMode::Hybrid), ParseError);
  write_file(dir_ / "x.cls", "sets 1\n");
  write_file(dir_ / "x.crop0.txt", "0 0.5 0.5 0.5 0.5 0.9\n");
  EXPECT_THROW(load_slide_input(dir_, "x", PipelineMode::Hybrid), ParseError);
  Manifest m;
  m.entries.push_back({"x", "", std::nullopt, std::nullopt});
  EXPECT_THROW(load_batch(m, dir_ / "missing", PipelineMode::Hybrid), ContractViolation);
}

TEST_F(SlideStoreTest, ThumbnailSizeFromPngHeader) {
  write_file(dir_ / "t.png", encode_png(Image(300, 200)));
  EXPECT_EQ(thumbnail_size(dir_ / "t.png"), (std::pair<int, int>{300, 200}));
  EXPECT_EQ(thumbnail_size(dir_ / "absent.png"), (std::pair<int, int>{1024, 1024}));
}

}  // namespace
}  // namespace countpath
