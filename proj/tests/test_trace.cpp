#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "helpers.hpp"
#include "moecap/error.hpp"
#include "moecap/trace.hpp"

using namespace moecap;
using testing_util::toy_descriptor;

namespace {

const char* kSample =
    "# model: toy\n"
    "# recorded on a test rig\n"
    "0,decode,1,1,0.01,0,0:3;1:5\n"
    "1,prefill,2,8,0.02,4096,0:f;1:f\n";

}  // namespace

TEST(ExpertSet, HexConvention) {
  auto e = ExpertSet::from_hex("0001");
  EXPECT_EQ(e.capacity(), 16u);
  EXPECT_TRUE(e.test(0));
  EXPECT_EQ(e.count(), 1u);
  e = ExpertSet::from_hex("80");
  EXPECT_TRUE(e.test(7));
  EXPECT_EQ(e.max_index(), 7);
  EXPECT_EQ(e.to_hex(), "80");
  EXPECT_THROW(ExpertSet::from_hex("0g"), std::invalid_argument);
}

TEST(ExpertSet, SubsetAndUnion) {
  auto a = ExpertSet::from_hex("03");
  auto b = ExpertSet::from_hex("07");
  EXPECT_TRUE(a.is_subset_of(b));
  EXPECT_FALSE(b.is_subset_of(a));
  a |= ExpertSet::from_hex("10");
  EXPECT_EQ(a.to_hex(), "13");
  ExpertSet c(8);
  EXPECT_THROW(c.set(8), std::out_of_range);
}

TEST(Trace, ParseKeepsHeaderAndFields) {
  const auto s = parse_activation_sheet(std::string_view(kSample));
  EXPECT_EQ(s.model_name, "toy");
  ASSERT_EQ(s.header_comments.size(), 1u);
  EXPECT_EQ(s.header_comments[0], "# recorded on a test rig");
  ASSERT_EQ(s.passes.size(), 2u);
  EXPECT_EQ(s.passes[1].phase, Phase::prefill);
  EXPECT_EQ(s.passes[1].tokens_processed, 8u);
  EXPECT_EQ(s.passes[1].kv_bytes_read, 4096u);
  EXPECT_EQ(s.passes[0].layer(1)->count(), 2u);
  EXPECT_NO_THROW(validate(s, toy_descriptor()));
}

TEST(Trace, RoundTripIsByteStable) {
  const auto s = parse_activation_sheet(std::string_view(kSample));
  const auto text = serialize_activation_sheet(s);
  EXPECT_EQ(text, kSample);
  EXPECT_EQ(serialize_activation_sheet(parse_activation_sheet(std::string_view(text))), text);
}

TEST(Trace, RandomRoundTrip) {
  std::mt19937_64 rng(7);
  const auto d = toy_descriptor();
  for (int i = 0; i < 50; ++i) {
    const auto s = testing_util::random_sheet(d, rng, 20);
    const auto text = serialize_activation_sheet(s);
    EXPECT_EQ(serialize_activation_sheet(parse_activation_sheet(std::string_view(text))), text);
  }
}

TEST(Trace, ParseErrorsNameTheLine) {
  const std::string bad = "# model: toy\n0,decode,1,1,0.01,0,0:3;1:5\n1,decode,1,1,oops,0,0:3;1:5\n";
  try {
    parse_activation_sheet(std::string_view(bad));
    FAIL();
  } catch (const TraceError& e) {
    EXPECT_EQ(e.line(), 3u);
    EXPECT_EQ(e.pass_id(), 1);
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos);
  }
}

TEST(Trace, RejectsStructuralProblems) {
  auto expect_error = [](const std::string& text) {
    EXPECT_THROW(parse_activation_sheet(std::string_view(text)), TraceError) << text;
  };
  expect_error("0,decode,1,1,0.01,0,0:3;1:5\n");                              // no model directive
  expect_error("# model: toy\n");                                              // no passes
  expect_error("# model: toy\n0,decode,1,1,0.01,0\n");                         // missing field
  expect_error("# model: toy\n0,decode,1,1,0,0,0:3;1:5\n");                    // zero latency
  expect_error("# model: toy\n0,decode,2,1,0.01,0,0:3;1:5\n");                 // decode tokens != batch
  expect_error("# model: toy\n0,prefill,4,2,0.01,0,0:3;1:5\n");                // prefill tokens < batch
  expect_error("# model: toy\n0,decode,1,1,0.01,0,1:3;0:5\n");                 // descending layers
  expect_error("# model: toy\n0,decode,1,1,0.01,0,0:3;1:5\n1,decode,1,1,0.01,0,0:03;1:05\n");  // width change
  expect_error("# model: toy\n0,sideways,1,1,0.01,0,0:3;1:5\n");
}

TEST(Trace, ValidationAgainstDescriptor) {
  const auto d = toy_descriptor();
  auto check = [&](const std::string& text) {
    const auto s = parse_activation_sheet(std::string_view(text));
    EXPECT_THROW(validate(s, d), TraceError) << text;
  };
  check("# model: other\n0,decode,1,1,0.01,0,0:3;1:5\n");   // wrong model
  check("# model: toy\n0,decode,1,1,0.01,0,0:3\n");         // missing layer
  check("# model: toy\n0,decode,1,1,0.01,0,0:3;2:3\n");     // layer out of range
  check("# model: toy\n0,decode,1,1,0.01,0,0:13;1:05\n");    // expert 4 out of range
  check("# model: toy\n0,decode,1,1,0.01,0,0:1;1:5\n");     // fewer than top_k
  check("# model: toy\n0,decode,1,1,0.01,0,0:7;1:5\n");     // more than tokens x top_k
}

TEST(Trace, ActivatedParamsAndFraction) {
  const auto d = toy_descriptor();
  const auto s = parse_activation_sheet(std::string_view(kSample));
  // embed + 2 x (attn + router) + 4 routed experts
  EXPECT_EQ(activated_params(s.passes[0], d), 1'000'000u + 2 * 2'010'000u + 4 * 1'000'000u);
  EXPECT_EQ(activated_params(s.passes[1], d), d.total_params);
  const auto f = activated_fraction(s, d);
  EXPECT_DOUBLE_EQ(f.per_pass[1], 1.0);
  EXPECT_DOUBLE_EQ(f.per_pass_expert_only[0], 0.5);
  EXPECT_DOUBLE_EQ(f.mean_expert_only, 0.75);
}

TEST(Trace, ShippedSampleLoads) {
  const auto d = load_model_descriptor_file(testing_util::source_path("models/toy-moe.json"));
  const auto s = load_activation_sheet_file(testing_util::source_path("traces/toy-sample.trace"), d);
  EXPECT_EQ(s.passes.size(), 5u);
  EXPECT_EQ(s.expert_slots, 4u);
}
