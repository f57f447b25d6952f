#include <gtest/gtest.h>

#include <random>

#include "support/fixtures.hpp"
#include "swag/core.hpp"
#include "swag/error.hpp"
#include "swag/hashing.hpp"
#include "swag/random.hpp"

namespace swag {
namespace {

TEST(Errors, NamesRoundTrip) {
  for (int i = 0; i <= static_cast<int>(Errc::io_error); ++i) {
    const auto code = static_cast<Errc>(i);
    auto back = parse_errc(to_string(code));
    ASSERT_TRUE(back.has_value()) << to_string(code);
    EXPECT_EQ(*back, code);
  }
  EXPECT_FALSE(parse_errc("NoSuchError"));
  EXPECT_STREQ(Error(Errc::rate_limited, "slow down").what(), "RateLimited: slow down");
}

TEST(Hashing, KnownDigest) {
  EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  EXPECT_EQ(sha256_u64("abc"), 0xba7816bf8f01cfeaULL);
}

TEST(Random, SeedBuilderIsLengthPrefixed) {
  EXPECT_NE(SeedBuilder(1).add("ab").add("c").seed(), SeedBuilder(1).add("a").add("bc").seed());
  EXPECT_EQ(SeedBuilder(1).add("x").add(std::uint64_t{3}).seed(),
            SeedBuilder(1).add("x").add(std::uint64_t{3}).seed());
  EXPECT_NE(SeedBuilder(1).add("x").seed(), SeedBuilder(2).add("x").seed());
}

TEST(Random, UniformIndexStaysInRangeAndCoversIt) {
  auto engine = SeedBuilder(9).engine();
  std::vector<int> seen(7, 0);
  for (int i = 0; i < 7000; ++i) {
    auto v = uniform_index(engine, 7);
    ASSERT_LT(v, 7u);
    ++seen[v];
  }
  for (int count : seen) EXPECT_NEAR(count, 1000, 150);
  EXPECT_ERRC(uniform_index(engine, 0), Errc::invalid_argument);
}

TEST(Random, ShuffleIsAPermutationAndSeeded) {
  std::vector<int> a(50), b;
  for (int i = 0; i < 50; ++i) a[i] = i;
  b = a;
  auto e1 = SeedBuilder(5).engine();
  auto e2 = SeedBuilder(5).engine();
  seeded_shuffle(a, e1);
  seeded_shuffle(b, e2);
  EXPECT_EQ(a, b);
  auto sorted = a;
  std::sort(sorted.begin(), sorted.end());
  for (int i = 0; i < 50; ++i) EXPECT_EQ(sorted[i], i);
}

TEST(StoryPrompt, RejectsBlankText) {
  EXPECT_ERRC(StoryPrompt::make("1", "   \n"), Errc::invalid_argument);
  EXPECT_EQ(StoryPrompt::make("1", "A dragon").text, "A dragon");
}

TEST(Canonicalize, SpecExamples) {
  EXPECT_EQ(canonical_label("  Add Suspense. "), "add suspense");
  EXPECT_EQ(canonical_label("\"add   plot twist\""), "add plot twist");
  EXPECT_EQ(canonical_label("\xE2\x80\x9C" "Add Humor!" "\xE2\x80\x9D"), "add humor");
  EXPECT_EQ(canonical_label("'add a cliffhanger?'"), "add a cliffhanger");
  EXPECT_EQ(canonical_label("`add\tdialogue`\n"), "add dialogue");
  EXPECT_ERRC(Action::canonicalize(" \"...\" "), Errc::empty_after_normalization);
}

TEST(Canonicalize, IsIdempotentOnRandomNoise) {
  const std::string alphabet = "aB \t\n.!?\"'`xyZ";
  std::mt19937 rng(17);
  for (int n = 0; n < 2000; ++n) {
    std::string raw;
    const auto len = rng() % 24;
    for (unsigned i = 0; i < len; ++i) raw.push_back(alphabet[rng() % alphabet.size()]);
    const auto once = canonical_label(raw);
    EXPECT_EQ(canonical_label(once), once) << "raw: [" << raw << "]";
  }
}

TEST(ActionSpace, DefaultHasThirtyDistinctLabels) {
  const auto& space = ActionSpace::default_space();
  ASSERT_EQ(space.size(), 30u);
  EXPECT_EQ(space.labels().front(), "add suspense");
  EXPECT_TRUE(space.contains(Action::canonicalize("add fantasy elements")));
  EXPECT_EQ(space.hash(), ActionSpace::from_labels(space.labels()).hash());
}

TEST(ActionSpace, ConstructionRules) {
  EXPECT_ERRC(ActionSpace::from_labels({"add suspense"}), Errc::invalid_argument);
  EXPECT_ERRC(ActionSpace::from_labels({"Add Suspense", "add suspense."}), Errc::invalid_argument);
  auto parsed = ActionSpace::parse("# custom\nadd suspense\n\n  Add Humor  # trailing\n");
  EXPECT_EQ(parsed.labels(), (std::vector<std::string>{"add suspense", "add humor"}));
  EXPECT_ERRC(parsed.without(Action::canonicalize("add humor")), Errc::invalid_argument);
  auto smaller = ActionSpace::default_space().without(Action::canonicalize("add suspense"));
  EXPECT_EQ(smaller.size(), 29u);
  EXPECT_FALSE(smaller.contains(Action::canonicalize("add suspense")));
  EXPECT_NE(smaller.hash(), ActionSpace::default_space().hash());
}

TEST(ResolveAction, AllDefaultLabelsRoundTrip) {
  const auto& space = ActionSpace::default_space();
  for (const auto& label : space.labels()) {
    auto resolved = resolve_action(label, space);
    ASSERT_TRUE(resolved) << label;
    EXPECT_EQ(resolved->label(), label);
    std::string decorated = "\"" + label + ".\"";
    decorated[1] = static_cast<char>(std::toupper(decorated[1]));
    auto again = resolve_action(decorated, space);
    ASSERT_TRUE(again) << decorated;
    EXPECT_EQ(again->label(), label);
  }
}

TEST(ResolveAction, SubstringAndAmbiguity) {
  const auto& space = ActionSpace::default_space();
  auto found = resolve_action("I would pick: add plot twist", space);
  ASSERT_TRUE(found);
  EXPECT_EQ(found->label(), "add plot twist");
  EXPECT_FALSE(resolve_action("add suspense or add humor", space));
  EXPECT_FALSE(resolve_action("write a poem", space));
  EXPECT_FALSE(resolve_action("", space));
}

TEST(StoryState, JoinsParagraphsWithBlankLine) {
  StoryState state{StoryPrompt::make("1", "p"), {"one", "two"}, {}};
  EXPECT_EQ(state.story_text(), "one\n\ntwo");
}

TEST(PreferenceRecord, Validation) {
  const auto& space = ActionSpace::default_space();
  PreferenceRecord ok{StoryPrompt::make("1", "p"), "para", space,
                      Action::canonicalize("add suspense"), Action::canonicalize("add humor"), "t"};
  EXPECT_NO_THROW(ok.validate());
  auto same = ok;
  same.rejected = same.chosen;
  EXPECT_ERRC(same.validate(), Errc::invalid_argument);
  auto outside = ok;
  outside.chosen = Action::canonicalize("add dragons");
  EXPECT_ERRC(outside.validate(), Errc::invalid_argument);
}

TEST(StoryMode, Names) {
  EXPECT_EQ(parse_story_mode("random-ad"), StoryMode::random_ad);
  EXPECT_EQ(to_string(parse_story_mode(to_string(StoryMode::e2e))), "e2e");
  EXPECT_ERRC(parse_story_mode("sequel"), Errc::invalid_argument);
}

}  // namespace
}  // namespace swag
