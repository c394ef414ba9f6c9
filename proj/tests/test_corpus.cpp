#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "sld/corpus.hpp"
#include "sld/error.hpp"
#include "sld/synth.hpp"

using namespace sld;

namespace {

std::vector<Example> tiny_corpus() {
  Example a{"1", "t one", "a b", {}};
  Example b{"2", "t two", "a", {}};
  return {a, b};
}

std::string temp_dir(const std::string& tag) {
  auto p = std::filesystem::temp_directory_path() / ("sldtest-" + tag);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p.string();
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in);
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

const char* kGrammar = R"JSON({
  "mode": "sentence",
  "train_count": 30,
  "valid_count": 5,
  "segments_min": 2,
  "segments_max": 3,
  "slots": {
    "name": ["mia", "leo", "ada"],
    "place": ["park", "lake", "shop"]
  },
  "templates": [
    {
      "title": "{name} at the {place}",
      "sentences": [
        "{name} went to the {place} .",
        "{name} liked the {place} very much .",
        "then {name} walked home ."
      ],
      "paraphrases": [
        "{name} traveled to the {place} .",
        "{name} enjoyed the {place} a lot .",
        "afterwards {name} strolled home ."
      ]
    }
  ],
  "ood": {
    "templates": ["the market closed higher today .", "rain is expected on tuesday ."],
    "count": 12
  }
})JSON";

}  // namespace

TEST_CASE("build_vocab fixes reserved ids and orders by count then token") {
  Vocab v = build_vocab(tiny_corpus(), 1);
  CHECK(v.id_to_token[0] == "<pad>");
  CHECK(v.id_to_token[1] == "<bos>");
  CHECK(v.id_to_token[2] == "<eos>");
  CHECK(v.id_to_token[3] == "<unk>");
  CHECK(v.id_to_token[4] == "<empty>");
  // counts: a=2, t=2, b=1, one=1, two=1; ties break lexicographically
  CHECK(v.id("a") == 5);
  CHECK(v.id("t") == 6);
  CHECK(v.id("b") == 7);
  CHECK(v.id("one") == 8);
  CHECK(v.id("two") == 9);

  Vocab v2 = build_vocab(tiny_corpus(), 2);
  CHECK(v2.id("a") == 5);
  CHECK(v2.id("b") == Vocab::kUnk);

  CHECK_THROWS_AS(build_vocab({}, 1), ValidationError);
}

TEST_CASE("tokenize round trip equals normalization") {
  const std::string s = "  Hello,   world!  it's  fine ";
  CHECK(normalize_text(s) == "Hello , world ! it's fine");
  CHECK(detokenize(tokenize(s)) == normalize_text(s));
  CHECK(detokenize(tokenize(normalize_text(s))) == normalize_text(s));
}

TEST_CASE("segment_output sentence mode") {
  auto segs = segment_output("A. B? C!", SegmentMode::kSentence);
  REQUIRE(segs.size() == 3);
  CHECK(segs[0] == "A .");
  CHECK(segs[1] == "B ?");
  CHECK(segs[2] == "C !");

  auto one = segment_output("no punct", SegmentMode::kSentence);
  REQUIRE(one.size() == 1);
  CHECK(one[0] == "no punct");

  // joining reproduces the normalized text
  const std::string text = "mia went home. then she slept!  done?";
  auto parts = segment_output(text, SegmentMode::kSentence);
  std::string joined;
  for (size_t i = 0; i < parts.size(); ++i) {
    if (i) joined += " ";
    joined += parts[i];
  }
  CHECK(joined == normalize_text(text));
}

TEST_CASE("segment_output utterance mode") {
  auto segs = segment_output("#P1#: hi\n#P2#: yo", SegmentMode::kUtterance);
  REQUIRE(segs.size() == 2);
  CHECK(segs[0] == "# P1 # : hi");
  CHECK(segs[1] == "# P2 # : yo");

  // continuation lines without a tag stay in the current segment
  auto cont = segment_output("#A#: one\ntwo\n#B#: three", SegmentMode::kUtterance);
  REQUIRE(cont.size() == 2);
  CHECK(cont[0] == "# A # : one two");
  CHECK(cont[1] == "# B # : three");
}

TEST_CASE("collate_segments shapes, flags and truncation") {
  Vocab v = build_vocab(tiny_corpus(), 1);

  SUBCASE("padding with empty slots") {
    SegmentBatch b = collate_segments({"a b", "a"}, 4, 8, v);
    CHECK(b.n == 4);
    CHECK(b.real == std::vector<uint8_t>{1, 1, 0, 0});
    CHECK(b.slot_tokens(2) == empty_segment_ids());
    CHECK(b.slot_tokens(3) == empty_segment_ids());
    // rows end with EOS and are PAD-filled
    CHECK(b.row(0)[0] == Vocab::kBos);
    CHECK(b.row(0)[b.len[0] - 1] == Vocab::kEos);
    for (int j = b.len[2]; j < b.m_seg; ++j) CHECK(b.row(2)[j] == Vocab::kPad);
  }

  SUBCASE("more segments than slots keeps the first n") {
    SegmentBatch b = collate_segments({"a", "b", "a b", "a", "b", "a"}, 4, 8, v);
    CHECK(b.real == std::vector<uint8_t>{1, 1, 1, 1});
    CHECK(b.slot_tokens(0) == std::vector<int>{Vocab::kBos, v.id("a"), Vocab::kEos});
  }

  SUBCASE("long segment is tail-truncated with EOS forced last") {
    std::string twenty;
    for (int i = 0; i < 20; ++i) twenty += (i ? " a" : "a");
    SegmentBatch b = collate_segments({twenty}, 1, 16, v);
    CHECK(b.len[0] == 16);
    const auto toks = b.slot_tokens(0);
    CHECK(toks.size() == 16);
    CHECK(toks.front() == Vocab::kBos);
    CHECK(toks.back() == Vocab::kEos);
    int words = 0;
    for (int t : toks) {
      if (t >= Vocab::kReserved) ++words;
    }
    CHECK(words == 14);
  }

  CHECK_THROWS_AS(collate_segments({"a"}, 0, 8, v), ValidationError);
  CHECK_THROWS_AS(collate_segments({"a"}, 1, 2, v), ValidationError);
}

TEST_CASE("substitute_tokens") {
  Vocab v = build_vocab(tiny_corpus(), 1);
  std::vector<int> ids = segment_token_ids(v, "a b one two a", 16);

  SUBCASE("p = 0 is the identity") {
    Rng rng(1, "sub");
    CHECK(substitute_tokens(ids, 0.0, rng, v) == ids);
  }

  SUBCASE("p = 1 replaces every non-reserved position and only those") {
    Rng rng(1, "sub");
    auto out = substitute_tokens(ids, 1.0, rng, v);
    REQUIRE(out.size() == ids.size());
    CHECK(out.front() == Vocab::kBos);
    CHECK(out.back() == Vocab::kEos);
    for (size_t i = 0; i < out.size(); ++i) {
      if (ids[i] >= Vocab::kReserved) CHECK(out[i] >= Vocab::kReserved);
    }
  }

  SUBCASE("replacement rate matches p statistically") {
    Rng rng(7, "sub-stat");
    const double p = 0.05;
    const int positions = 10000;
    std::vector<int> big(positions, v.id("a"));
    auto out = substitute_tokens(big, p, rng, v);
    int replaced = 0;
    for (int i = 0; i < positions; ++i) {
      if (out[(size_t)i] != big[(size_t)i]) ++replaced;
    }
    // replaced-count expectation p*N, minus collisions where the uniform
    // redraw picks the original token (probability 1/|open vocab|)
    const double open = (double)(v.size() - Vocab::kReserved);
    const double eff = p * (1.0 - 1.0 / open);
    const double sigma = std::sqrt(positions * eff * (1 - eff));
    CHECK(std::abs(replaced - positions * eff) < 3 * sigma);
  }

  SUBCASE("reproducible under one seed") {
    Rng a(9, "s"), b(9, "s");
    CHECK(substitute_tokens(ids, 0.5, a, v) == substitute_tokens(ids, 0.5, b, v));
  }

  Rng rng(1, "sub");
  CHECK_THROWS_AS(substitute_tokens(ids, 1.5, rng, v), ValidationError);
}

TEST_CASE("contrastive triples") {
  std::unordered_map<std::string, std::string> table{{"a b", "b a"}};
  std::vector<std::string> pool{"x y", "y z"};

  SUBCASE("table hit returns the table paraphrase verbatim") {
    Rng rng(1, "t");
    auto t = make_contrastive_triple("a b", table, pool, rng);
    CHECK(t.positive == "b a");
  }

  SUBCASE("rule-based fallback is deterministic") {
    Rng a(5, "t"), b(5, "t");
    auto t1 = make_contrastive_triple("the big happy dog walked", {}, pool, a);
    auto t2 = make_contrastive_triple("the big happy dog walked", {}, pool, b);
    CHECK(t1.positive == t2.positive);
    CHECK(t1.positive == "the large glad dog strolled");  // synonym table rewrite
  }

  SUBCASE("negative never equals the anchor on disjoint pools") {
    for (int s = 0; s < 1000; ++s) {
      Rng rng((uint64_t)s, "neg");
      auto t = make_contrastive_triple("a b", table, pool, rng);
      CHECK(t.negative != t.anchor);
    }
  }

  SUBCASE("anchor present in the pool is skipped") {
    std::vector<std::string> pool2{"a b", "c d"};
    for (int s = 0; s < 50; ++s) {
      Rng rng((uint64_t)s, "neg2");
      auto t = make_contrastive_triple("a b", table, pool2, rng);
      CHECK(t.negative == "c d");
    }
  }

  Rng rng(1, "t");
  CHECK_THROWS_AS(make_contrastive_triple("a", table, {}, rng), ValidationError);
}

TEST_CASE("synthetic corpus generation") {
  const std::string dir = temp_dir("synth");
  std::ofstream(dir + "/grammar.json") << kGrammar;
  GrammarSpec g = load_grammar(dir + "/grammar.json");

  SUBCASE("deterministic byte-identical outputs") {
    auto f1 = generate_synthetic_corpus(g, 123, 16, dir + "/a");
    auto f2 = generate_synthetic_corpus(g, 123, 16, dir + "/b");
    CHECK(slurp(f1.train) == slurp(f2.train));
    CHECK(slurp(f1.valid) == slurp(f2.valid));
    CHECK(slurp(f1.paraphrases) == slurp(f2.paraphrases));
    CHECK(slurp(f1.ood) == slurp(f2.ood));
    auto f3 = generate_synthetic_corpus(g, 124, 16, dir + "/c");
    CHECK(slurp(f1.train) != slurp(f3.train));
  }

  SUBCASE("counts and shapes match the spec file") {
    auto files = generate_synthetic_corpus(g, 9, 16, dir + "/d");
    auto train = load_corpus_jsonl(files.train);
    auto valid = load_corpus_jsonl(files.valid);
    CHECK(train.size() == 30);
    CHECK(valid.size() == 5);
    for (const auto& ex : train) {
      CHECK(ex.segments.size() >= 2);
      CHECK(ex.segments.size() <= 3);
      std::string joined;
      for (size_t i = 0; i < ex.segments.size(); ++i) {
        if (i) joined += " ";
        joined += ex.segments[i];
      }
      CHECK(joined == ex.output_text);
    }
    CHECK(load_ood_pool(files.ood).size() == 12);
  }

  SUBCASE("generated vocabulary stays inside the grammar inventory") {
    auto files = generate_synthetic_corpus(g, 9, 16, dir + "/e");
    auto train = load_corpus_jsonl(files.train);
    std::set<std::string> inventory;
    for (const auto& t : grammar_token_inventory(g)) inventory.insert(t);
    for (const auto& ex : train) {
      for (const auto& tok : tokenize(ex.input_text)) CHECK(inventory.count(tok) == 1);
      for (const auto& tok : tokenize(ex.output_text)) CHECK(inventory.count(tok) == 1);
    }
  }

  SUBCASE("single template and filler yields one distinct example") {
    GrammarSpec g1;
    g1.mode = SegmentMode::kSentence;
    g1.train_count = 7;
    g1.valid_count = 0;
    g1.segments_min = 2;
    g1.segments_max = 2;
    g1.slots = {{"x", {"only"}}};
    GrammarTemplate t;
    t.title = "title {x}";
    t.sentences = {"first {x} .", "second {x} ."};
    g1.templates = {t};
    auto files = generate_synthetic_corpus(g1, 1, 16, dir + "/f");
    auto train = load_corpus_jsonl(files.train);
    REQUIRE(train.size() == 7);
    for (const auto& ex : train) {
      CHECK(ex.input_text == train[0].input_text);
      CHECK(ex.output_text == train[0].output_text);
    }
  }

  SUBCASE("over-long segments are rejected against m_seg") {
    CHECK_THROWS_AS(generate_synthetic_corpus(g, 9, 5, dir + "/g"), ValidationError);
  }
}

TEST_CASE("corpus jsonl round trip") {
  const std::string dir = temp_dir("jsonl");
  std::vector<Example> ex = tiny_corpus();
  ex[0].segments = {"a b"};
  save_corpus_jsonl(dir + "/c.jsonl", ex);
  auto back = load_corpus_jsonl(dir + "/c.jsonl");
  REQUIRE(back.size() == 2);
  CHECK(back[0].id == "1");
  CHECK(back[0].input_text == "t one");
  CHECK(back[0].segments == std::vector<std::string>{"a b"});
  CHECK(back[1].segments.empty());
  CHECK_THROWS_AS(load_corpus_jsonl(dir + "/missing.jsonl"), ValidationError);
}
