#include <doctest.h>

#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "metric_cases.hpp"
#include "sld/commands.hpp"
#include "sld/error.hpp"
#include "sld/metrics.hpp"

using namespace sld;

namespace {

std::string temp_dir(const std::string& tag) {
  auto p = std::filesystem::temp_directory_path() / ("sldcli-" + tag);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p.string();
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in);
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path);
  REQUIRE(out);
  out << content;
}

const char* kTinyGrammar = R"JSON({
  "mode": "sentence",
  "train_count": 12,
  "valid_count": 4,
  "segments_min": 2,
  "segments_max": 3,
  "slots": {
    "name": ["mia", "leo"],
    "place": ["park", "lake"]
  },
  "templates": [
    {
      "title": "{name} at the {place}",
      "sentences": [
        "{name} went to the {place} .",
        "{name} liked the {place} .",
        "then {name} walked home ."
      ],
      "paraphrases": [
        "{name} traveled to the {place} .",
        "{name} enjoyed the {place} .",
        "afterwards {name} strolled home ."
      ]
    }
  ],
  "ood": {
    "templates": ["the market closed higher today .", "rain is expected tuesday ."],
    "count": 8
  }
})JSON";

// Small-but-working training shapes for command-level tests.
std::string tiny_config_text(const std::string& corpus_dir, const std::string& ckpt_dir,
                             int s1_epochs, int s2_epochs) {
  std::ostringstream os;
  os << "h_lm = 16\nh_rep = 4\nk = 2\nn = 3\nm_seg = 12\nm_ctx = 8\n"
     << "enc_layers = 1\ndec_layers = 1\nheads = 2\nffn_mult = 2\n"
     << "d_model = 16\nden_layers = 1\nden_heads = 2\n"
     << "lambda1 = 0.1\nlambda2 = 0.1\ntau = 0.05\neps_adv = 1.0\np_sub = 0.05\n"
     << "s1_lr = 0.002\ns1_epochs = " << s1_epochs << "\ns1_batch = 8\n"
     << "T = 6\nbeta_min = 0.001\nbeta_max = 0.2\n"
     << "lambda3 = 0.1\nlambda4 = 0.1\np_uncond = 0.1\nguidance_w = 2.0\n"
     << "s2_lr = 0.002\ns2_epochs = " << s2_epochs << "\ns2_batch = 4\n"
     << "seed = 11\nmode = sentence\n"
     << "corpus_dir = " << corpus_dir << "\nckpt_dir = " << ckpt_dir << "\n";
  return os.str();
}

}  // namespace

TEST_CASE("config parsing and validation") {
  const std::string dir = temp_dir("cfg");

  SUBCASE("defaults round-trip through a file") {
    write_file(dir + "/ok.cfg", "h_lm = 32\nheads = 4\nseed = 7\n");
    Config c = Config::load(dir + "/ok.cfg");
    CHECK(c.h_lm == 32);
    CHECK(c.seed == 7);
    CHECK(c.h_rep == 16);  // untouched default
  }

  SUBCASE("unknown keys are rejected by name") {
    write_file(dir + "/bad.cfg", "h_lmx = 32\n");
    CHECK_THROWS_WITH(Config::load(dir + "/bad.cfg"), doctest::Contains("h_lmx"));
  }

  SUBCASE("out-of-range fields are rejected by name") {
    write_file(dir + "/bad2.cfg", "tau = 0\n");
    CHECK_THROWS_WITH(Config::load(dir + "/bad2.cfg"), doctest::Contains("tau"));
    write_file(dir + "/bad3.cfg", "heads = 3\n");  // does not divide h_lm = 64
    CHECK_THROWS_WITH(Config::load(dir + "/bad3.cfg"), doctest::Contains("heads"));
    write_file(dir + "/bad4.cfg", "p_uncond = 1.0\n");
    CHECK_THROWS_WITH(Config::load(dir + "/bad4.cfg"), doctest::Contains("p_uncond"));
    write_file(dir + "/bad5.cfg", "mode = prose\n");
    CHECK_THROWS_WITH(Config::load(dir + "/bad5.cfg"), doctest::Contains("mode"));
  }

  SUBCASE("fingerprint tracks hyperparameters, not paths") {
    Config a;
    Config b;
    b.corpus_dir = "elsewhere";
    CHECK(a.fingerprint() == b.fingerprint());
    b.tau = 0.06;
    CHECK(a.fingerprint() != b.fingerprint());
  }
}

TEST_CASE("checkpoint round trip is bit exact") {
  const std::string dir = temp_dir("ckpt");
  ParamStore ps;
  Rng rng(3, "ck");
  ps.create_normal("enc.w", {4, 3}, rng, 0.5);
  ps.create_normal("dec.w", {2, 5}, rng, 0.5);
  ps.set_frozen("dec.w", true);
  Vocab v = Vocab::build_from_counts({{"tok", 2}, {"other", 1}}, 1);

  Standardizer st;
  st.latent_len = 2;
  st.h_rep = 3;
  st.mean = {(Real)0.1, (Real)0.2, (Real)0.3, (Real)0.4, (Real)0.5, (Real)0.6};
  st.stddev = {(Real)1, (Real)2, (Real)3, (Real)4, (Real)5, (Real)6};
  CheckpointExtras extras;
  extras.standardizer = st;
  extras.schedule = build_schedule(5, 0.01, 0.3);

  const std::string path = dir + "/m.ckpt";
  save_checkpoint(path, ps, v, 12345, extras);

  LoadedCheckpoint ck = read_checkpoint(path);
  CHECK(ck.version == 1);
  CHECK(ck.config_fingerprint == 12345);
  CHECK(ck.vocab.id_to_token == v.id_to_token);
  REQUIRE(ck.entries.size() == 2);
  CHECK(ck.entries[0].path == "enc.w");
  CHECK(ck.entries[1].frozen);
  REQUIRE(ck.extras.standardizer.has_value());
  CHECK(ck.extras.standardizer->mean == st.mean);
  REQUIRE(ck.extras.schedule.has_value());
  CHECK(ck.extras.schedule->T == 5);

  // bit-exact parameter recovery
  ParamStore ps2;
  ps2.create("enc.w", {4, 3});
  ps2.create("dec.w", {2, 5});
  apply_checkpoint(ck, ps2);
  CHECK(ps2.get("enc.w").values() == ps.get("enc.w").values());
  CHECK(ps2.get("dec.w").values() == ps.get("dec.w").values());
  CHECK(ps2.values_hash() == ps.values_hash());

  // save(load(save)) is byte-identical
  save_checkpoint(dir + "/m2.ckpt", ps2, ck.vocab, 12345, ck.extras);
  CHECK(slurp(path) == slurp(dir + "/m2.ckpt"));

  SUBCASE("fingerprint guard honours --force") {
    CHECK_THROWS_AS(require_fingerprint(ck, 999, false, "test"), ValidationError);
    CHECK_NOTHROW(require_fingerprint(ck, 999, true, "test"));
    CHECK_NOTHROW(require_fingerprint(ck, 12345, false, "test"));
  }

  SUBCASE("manifest mismatches are rejected") {
    ParamStore ps3;
    ps3.create("enc.w", {4, 3});
    ps3.create("dec.wrong", {2, 5});
    CHECK_THROWS_AS(apply_checkpoint(ck, ps3), ValidationError);
    ParamStore ps4;
    ps4.create("enc.w", {3, 4});
    ps4.create("dec.w", {2, 5});
    CHECK_THROWS_AS(apply_checkpoint(ck, ps4), ValidationError);
  }

  SUBCASE("bad magic is rejected") {
    write_file(dir + "/junk.ckpt", "NOPE....");
    CHECK_THROWS_AS(read_checkpoint(dir + "/junk.ckpt"), ValidationError);
  }
}

TEST_CASE("metric oracles reproduce hand-computed cases") {
  for (const auto& c : metric_cases::bleu_cases()) {
    INFO("bleu case ", c.name);
    CHECK(bleu_corpus(c.cands, c.refs) == doctest::Approx(c.expected).epsilon(1e-9));
  }
  for (const auto& c : metric_cases::rouge_cases()) {
    INFO("rouge case ", c.name);
    CHECK(rouge_l_f1(c.cand, c.ref) == doctest::Approx(c.expected).epsilon(1e-9));
  }
  CHECK(metric_cases::bleu_cases().size() + metric_cases::rouge_cases().size() >= 10);
}

TEST_CASE("full command pipeline on a tiny corpus") {
  const std::string root = temp_dir("pipe");
  write_file(root + "/grammar.json", kTinyGrammar);

  const std::string corpus_dir = root + "/corpus";
  const std::string ckpt_dir = root + "/ckpt";
  write_file(root + "/run.cfg", tiny_config_text(corpus_dir, ckpt_dir, 2, 2));
  Config cfg = Config::load(root + "/run.cfg");

  cmd_gen_corpus(cfg, root + "/grammar.json", corpus_dir);
  REQUIRE(std::filesystem::exists(corpus_dir + "/train.jsonl"));

  cmd_train_repr(cfg);
  REQUIRE(std::filesystem::exists(ckpt_dir + "/stage1.ckpt"));
  REQUIRE(std::filesystem::exists(ckpt_dir + "/stage1_metrics.jsonl"));

  SUBCASE("resume extends the epoch counter in the metrics log") {
    const std::string before = slurp(ckpt_dir + "/stage1_metrics.jsonl");
    CHECK(before.find("\"epoch\":1") != std::string::npos);
    CHECK(before.find("\"epoch\":2") != std::string::npos);
    cmd_train_repr(cfg, /*resume=*/true);
    const std::string after = slurp(ckpt_dir + "/stage1_metrics.jsonl");
    CHECK(after.find("\"epoch\":3") != std::string::npos);
    CHECK(after.find("\"epoch\":4") != std::string::npos);
  }

  SUBCASE("stage-2 training, generation and eval") {
    cmd_train_diff(cfg, ckpt_dir + "/stage1.ckpt");
    REQUIRE(std::filesystem::exists(ckpt_dir + "/stage2.ckpt"));

    // generation determinism and the output contract
    GenerateOptions gopt;
    gopt.input_text = "mia at the park";
    gopt.seed = 5;
    gopt.out_path = root + "/gen1.jsonl";
    cmd_generate(cfg, ckpt_dir, gopt);
    gopt.out_path = root + "/gen2.jsonl";
    cmd_generate(cfg, ckpt_dir, gopt);
    CHECK(slurp(root + "/gen1.jsonl") == slurp(root + "/gen2.jsonl"));

    const std::string rec = slurp(root + "/gen1.jsonl");
    CHECK(rec.find("\"input\"") != std::string::npos);
    CHECK(rec.find("\"output\"") != std::string::npos);
    CHECK(rec.find("\"segments\"") != std::string::npos);

    // eval: aggregate equals the recomputed mean of per-example records
    EvalSummary sum = cmd_eval(cfg, ckpt_dir, corpus_dir + "/valid.jsonl", root + "/eval.jsonl");
    CHECK(sum.examples == 4);
    std::ifstream in(root + "/eval.jsonl");
    REQUIRE(in);
    std::string line;
    double bleu_acc = 0, rouge_acc = 0;
    int rows = 0;
    bool saw_summary = false;
    while (std::getline(in, line)) {
      auto j = nlohmann::json::parse(line);
      if (j.contains("summary")) {
        saw_summary = true;
        CHECK(j["bleu"].get<double>() == doctest::Approx(bleu_acc / rows).epsilon(1e-12));
        CHECK(j["rouge_l"].get<double>() == doctest::Approx(rouge_acc / rows).epsilon(1e-12));
      } else {
        bleu_acc += j["bleu"].get<double>();
        rouge_acc += j["rouge_l"].get<double>();
        ++rows;
      }
    }
    CHECK(saw_summary);
    CHECK(rows == 4);

    // inspect: trajectory grid and the zero-noise reduction
    InspectOptions iopt;
    iopt.mode = "trajectory";
    iopt.segment = "mia went to the park .";
    iopt.out_path = root + "/traj.jsonl";
    cmd_inspect(cfg, ckpt_dir, iopt);
    {
      std::ifstream tin(root + "/traj.jsonl");
      REQUIRE(tin);
      std::vector<double> ratios;
      std::string row0_text;
      while (std::getline(tin, line)) {
        auto j = nlohmann::json::parse(line);
        ratios.push_back(j["ratio"].get<double>());
        if (ratios.size() == 1) row0_text = j["text"].get<std::string>();
      }
      CHECK(ratios == noise_ratio_grid());
      // ratio 0.00 decodes identically to the plain round trip
      Stage1Bundle s1 = load_stage1(cfg, ckpt_dir + "/stage1.ckpt", false);
      Tensor z = encode_segment(s1.model, segment_token_ids(s1.vocab, iopt.segment, cfg.m_seg));
      DecodedSlot slot = decode_latent(s1.model, z, s1.vocab);
      CHECK(row0_text == slot.text);
    }

    // inspect: projection row count equals the input segment count
    write_file(root + "/segs.txt", "mia went to the park .\nleo liked the lake .\n");
    InspectOptions popt;
    popt.mode = "projection";
    popt.input_file = root + "/segs.txt";
    popt.out_path = root + "/proj.csv";
    Config cfg_noaux = cfg;
    cfg_noaux.corpus_dir = root + "/nowhere";  // no paraphrase/OOD side files
    cmd_inspect(cfg_noaux, ckpt_dir, popt);
    {
      std::ifstream pin(root + "/proj.csv");
      REQUIRE(pin);
      std::getline(pin, line);
      CHECK(line == "id,pc1,pc2,label");
      int rows2 = 0;
      while (std::getline(pin, line)) {
        if (!line.empty()) ++rows2;
      }
      CHECK(rows2 == 2);
    }

    // with paraphrases and OOD pool available, all three label groups appear
    cmd_inspect(cfg, ckpt_dir, popt);
    {
      const std::string csv = slurp(root + "/proj.csv");
      CHECK(csv.find("anchor") != std::string::npos);
      CHECK(csv.find("positive") != std::string::npos);
      CHECK(csv.find("negative") != std::string::npos);
    }
  }

  SUBCASE("fingerprint mismatch is rejected unless forced") {
    Config other = cfg;
    other.tau = 0.06;
    CHECK_THROWS_AS(load_stage1(other, ckpt_dir + "/stage1.ckpt", false), ValidationError);
    CHECK_NOTHROW(load_stage1(other, ckpt_dir + "/stage1.ckpt", true));
  }

  SUBCASE("missing checkpoints are a validation error") {
    GenerateOptions gopt;
    gopt.input_text = "x";
    CHECK_THROWS_AS(cmd_generate(cfg, root + "/empty", gopt), ValidationError);
  }
}

TEST_CASE("two identical pipeline runs produce identical logs and outputs") {
  const std::string root = temp_dir("det");
  write_file(root + "/grammar.json", kTinyGrammar);

  auto run = [&](const std::string& tag) {
    const std::string corpus_dir = root + "/" + tag + "/corpus";
    const std::string ckpt_dir = root + "/" + tag + "/ckpt";
    std::filesystem::create_directories(root + "/" + tag);
    write_file(root + "/" + tag + "/run.cfg", tiny_config_text(corpus_dir, ckpt_dir, 1, 1));
    Config cfg = Config::load(root + "/" + tag + "/run.cfg");
    cmd_gen_corpus(cfg, root + "/grammar.json", corpus_dir);
    cmd_train_repr(cfg);
    cmd_train_diff(cfg, ckpt_dir + "/stage1.ckpt");
    cmd_eval(cfg, ckpt_dir, corpus_dir + "/valid.jsonl", root + "/" + tag + "/eval.jsonl");
    return std::tuple(slurp(corpus_dir + "/train.jsonl"), slurp(ckpt_dir + "/stage1_metrics.jsonl"),
                      slurp(ckpt_dir + "/stage2_metrics.jsonl"), slurp(root + "/" + tag + "/eval.jsonl"),
                      slurp(ckpt_dir + "/stage1.ckpt"), slurp(ckpt_dir + "/stage2.ckpt"));
  };

  auto a = run("a");
  auto b = run("b");
  CHECK(std::get<0>(a) == std::get<0>(b));
  CHECK(std::get<1>(a) == std::get<1>(b));
  CHECK(std::get<2>(a) == std::get<2>(b));
  CHECK(std::get<3>(a) == std::get<3>(b));
  CHECK(std::get<4>(a) == std::get<4>(b));
  CHECK(std::get<5>(a) == std::get<5>(b));
}
