#include "sld/commands.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <json.hpp>

#include "sld/error.hpp"
#include "sld/metrics.hpp"

namespace sld {

using nlohmann::json;

AutoencoderConfig ae_config_from(const Config& c, int vocab_size) {
  AutoencoderConfig a;
  a.vocab_size = vocab_size;
  a.h_lm = c.h_lm;
  a.h_rep = c.h_rep;
  a.latent_len = c.k;
  a.m_seg = c.m_seg;
  a.enc_layers = c.enc_layers;
  a.dec_layers = c.dec_layers;
  a.heads = c.heads;
  a.ffn_mult = c.ffn_mult;
  return a;
}

DenoiserConfig den_config_from(const Config& c) {
  DenoiserConfig d;
  d.h_rep = c.h_rep;
  d.latent_len = c.k;
  d.n_slots = c.n;
  d.d_model = c.d_model;
  d.layers = c.den_layers;
  d.heads = c.den_heads;
  d.ffn_mult = c.ffn_mult;
  d.h_lm = c.h_lm;
  return d;
}

ReprLossConfig repr_loss_config_from(const Config& c) {
  ReprLossConfig r;
  r.lambda1 = (Real)c.lambda1;
  r.lambda2 = (Real)c.lambda2;
  r.tau = (Real)c.tau;
  r.eps_adv = (Real)c.eps_adv;
  r.p_sub = (Real)c.p_sub;
  return r;
}

GuidanceConfig guidance_config_from(const Config& c) {
  GuidanceConfig g;
  g.w = (Real)c.guidance_w;
  g.p_uncond = (Real)c.p_uncond;
  g.lambda3 = (Real)c.lambda3;
  g.lambda4 = (Real)c.lambda4;
  return g;
}

std::string stage1_ckpt_path(const std::string& dir) { return dir + "/stage1.ckpt"; }
std::string stage2_ckpt_path(const std::string& dir) { return dir + "/stage2.ckpt"; }

Stage1Bundle load_stage1(const Config& c, const std::string& ckpt_path, bool force) {
  LoadedCheckpoint ck = read_checkpoint(ckpt_path);
  require_fingerprint(ck, c.fingerprint(), force, "stage-1 checkpoint");
  Stage1Bundle b{ck.vocab, make_autoencoder(ae_config_from(c, ck.vocab.size()),
                                            Rng(c.seed, "init/stage1"))};
  apply_checkpoint(ck, b.model.params);
  return b;
}

Stage2Bundle load_stage2(const Config& c, const std::string& ckpt_path, bool force) {
  LoadedCheckpoint ck = read_checkpoint(ckpt_path);
  require_fingerprint(ck, c.fingerprint(), force, "stage-2 checkpoint");
  if (!ck.extras.standardizer || !ck.extras.schedule) {
    throw ValidationError("stage-2 checkpoint missing standardizer or schedule: " + ckpt_path);
  }
  Stage2Bundle b{make_denoiser(den_config_from(c), Rng(c.seed, "init/stage2")),
                 *ck.extras.standardizer, *ck.extras.schedule};
  apply_checkpoint(ck, b.model.params);
  return b;
}

std::vector<std::string> corpus_segments(const std::vector<Example>& examples, SegmentMode mode) {
  std::vector<std::string> out;
  for (const Example& ex : examples) {
    for (auto& s : example_segments(ex, mode)) out.push_back(s);
  }
  return out;
}

void cmd_gen_corpus(const Config& c, const std::string& spec_path, const std::string& out_dir) {
  GrammarSpec g = load_grammar(spec_path);
  SynthFiles files = generate_synthetic_corpus(g, c.seed, c.m_seg, out_dir);
  std::cout << "wrote " << files.train << ", " << files.valid << ", " << files.paraphrases << ", "
            << files.ood << "\n";
}

namespace {

int last_logged_epoch(const std::string& metrics_path) {
  std::ifstream in(metrics_path);
  if (!in) return 0;
  int last = 0;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      json j = json::parse(line);
      if (j.contains("epoch")) last = std::max(last, j["epoch"].get<int>());
    } catch (const std::exception&) {
      continue;
    }
  }
  return last;
}

}  // namespace

void cmd_train_repr(const Config& c, bool resume, bool force) {
  auto train = load_corpus_jsonl(c.corpus_dir + "/train.jsonl");
  if (train.empty()) throw ValidationError("train-repr: empty training corpus");
  auto paraphrases = load_paraphrase_table(c.corpus_dir + "/paraphrases.jsonl");
  auto ood = load_ood_pool(c.corpus_dir + "/ood.txt");
  const SegmentMode mode = segment_mode_from_string(c.mode);

  Vocab vocab;
  Autoencoder model;
  int start_epoch = 0;
  const std::string ckpt_path = stage1_ckpt_path(c.ckpt_dir);
  const std::string metrics_path = c.ckpt_dir + "/stage1_metrics.jsonl";
  if (resume) {
    Stage1Bundle b = load_stage1(c, ckpt_path, force);
    vocab = std::move(b.vocab);
    model = std::move(b.model);
    start_epoch = last_logged_epoch(metrics_path);
  } else {
    vocab = build_vocab(train, c.min_count);
    model = make_autoencoder(ae_config_from(c, vocab.size()), Rng(c.seed, "init/stage1"));
  }

  std::vector<std::string> segments = corpus_segments(train, mode);
  TripleSource triples{&paraphrases, &ood};
  ReprLossConfig loss_cfg = repr_loss_config_from(c);
  AdamState opt;
  opt.lr = (Real)c.s1_lr;

  std::filesystem::create_directories(c.ckpt_dir);
  std::ofstream log(metrics_path, resume ? std::ios::app : std::ios::trunc);
  if (!log) throw RuntimeFailure("cannot write metrics log: " + metrics_path);

  for (int e = 1; e <= c.s1_epochs; ++e) {
    const int epoch = start_epoch + e;
    Rng epoch_rng(c.seed, "stage1/epoch/" + std::to_string(epoch));
    ReprEpochMetrics m =
        train_representation_epoch(model, segments, triples, loss_cfg, opt, epoch_rng, vocab,
                                   c.s1_batch);
    json j;
    j["stage"] = 1;
    j["epoch"] = epoch;
    j["loss_cnv"] = m.loss_cnv;
    j["loss_cst"] = m.loss_cst;
    j["loss_adv"] = m.loss_adv;
    j["loss_rep"] = m.loss_rep;
    log << j.dump() << "\n";
    log.flush();
  }

  const double rt = roundtrip_bleu(model, segments, vocab);
  json j;
  j["stage"] = 1;
  j["roundtrip_bleu"] = rt;
  log << j.dump() << "\n";

  save_checkpoint(ckpt_path, model.params, vocab, c.fingerprint(), CheckpointExtras{});
  std::cout << "stage1 round-trip BLEU " << rt << ", checkpoint " << ckpt_path << "\n";
}

void cmd_train_diff(const Config& c, const std::string& stage1_ckpt, bool force) {
  Stage1Bundle s1 = load_stage1(c, stage1_ckpt, force);
  s1.model.params.freeze_all(true);

  auto train = load_corpus_jsonl(c.corpus_dir + "/train.jsonl");
  if (train.empty()) throw ValidationError("train-diff: empty training corpus");
  const SegmentMode mode = segment_mode_from_string(c.mode);

  Standardizer st = fit_standardizer(s1.model, corpus_segments(train, mode), s1.vocab);
  NoiseSchedule sched = build_schedule(c.T, c.beta_min, c.beta_max);
  Denoiser den = make_denoiser(den_config_from(c), Rng(c.seed, "init/stage2"));

  std::vector<PlanExample> plans;
  plans.reserve(train.size());
  for (const Example& ex : train) {
    plans.push_back(make_plan_example(s1.model, st, s1.vocab, ex, mode, c.n, c.m_seg, c.m_ctx));
  }

  GuidanceConfig g = guidance_config_from(c);
  AdamState opt;
  opt.lr = (Real)c.s2_lr;

  std::filesystem::create_directories(c.ckpt_dir);
  const std::string metrics_path = c.ckpt_dir + "/stage2_metrics.jsonl";
  std::ofstream log(metrics_path, std::ios::trunc);
  if (!log) throw RuntimeFailure("cannot write metrics log: " + metrics_path);

  for (int e = 1; e <= c.s2_epochs; ++e) {
    Rng epoch_rng(c.seed, "stage2/epoch/" + std::to_string(e));
    DiffusionEpochMetrics m =
        train_diffusion_epoch(den, s1.model, st, plans, sched, g, opt, epoch_rng, c.s2_batch);
    json j;
    j["stage"] = 2;
    j["epoch"] = e;
    j["loss_noise"] = m.loss_noise;
    j["loss_rec"] = m.loss_rec;
    j["loss_dec"] = m.loss_dec;
    j["loss_diff"] = m.loss_total;
    log << j.dump() << "\n";
    log.flush();
  }

  CheckpointExtras extras;
  extras.standardizer = st;
  extras.schedule = sched;
  const std::string out_path = stage2_ckpt_path(c.ckpt_dir);
  save_checkpoint(out_path, den.params, s1.vocab, c.fingerprint(), extras);
  std::cout << "stage2 checkpoint " << out_path << "\n";
}

void cmd_generate(const Config& c, const std::string& ckpt_dir, const GenerateOptions& opt) {
  if (opt.input_text.empty() == opt.input_file.empty()) {
    throw ValidationError("generate: pass exactly one of --input / --input-file");
  }
  if (opt.count < 1) throw ValidationError("generate: count must be >= 1");
  Stage1Bundle s1 = load_stage1(c, stage1_ckpt_path(ckpt_dir), opt.force);
  s1.model.params.freeze_all(true);
  Stage2Bundle s2 = load_stage2(c, stage2_ckpt_path(ckpt_dir), opt.force);
  const SegmentMode mode = segment_mode_from_string(c.mode);
  GuidanceConfig g = guidance_config_from(c);

  std::vector<std::string> inputs;
  if (!opt.input_text.empty()) {
    inputs.push_back(opt.input_text);
  } else {
    std::ifstream in(opt.input_file);
    if (!in) throw ValidationError("generate: cannot open input file: " + opt.input_file);
    std::string line;
    while (std::getline(in, line)) {
      if (!line.empty()) inputs.push_back(line);
    }
    if (inputs.empty()) throw ValidationError("generate: input file has no inputs");
  }

  std::ofstream file_out;
  if (!opt.out_path.empty()) {
    file_out.open(opt.out_path);
    if (!file_out) throw RuntimeFailure("generate: cannot write " + opt.out_path);
  }
  std::ostream& out = opt.out_path.empty() ? std::cout : file_out;

  for (size_t i = 0; i < inputs.size(); ++i) {
    for (int s = 0; s < opt.count; ++s) {
      Rng rng(opt.seed, "generate/" + std::to_string(i) + "/" + std::to_string(s));
      GenerationResult r =
          sample_plan(s1.model, s2.model, s2.schedule, s2.standardizer, s1.vocab,
                      s1.vocab.encode(tokenize(inputs[i])), g, mode, rng);
      json j;
      j["input"] = inputs[i];
      j["output"] = r.text;
      j["segments"] = r.segments;
      out << j.dump() << "\n";
    }
  }
}

EvalSummary cmd_eval(const Config& c, const std::string& ckpt_dir, const std::string& split_path,
                     const std::string& out_path, bool force) {
  auto split = load_corpus_jsonl(split_path);
  if (split.empty()) throw ValidationError("eval: empty split: " + split_path);
  Stage1Bundle s1 = load_stage1(c, stage1_ckpt_path(ckpt_dir), force);
  s1.model.params.freeze_all(true);
  Stage2Bundle s2 = load_stage2(c, stage2_ckpt_path(ckpt_dir), force);
  const SegmentMode mode = segment_mode_from_string(c.mode);
  GuidanceConfig g = guidance_config_from(c);

  std::ofstream out(out_path);
  if (!out) throw RuntimeFailure("eval: cannot write " + out_path);

  EvalSummary sum;
  sum.segment_histogram.assign((size_t)c.n + 1, 0);
  double total_len = 0;
  for (const Example& ex : split) {
    Rng rng(c.seed, "eval/" + ex.id);
    GenerationResult r = sample_plan(s1.model, s2.model, s2.schedule, s2.standardizer, s1.vocab,
                                     s1.vocab.encode(tokenize(ex.input_text)), g, mode, rng);
    const auto cand = tokenize(r.text);
    const auto ref = tokenize(ex.output_text);
    const double bleu = bleu_pair(cand, ref);
    const double rouge = rouge_l_f1(cand, ref);
    sum.bleu_mean += bleu;
    sum.rouge_l_mean += rouge;
    total_len += (double)cand.size();
    const size_t nseg = std::min(r.segments.size(), (size_t)c.n);
    sum.segment_histogram[nseg] += 1;
    ++sum.examples;
    json j;
    j["id"] = ex.id;
    j["bleu"] = bleu;
    j["rouge_l"] = rouge;
    j["length"] = (long long)cand.size();
    j["segments"] = (long long)r.segments.size();
    j["output"] = r.text;
    out << j.dump() << "\n";
  }
  sum.bleu_mean /= sum.examples;
  sum.rouge_l_mean /= sum.examples;
  sum.mean_length = total_len / sum.examples;

  json j;
  j["summary"] = true;
  j["examples"] = sum.examples;
  j["bleu"] = sum.bleu_mean;
  j["rouge_l"] = sum.rouge_l_mean;
  j["mean_length"] = sum.mean_length;
  j["segment_histogram"] = sum.segment_histogram;
  out << j.dump() << "\n";
  return sum;
}

std::vector<double> noise_ratio_grid() {
  return {0.00, 0.11, 0.22, 0.33, 0.44, 0.56, 0.67, 0.78, 0.89, 1.00};
}

namespace {

// Top eigenvector of the centered covariance by power iteration; deflation
// gives the second component.
struct Pca2 {
  std::vector<double> mean, v1, v2;
};

Pca2 fit_pca2(const std::vector<std::vector<double>>& rows) {
  const size_t n = rows.size();
  const size_t d = rows[0].size();
  Pca2 p;
  p.mean.assign(d, 0);
  for (const auto& r : rows) {
    for (size_t j = 0; j < d; ++j) p.mean[j] += r[j];
  }
  for (size_t j = 0; j < d; ++j) p.mean[j] /= (double)n;

  std::vector<std::vector<double>> cov(d, std::vector<double>(d, 0));
  for (const auto& r : rows) {
    for (size_t a = 0; a < d; ++a) {
      const double xa = r[a] - p.mean[a];
      for (size_t b = 0; b < d; ++b) cov[a][b] += xa * (r[b] - p.mean[b]);
    }
  }
  const double denom = n > 1 ? (double)(n - 1) : 1.0;
  for (auto& row : cov) {
    for (double& x : row) x /= denom;
  }

  auto power = [&](const std::vector<std::vector<double>>& m) {
    std::vector<double> v(d, 1.0 / std::sqrt((double)d)), w(d);
    double lambda = 0;
    for (int it = 0; it < 1000; ++it) {
      for (size_t a = 0; a < d; ++a) {
        double acc = 0;
        for (size_t b = 0; b < d; ++b) acc += m[a][b] * v[b];
        w[a] = acc;
      }
      double nrm = 0;
      for (double x : w) nrm += x * x;
      nrm = std::sqrt(nrm);
      if (nrm < 1e-30) break;
      double diff = 0;
      for (size_t a = 0; a < d; ++a) {
        w[a] /= nrm;
        diff += std::abs(w[a] - v[a]);
      }
      v = w;
      lambda = nrm;
      if (diff < 1e-8) break;
    }
    return std::make_pair(v, lambda);
  };

  auto [v1, l1] = power(cov);
  p.v1 = v1;
  for (size_t a = 0; a < d; ++a) {
    for (size_t b = 0; b < d; ++b) cov[a][b] -= l1 * v1[a] * v1[b];
  }
  auto [v2, l2] = power(cov);
  p.v2 = v2;
  return p;
}

std::pair<double, double> project2(const Pca2& p, const std::vector<double>& row) {
  double a = 0, b = 0;
  for (size_t j = 0; j < row.size(); ++j) {
    const double x = row[j] - p.mean[j];
    a += x * p.v1[j];
    b += x * p.v2[j];
  }
  return {a, b};
}

std::vector<double> latent_row(const Autoencoder& m, const Vocab& vocab, const std::string& seg) {
  NoGradGuard ng;
  Tensor z = encode_segment(m, segment_token_ids(vocab, seg, m.cfg.m_seg));
  std::vector<double> row(z.values().begin(), z.values().end());
  return row;
}

}  // namespace

void cmd_inspect(const Config& c, const std::string& ckpt_dir, const InspectOptions& opt) {
  if (opt.out_path.empty()) throw ValidationError("inspect: --out is required");
  if (opt.mode == "trajectory") {
    if (opt.segment.empty()) throw ValidationError("inspect trajectory: --segment is required");
    Stage1Bundle s1 = load_stage1(c, stage1_ckpt_path(ckpt_dir), opt.force);
    s1.model.params.freeze_all(true);
    Stage2Bundle s2 = load_stage2(c, stage2_ckpt_path(ckpt_dir), opt.force);

    std::ofstream out(opt.out_path);
    if (!out) throw RuntimeFailure("inspect: cannot write " + opt.out_path);
    NoGradGuard ng;
    Tensor z = encode_segment(s1.model, segment_token_ids(s1.vocab, opt.segment, c.m_seg));
    Tensor z_std = s2.standardizer.standardize(z);
    const auto grid = noise_ratio_grid();
    for (size_t gi = 0; gi < grid.size(); ++gi) {
      const double ratio = grid[gi];
      const int t = (int)std::lround(ratio * s2.schedule.T);
      Tensor z_t = z_std;
      if (t > 0) {
        Rng rng(c.seed, "inspect/ratio/" + std::to_string(gi));
        Tensor noise = gaussian_tensor(rng, z_std.shape());
        z_t = forward_corrupt(z_std, t, noise, s2.schedule);
      }
      DecodedSlot slot = decode_latent(s1.model, s2.standardizer.destandardize(z_t), s1.vocab);
      json j;
      j["ratio"] = ratio;
      j["t"] = t;
      j["text"] = slot.text;
      out << j.dump() << "\n";
    }
    return;
  }
  if (opt.mode == "projection") {
    if (opt.input_file.empty()) throw ValidationError("inspect projection: --input-file is required");
    Stage1Bundle s1 = load_stage1(c, stage1_ckpt_path(ckpt_dir), opt.force);
    s1.model.params.freeze_all(true);

    std::ifstream in(opt.input_file);
    if (!in) throw ValidationError("inspect: cannot open input file: " + opt.input_file);
    std::vector<std::string> anchors;
    std::string line;
    while (std::getline(in, line)) {
      if (!line.empty()) anchors.push_back(normalize_text(line));
    }
    if (anchors.empty()) throw ValidationError("inspect projection: no segments in input file");

    std::unordered_map<std::string, std::string> paraphrases;
    std::vector<std::string> ood;
    const std::string para_path = c.corpus_dir + "/paraphrases.jsonl";
    const std::string ood_path = c.corpus_dir + "/ood.txt";
    if (std::filesystem::exists(para_path)) paraphrases = load_paraphrase_table(para_path);
    if (std::filesystem::exists(ood_path)) ood = load_ood_pool(ood_path);

    std::vector<std::pair<std::string, std::string>> labeled;  // (label, segment)
    for (const auto& a : anchors) labeled.emplace_back("anchor", a);
    for (size_t i = 0; i < anchors.size(); ++i) {
      auto it = paraphrases.find(anchors[i]);
      if (it != paraphrases.end()) labeled.emplace_back("positive", it->second);
    }
    if (!ood.empty()) {
      for (size_t i = 0; i < anchors.size(); ++i) {
        Rng rng(c.seed, "inspect/neg/" + std::to_string(i));
        labeled.emplace_back("negative", normalize_text(ood[(size_t)rng.below(ood.size())]));
      }
    }

    std::vector<std::vector<double>> rows;
    rows.reserve(labeled.size());
    for (const auto& [label, seg] : labeled) rows.push_back(latent_row(s1.model, s1.vocab, seg));
    const Pca2 pca = fit_pca2(rows);

    std::ofstream out(opt.out_path);
    if (!out) throw RuntimeFailure("inspect: cannot write " + opt.out_path);
    out << "id,pc1,pc2,label\n";
    for (size_t i = 0; i < labeled.size(); ++i) {
      const auto [x, y] = project2(pca, rows[i]);
      out << i << "," << x << "," << y << "," << labeled[i].first << "\n";
    }
    return;
  }
  throw ValidationError("inspect: mode must be trajectory|projection, got '" + opt.mode + "'");
}

}  // namespace sld
