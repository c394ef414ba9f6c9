#pragma once

#include <string>
#include <vector>

#include "sld/checkpoint.hpp"
#include "sld/config.hpp"
#include "sld/synth.hpp"

namespace sld {

AutoencoderConfig ae_config_from(const Config& c, int vocab_size);
DenoiserConfig den_config_from(const Config& c);
ReprLossConfig repr_loss_config_from(const Config& c);
GuidanceConfig guidance_config_from(const Config& c);

std::string stage1_ckpt_path(const std::string& dir);
std::string stage2_ckpt_path(const std::string& dir);

struct Stage1Bundle {
  Vocab vocab;
  Autoencoder model;
};
Stage1Bundle load_stage1(const Config& c, const std::string& ckpt_path, bool force);

struct Stage2Bundle {
  Denoiser model;
  Standardizer standardizer;
  NoiseSchedule schedule;
};
Stage2Bundle load_stage2(const Config& c, const std::string& ckpt_path, bool force);

// All segments of every example, in corpus order.
std::vector<std::string> corpus_segments(const std::vector<Example>& examples, SegmentMode mode);

void cmd_gen_corpus(const Config& c, const std::string& spec_path, const std::string& out_dir);

void cmd_train_repr(const Config& c, bool resume = false, bool force = false);

void cmd_train_diff(const Config& c, const std::string& stage1_ckpt, bool force = false);

struct GenerateOptions {
  std::string input_text;  // exactly one of input_text/input_file
  std::string input_file;
  int count = 1;
  uint64_t seed = 1;
  std::string out_path;  // empty -> stdout
  bool force = false;
};
void cmd_generate(const Config& c, const std::string& ckpt_dir, const GenerateOptions& opt);

struct EvalSummary {
  double bleu_mean = 0;
  double rouge_l_mean = 0;
  double mean_length = 0;
  int examples = 0;
  std::vector<long long> segment_histogram;  // index = segment count
};
EvalSummary cmd_eval(const Config& c, const std::string& ckpt_dir, const std::string& split_path,
                     const std::string& out_path, bool force = false);

struct InspectOptions {
  std::string mode;         // "trajectory" | "projection"
  std::string segment;      // trajectory: the segment text
  std::string input_file;   // projection: one segment per line
  std::string out_path;
  bool force = false;
};
void cmd_inspect(const Config& c, const std::string& ckpt_dir, const InspectOptions& opt);

// The noise-ratio grid used by trajectory inspection.
std::vector<double> noise_ratio_grid();

}  // namespace sld
