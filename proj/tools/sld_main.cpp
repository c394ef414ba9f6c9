#include <iostream>

#include <CLI11.hpp>

#include "sld/commands.hpp"
#include "sld/error.hpp"

namespace {

sld::Config load_config_or_defaults(const std::string& path) {
  if (path.empty()) {
    sld::Config c;
    c.validate();
    return c;
  }
  return sld::Config::load(path);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"segment-level latent diffusion text generator"};
  app.require_subcommand(1);

  std::string config_path, spec_path, out_dir, stage1_path, ckpt_dir;
  std::string input_text, input_file, split_path, out_path, mode, segment_text;
  int count = 1;
  long long seed = -1;
  bool resume = false, force = false;

  auto* gen_corpus = app.add_subcommand("gen-corpus", "render a synthetic corpus from a grammar spec");
  gen_corpus->add_option("--spec", spec_path, "grammar spec JSON")->required();
  gen_corpus->add_option("--out", out_dir, "output directory")->required();
  gen_corpus->add_option("--config", config_path, "config file (defaults used when omitted)");

  auto* train_repr = app.add_subcommand("train-repr", "stage-1 representation training");
  train_repr->add_option("--config", config_path, "config file")->required();
  train_repr->add_flag("--resume", resume, "continue from an existing stage-1 checkpoint");
  train_repr->add_flag("--force", force, "ignore config fingerprint mismatch on resume");

  auto* train_diff = app.add_subcommand("train-diff", "stage-2 diffusion training");
  train_diff->add_option("--config", config_path, "config file")->required();
  train_diff->add_option("--stage1", stage1_path, "stage-1 checkpoint")->required();
  train_diff->add_flag("--force", force, "ignore config fingerprint mismatch");

  auto* generate = app.add_subcommand("generate", "sample outputs for inputs");
  generate->add_option("--config", config_path, "config file")->required();
  generate->add_option("--ckpt-dir", ckpt_dir, "directory with stage1.ckpt and stage2.ckpt")->required();
  generate->add_option("--input", input_text, "conditioning text");
  generate->add_option("--input-file", input_file, "file with one input per line");
  generate->add_option("--count", count, "samples per input");
  generate->add_option("--seed", seed, "sampling seed (defaults to config seed)");
  generate->add_option("--out", out_path, "output JSONL (stdout when omitted)");
  generate->add_flag("--force", force, "ignore config fingerprint mismatch");

  auto* eval = app.add_subcommand("eval", "generate for a split and score against references");
  eval->add_option("--config", config_path, "config file")->required();
  eval->add_option("--ckpt-dir", ckpt_dir, "directory with checkpoints")->required();
  eval->add_option("--split", split_path, "JSONL split with references")->required();
  eval->add_option("--out", out_path, "report path (default <ckpt-dir>/eval.jsonl)");
  eval->add_flag("--force", force, "ignore config fingerprint mismatch");

  auto* inspect = app.add_subcommand("inspect", "latent trajectory / projection reports");
  inspect->add_option("--config", config_path, "config file")->required();
  inspect->add_option("--ckpt-dir", ckpt_dir, "directory with checkpoints")->required();
  inspect->add_option("--mode", mode, "trajectory|projection")->required();
  inspect->add_option("--segment", segment_text, "segment text (trajectory mode)");
  inspect->add_option("--input-file", input_file, "segments file (projection mode)");
  inspect->add_option("--out", out_path, "report path")->required();
  inspect->add_flag("--force", force, "ignore config fingerprint mismatch");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (gen_corpus->parsed()) {
      sld::cmd_gen_corpus(load_config_or_defaults(config_path), spec_path, out_dir);
    } else if (train_repr->parsed()) {
      sld::cmd_train_repr(sld::Config::load(config_path), resume, force);
    } else if (train_diff->parsed()) {
      sld::cmd_train_diff(sld::Config::load(config_path), stage1_path, force);
    } else if (generate->parsed()) {
      sld::Config c = sld::Config::load(config_path);
      sld::GenerateOptions opt;
      opt.input_text = input_text;
      opt.input_file = input_file;
      opt.count = count;
      opt.seed = seed >= 0 ? (uint64_t)seed : c.seed;
      opt.out_path = out_path;
      opt.force = force;
      sld::cmd_generate(c, ckpt_dir, opt);
    } else if (eval->parsed()) {
      sld::Config c = sld::Config::load(config_path);
      const std::string report = out_path.empty() ? ckpt_dir + "/eval.jsonl" : out_path;
      sld::EvalSummary s = sld::cmd_eval(c, ckpt_dir, split_path, report);
      std::cout << "eval: " << s.examples << " examples, BLEU " << s.bleu_mean << ", ROUGE-L "
                << s.rouge_l_mean << ", mean length " << s.mean_length << "\n";
    } else if (inspect->parsed()) {
      sld::Config c = sld::Config::load(config_path);
      sld::InspectOptions opt;
      opt.mode = mode;
      opt.segment = segment_text;
      opt.input_file = input_file;
      opt.out_path = out_path;
      opt.force = force;
      sld::cmd_inspect(c, ckpt_dir, opt);
    }
  } catch (const sld::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "runtime failure: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
