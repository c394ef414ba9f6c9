#include "sld/config.hpp"

#include <fstream>
#include <map>
#include <sstream>

#include "sld/error.hpp"
#include "sld/rng.hpp"

namespace sld {

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r");
  size_t b = s.find_last_not_of(" \t\r");
  if (a == std::string::npos) return "";
  return s.substr(a, b - a + 1);
}

long long parse_int_field(const std::string& key, const std::string& value) {
  try {
    size_t used = 0;
    long long v = std::stoll(value, &used);
    if (used != value.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw ValidationError("config field '" + key + "': not an integer: '" + value + "'");
  }
}

double parse_real_field(const std::string& key, const std::string& value) {
  try {
    size_t used = 0;
    double v = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw ValidationError("config field '" + key + "': not a number: '" + value + "'");
  }
}

void check(bool ok, const std::string& field, const std::string& what) {
  if (!ok) throw ValidationError("config field '" + field + "' out of range: " + what);
}

}  // namespace

Config Config::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config file: " + path);
  Config c;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw ValidationError(path + ":" + std::to_string(lineno) + ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key == "min_count") c.min_count = parse_int_field(key, value);
    else if (key == "h_lm") c.h_lm = (int)parse_int_field(key, value);
    else if (key == "h_rep") c.h_rep = (int)parse_int_field(key, value);
    else if (key == "k") c.k = (int)parse_int_field(key, value);
    else if (key == "n") c.n = (int)parse_int_field(key, value);
    else if (key == "m_seg") c.m_seg = (int)parse_int_field(key, value);
    else if (key == "m_ctx") c.m_ctx = (int)parse_int_field(key, value);
    else if (key == "enc_layers") c.enc_layers = (int)parse_int_field(key, value);
    else if (key == "dec_layers") c.dec_layers = (int)parse_int_field(key, value);
    else if (key == "heads") c.heads = (int)parse_int_field(key, value);
    else if (key == "ffn_mult") c.ffn_mult = (int)parse_int_field(key, value);
    else if (key == "d_model") c.d_model = (int)parse_int_field(key, value);
    else if (key == "den_layers") c.den_layers = (int)parse_int_field(key, value);
    else if (key == "den_heads") c.den_heads = (int)parse_int_field(key, value);
    else if (key == "lambda1") c.lambda1 = parse_real_field(key, value);
    else if (key == "lambda2") c.lambda2 = parse_real_field(key, value);
    else if (key == "tau") c.tau = parse_real_field(key, value);
    else if (key == "eps_adv") c.eps_adv = parse_real_field(key, value);
    else if (key == "p_sub") c.p_sub = parse_real_field(key, value);
    else if (key == "s1_lr") c.s1_lr = parse_real_field(key, value);
    else if (key == "s1_epochs") c.s1_epochs = (int)parse_int_field(key, value);
    else if (key == "s1_batch") c.s1_batch = (int)parse_int_field(key, value);
    else if (key == "T") c.T = (int)parse_int_field(key, value);
    else if (key == "beta_min") c.beta_min = parse_real_field(key, value);
    else if (key == "beta_max") c.beta_max = parse_real_field(key, value);
    else if (key == "lambda3") c.lambda3 = parse_real_field(key, value);
    else if (key == "lambda4") c.lambda4 = parse_real_field(key, value);
    else if (key == "p_uncond") c.p_uncond = parse_real_field(key, value);
    else if (key == "guidance_w") c.guidance_w = parse_real_field(key, value);
    else if (key == "s2_lr") c.s2_lr = parse_real_field(key, value);
    else if (key == "s2_epochs") c.s2_epochs = (int)parse_int_field(key, value);
    else if (key == "s2_batch") c.s2_batch = (int)parse_int_field(key, value);
    else if (key == "seed") c.seed = (uint64_t)parse_int_field(key, value);
    else if (key == "mode") c.mode = value;
    else if (key == "corpus_dir") c.corpus_dir = value;
    else if (key == "ckpt_dir") c.ckpt_dir = value;
    else throw ValidationError("unknown config key '" + key + "' at " + path + ":" + std::to_string(lineno));
  }
  c.validate();
  return c;
}

void Config::validate() const {
  check(min_count >= 1, "min_count", "must be >= 1");
  check(h_lm >= 2 && h_lm <= 4096, "h_lm", "must be in [2, 4096]");
  check(h_rep >= 1 && h_rep <= 4096, "h_rep", "must be in [1, 4096]");
  check(k >= 1 && k <= 1024, "k", "must be in [1, 1024]");
  check(n >= 1 && n <= 256, "n", "must be in [1, 256]");
  check(m_seg >= 3 && m_seg <= 4096, "m_seg", "must be in [3, 4096]");
  check(m_ctx >= 1 && m_ctx <= 4096, "m_ctx", "must be in [1, 4096]");
  check(enc_layers >= 1 && enc_layers <= 64, "enc_layers", "must be in [1, 64]");
  check(dec_layers >= 1 && dec_layers <= 64, "dec_layers", "must be in [1, 64]");
  check(heads >= 1 && heads <= 64 && h_lm % heads == 0, "heads", "must divide h_lm");
  check(ffn_mult >= 1 && ffn_mult <= 16, "ffn_mult", "must be in [1, 16]");
  check(d_model >= 2 && d_model <= 4096, "d_model", "must be in [2, 4096]");
  check(den_layers >= 1 && den_layers <= 64, "den_layers", "must be in [1, 64]");
  check(den_heads >= 1 && den_heads <= 64 && d_model % den_heads == 0, "den_heads",
        "must divide d_model");
  check(lambda1 >= 0, "lambda1", "must be >= 0");
  check(lambda2 >= 0, "lambda2", "must be >= 0");
  check(tau > 0, "tau", "must be > 0");
  check(eps_adv >= 0, "eps_adv", "must be >= 0");
  check(p_sub >= 0 && p_sub <= 1, "p_sub", "must be in [0, 1]");
  check(s1_lr > 0, "s1_lr", "must be > 0");
  check(s1_epochs >= 0, "s1_epochs", "must be >= 0");
  check(s1_batch >= 1, "s1_batch", "must be >= 1");
  check(T >= 1 && T <= 100000, "T", "must be in [1, 100000]");
  check(beta_min > 0 && beta_min <= beta_max, "beta_min", "need 0 < beta_min <= beta_max");
  check(beta_max < 1, "beta_max", "must be < 1");
  check(lambda3 >= 0, "lambda3", "must be >= 0");
  check(lambda4 >= 0, "lambda4", "must be >= 0");
  check(p_uncond >= 0 && p_uncond < 1, "p_uncond", "must be in [0, 1)");
  check(guidance_w >= 0, "guidance_w", "must be >= 0");
  check(s2_lr > 0, "s2_lr", "must be > 0");
  check(s2_epochs >= 0, "s2_epochs", "must be >= 0");
  check(s2_batch >= 1, "s2_batch", "must be >= 1");
  check(mode == "sentence" || mode == "utterance", "mode", "must be sentence|utterance");
  check(!corpus_dir.empty(), "corpus_dir", "must not be empty");
  check(!ckpt_dir.empty(), "ckpt_dir", "must not be empty");
}

std::string Config::canonical() const {
  std::map<std::string, std::string> kv;
  auto put_i = [&](const char* k2, long long v) { kv[k2] = std::to_string(v); };
  auto put_r = [&](const char* k2, double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    kv[k2] = os.str();
  };
  put_i("min_count", min_count);
  put_i("h_lm", h_lm);
  put_i("h_rep", h_rep);
  put_i("k", k);
  put_i("n", n);
  put_i("m_seg", m_seg);
  put_i("m_ctx", m_ctx);
  put_i("enc_layers", enc_layers);
  put_i("dec_layers", dec_layers);
  put_i("heads", heads);
  put_i("ffn_mult", ffn_mult);
  put_i("d_model", d_model);
  put_i("den_layers", den_layers);
  put_i("den_heads", den_heads);
  put_r("lambda1", lambda1);
  put_r("lambda2", lambda2);
  put_r("tau", tau);
  put_r("eps_adv", eps_adv);
  put_r("p_sub", p_sub);
  put_r("s1_lr", s1_lr);
  put_i("s1_epochs", s1_epochs);
  put_i("s1_batch", s1_batch);
  put_i("T", T);
  put_r("beta_min", beta_min);
  put_r("beta_max", beta_max);
  put_r("lambda3", lambda3);
  put_r("lambda4", lambda4);
  put_r("p_uncond", p_uncond);
  put_r("guidance_w", guidance_w);
  put_r("s2_lr", s2_lr);
  put_i("s2_epochs", s2_epochs);
  put_i("s2_batch", s2_batch);
  put_i("seed", (long long)seed);
  kv["mode"] = mode;
  std::ostringstream os;
  for (const auto& [k2, v] : kv) os << k2 << " = " << v << "\n";
  return os.str();
}

uint64_t Config::fingerprint() const { return fnv1a64(canonical()); }

void Config::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw RuntimeFailure("cannot write config: " + path);
  out << canonical();
  out << "corpus_dir = " << corpus_dir << "\n";
  out << "ckpt_dir = " << ckpt_dir << "\n";
}

}  // namespace sld
