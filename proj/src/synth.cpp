#include "sld/synth.hpp"

#include <filesystem>
#include <fstream>
#include <set>

#include <json.hpp>

#include "sld/error.hpp"

namespace sld {

using nlohmann::json;

GrammarSpec load_grammar(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open grammar spec: " + path);
  json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw ValidationError("bad grammar spec JSON in " + path + ": " + e.what());
  }
  GrammarSpec g;
  g.mode = segment_mode_from_string(j.value("mode", "sentence"));
  g.train_count = j.value("train_count", 0);
  g.valid_count = j.value("valid_count", 0);
  g.segments_min = j.value("segments_min", 1);
  g.segments_max = j.value("segments_max", 1);
  g.unique_inputs = j.value("unique_inputs", false);
  if (g.train_count < 1) throw ValidationError("grammar: train_count must be >= 1");
  if (g.valid_count < 0) throw ValidationError("grammar: valid_count must be >= 0");
  if (g.segments_min < 1 || g.segments_max < g.segments_min) {
    throw ValidationError("grammar: need 1 <= segments_min <= segments_max");
  }
  if (j.contains("slots")) {
    for (auto& [name, fillers] : j["slots"].items()) {
      std::vector<std::string> fs;
      for (const auto& f : fillers) fs.push_back(f.get<std::string>());
      if (fs.empty()) throw ValidationError("grammar: slot '" + name + "' has no fillers");
      g.slots[name] = std::move(fs);
    }
  }
  if (!j.contains("templates") || j["templates"].empty()) {
    throw ValidationError("grammar: at least one template required");
  }
  for (const auto& t : j["templates"]) {
    GrammarTemplate gt;
    gt.title = t.at("title").get<std::string>();
    for (const auto& s : t.at("sentences")) gt.sentences.push_back(s.get<std::string>());
    if (t.contains("paraphrases")) {
      for (const auto& s : t["paraphrases"]) gt.paraphrases.push_back(s.get<std::string>());
    }
    if (gt.sentences.empty()) throw ValidationError("grammar: template with no sentences");
    if (!gt.paraphrases.empty() && gt.paraphrases.size() != gt.sentences.size()) {
      throw ValidationError("grammar: paraphrases must align one-to-one with sentences");
    }
    if ((int)gt.sentences.size() < g.segments_max) {
      throw ValidationError("grammar: template '" + gt.title + "' has fewer sentences than segments_max");
    }
    g.templates.push_back(std::move(gt));
  }
  if (j.contains("ood")) {
    for (const auto& s : j["ood"].at("templates")) g.ood_templates.push_back(s.get<std::string>());
    g.ood_count = j["ood"].value("count", (int)g.ood_templates.size());
  }
  return g;
}

namespace {

std::string render(const std::string& tpl, const std::map<std::string, std::string>& fill) {
  std::string out;
  size_t i = 0;
  while (i < tpl.size()) {
    if (tpl[i] == '{') {
      size_t close = tpl.find('}', i);
      if (close == std::string::npos) throw ValidationError("grammar: unbalanced '{' in: " + tpl);
      const std::string name = tpl.substr(i + 1, close - i - 1);
      auto it = fill.find(name);
      if (it == fill.end()) throw ValidationError("grammar: unknown slot '" + name + "' in: " + tpl);
      out += it->second;
      i = close + 1;
    } else {
      out.push_back(tpl[i++]);
    }
  }
  return out;
}

std::map<std::string, std::string> draw_fillers(const GrammarSpec& g, Rng& rng) {
  std::map<std::string, std::string> fill;
  for (const auto& [name, fillers] : g.slots) {
    fill[name] = fillers[(size_t)rng.below(fillers.size())];
  }
  return fill;
}

struct Rendered {
  Example ex;
  const GrammarTemplate* tpl = nullptr;
  std::map<std::string, std::string> fill;
};

Rendered render_example(const GrammarSpec& g, const std::string& id, Rng& rng, int m_seg) {
  Rendered r;
  r.ex.id = id;
  r.tpl = &g.templates[(size_t)rng.below(g.templates.size())];
  r.fill = draw_fillers(g, rng);
  const int span = g.segments_max - g.segments_min + 1;
  const int count = g.segments_min + (int)rng.below((uint64_t)span);
  r.ex.input_text = normalize_text(render(r.tpl->title, r.fill));
  for (int s = 0; s < count; ++s) {
    std::string seg = normalize_text(render(r.tpl->sentences[(size_t)s], r.fill));
    if ((int)tokenize(seg).size() > m_seg - 2) {
      throw ValidationError("grammar produced a segment longer than the m_seg budget (" +
                            std::to_string(m_seg) + "): " + seg);
    }
    r.ex.segments.push_back(seg);
  }
  const std::string joiner = segment_joiner(g.mode);
  for (size_t s = 0; s < r.ex.segments.size(); ++s) {
    if (s) r.ex.output_text += joiner;
    r.ex.output_text += r.ex.segments[s];
  }
  return r;
}

std::vector<Example> render_split(const GrammarSpec& g, const std::string& split, int count,
                                  uint64_t seed, int m_seg,
                                  std::vector<std::pair<std::string, std::string>>* para_rows,
                                  std::set<std::string>* para_seen) {
  std::vector<Example> out;
  std::set<std::string> titles;
  int attempts = 0;
  const int max_attempts = count * 50 + 100;
  while ((int)out.size() < count) {
    if (++attempts > max_attempts) {
      throw ValidationError("grammar cannot produce " + std::to_string(count) +
                            " distinct inputs for split '" + split + "'");
    }
    const std::string id = split + "-" + std::to_string(attempts - 1);
    Rng rng(seed, "corpus/" + id);
    Rendered r = render_example(g, id, rng, m_seg);
    if (g.unique_inputs && !titles.insert(r.ex.input_text).second) continue;
    r.ex.id = split + "-" + std::to_string(out.size());
    if (para_rows && !r.tpl->paraphrases.empty()) {
      for (size_t s = 0; s < r.ex.segments.size(); ++s) {
        std::string para = normalize_text(render(r.tpl->paraphrases[s], r.fill));
        if (para_seen->insert(r.ex.segments[s]).second) {
          para_rows->emplace_back(r.ex.segments[s], para);
        }
      }
    }
    out.push_back(std::move(r.ex));
  }
  return out;
}

}  // namespace

SynthFiles generate_synthetic_corpus(const GrammarSpec& spec, uint64_t seed, int m_seg,
                                     const std::string& out_dir) {
  std::filesystem::create_directories(out_dir);
  SynthFiles files;
  files.train = out_dir + "/train.jsonl";
  files.valid = out_dir + "/valid.jsonl";
  files.paraphrases = out_dir + "/paraphrases.jsonl";
  files.ood = out_dir + "/ood.txt";

  std::vector<std::pair<std::string, std::string>> para_rows;
  std::set<std::string> para_seen;
  auto train = render_split(spec, "train", spec.train_count, seed, m_seg, &para_rows, &para_seen);
  auto valid = render_split(spec, "valid", spec.valid_count, seed, m_seg, &para_rows, &para_seen);
  save_corpus_jsonl(files.train, train);
  save_corpus_jsonl(files.valid, valid);
  save_paraphrase_table(files.paraphrases, para_rows);

  std::ofstream ood(files.ood);
  if (!ood) throw RuntimeFailure("cannot write OOD pool: " + files.ood);
  if (!spec.ood_templates.empty()) {
    for (int i = 0; i < spec.ood_count; ++i) {
      Rng rng(seed, "ood/" + std::to_string(i));
      const auto& tpl = spec.ood_templates[(size_t)rng.below(spec.ood_templates.size())];
      const auto fill = draw_fillers(spec, rng);
      ood << normalize_text(render(tpl, fill)) << "\n";
    }
  }
  return files;
}

std::vector<std::string> grammar_token_inventory(const GrammarSpec& spec) {
  std::set<std::string> tokens;
  auto add_all = [&](const std::string& tpl) {
    std::string stripped;
    size_t i = 0;
    while (i < tpl.size()) {
      if (tpl[i] == '{') {
        const size_t close = tpl.find('}', i);
        if (close == std::string::npos) break;
        stripped += " ";
        i = close + 1;
      } else {
        stripped.push_back(tpl[i++]);
      }
    }
    for (const auto& t : tokenize(stripped)) tokens.insert(t);
  };
  for (const auto& t : spec.templates) {
    add_all(t.title);
    for (const auto& s : t.sentences) add_all(s);
    for (const auto& s : t.paraphrases) add_all(s);
  }
  for (const auto& s : spec.ood_templates) add_all(s);
  for (const auto& [name, fillers] : spec.slots) {
    for (const auto& f : fillers) {
      for (const auto& t : tokenize(f)) tokens.insert(t);
    }
  }
  return std::vector<std::string>(tokens.begin(), tokens.end());
}

}  // namespace sld
