#include "sld/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "sld/error.hpp"

namespace sld {

namespace {

void write_bytes(std::ofstream& out, const void* p, size_t n) {
  out.write((const char*)p, (std::streamsize)n);
}

void write_u8(std::ofstream& out, uint8_t v) { write_bytes(out, &v, 1); }

void write_u16(std::ofstream& out, uint16_t v) {
  uint8_t b[2] = {(uint8_t)(v & 0xff), (uint8_t)(v >> 8)};
  write_bytes(out, b, 2);
}

void write_u32(std::ofstream& out, uint32_t v) {
  uint8_t b[4];
  for (int i = 0; i < 4; ++i) b[i] = (uint8_t)(v >> (8 * i));
  write_bytes(out, b, 4);
}

void write_u64(std::ofstream& out, uint64_t v) {
  uint8_t b[8];
  for (int i = 0; i < 8; ++i) b[i] = (uint8_t)(v >> (8 * i));
  write_bytes(out, b, 8);
}

void write_f32(std::ofstream& out, float v) {
  uint32_t u;
  std::memcpy(&u, &v, 4);
  write_u32(out, u);
}

void write_str(std::ofstream& out, const std::string& s) {
  write_u32(out, (uint32_t)s.size());
  write_bytes(out, s.data(), s.size());
}

struct Reader {
  std::ifstream in;
  std::string path;
  explicit Reader(const std::string& p) : in(p, std::ios::binary), path(p) {
    if (!in) throw ValidationError("cannot open checkpoint: " + p);
  }
  void bytes(void* p, size_t n) {
    in.read((char*)p, (std::streamsize)n);
    if ((size_t)in.gcount() != n) throw RuntimeFailure("truncated checkpoint: " + path);
  }
  uint8_t u8() {
    uint8_t v;
    bytes(&v, 1);
    return v;
  }
  uint16_t u16() {
    uint8_t b[2];
    bytes(b, 2);
    return (uint16_t)(b[0] | (b[1] << 8));
  }
  uint32_t u32() {
    uint8_t b[4];
    bytes(b, 4);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= (uint32_t)b[i] << (8 * i);
    return v;
  }
  uint64_t u64() {
    uint8_t b[8];
    bytes(b, 8);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= (uint64_t)b[i] << (8 * i);
    return v;
  }
  float f32() {
    uint32_t u = u32();
    float v;
    std::memcpy(&v, &u, 4);
    return v;
  }
  std::string str() {
    uint32_t n = u32();
    std::string s(n, '\0');
    bytes(s.data(), n);
    return s;
  }
};

}  // namespace

void save_checkpoint(const std::string& path, const ParamStore& params, const Vocab& vocab,
                     uint64_t config_fingerprint, const CheckpointExtras& extras) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw RuntimeFailure("cannot write checkpoint: " + path);
  write_bytes(out, "SLD1", 4);
  write_u16(out, 1);
  write_u64(out, config_fingerprint);

  write_u32(out, (uint32_t)vocab.size());
  for (const auto& tok : vocab.id_to_token) write_str(out, tok);

  write_u32(out, (uint32_t)params.size());
  for (size_t i = 0; i < params.size(); ++i) {
    write_str(out, params.path(i));
    write_u8(out, params.frozen(i) ? 1 : 0);
    const Shape& s = params.param(i).shape();
    write_u32(out, (uint32_t)s.size());
    for (int d : s) write_u32(out, (uint32_t)d);
  }
  for (size_t i = 0; i < params.size(); ++i) {
    for (Real v : params.param(i).values()) write_f32(out, (float)v);
  }

  write_u8(out, extras.standardizer ? 1 : 0);
  if (extras.standardizer) {
    const Standardizer& st = *extras.standardizer;
    write_u32(out, (uint32_t)st.latent_len);
    write_u32(out, (uint32_t)st.h_rep);
    for (Real v : st.mean) write_f32(out, (float)v);
    for (Real v : st.stddev) write_f32(out, (float)v);
  }
  write_u8(out, extras.schedule ? 1 : 0);
  if (extras.schedule) {
    write_u32(out, (uint32_t)extras.schedule->T);
    write_f32(out, (float)extras.schedule->beta_min);
    write_f32(out, (float)extras.schedule->beta_max);
  }
  if (!out) throw RuntimeFailure("write failure on checkpoint: " + path);
}

LoadedCheckpoint read_checkpoint(const std::string& path) {
  Reader r(path);
  char magic[4];
  r.bytes(magic, 4);
  if (std::memcmp(magic, "SLD1", 4) != 0) {
    throw ValidationError("not a checkpoint (bad magic): " + path);
  }
  LoadedCheckpoint ck;
  ck.version = r.u16();
  if (ck.version != 1) {
    throw ValidationError("unsupported checkpoint version " + std::to_string(ck.version));
  }
  ck.config_fingerprint = r.u64();

  const uint32_t vocab_n = r.u32();
  ck.vocab.id_to_token.clear();
  for (uint32_t i = 0; i < vocab_n; ++i) ck.vocab.id_to_token.push_back(r.str());
  for (int i = 0; i < ck.vocab.size(); ++i) ck.vocab.token_to_id[ck.vocab.id_to_token[(size_t)i]] = i;

  const uint32_t pn = r.u32();
  ck.entries.resize(pn);
  for (uint32_t i = 0; i < pn; ++i) {
    auto& e = ck.entries[i];
    e.path = r.str();
    e.frozen = r.u8() != 0;
    const uint32_t nd = r.u32();
    for (uint32_t d = 0; d < nd; ++d) e.shape.push_back((int)r.u32());
  }
  for (uint32_t i = 0; i < pn; ++i) {
    auto& e = ck.entries[i];
    const int64_t count = shape_numel(e.shape);
    e.data.resize((size_t)count);
    for (int64_t j = 0; j < count; ++j) e.data[(size_t)j] = r.f32();
  }

  if (r.u8()) {
    Standardizer st;
    st.latent_len = (int)r.u32();
    st.h_rep = (int)r.u32();
    const size_t dims = (size_t)st.latent_len * st.h_rep;
    st.mean.resize(dims);
    st.stddev.resize(dims);
    for (auto& v : st.mean) v = (Real)r.f32();
    for (auto& v : st.stddev) v = (Real)r.f32();
    ck.extras.standardizer = std::move(st);
  }
  if (r.u8()) {
    const int T = (int)r.u32();
    const double bmin = r.f32();
    const double bmax = r.f32();
    ck.extras.schedule = build_schedule(T, bmin, bmax);
  }
  return ck;
}

void apply_checkpoint(const LoadedCheckpoint& ckpt, ParamStore& params) {
  if (ckpt.entries.size() != params.size()) {
    throw ValidationError("checkpoint manifest has " + std::to_string(ckpt.entries.size()) +
                          " parameters, model expects " + std::to_string(params.size()));
  }
  for (size_t i = 0; i < params.size(); ++i) {
    const auto& e = ckpt.entries[i];
    Tensor t = params.param(i);
    if (e.path != params.path(i)) {
      throw ValidationError("checkpoint parameter #" + std::to_string(i) + " is '" + e.path +
                            "', model expects '" + params.path(i) + "'");
    }
    if (e.shape != t.shape()) {
      throw ValidationError("checkpoint parameter '" + e.path + "' has shape " +
                            shape_str(e.shape) + ", model expects " + shape_str(t.shape()));
    }
    for (int64_t j = 0; j < t.size(); ++j) t.data()[j] = (Real)e.data[(size_t)j];
    params.set_frozen(e.path, e.frozen);
  }
}

void require_fingerprint(const LoadedCheckpoint& ckpt, uint64_t expected, bool force,
                         const std::string& what) {
  if (ckpt.config_fingerprint != expected && !force) {
    throw ValidationError(what + ": config fingerprint mismatch (checkpoint " +
                          std::to_string(ckpt.config_fingerprint) + ", config " +
                          std::to_string(expected) + "); pass --force to override");
  }
}

}  // namespace sld
