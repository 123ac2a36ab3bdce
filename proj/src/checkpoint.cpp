// Copyright (c) 2026 PDM Authors
// SPDX-License-Identifier: Apache-2.0
#include "pdm/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <map>

#include "pdm/config.hpp"

namespace pdm {
namespace {

// Entry payload types. The container is little-endian; this code writes host
// integers directly and asserts the platform matches at compile time.
enum class Dtype : uint8_t { F32 = 0, F64 = 1, I64 = 2, Bytes = 3 };

#if defined(__BYTE_ORDER__) && __BYTE_ORDER__ != __ORDER_LITTLE_ENDIAN__
#error "checkpoint container assumes a little-endian host"
#endif

struct Entry {
  Dtype dtype = Dtype::Bytes;
  std::vector<uint64_t> dims;
  std::vector<uint8_t> payload;

  size_t numel() const {
    size_t n = 1;
    for (uint64_t d : dims) n *= size_t(d);
    return n;
  }
};

template <typename T>
void put_raw(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T get_raw(std::istream& in, const std::string& path) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!in) throw DataError("checkpoint '" + path + "' is truncated");
  return v;
}

void write_entry(std::ostream& out, const std::string& name, Dtype dtype,
                 const std::vector<uint64_t>& dims, const void* data,
                 size_t bytes) {
  put_raw<uint32_t>(out, uint32_t(name.size()));
  out.write(name.data(), std::streamsize(name.size()));
  put_raw<uint8_t>(out, uint8_t(dtype));
  put_raw<uint32_t>(out, uint32_t(dims.size()));
  for (uint64_t d : dims) put_raw<uint64_t>(out, d);
  out.write(static_cast<const char*>(data), std::streamsize(bytes));
}

void write_f32(std::ostream& out, const std::string& name, const Tensor<float>& t) {
  std::vector<uint64_t> dims(t.shape().begin(), t.shape().end());
  write_entry(out, name, Dtype::F32, dims, t.data(), t.numel() * 4);
}

void write_i64(std::ostream& out, const std::string& name, int64_t v) {
  write_entry(out, name, Dtype::I64, {1}, &v, 8);
}

size_t dtype_size(Dtype d) {
  switch (d) {
    case Dtype::F32: return 4;
    case Dtype::F64: return 8;
    case Dtype::I64: return 8;
    case Dtype::Bytes: return 1;
  }
  throw DataError("unknown checkpoint dtype");
}

std::map<std::string, Entry> read_entries(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint '" + path + "'");
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, "PDMC", 4) != 0)
    throw DataError("'" + path + "' is not a checkpoint (bad magic)");
  const auto version = get_raw<uint32_t>(in, path);
  if (version != kCheckpointVersion)
    throw DataError("checkpoint format version " + std::to_string(version) +
                    " unsupported (want " + std::to_string(kCheckpointVersion) +
                    ")");
  const auto count = get_raw<uint64_t>(in, path);
  std::map<std::string, Entry> entries;
  for (uint64_t i = 0; i < count; ++i) {
    const auto name_len = get_raw<uint32_t>(in, path);
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    Entry e;
    e.dtype = Dtype(get_raw<uint8_t>(in, path));
    const auto ndim = get_raw<uint32_t>(in, path);
    for (uint32_t d = 0; d < ndim; ++d)
      e.dims.push_back(get_raw<uint64_t>(in, path));
    e.payload.resize(e.numel() * dtype_size(e.dtype));
    in.read(reinterpret_cast<char*>(e.payload.data()),
            std::streamsize(e.payload.size()));
    if (!in) throw DataError("checkpoint '" + path + "' is truncated");
    entries[name] = std::move(e);
  }
  return entries;
}

const Entry& need(const std::map<std::string, Entry>& es, const std::string& name,
                  Dtype dtype, const std::string& path) {
  auto it = es.find(name);
  if (it == es.end())
    throw DataError("checkpoint '" + path + "' lacks entry '" + name + "'");
  if (it->second.dtype != dtype)
    throw DataError("checkpoint entry '" + name + "' has the wrong type");
  return it->second;
}

int64_t read_i64(const std::map<std::string, Entry>& es, const std::string& name,
                 const std::string& path) {
  const Entry& e = need(es, name, Dtype::I64, path);
  int64_t v = 0;
  std::memcpy(&v, e.payload.data(), 8);
  return v;
}

Tensor<float> read_f32(const Entry& e) {
  std::vector<size_t> shape(e.dims.begin(), e.dims.end());
  Tensor<float> t(shape);
  std::memcpy(t.data(), e.payload.data(), e.payload.size());
  return t;
}

}  // namespace

void save_checkpoint(ModelState& state, const std::string& path) {
  const ParamMap<float> pm = state.params();
  const bool with_moments = !state.opt.m.empty();
  if (with_moments && state.opt.m.size() != pm.size())
    throw DataError("optimizer moments out of sync with parameters");

  // config, schedule.beta, step, adam.t, rng.key, rng.counter
  uint64_t count = 6;
  count += pm.size();
  if (with_moments) count += 2 * pm.size();
  if (state.proto_labels) count += 1;

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write checkpoint '" + path + "'");
  out.write("PDMC", 4);
  put_raw<uint32_t>(out, kCheckpointVersion);
  put_raw<uint64_t>(out, count);

  const std::string cfg_text = run_config_text(state.cfg);
  write_entry(out, "config", Dtype::Bytes, {uint64_t(cfg_text.size())},
              cfg_text.data(), cfg_text.size());
  write_entry(out, "schedule.beta", Dtype::F64, {uint64_t(state.sched.T)},
              state.sched.beta.data(), state.sched.T * 8);
  write_i64(out, "step", int64_t(state.step));
  write_i64(out, "adam.t", state.opt.t);
  int64_t key = 0, ctr = 0;
  const uint64_t ukey = state.train_rng.key(), uctr = state.train_rng.counter();
  std::memcpy(&key, &ukey, 8);
  std::memcpy(&ctr, &uctr, 8);
  write_i64(out, "rng.key", key);
  write_i64(out, "rng.counter", ctr);
  if (state.proto_labels) {
    std::vector<int64_t> lab(state.proto_labels->begin(), state.proto_labels->end());
    write_entry(out, "protos.labels", Dtype::I64, {uint64_t(lab.size())},
                lab.data(), lab.size() * 8);
  }
  for (size_t i = 0; i < pm.size(); ++i) {
    write_f32(out, "param." + pm[i].first, pm[i].second->value);
    if (with_moments) {
      write_f32(out, "adam.m." + pm[i].first, state.opt.m[i]);
      write_f32(out, "adam.v." + pm[i].first, state.opt.v[i]);
    }
  }
  out.flush();
  if (!out) throw DataError("write failure on checkpoint '" + path + "'");
}

ModelState load_checkpoint(const std::string& path) {
  const auto entries = read_entries(path);

  const Entry& cfg_e = need(entries, "config", Dtype::Bytes, path);
  const std::string cfg_text(cfg_e.payload.begin(), cfg_e.payload.end());
  const RunConfig cfg =
      run_config_from(KvConfig::parse_text(cfg_text, path + ":config"));

  ModelState s = ModelState::build(cfg);

  const Entry& beta_e = need(entries, "schedule.beta", Dtype::F64, path);
  std::vector<double> betas(beta_e.numel());
  std::memcpy(betas.data(), beta_e.payload.data(), beta_e.payload.size());
  if (betas.size() != cfg.T)
    throw DataError("checkpoint schedule length disagrees with config T");
  s.sched = schedule_from_betas(std::move(betas));

  s.step = size_t(read_i64(entries, "step", path));
  s.opt.t = read_i64(entries, "adam.t", path);
  const int64_t key = read_i64(entries, "rng.key", path);
  const int64_t ctr = read_i64(entries, "rng.counter", path);
  uint64_t ukey = 0, uctr = 0;
  std::memcpy(&ukey, &key, 8);
  std::memcpy(&uctr, &ctr, 8);
  s.train_rng = Rng(ukey, uctr);

  if (auto it = entries.find("protos.labels"); it != entries.end()) {
    if (it->second.dtype != Dtype::I64)
      throw DataError("checkpoint entry 'protos.labels' has the wrong type");
    std::vector<int64_t> lab(it->second.numel());
    std::memcpy(lab.data(), it->second.payload.data(), it->second.payload.size());
    s.proto_labels = std::vector<int>(lab.begin(), lab.end());
  }

  const ParamMap<float> pm = s.params();
  const bool with_moments = entries.count("adam.m." + pm[0].first) > 0;
  if (with_moments) {
    s.opt.m.clear();
    s.opt.v.clear();
  }
  for (const auto& [name, var] : pm) {
    const Entry& e = need(entries, "param." + name, Dtype::F32, path);
    Tensor<float> t = read_f32(e);
    if (!t.same_shape(var->value))
      throw DataError("checkpoint tensor 'param." + name + "' has shape " +
                      t.shape_str() + ", model expects " + var->value.shape_str());
    var->value = std::move(t);
    if (with_moments) {
      s.opt.m.push_back(read_f32(need(entries, "adam.m." + name, Dtype::F32, path)));
      s.opt.v.push_back(read_f32(need(entries, "adam.v." + name, Dtype::F32, path)));
      if (!s.opt.m.back().same_shape(var->value) ||
          !s.opt.v.back().same_shape(var->value))
        throw DataError("checkpoint moments for '" + name + "' have wrong shape");
    }
  }
  return s;
}

}  // namespace pdm
