#include "pgg/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "pgg/error.hpp"
#include "pgg/trainer.hpp"

namespace pgg {

namespace {

constexpr char kMagic[8] = {'P', 'G', 'G', 'C', 'K', 'P', 'T', '\0'};

static_assert(std::endian::native == std::endian::little, "checkpoint format assumes little-endian");

class Writer {
 public:
  template <typename T>
  void pod(T v) {
    char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    out_.append(buf, sizeof(T));
  }
  void str(std::string_view s) {
    pod(static_cast<std::uint32_t>(s.size()));
    out_.append(s);
  }
  void array(const NamedArray& a) {
    str(a.name);
    pod(static_cast<std::uint32_t>(a.shape.size()));
    for (auto e : a.shape) pod(static_cast<std::uint64_t>(e));
    pod(static_cast<std::uint64_t>(a.values.size()));
    for (double v : a.values) pod(v);
  }
  void arrays(const std::vector<NamedArray>& v) {
    pod(static_cast<std::uint32_t>(v.size()));
    for (const auto& a : v) array(a);
  }
  std::string take() { return std::move(out_); }

 private:
  std::string out_;
};

class Reader {
 public:
  explicit Reader(std::string_view in) : in_(in) {}

  template <typename T>
  T pod() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, in_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::string str() {
    const auto n = pod<std::uint32_t>();
    need(n);
    std::string s(in_.substr(pos_, n));
    pos_ += n;
    return s;
  }
  NamedArray array() {
    NamedArray a;
    a.name = str();
    const auto rank = pod<std::uint32_t>();
    if (rank > 8) throw Error("checkpoint: corrupt array rank in '" + a.name + "'");
    for (std::uint32_t i = 0; i < rank; ++i) a.shape.push_back(pod<std::uint64_t>());
    const auto count = pod<std::uint64_t>();
    if (count != shape_numel(a.shape)) {
      throw Error("checkpoint: array '" + a.name + "' count does not match its shape");
    }
    need(count * sizeof(double));
    a.values.resize(count);
    std::memcpy(a.values.data(), in_.data() + pos_, count * sizeof(double));
    pos_ += count * sizeof(double);
    return a;
  }
  std::vector<NamedArray> arrays() {
    const auto n = pod<std::uint32_t>();
    std::vector<NamedArray> out;
    for (std::uint32_t i = 0; i < n; ++i) out.push_back(array());
    return out;
  }
  bool done() const { return pos_ == in_.size(); }

 private:
  void need(std::size_t n) const {
    if (in_.size() - pos_ < n) throw Error("checkpoint: truncated data");
  }
  std::string_view in_;
  std::size_t pos_ = 0;
};

NamedArray named(const Tensor& t) {
  return {t.name(), t.shape(), std::vector<double>(t.values().begin(), t.values().end())};
}

}  // namespace

Checkpoint make_checkpoint(const TrainConfig& config, const ActorCritic& model,
                           const Adam& optimizer, const ObservationNormalizer* obs_norm,
                           std::int64_t global_step, std::int64_t milestone) {
  Checkpoint c;
  c.config_text = config.to_text();
  c.config_hash = config.hash();
  c.global_step = global_step;
  c.milestone = milestone;
  for (const auto& p : model.parameters()) c.parameters.push_back(named(p));
  const auto& st = optimizer.state();
  c.adam_step = st.step;
  const auto& params = optimizer.params();
  for (std::size_t i = 0; i < st.first_moment.size(); ++i) {
    c.adam_first_moment.push_back({params[i].name(), params[i].shape(), st.first_moment[i]});
    c.adam_second_moment.push_back({params[i].name(), params[i].shape(), st.second_moment[i]});
  }
  if (obs_norm) {
    const auto& s = obs_norm->stats();
    c.has_obs_norm = true;
    c.obs_mean = {"obs_mean", {s.dim()}, s.mean()};
    c.obs_var = {"obs_var", {s.dim()}, s.var()};
    c.obs_count = s.count();
  }
  return c;
}

std::string serialize_checkpoint(const Checkpoint& c) {
  Writer w;
  for (char ch : kMagic) w.pod(ch);
  w.pod(Checkpoint::kVersion);
  w.str(c.config_text);
  w.pod(c.config_hash);
  w.pod(c.global_step);
  w.pod(c.milestone);
  w.arrays(c.parameters);
  w.pod(c.adam_step);
  w.arrays(c.adam_first_moment);
  w.arrays(c.adam_second_moment);
  w.pod(static_cast<std::uint8_t>(c.has_obs_norm ? 1 : 0));
  if (c.has_obs_norm) {
    w.array(c.obs_mean);
    w.array(c.obs_var);
    w.pod(c.obs_count);
  }
  return w.take();
}

Checkpoint deserialize_checkpoint(std::string_view bytes) {
  Reader r(bytes);
  for (char ch : kMagic) {
    if (r.pod<char>() != ch) throw Error("checkpoint: bad magic");
  }
  const auto version = r.pod<std::uint32_t>();
  if (version != Checkpoint::kVersion) {
    throw Error("checkpoint: unsupported version " + std::to_string(version));
  }
  Checkpoint c;
  c.config_text = r.str();
  c.config_hash = r.pod<std::uint64_t>();
  c.global_step = r.pod<std::int64_t>();
  c.milestone = r.pod<std::int64_t>();
  c.parameters = r.arrays();
  c.adam_step = r.pod<std::uint64_t>();
  c.adam_first_moment = r.arrays();
  c.adam_second_moment = r.arrays();
  c.has_obs_norm = r.pod<std::uint8_t>() != 0;
  if (c.has_obs_norm) {
    c.obs_mean = r.array();
    c.obs_var = r.array();
    c.obs_count = r.pod<double>();
  }
  if (!r.done()) throw Error("checkpoint: trailing bytes");
  if (fnv1a64(c.config_text) != c.config_hash) throw Error("checkpoint: config hash mismatch");
  return c;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  const std::string bytes = serialize_checkpoint(ckpt);
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw Error("checkpoint: cannot write " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error("checkpoint: write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw Error("checkpoint: cannot rename to " + path.string() + ": " + ec.message());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("checkpoint: cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return deserialize_checkpoint(ss.str());
}

void restore_parameters(const Checkpoint& ckpt, ActorCritic& model) {
  for (auto p : model.parameters()) {
    const NamedArray* found = nullptr;
    for (const auto& a : ckpt.parameters) {
      if (a.name == p.name()) found = &a;
    }
    if (!found) throw Error("checkpoint: missing parameter '" + p.name() + "'");
    if (found->shape != p.shape()) {
      throw Error("checkpoint: parameter '" + p.name() + "' has shape " + shape_str(found->shape) +
                  ", model expects " + shape_str(p.shape()));
    }
    auto dst = p.mutable_values();
    std::copy(found->values.begin(), found->values.end(), dst.begin());
  }
}

void restore_optimizer(const Checkpoint& ckpt, Adam& optimizer) {
  const auto& params = optimizer.params();
  if (ckpt.adam_first_moment.size() != params.size() ||
      ckpt.adam_second_moment.size() != params.size()) {
    throw Error("checkpoint: optimizer state has " + std::to_string(ckpt.adam_first_moment.size()) +
                " entries, optimizer has " + std::to_string(params.size()));
  }
  AdamState& st = optimizer.mutable_state();
  st.step = ckpt.adam_step;
  st.first_moment.clear();
  st.second_moment.clear();
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (ckpt.adam_first_moment[i].values.size() != params[i].numel()) {
      throw Error("checkpoint: optimizer moment size mismatch for '" + params[i].name() + "'");
    }
    st.first_moment.push_back(ckpt.adam_first_moment[i].values);
    st.second_moment.push_back(ckpt.adam_second_moment[i].values);
  }
}

LoadedPolicy load_policy(const std::filesystem::path& path) {
  const Checkpoint ckpt = load_checkpoint(path);
  TrainConfig config = parse_config(ckpt.config_text);
  Rng rng(0);
  LoadedPolicy out{config, ActorCritic(model_spec_for(config, true), rng), std::nullopt,
                   ckpt.global_step, ckpt.milestone};
  restore_parameters(ckpt, out.model);
  if (ckpt.has_obs_norm) {
    ObservationNormalizer norm(ckpt.obs_mean.values.size());
    norm.stats().restore(ckpt.obs_mean.values, ckpt.obs_var.values, ckpt.obs_count);
    out.obs_norm = std::move(norm);
  }
  return out;
}

std::filesystem::path checkpoint_filename(std::int64_t milestone) {
  return "ckpt_" + std::to_string(milestone) + ".bin";
}

}  // namespace pgg
