#include "ddil/checkpoint.hpp"

#include <bit>
#include <fstream>
#include <iterator>

#include "ddil/error.hpp"

namespace ddil {

namespace {

constexpr char kMagic[8] = {'D', 'D', 'I', 'L', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kFormatVersion = 1;

class Writer {
 public:
  void u8(std::uint8_t v) { out_.push_back(static_cast<char>(v)); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void f64s(std::span<const double> vs) {
    for (const double v : vs) f64(v);
  }
  void raw(const char* data, std::size_t n) { out_.append(data, n); }
  std::string take() { return std::move(out_); }

 private:
  std::string out_;
};

class Reader {
 public:
  explicit Reader(const std::string& in) : in_(in) {}
  std::uint8_t u8() {
    need(1);
    return static_cast<std::uint8_t>(in_[pos_++]);
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<std::uint8_t>(in_[pos_++])) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<std::uint8_t>(in_[pos_++])) << (8 * i);
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  std::vector<double> f64s(std::size_t n) {
    need(n * 8);
    std::vector<double> vs(n);
    for (double& v : vs) v = f64();
    return vs;
  }
  void expect_raw(const char* data, std::size_t n) {
    need(n);
    if (in_.compare(pos_, n, data, n) != 0) throw DataError("not a checkpoint file (bad magic)");
    pos_ += n;
  }
  bool at_end() const { return pos_ == in_.size(); }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > in_.size()) throw DataError("truncated checkpoint");
  }
  const std::string& in_;
  std::size_t pos_ = 0;
};

}  // namespace

OptimizerSnapshot snapshot(const AdamW& optimizer) {
  return {optimizer.config(), optimizer.step_count(),
          std::vector<double>(optimizer.first_moment().begin(), optimizer.first_moment().end()),
          std::vector<double>(optimizer.second_moment().begin(), optimizer.second_moment().end())};
}

AdamW restore_optimizer(const OptimizerSnapshot& snap, std::size_t n_params) {
  AdamW optimizer(snap.config, n_params);
  optimizer.restore(snap.step, snap.m, snap.v);
  return optimizer;
}

std::string encode_checkpoint(const Checkpoint& ckpt) {
  const MlpSpec& spec = ckpt.model.spec();
  const std::size_t n = ckpt.model.param_count();
  Writer w;
  w.raw(kMagic, sizeof kMagic);
  w.u32(kFormatVersion);
  w.u32(static_cast<std::uint32_t>(spec.data_dim));
  w.u32(static_cast<std::uint32_t>(spec.time_embed_dim));
  w.u32(static_cast<std::uint32_t>(spec.cond_classes));
  w.u32(static_cast<std::uint32_t>(spec.t_max));
  w.u8(spec.zero_init_output ? 1 : 0);
  w.u32(static_cast<std::uint32_t>(spec.hidden.size()));
  for (const int width : spec.hidden) w.u32(static_cast<std::uint32_t>(width));
  w.u8(static_cast<std::uint8_t>(ckpt.model.role()));
  w.u8(static_cast<std::uint8_t>(ckpt.schedule.kind()));
  w.u32(static_cast<std::uint32_t>(ckpt.schedule.t_max()));
  w.u64(n);
  w.f64s(ckpt.model.params());

  w.u8(ckpt.optimizer ? 1 : 0);
  if (ckpt.optimizer) {
    const OptimizerSnapshot& opt = *ckpt.optimizer;
    if (opt.m.size() != n || opt.v.size() != n) throw ShapeError("optimizer moments do not match parameter count");
    w.u64(opt.step);
    w.f64(opt.config.lr);
    w.f64(opt.config.beta1);
    w.f64(opt.config.beta2);
    w.f64(opt.config.eps);
    w.f64(opt.config.weight_decay);
    w.u64(opt.config.warmup_steps);
    w.u64(opt.config.total_steps);
    w.f64s(opt.m);
    w.f64s(opt.v);
  }
  w.u8(ckpt.ema_params ? 1 : 0);
  if (ckpt.ema_params) {
    if (ckpt.ema_params->size() != n) throw ShapeError("EMA parameters do not match parameter count");
    w.f64s(*ckpt.ema_params);
  }
  return w.take();
}

Checkpoint decode_checkpoint(const std::string& bytes) {
  Reader r(bytes);
  r.expect_raw(kMagic, sizeof kMagic);
  if (const std::uint32_t version = r.u32(); version != kFormatVersion) {
    throw DataError("unsupported checkpoint version " + std::to_string(version));
  }
  MlpSpec spec;
  spec.data_dim = static_cast<int>(r.u32());
  spec.time_embed_dim = static_cast<int>(r.u32());
  spec.cond_classes = static_cast<int>(r.u32());
  spec.t_max = static_cast<int>(r.u32());
  spec.zero_init_output = r.u8() != 0;
  const std::uint32_t n_hidden = r.u32();
  if (n_hidden > 64) throw DataError("implausible hidden layer count");
  spec.hidden.clear();
  for (std::uint32_t i = 0; i < n_hidden; ++i) spec.hidden.push_back(static_cast<int>(r.u32()));
  const std::uint8_t role = r.u8();
  if (role > 2) throw DataError("bad model role");
  const std::uint8_t kind = r.u8();
  if (kind > 1) throw DataError("bad schedule kind");
  const int schedule_t_max = static_cast<int>(r.u32());

  std::optional<Checkpoint> decoded;
  try {
    decoded.emplace(Checkpoint{NoiseSchedule(static_cast<ScheduleKind>(kind), schedule_t_max),
                               Mlp(spec, static_cast<ModelRole>(role), 0), std::nullopt, std::nullopt});
  } catch (const ConfigError& e) {
    throw DataError(std::string("invalid checkpoint header: ") + e.what());
  }
  Checkpoint& ckpt = *decoded;
  const std::uint64_t n = r.u64();
  if (n != ckpt.model.param_count()) throw DataError("parameter count does not match architecture header");
  const std::vector<double> params = r.f64s(n);
  std::copy(params.begin(), params.end(), ckpt.model.params().begin());

  if (r.u8() != 0) {
    OptimizerSnapshot opt;
    opt.step = r.u64();
    opt.config.lr = r.f64();
    opt.config.beta1 = r.f64();
    opt.config.beta2 = r.f64();
    opt.config.eps = r.f64();
    opt.config.weight_decay = r.f64();
    opt.config.warmup_steps = r.u64();
    opt.config.total_steps = r.u64();
    opt.m = r.f64s(n);
    opt.v = r.f64s(n);
    ckpt.optimizer = std::move(opt);
  }
  if (r.u8() != 0) ckpt.ema_params = r.f64s(n);
  if (!r.at_end()) throw DataError("trailing bytes after checkpoint");
  return std::move(ckpt);
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
  const std::string bytes = encode_checkpoint(checkpoint);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write checkpoint " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

}  // namespace ddil
