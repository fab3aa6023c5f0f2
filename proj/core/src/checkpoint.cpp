#include "ntm/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <vector>

namespace ntm {
namespace {

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

class Writer {
 public:
  explicit Writer(std::ofstream& out) : out_(out) {}

  template <typename T>
  void put(T v) {
    out_.write(reinterpret_cast<const char*>(&v), sizeof(T));
  }
  void put_bytes(const void* p, std::size_t n) { out_.write(static_cast<const char*>(p), n); }
  void put_reals(const std::vector<double>& v) { put_bytes(v.data(), v.size() * sizeof(double)); }

 private:
  std::ofstream& out_;
};

class Reader {
 public:
  explicit Reader(std::ifstream& in) : in_(in) {}

  template <typename T>
  T get(const char* field) {
    T v{};
    in_.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in_) throw FormatError(std::string("checkpoint truncated while reading ") + field);
    return v;
  }
  void get_bytes(void* p, std::size_t n, const std::string& field) {
    in_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (!in_) throw FormatError("checkpoint truncated while reading " + field);
  }
  std::vector<double> get_reals(std::size_t n, const std::string& field) {
    std::vector<double> v(n);
    get_bytes(v.data(), n * sizeof(double), field);
    return v;
  }

 private:
  std::ifstream& in_;
};

}  // namespace

void save_checkpoint(const std::string& path, const TrainConfig& config, std::size_t episodes_done,
                     const ParameterStore& params, const RmsProp* optimizer,
                     const std::vector<double>& recent_costs) {
  // Write to a sibling file and rename so a crash never leaves a torn checkpoint.
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot write checkpoint '" + path + "'");
    Writer w(out);
    w.put_bytes(kCheckpointMagic, sizeof(kCheckpointMagic));
    w.put<std::uint32_t>(kCheckpointVersion);
    const std::string text = format_train_config(config);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(text.size()));
    w.put_bytes(text.data(), text.size());
    w.put<std::uint64_t>(episodes_done);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(params.size()));
    for (std::size_t i = 0; i < params.size(); ++i) {
      const Parameter& p = params[i];
      w.put<std::uint32_t>(static_cast<std::uint32_t>(p.name.size()));
      w.put_bytes(p.name.data(), p.name.size());
      w.put<std::uint32_t>(static_cast<std::uint32_t>(p.shape.rows));
      w.put<std::uint32_t>(static_cast<std::uint32_t>(p.shape.cols));
      w.put_reals(p.value);
    }
    w.put<std::uint8_t>(optimizer ? 1 : 0);
    if (optimizer) {
      w.put<std::uint64_t>(optimizer->steps());
      for (const auto& s : optimizer->slots()) {
        w.put_reals(s.mean_square);
        w.put_reals(s.mean);
        w.put_reals(s.delta);
      }
    }
    w.put<std::uint32_t>(static_cast<std::uint32_t>(recent_costs.size()));
    w.put_reals(recent_costs);
    if (!out) throw FormatError("failed writing checkpoint '" + path + "'");
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open checkpoint '" + path + "'");
  Reader r(in);
  char magic[8];
  r.get_bytes(magic, sizeof(magic), "magic");
  if (std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0) {
    throw FormatError("checkpoint field 'magic' is wrong: not an NTM checkpoint");
  }
  const auto version = r.get<std::uint32_t>("version");
  if (version != kCheckpointVersion) {
    throw FormatError("checkpoint field 'version' is " + std::to_string(version) +
                      ", expected " + std::to_string(kCheckpointVersion));
  }
  Checkpoint ck;
  const auto text_len = r.get<std::uint32_t>("config_len");
  std::string text(text_len, '\0');
  r.get_bytes(text.data(), text_len, "config");
  try {
    ck.config = parse_train_config(text);
  } catch (const ConfigError& e) {
    throw FormatError(std::string("checkpoint field 'config' is invalid: ") + e.what());
  }
  ck.episodes_done = r.get<std::uint64_t>("episodes");
  const auto count = r.get<std::uint32_t>("param_count");
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::string idx = "parameter " + std::to_string(i);
    const auto name_len = r.get<std::uint32_t>("name_len");
    if (name_len > 4096) throw FormatError("checkpoint field 'name_len' is implausible");
    std::string name(name_len, '\0');
    r.get_bytes(name.data(), name_len, idx + " name");
    const auto rows = r.get<std::uint32_t>("rows");
    const auto cols = r.get<std::uint32_t>("cols");
    Parameter& p = ck.params.add(name, {rows, cols});
    p.value = r.get_reals(p.shape.size(), "values of '" + name + "'");
  }
  const auto has_opt = r.get<std::uint8_t>("has_opt");
  if (has_opt > 1) throw FormatError("checkpoint field 'has_opt' is not 0 or 1");
  if (has_opt == 1) {
    const auto steps = r.get<std::uint64_t>("opt_steps");
    std::vector<RmsProp::Slot> slots(ck.params.size());
    for (std::size_t i = 0; i < ck.params.size(); ++i) {
      const std::size_t n = ck.params[i].value.size();
      const std::string name = ck.params[i].name;
      slots[i].mean_square = r.get_reals(n, "optimizer mean_square of '" + name + "'");
      slots[i].mean = r.get_reals(n, "optimizer mean of '" + name + "'");
      slots[i].delta = r.get_reals(n, "optimizer delta of '" + name + "'");
    }
    RmsProp opt(ck.params, ck.config.optimizer);
    opt.restore(std::move(slots), steps);
    ck.optimizer = std::move(opt);
  }
  const auto window = r.get<std::uint32_t>("window_len");
  ck.recent_costs = r.get_reals(window, "recent costs");
  return ck;
}

void assign_parameters(ParameterStore& store, const ParameterStore& saved) {
  if (store.size() != saved.size()) {
    throw FormatError("checkpoint has " + std::to_string(saved.size()) + " parameters, model has " +
                      std::to_string(store.size()));
  }
  for (std::size_t i = 0; i < store.size(); ++i) {
    if (store[i].name != saved[i].name) {
      throw FormatError("checkpoint parameter " + std::to_string(i) + " is '" + saved[i].name +
                        "', model expects '" + store[i].name + "'");
    }
    if (store[i].shape != saved[i].shape) {
      throw FormatError("checkpoint parameter '" + saved[i].name + "' has shape " +
                        to_string(saved[i].shape) + ", model expects " +
                        to_string(store[i].shape));
    }
    store[i].value = saved[i].value;
  }
}

}  // namespace ntm
