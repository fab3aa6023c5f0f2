#include "ntm/episode_io.hpp"

#include <fstream>
#include <istream>
#include <ostream>

namespace ntm {
namespace {

void write_row(std::ostream& out, const double* row, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    if (i) out << ' ';
    out << row[i];
  }
  out << '\n';
}

void expect(std::istream& in, const std::string& word) {
  std::string got;
  if (!(in >> got) || got != word) {
    throw FormatError("episode: expected '" + word + "', got '" + got + "'");
  }
}

template <typename T>
T read_value(std::istream& in, const std::string& field) {
  T v{};
  if (!(in >> v)) throw FormatError("episode: cannot read " + field);
  return v;
}

template <typename T>
T read_field(std::istream& in, const std::string& key) {
  expect(in, key);
  return read_value<T>(in, key);
}

}  // namespace

void write_episode(std::ostream& out, const Episode& e) {
  e.validate();
  const auto old_precision = out.precision(17);
  out << "ntm-episode 1\n"
      << "task " << to_string(e.task) << '\n'
      << "seed " << e.seed << '\n'
      << "steps " << e.steps << '\n'
      << "input_width " << e.input_width << '\n'
      << "output_width " << e.output_width << '\n'
      << "meta length " << e.meta.length << " repeats " << e.meta.repeats << " repeat_input "
      << e.meta.repeat_input << " items " << e.meta.items << " query " << e.meta.query << '\n'
      << "priorities " << e.meta.priorities.size();
  for (double p : e.meta.priorities) out << ' ' << p;
  out << "\ninputs\n";
  for (std::size_t t = 0; t < e.steps; ++t) {
    write_row(out, e.inputs.data() + t * e.input_width, e.input_width);
  }
  out << "targets\n";
  for (std::size_t k = 0; k < e.scored_steps(); ++k) {
    write_row(out, e.targets.data() + k * e.output_width, e.output_width);
  }
  out << "mask\n";
  for (std::size_t t = 0; t < e.steps; ++t) out << (t ? " " : "") << int(e.score_mask[t]);
  out << "\nend\n";
  out.precision(old_precision);
}

Episode read_episode(std::istream& in) {
  expect(in, "ntm-episode");
  const auto version = read_value<int>(in, "version");
  if (version != 1) throw FormatError("episode: unsupported version " + std::to_string(version));
  Episode e;
  try {
    e.task = parse_task_kind(read_field<std::string>(in, "task"));
  } catch (const ConfigError& err) {
    throw FormatError(std::string("episode: ") + err.what());
  }
  e.seed = read_field<std::uint64_t>(in, "seed");
  e.steps = read_field<std::size_t>(in, "steps");
  e.input_width = read_field<std::size_t>(in, "input_width");
  e.output_width = read_field<std::size_t>(in, "output_width");
  expect(in, "meta");
  e.meta.length = read_field<std::size_t>(in, "length");
  e.meta.repeats = read_field<std::size_t>(in, "repeats");
  e.meta.repeat_input = read_field<double>(in, "repeat_input");
  e.meta.items = read_field<std::size_t>(in, "items");
  e.meta.query = read_field<std::size_t>(in, "query");
  const auto np = read_field<std::size_t>(in, "priorities");
  for (std::size_t i = 0; i < np; ++i) e.meta.priorities.push_back(read_value<double>(in, "priority"));

  expect(in, "inputs");
  e.inputs.resize(e.steps * e.input_width);
  for (auto& v : e.inputs) v = read_value<double>(in, "input value");

  expect(in, "targets");
  // Targets are counted by the mask, which follows; buffer until "mask".
  std::string token;
  std::vector<double> targets;
  while (in >> token && token != "mask") {
    try {
      std::size_t used = 0;
      targets.push_back(std::stod(token, &used));
      if (used != token.size()) throw std::invalid_argument(token);
    } catch (const std::exception&) {
      throw FormatError("episode: bad target value '" + token + "'");
    }
  }
  if (token != "mask") throw FormatError("episode: missing 'mask' section");
  e.targets = std::move(targets);
  for (std::size_t t = 0; t < e.steps; ++t) {
    const int flag = read_value<int>(in, "mask flag");
    if (flag != 0 && flag != 1) throw FormatError("episode: mask flags must be 0 or 1");
    e.score_mask.push_back(static_cast<std::uint8_t>(flag));
  }
  expect(in, "end");
  e.validate();
  return e;
}

void save_episode(const std::string& path, const Episode& episode) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write episode file '" + path + "'");
  write_episode(out, episode);
}

Episode load_episode(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open episode file '" + path + "'");
  return read_episode(in);
}

}  // namespace ntm
