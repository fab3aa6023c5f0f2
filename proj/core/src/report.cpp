#include "ntm/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

namespace ntm {

TraceLog record_trace(SequenceModel& model, const Episode& episode) {
  Tape tape(/*record_gradients=*/false);
  TraceLog trace;
  model.forward(tape, episode, &trace);
  return trace;
}

std::vector<Panel> trace_panels(const TraceLog& trace) {
  std::vector<Panel> out;
  out.push_back({"inputs", trace.inputs, false});
  out.push_back({"outputs", trace.outputs, true});
  for (std::size_t h = 0; h < trace.read_weightings.size(); ++h) {
    out.push_back({"read_weights" + std::to_string(h), trace.read_weightings[h], true});
  }
  for (std::size_t h = 0; h < trace.write_weightings.size(); ++h) {
    out.push_back({"write_weights" + std::to_string(h), trace.write_weightings[h], true});
  }
  for (std::size_t h = 0; h < trace.adds.size(); ++h) {
    out.push_back({"adds" + std::to_string(h), trace.adds[h], false});
  }
  for (std::size_t h = 0; h < trace.reads.size(); ++h) {
    out.push_back({"reads" + std::to_string(h), trace.reads[h], false});
  }
  return out;
}

std::string panel_csv(const Panel& panel) {
  std::string out;
  const std::size_t cols = panel.rows.empty() ? 0 : panel.rows.front().size();
  out += "step";
  for (std::size_t c = 0; c < cols; ++c) out += ",c" + std::to_string(c);
  out += '\n';
  char buf[40];
  for (std::size_t t = 0; t < panel.rows.size(); ++t) {
    out += std::to_string(t);
    for (double v : panel.rows[t]) {
      std::snprintf(buf, sizeof(buf), ",%.17g", v);
      out += buf;
    }
    out += '\n';
  }
  return out;
}

std::vector<std::uint8_t> panel_pgm(const Panel& panel) {
  const std::size_t width = panel.rows.size();
  const std::size_t height = panel.rows.empty() ? 0 : panel.rows.front().size();
  double lo = 0.0, hi = 1.0;
  if (!panel.unit_range) {
    lo = std::numeric_limits<double>::infinity();
    hi = -lo;
    for (const auto& r : panel.rows) {
      for (double v : r) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
    }
    if (!(hi > lo)) {
      lo = std::isfinite(lo) ? lo : 0.0;
      hi = lo + 1.0;
    }
  }
  std::string header = "P5\n" + std::to_string(width) + " " + std::to_string(height) + "\n65535\n";
  std::vector<std::uint8_t> bytes(header.begin(), header.end());
  bytes.reserve(bytes.size() + 2 * width * height);
  for (std::size_t y = 0; y < height; ++y) {
    for (std::size_t x = 0; x < width; ++x) {
      const double v = std::clamp((panel.rows[x][y] - lo) / (hi - lo), 0.0, 1.0);
      const auto q = static_cast<std::uint16_t>(std::lround(v * 65535.0));
      bytes.push_back(static_cast<std::uint8_t>(q >> 8));
      bytes.push_back(static_cast<std::uint8_t>(q & 0xff));
    }
  }
  return bytes;
}

std::vector<std::vector<double>> decode_pgm(std::span<const std::uint8_t> bytes) {
  std::string text(bytes.begin(), bytes.end());
  std::istringstream in(text);
  std::string magic;
  std::size_t width = 0, height = 0, maxval = 0;
  in >> magic >> width >> height >> maxval;
  if (magic != "P5" || maxval != 65535) throw FormatError("not a 16-bit P5 graymap");
  in.get();
  const auto offset = static_cast<std::size_t>(in.tellg());
  if (bytes.size() < offset + 2 * width * height) throw FormatError("graymap truncated");
  std::vector<std::vector<double>> rows(width, std::vector<double>(height));
  for (std::size_t y = 0; y < height; ++y) {
    for (std::size_t x = 0; x < width; ++x) {
      const std::size_t i = offset + 2 * (y * width + x);
      const unsigned q = (unsigned(bytes[i]) << 8) | bytes[i + 1];
      rows[x][y] = q / 65535.0;
    }
  }
  return rows;
}

std::vector<std::string> export_trace(const TraceLog& trace, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  std::vector<std::string> files;
  for (const Panel& p : trace_panels(trace)) {
    const fs::path csv = fs::path(dir) / (p.name + ".csv");
    const fs::path pgm = fs::path(dir) / (p.name + ".pgm");
    std::ofstream(csv) << panel_csv(p);
    const auto bytes = panel_pgm(p);
    std::ofstream(pgm, std::ios::binary)
        .write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    files.push_back(csv.string());
    files.push_back(pgm.string());
  }
  return files;
}

std::size_t argmax(std::span<const double> v) {
  return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

CopyTraceScore score_copy_trace(const TraceLog& trace, const Episode& episode,
                                std::size_t read_head, std::size_t write_head) {
  if (episode.task != TaskKind::kCopy) throw ConfigError("copy trace score needs a copy episode");
  if (read_head >= trace.read_weightings.size() || write_head >= trace.write_weightings.size()) {
    throw ConfigError("copy trace score: head index out of range");
  }
  const std::size_t len = episode.meta.length;
  const auto& writes = trace.write_weightings[write_head];
  const auto& reads = trace.read_weightings[read_head];
  CopyTraceScore score;
  std::vector<double> a, b;
  for (std::size_t i = 0; i < len; ++i) {
    const auto& w = writes[i];
    const auto& r = reads[len + 1 + i];
    ++score.compared;
    if (argmax(w) == argmax(r)) ++score.matched;
    a.insert(a.end(), w.begin(), w.end());
    b.insert(b.end(), r.begin(), r.end());
  }
  if (score.compared > 0) {
    score.match_fraction = static_cast<double>(score.matched) / static_cast<double>(score.compared);
  }
  const auto n = static_cast<double>(a.size());
  if (n > 0) {
    double ma = 0, mb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      ma += a[i];
      mb += b[i];
    }
    ma /= n;
    mb /= n;
    double sab = 0, saa = 0, sbb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      sab += (a[i] - ma) * (b[i] - mb);
      saa += (a[i] - ma) * (a[i] - ma);
      sbb += (b[i] - mb) * (b[i] - mb);
    }
    score.correlation = (saa > 0 && sbb > 0) ? sab / std::sqrt(saa * sbb) : 0.0;
  }
  return score;
}

std::vector<LocationSample> sort_write_samples(const TraceLog& trace, const Episode& episode,
                                               LocationMode mode, std::size_t write_head) {
  if (episode.task != TaskKind::kPrioritySort) {
    throw ConfigError("write-location samples need a priority-sort episode");
  }
  if (write_head >= trace.write_weightings.size()) {
    throw ConfigError("write-location samples: no write head " + std::to_string(write_head));
  }
  std::vector<LocationSample> out;
  const auto& writes = trace.write_weightings[write_head];
  for (std::size_t t = 0; t < episode.meta.priorities.size(); ++t) {
    const auto& w = writes[t];
    double loc = 0.0;
    if (mode == LocationMode::kArgmax) {
      loc = static_cast<double>(argmax(w));
    } else {
      for (std::size_t i = 0; i < w.size(); ++i) loc += static_cast<double>(i) * w[i];
    }
    out.push_back({episode.meta.priorities[t], loc});
  }
  return out;
}

WriteLocationFit fit_write_locations(std::span<const LocationSample> samples) {
  WriteLocationFit fit;
  fit.points = samples.size();
  if (samples.empty()) return fit;
  const auto n = static_cast<double>(samples.size());
  double mx = 0, my = 0;
  for (const auto& s : samples) {
    mx += s.priority;
    my += s.location;
  }
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0;
  for (const auto& s : samples) {
    sxx += (s.priority - mx) * (s.priority - mx);
    sxy += (s.priority - mx) * (s.location - my);
  }
  if (!(sxx > 0)) {
    fit.intercept = my;
    return fit;
  }
  fit.defined = true;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double ss = 0;
  for (const auto& s : samples) {
    const double r = s.location - (fit.slope * s.priority + fit.intercept);
    ss += r * r;
  }
  fit.residual_rms = std::sqrt(ss / n);
  return fit;
}

SweepAxis parse_sweep_axis(const std::string& text) {
  if (text == "length" || text == "len") return SweepAxis::kLength;
  if (text == "repeats") return SweepAxis::kRepeats;
  if (text == "items") return SweepAxis::kItems;
  throw ConfigError("unknown sweep axis '" + text + "' (expected length, repeats or items)");
}

std::string to_string(SweepAxis axis) {
  switch (axis) {
    case SweepAxis::kLength: return "length";
    case SweepAxis::kRepeats: return "repeats";
    case SweepAxis::kItems: return "items";
  }
  return "unknown";
}

TaskConfig with_axis_value(const TaskConfig& base, SweepAxis axis, std::size_t value) {
  TaskConfig c = base;
  const bool ok = (axis == SweepAxis::kLength &&
                   (c.kind == TaskKind::kCopy || c.kind == TaskKind::kRepeatCopy)) ||
                  (axis == SweepAxis::kRepeats && c.kind == TaskKind::kRepeatCopy) ||
                  (axis == SweepAxis::kItems && c.kind == TaskKind::kAssocRecall);
  if (!ok) {
    throw ConfigError("sweep axis '" + to_string(axis) + "' does not apply to task " +
                      to_string(c.kind));
  }
  switch (axis) {
    case SweepAxis::kLength:
      c.min_length = c.max_length = value;
      break;
    case SweepAxis::kRepeats:
      c.min_repeats = c.max_repeats = value;
      break;
    case SweepAxis::kItems:
      c.min_items = c.max_items = value;
      break;
  }
  c.validate();
  return c;
}

std::vector<SweepRow> generalization_sweep(const SequenceModel& model, const TaskConfig& base,
                                           SweepAxis axis, std::span<const std::size_t> values,
                                           std::size_t episodes, std::uint64_t seed,
                                           std::size_t threads) {
  std::vector<SweepRow> rows;
  for (std::size_t v : values) {
    const TaskConfig task = with_axis_value(base, axis, v);
    const EvalStats stats = evaluate(model, task, episodes, derive_seed(seed, v), threads);
    rows.push_back({v, episodes, stats.mean, stats.median});
  }
  return rows;
}

std::string sweep_csv(SweepAxis axis, std::span<const SweepRow> rows) {
  std::string out = to_string(axis) + ",episodes,mean_bits,median_bits\n";
  char buf[96];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%zu,%zu,%.9g,%.9g\n", r.value, r.episodes, r.mean, r.median);
    out += buf;
  }
  return out;
}

}  // namespace ntm
