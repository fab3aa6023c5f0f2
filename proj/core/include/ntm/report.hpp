#pragma once

// Diagnostics: per-step trace panels (CSV + 16-bit PGM), the copy-task
// read/write alignment score, the priority-sort write-location fit, and
// generalization sweeps.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ntm/model.hpp"
#include "ntm/tasks.hpp"
#include "ntm/training.hpp"

namespace ntm {

/// A step-by-channel matrix. rows[t] is time step t.
struct Panel {
  std::string name;
  std::vector<std::vector<double>> rows;
  /// Weightings and probabilities live in [0, 1]; other panels are scaled
  /// by their own min/max when rendered.
  bool unit_range = false;
};

TraceLog record_trace(SequenceModel& model, const Episode& episode);

/// inputs, outputs, read_weights<h>, write_weights<h>, adds<h>, reads<h>.
std::vector<Panel> trace_panels(const TraceLog& trace);

std::string panel_csv(const Panel& panel);

/// Binary PGM (P5), maxval 65535, big-endian samples. Time runs along x,
/// channels/locations along y. Pixel = round(65535 * v) for unit-range
/// panels, round(65535 * (v - min) / (max - min)) otherwise; black is 0.
std::vector<std::uint8_t> panel_pgm(const Panel& panel);

/// Decodes a PGM written by panel_pgm back to [0, 1] values (rows = time).
std::vector<std::vector<double>> decode_pgm(std::span<const std::uint8_t> bytes);

/// Writes <dir>/<panel>.csv and <dir>/<panel>.pgm for every panel and
/// returns the file names.
std::vector<std::string> export_trace(const TraceLog& trace, const std::string& dir);

std::size_t argmax(std::span<const double> v);

/// Copy-task memory-use score. During the input phase the write head
/// stores vector i at some location; during the output phase the read head
/// should visit the same locations in the same order.
struct CopyTraceScore {
  std::size_t compared = 0;
  std::size_t matched = 0;
  double match_fraction = 0.0;
  /// Pearson correlation between input-phase write weightings and
  /// output-phase read weightings (flattened).
  double correlation = 0.0;
};
CopyTraceScore score_copy_trace(const TraceLog& trace, const Episode& episode,
                                std::size_t read_head = 0, std::size_t write_head = 0);

/// One observed (priority, write location) pair from a sort episode.
struct LocationSample {
  double priority = 0.0;
  double location = 0.0;
};

enum class LocationMode { kArgmax, kExpected };

/// Samples from the input phase of a priority-sort episode.
std::vector<LocationSample> sort_write_samples(const TraceLog& trace, const Episode& episode,
                                               LocationMode mode = LocationMode::kArgmax,
                                               std::size_t write_head = 0);

/// Least-squares location ~ slope * priority + intercept.
struct WriteLocationFit {
  bool defined = false;  // false when every priority is equal
  double slope = 0.0;
  double intercept = 0.0;
  double residual_rms = 0.0;
  std::size_t points = 0;
};
WriteLocationFit fit_write_locations(std::span<const LocationSample> samples);

enum class SweepAxis { kLength, kRepeats, kItems };
SweepAxis parse_sweep_axis(const std::string& text);
std::string to_string(SweepAxis axis);

struct SweepRow {
  std::size_t value = 0;
  std::size_t episodes = 0;
  double mean = 0.0;
  double median = 0.0;
};

/// Task config with the swept quantity pinned to `value`. Throws
/// ConfigError if the axis does not apply to the task.
TaskConfig with_axis_value(const TaskConfig& base, SweepAxis axis, std::size_t value);

std::vector<SweepRow> generalization_sweep(const SequenceModel& model, const TaskConfig& base,
                                           SweepAxis axis, std::span<const std::size_t> values,
                                           std::size_t episodes, std::uint64_t seed,
                                           std::size_t threads = 1);

std::string sweep_csv(SweepAxis axis, std::span<const SweepRow> rows);

}  // namespace ntm
