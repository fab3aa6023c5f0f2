#pragma once

// Checkpoint file layout (all integers and reals little-endian):
//
//   magic        8 bytes  "NTMCKPT1"
//   version      u32      1
//   config_len   u32      then config_len bytes of `key = value` text
//                         (format_train_config)
//   episodes     u64      training episodes completed
//   param_count  u32
//   per parameter:
//     name_len u32, name bytes, rows u32, cols u32, rows*cols f64 values
//   has_opt      u8       1 if optimizer state follows
//   opt_steps    u64
//   per parameter, in the same order: rows*cols f64 each of
//     mean_square, mean, delta
//   window_len   u32      then window_len f64: recent episode costs feeding
//                         the running-median log column

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "ntm/config.hpp"
#include "ntm/optimizer.hpp"

namespace ntm {

inline constexpr char kCheckpointMagic[8] = {'N', 'T', 'M', 'C', 'K', 'P', 'T', '1'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  TrainConfig config;
  std::size_t episodes_done = 0;
  ParameterStore params;
  std::optional<RmsProp> optimizer;
  std::vector<double> recent_costs;
};

void save_checkpoint(const std::string& path, const TrainConfig& config, std::size_t episodes_done,
                     const ParameterStore& params, const RmsProp* optimizer,
                     const std::vector<double>& recent_costs = {});

/// Throws FormatError naming the field that failed to parse.
Checkpoint load_checkpoint(const std::string& path);

/// Copies checkpoint values into `store`, checking names and shapes.
void assign_parameters(ParameterStore& store, const ParameterStore& saved);

}  // namespace ntm
