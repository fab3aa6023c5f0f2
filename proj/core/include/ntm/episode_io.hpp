#pragma once

// Flat text form of an Episode, for fixtures shared between implementations.
//
//   ntm-episode 1
//   task <name>
//   seed <u64>
//   steps <T>
//   input_width <I>
//   output_width <O>
//   meta length <n> repeats <n> repeat_input <x> items <n> query <n>
//   priorities <count> <p0> <p1> ...
//   inputs
//   <T rows of I space-separated values>
//   targets
//   <one row of O values per scored step>
//   mask
//   <T space-separated 0/1 flags>
//   end
//
// Reals are written with 17 significant digits so the round trip is exact.

#include <iosfwd>
#include <string>

#include "ntm/tasks.hpp"

namespace ntm {

void write_episode(std::ostream& out, const Episode& episode);
Episode read_episode(std::istream& in);

void save_episode(const std::string& path, const Episode& episode);
Episode load_episode(const std::string& path);

}  // namespace ntm
