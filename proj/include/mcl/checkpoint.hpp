#pragma once

#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "mcl/tensor.hpp"

namespace mcl {

using NamedTensors = std::vector<std::pair<std::string, Tensor>>;

// Text checkpoint, version-tagged. Layout:
//
//   mcl-checkpoint 1
//   tensors <count>
//   <name> <rank> <dim0> ... <dimN>
//   <value> <value> ...            (C99 hexadecimal floats, one line per tensor)
//
// Hex floats make save/load bit-exact.
void save_checkpoint(std::ostream& out, const NamedTensors& tensors);
void save_checkpoint_file(const std::string& path, const NamedTensors& tensors);
NamedTensors load_checkpoint(std::istream& in);
NamedTensors load_checkpoint_file(const std::string& path);

}  // namespace mcl
