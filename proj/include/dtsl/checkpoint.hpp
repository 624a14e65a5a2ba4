#pragma once

#include <filesystem>
#include <iosfwd>

#include "dtsl/models.hpp"

namespace dtsl {

// Layout (see docs/checkpoint_format.md):
//
//   DTSL-CHECKPOINT 1\n
//   architecture <PlainConvNet|ResidualConvNet>\n
//   num_classes <K>\n
//   base_channels <C>\n
//   tensors <N>\n
//   end\n
//   N times: "tensor <name> <rank> <d0> ... <dr-1>\n" + prod(d) little-endian float64
void write_checkpoint(std::ostream& out, const ModelParams& params);
void save_checkpoint(const std::filesystem::path& path, const ModelParams& params);

// Loaded tensors are leaves with requires_grad = false.
ModelParams read_checkpoint(std::istream& in);
ModelParams load_checkpoint(const std::filesystem::path& path);

}  // namespace dtsl
