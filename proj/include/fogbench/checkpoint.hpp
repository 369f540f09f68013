#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "fogbench/tensor.hpp"

namespace fogbench {

/// Malformed or mismatched checkpoint; what() names the defect.
class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ModelCheckpoint {
  std::string tag;  // "<architecture> key=value ..."
  std::vector<std::pair<std::string, Tensor>> tensors;
};

/// Binary layout, little-endian throughout:
///   "FGB1" | u16 version (1) | u16 tag length | tag bytes | u32 tensor count |
///   per tensor: u16 name length | name | u8 rank | rank x u32 dims | f32 values
void save_checkpoint(const std::filesystem::path& path, const ModelCheckpoint& checkpoint);
ModelCheckpoint load_checkpoint(const std::filesystem::path& path);

std::vector<std::uint8_t> encode_checkpoint(const ModelCheckpoint& checkpoint);
ModelCheckpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes);

/// First whitespace-delimited token of a tag.
std::string tag_architecture(const std::string& tag);
/// Integer value of `key=` in a tag; throws CheckpointError when absent.
int tag_int(const std::string& tag, const std::string& key);

}  // namespace fogbench
