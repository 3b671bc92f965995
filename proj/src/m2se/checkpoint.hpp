#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "m2se/attention.hpp"
#include "m2se/global_fusion.hpp"

namespace m2se {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointTensor {
  std::string name;
  std::vector<std::uint32_t> dims;  // empty for a scalar
  std::vector<float> data;
};

using Checkpoint = std::vector<CheckpointTensor>;

std::uint64_t save_checkpoint(std::span<const CheckpointTensor> tensors, std::ostream& out);
Checkpoint load_checkpoint(std::istream& in);
std::uint64_t save_checkpoint_file(std::span<const CheckpointTensor> tensors,
                                   const std::filesystem::path& path);
Checkpoint load_checkpoint_file(const std::filesystem::path& path);

// Matrices are stored rank 2 (rows, cols); a 1 x n bias is stored rank 1.
CheckpointTensor tensor_entry(const std::string& name, const Matrix& m);
CheckpointTensor scalar_entry(const std::string& name, double value);

// Name-keyed lookup with shape checks.
class CheckpointIndex {
 public:
  explicit CheckpointIndex(const Checkpoint& ck);

  bool contains(const std::string& name) const { return by_name_.count(name) != 0; }
  double scalar(const std::string& name) const;
  std::vector<float> vector(const std::string& name, std::size_t expected_len) const;
  // Copies the stored tensor into `dst`, which must already have the right shape.
  void read_into(const std::string& name, Matrix& dst) const;

 private:
  const CheckpointTensor& find(const std::string& name) const;
  std::map<std::string, const CheckpointTensor*> by_name_;
};

void append_pipeline(Checkpoint& ck, const PipelineParams& p);
// Tensors not belonging to the pipeline are ignored.
PipelineParams pipeline_from_checkpoint(const Checkpoint& ck);

}  // namespace m2se
