#include "m2se/checkpoint.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include "m2se/binary_io.hpp"
#include "m2se/error.hpp"

namespace m2se {

namespace {

constexpr char kMagic[4] = {'M', '2', 'C', 'K'};
constexpr std::uint32_t kMaxRank = 8;
constexpr std::uint64_t kMaxElements = std::uint64_t{1} << 28;

std::uint64_t element_count(const std::vector<std::uint32_t>& dims) {
  std::uint64_t n = 1;
  for (std::uint32_t d : dims) {
    n *= d;
    if (n > kMaxElements) fail(ErrorCode::kDimensionMismatch, "tensor too large");
  }
  return n;
}

}  // namespace

std::uint64_t save_checkpoint(std::span<const CheckpointTensor> tensors, std::ostream& out) {
  binary::Writer w(out);
  w.bytes(kMagic, 4);
  w.u32(kCheckpointVersion);
  w.u32(static_cast<std::uint32_t>(tensors.size()));
  for (const CheckpointTensor& t : tensors) {
    require(element_count(t.dims) == t.data.size(), ErrorCode::kDimensionMismatch,
            "tensor " + t.name + " payload does not match its dims");
    for (float v : t.data) {
      require(std::isfinite(v), ErrorCode::kNonFinite, "tensor " + t.name + " is not finite");
    }
    w.string(t.name);
    w.u32(static_cast<std::uint32_t>(t.dims.size()));
    for (std::uint32_t d : t.dims) w.u32(d);
    w.f32s(t.data);
  }
  out.flush();
  if (!out) fail(ErrorCode::kIo, "checkpoint write failed");
  return w.count();
}

Checkpoint load_checkpoint(std::istream& in) {
  binary::Reader r(in);
  char magic[4] = {};
  in.read(magic, 4);
  if (in.gcount() != 4 || std::memcmp(magic, kMagic, 4) != 0) {
    fail(ErrorCode::kBadMagic, "stream does not start with M2CK");
  }
  const std::uint32_t version = r.u32("version");
  if (version != kCheckpointVersion) {
    fail(ErrorCode::kVersionMismatch,
         "unsupported checkpoint version " + std::to_string(version));
  }
  const std::uint32_t count = r.u32("tensor count");
  Checkpoint ck;
  for (std::uint32_t i = 0; i < count; ++i) {
    CheckpointTensor t;
    t.name = r.string("tensor name", 4096);
    const std::uint32_t rank = r.u32("rank");
    require(rank <= kMaxRank, ErrorCode::kDimensionMismatch, "tensor rank too large");
    t.dims.resize(rank);
    for (std::uint32_t& d : t.dims) d = r.u32("dims");
    t.data = r.f32s(element_count(t.dims), "tensor payload");
    for (float v : t.data) {
      require(std::isfinite(v), ErrorCode::kNonFinite, "tensor " + t.name + " is not finite");
    }
    ck.push_back(std::move(t));
  }
  if (!r.at_end()) fail(ErrorCode::kDimensionMismatch, "trailing bytes after checkpoint");
  return ck;
}

std::uint64_t save_checkpoint_file(std::span<const CheckpointTensor> tensors,
                                   const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::kIo, "cannot open " + path.string() + " for writing");
  return save_checkpoint(tensors, out);
}

Checkpoint load_checkpoint_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIo, "cannot open " + path.string());
  return load_checkpoint(in);
}

CheckpointTensor tensor_entry(const std::string& name, const Matrix& m) {
  CheckpointTensor t;
  t.name = name;
  if (m.rows() == 1) {
    t.dims = {static_cast<std::uint32_t>(m.cols())};
  } else {
    t.dims = {static_cast<std::uint32_t>(m.rows()), static_cast<std::uint32_t>(m.cols())};
  }
  t.data.assign(m.values().begin(), m.values().end());
  return t;
}

CheckpointTensor scalar_entry(const std::string& name, double value) {
  return {name, {}, {static_cast<float>(value)}};
}

CheckpointIndex::CheckpointIndex(const Checkpoint& ck) {
  for (const CheckpointTensor& t : ck) by_name_[t.name] = &t;
}

const CheckpointTensor& CheckpointIndex::find(const std::string& name) const {
  auto it = by_name_.find(name);
  if (it == by_name_.end()) fail(ErrorCode::kDimensionMismatch, "checkpoint lacks " + name);
  return *it->second;
}

double CheckpointIndex::scalar(const std::string& name) const {
  const CheckpointTensor& t = find(name);
  require(t.dims.empty() && t.data.size() == 1, ErrorCode::kDimensionMismatch,
          name + " is not a scalar");
  return t.data[0];
}

std::vector<float> CheckpointIndex::vector(const std::string& name,
                                           std::size_t expected_len) const {
  const CheckpointTensor& t = find(name);
  require(t.dims.size() == 1 && t.data.size() == expected_len, ErrorCode::kDimensionMismatch,
          name + " has the wrong length");
  return t.data;
}

void CheckpointIndex::read_into(const std::string& name, Matrix& dst) const {
  const CheckpointTensor& t = find(name);
  const bool as_vector = t.dims.size() == 1 && dst.rows() == 1 && t.dims[0] == dst.cols();
  const bool as_matrix =
      t.dims.size() == 2 && t.dims[0] == dst.rows() && t.dims[1] == dst.cols();
  require(as_vector || as_matrix, ErrorCode::kDimensionMismatch,
          name + " shape does not match the configured model");
  auto out = dst.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = t.data[i];
}

void append_pipeline(Checkpoint& ck, const PipelineParams& p) {
  const PipelineConfig& c = p.config;
  ck.push_back(scalar_entry("pipeline.d_in", static_cast<double>(c.d_in)));
  ck.push_back(scalar_entry("pipeline.d_model", static_cast<double>(c.d_model)));
  ck.push_back(scalar_entry("pipeline.heads_detector", static_cast<double>(c.heads_detector)));
  ck.push_back(scalar_entry("pipeline.heads_other", static_cast<double>(c.heads_other)));
  ck.push_back({"pipeline.lambda", {2},
                {static_cast<float>(p.lambda1), static_cast<float>(p.lambda2)}});
  PipelineParams copy = p;
  for (const NamedTensor& t : named_tensors(copy)) {
    ck.push_back(tensor_entry("pipeline." + t.name, *t.tensor));
  }
}

PipelineParams pipeline_from_checkpoint(const Checkpoint& ck) {
  const CheckpointIndex idx(ck);
  auto count = [&](const char* name) {
    const double v = idx.scalar(name);
    require(v >= 1 && v == std::floor(v), ErrorCode::kDimensionMismatch,
            std::string(name) + " must be a positive integer");
    return static_cast<std::size_t>(v);
  };
  PipelineConfig c;
  c.d_in = count("pipeline.d_in");
  c.d_model = count("pipeline.d_model");
  c.heads_detector = count("pipeline.heads_detector");
  c.heads_other = count("pipeline.heads_other");
  PipelineParams p = PipelineParams::zeros_like(PipelineParams::xavier(c, 0));
  const std::vector<float> lambdas = idx.vector("pipeline.lambda", 2);
  p.lambda1 = lambdas[0];
  p.lambda2 = lambdas[1];
  for (const NamedTensor& t : named_tensors(p)) idx.read_into("pipeline." + t.name, *t.tensor);
  validate(p);
  return p;
}

}  // namespace m2se
