#include "c2fpl/checkpoint.hpp"

#include "c2fpl/binary_io.hpp"
#include "c2fpl/error.hpp"

namespace c2fpl {
namespace {

constexpr std::string_view kMagic = "C2FM";
constexpr std::uint32_t kVersion = 1;

std::uint32_t mode_code(AttentionMode m) { return static_cast<std::uint32_t>(m); }

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ck) {
  ByteWriter w;
  w.bytes(kMagic);
  w.u32(kVersion);
  w.u32(static_cast<std::uint32_t>(ck.model.input_dim()));
  w.u32(static_cast<std::uint32_t>(ck.model.arch.hidden1));
  w.u32(static_cast<std::uint32_t>(ck.model.arch.hidden2));
  w.u32(mode_code(ck.model.arch.attention));
  w.f64(ck.model.arch.dropout_rate);
  w.u64(ck.config.epochs);
  w.u64(ck.config.batch_size);
  w.f64(ck.config.learning_rate);
  w.f64(ck.config.l2_lambda);
  w.u64(ck.config.seed);
  for (const Matrix* t : ck.model.params.tensors()) {
    for (Eigen::Index i = 0; i < t->rows(); ++i) {
      for (Eigen::Index j = 0; j < t->cols(); ++j) w.f64((*t)(i, j));
    }
  }
  return w.buffer();
}

Checkpoint decode_checkpoint(std::span<const std::uint8_t> data) {
  ByteReader r(data);
  if (r.remaining() < 8 || r.bytes(4) != kMagic) {
    throw Error(ErrorCode::malformed_header, "bad checkpoint magic, expected C2FM");
  }
  if (const auto v = r.u32(); v != kVersion) {
    throw Error(ErrorCode::malformed_header, "unsupported checkpoint version " + std::to_string(v));
  }
  const std::uint32_t d = r.u32();
  DetectorArch arch;
  arch.hidden1 = r.u32();
  arch.hidden2 = r.u32();
  const std::uint32_t mode = r.u32();
  if (mode > 3) throw Error(ErrorCode::malformed_header, "unknown attention mode code");
  arch.attention = static_cast<AttentionMode>(mode);
  arch.dropout_rate = r.f64();
  if (d == 0 || arch.hidden1 == 0 || arch.hidden2 == 0) {
    throw Error(ErrorCode::malformed_header, "checkpoint declares a zero layer size");
  }

  Checkpoint ck;
  ck.config.epochs = r.u64();
  ck.config.batch_size = r.u64();
  ck.config.learning_rate = r.f64();
  ck.config.l2_lambda = r.f64();
  ck.config.seed = r.u64();
  ck.config.arch = arch;
  ck.model = DetectorModel::zeros(d, arch);
  for (Matrix* t : ck.model.params.tensors()) {
    for (Eigen::Index i = 0; i < t->rows(); ++i) {
      for (Eigen::Index j = 0; j < t->cols(); ++j) (*t)(i, j) = r.f64();
    }
    if (!t->allFinite()) throw Error(ErrorCode::non_finite, "checkpoint holds non-finite weights");
  }
  if (r.remaining() != 0) {
    throw Error(ErrorCode::dimension_mismatch, "trailing bytes after checkpoint tensors");
  }
  return ck;
}

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path) {
  write_file(path, encode_checkpoint(checkpoint));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(read_file(path));
}

}  // namespace c2fpl
