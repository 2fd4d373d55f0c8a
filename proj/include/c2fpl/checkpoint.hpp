#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "c2fpl/detector.hpp"

namespace c2fpl {

struct Checkpoint {
  DetectorModel model;
  TrainConfig config;

  friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

// Little-endian layout: magic "C2FM", version u32 = 1, d u32, hidden1 u32,
// hidden2 u32, attention mode u32, dropout f64, then the TrainConfig
// (epochs u64, batch_size u64, learning_rate f64, l2_lambda f64, seed u64),
// then tensors w1 b1 wa1 ba1 w2 b2 wa2 ba2 w3 b3 as row-major f64.
std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& checkpoint);
Checkpoint decode_checkpoint(std::span<const std::uint8_t> data);

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace c2fpl
