// Copyright 2026 The SegSAT Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Binary checkpoint file:
//
//   "SEGSAT1"                       7-byte magic
//   u64 metadata length, bytes      free-form UTF-8 (the model config text)
//   u64 optimizer step
//   u64 entry count
//   per entry: u64 name length, name bytes, u64 dtype (0 = f32, 1 = f64),
//              u64 rank, rank x u64 dims, u64 byte offset into the data section
//   u64 data section length
//   data section: raw little-endian values
//
// All integers are 64-bit little-endian. Optimizer moments are stored as entries named
// "adam.m/<param>" and "adam.v/<param>".

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "segsat/autograd.hpp"
#include "segsat/optim.hpp"

namespace segsat {

inline constexpr char kCheckpointMagic[] = "SEGSAT1";

enum class DType : std::uint64_t { kF32 = 0, kF64 = 1 };

template <typename T>
constexpr DType dtype_of();
template <>
constexpr DType dtype_of<float>() { return DType::kF32; }
template <>
constexpr DType dtype_of<double>() { return DType::kF64; }

struct CheckpointEntry {
  std::string name;
  DType dtype = DType::kF32;
  Shape shape;
  std::vector<unsigned char> bytes;  // little-endian values
};

struct CheckpointFile {
  std::string metadata;
  std::uint64_t step = 0;
  std::vector<CheckpointEntry> entries;

  const CheckpointEntry* find(const std::string& name) const;
};

void write_checkpoint_file(const std::string& path, const CheckpointFile& file);
/// Parses and bounds-checks the whole file. Throws LoadError on any inconsistency.
CheckpointFile read_checkpoint_file(const std::string& path);

template <typename T>
CheckpointFile make_checkpoint(std::string metadata, std::span<const ParameterPtr<T>> params,
                               const OptimizerState<T>* optimizer);

/// Copies entries into `params` (only those whose name starts with `prefix`) and, when
/// given, into `optimizer`. Every targeted parameter must be present with a matching
/// dtype and shape. Nothing is modified unless every check passes.
template <typename T>
void restore_checkpoint(const CheckpointFile& file, std::span<const ParameterPtr<T>> params,
                        OptimizerState<T>* optimizer, const std::string& prefix = "");

}  // namespace segsat
