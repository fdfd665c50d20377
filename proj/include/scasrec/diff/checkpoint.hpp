// Copyright 2026 The SCASRec Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "scasrec/diff/param_store.hpp"
#include "scasrec/diff/tensor.hpp"

namespace scasrec::diff {

inline constexpr char kCheckpointMagic[] = "SCASREC-CKPT";
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct NamedTensor {
  std::string name;
  Tensor value;
};

// Binary layout (all integers and floats little-endian):
//   magic[12] | u32 version | u64 count |
//   count x ( u32 name_len | name | u32 rank | u64 dims[rank] | f64 payload )
void write_container(const std::filesystem::path& path, std::span<const NamedTensor> entries);
std::vector<NamedTensor> read_container(const std::filesystem::path& path);

const Tensor* find_tensor(std::span<const NamedTensor> entries, std::string_view name);

// Parameter values, and with `with_optimizer` the Adam moments and step
// counters under "opt.m/<name>", "opt.v/<name>", "opt.step/<name>".
std::vector<NamedTensor> export_params(const ParamStore& store, bool with_optimizer);

// Overwrites every parameter of `store` from `entries`; names and shapes must
// match. Optimizer state is restored when present.
void import_params(ParamStore& store, std::span<const NamedTensor> entries);

}  // namespace scasrec::diff
