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

#include "scasrec/diff/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "scasrec/errors.hpp"

namespace scasrec::diff {

namespace {

constexpr std::size_t kMagicLen = sizeof(kCheckpointMagic) - 1;

template <typename U>
void put_le(std::ostream& out, U v) {
  unsigned char buf[sizeof(U)];
  for (std::size_t i = 0; i < sizeof(U); ++i) buf[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xFFu);
  out.write(reinterpret_cast<const char*>(buf), sizeof(U));
}

template <typename U>
U get_le(std::istream& in, const std::string& what) {
  unsigned char buf[sizeof(U)];
  if (!in.read(reinterpret_cast<char*>(buf), sizeof(U))) throw IoError("checkpoint truncated while reading " + what);
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(buf[i]) << (8 * i);
  return v;
}

}  // namespace

void write_container(const std::filesystem::path& path, std::span<const NamedTensor> entries) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open checkpoint for writing: " + path.string());
  out.write(kCheckpointMagic, static_cast<std::streamsize>(kMagicLen));
  put_le<std::uint32_t>(out, kCheckpointVersion);
  put_le<std::uint64_t>(out, entries.size());
  for (const auto& e : entries) {
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(e.name.size()));
    out.write(e.name.data(), static_cast<std::streamsize>(e.name.size()));
    put_le<std::uint32_t>(out, 2);
    put_le<std::uint64_t>(out, e.value.rows());
    put_le<std::uint64_t>(out, e.value.cols());
    for (double v : e.value.values()) put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
  }
  if (!out) throw IoError("failed writing checkpoint: " + path.string());
}

std::vector<NamedTensor> read_container(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint: " + path.string());
  char magic[kMagicLen];
  if (!in.read(magic, kMagicLen) || std::memcmp(magic, kCheckpointMagic, kMagicLen) != 0) {
    throw IoError("not a checkpoint file (bad magic): " + path.string());
  }
  const auto version = get_le<std::uint32_t>(in, "version");
  if (version != kCheckpointVersion) {
    throw VersionError("checkpoint version " + std::to_string(version) + ", expected " +
                       std::to_string(kCheckpointVersion));
  }
  const auto count = get_le<std::uint64_t>(in, "count");
  std::vector<NamedTensor> entries;
  entries.reserve(static_cast<std::size_t>(count));
  for (std::uint64_t k = 0; k < count; ++k) {
    const auto name_len = get_le<std::uint32_t>(in, "name length");
    std::string name(name_len, '\0');
    if (!in.read(name.data(), name_len)) throw IoError("checkpoint truncated in name");
    const auto rank = get_le<std::uint32_t>(in, "rank");
    if (rank < 1 || rank > 2) throw IoError("unsupported tensor rank " + std::to_string(rank) + " for " + name);
    std::uint64_t dims[2] = {1, 1};
    for (std::uint32_t r = 0; r < rank; ++r) dims[r + (2 - rank)] = get_le<std::uint64_t>(in, "dims");
    std::vector<double> data(static_cast<std::size_t>(dims[0] * dims[1]));
    for (double& v : data) v = std::bit_cast<double>(get_le<std::uint64_t>(in, "payload of " + name));
    entries.push_back({std::move(name), Tensor(dims[0], dims[1], std::move(data))});
  }
  return entries;
}

const Tensor* find_tensor(std::span<const NamedTensor> entries, std::string_view name) {
  for (const auto& e : entries) {
    if (e.name == name) return &e.value;
  }
  return nullptr;
}

std::vector<NamedTensor> export_params(const ParamStore& store, bool with_optimizer) {
  std::vector<NamedTensor> out;
  for (const auto& p : store.params()) out.push_back({p.name, p.value});
  if (with_optimizer) {
    for (const auto& p : store.params()) {
      out.push_back({"opt.m/" + p.name, p.m});
      out.push_back({"opt.v/" + p.name, p.v});
      out.push_back({"opt.step/" + p.name, Tensor::scalar(static_cast<double>(p.step))});
    }
  }
  return out;
}

void import_params(ParamStore& store, std::span<const NamedTensor> entries) {
  for (auto& p : store.params()) {
    const Tensor* v = find_tensor(entries, p.name);
    if (v == nullptr) throw IoError("checkpoint is missing parameter '" + p.name + "'");
    if (v->shape() != p.value.shape()) {
      throw ShapeError("checkpoint parameter '" + p.name + "' has shape " + v->shape_string() + ", model expects " +
                       p.value.shape_string());
    }
    p.value = *v;
    p.grad.fill(0.0);
    const Tensor* m = find_tensor(entries, "opt.m/" + p.name);
    const Tensor* vv = find_tensor(entries, "opt.v/" + p.name);
    const Tensor* step = find_tensor(entries, "opt.step/" + p.name);
    if (m != nullptr && vv != nullptr && step != nullptr) {
      p.m = *m;
      p.v = *vv;
      p.step = static_cast<std::int64_t>(step->item());
    } else {
      p.m.fill(0.0);
      p.v.fill(0.0);
      p.step = 0;
    }
  }
}

}  // namespace scasrec::diff
