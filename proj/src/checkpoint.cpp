// Copyright 2026 The SegSAT Authors
// SPDX-License-Identifier: Apache-2.0

#include "segsat/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>
#include <unordered_map>

namespace segsat {

namespace {

void put_u64(std::vector<unsigned char>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<unsigned char>(v >> (8 * i)));
}

void put_string(std::vector<unsigned char>& out, const std::string& s) {
  put_u64(out, s.size());
  out.insert(out.end(), s.begin(), s.end());
}

class Reader {
 public:
  Reader(const std::vector<unsigned char>& buf, std::string path) : buf_(buf), path_(std::move(path)) {}

  std::uint64_t u64(const char* what) {
    need(8, what);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf_[pos_ + i]) << (8 * i);
    pos_ += 8;
    return v;
  }
  std::string bytes(std::uint64_t n, const char* what) {
    need(n, what);
    std::string s(buf_.begin() + static_cast<std::ptrdiff_t>(pos_),
                  buf_.begin() + static_cast<std::ptrdiff_t>(pos_ + n));
    pos_ += n;
    return s;
  }
  std::size_t pos() const { return pos_; }
  std::size_t remaining() const { return buf_.size() - pos_; }
  [[noreturn]] void fail(const std::string& msg) const {
    throw LoadError("checkpoint " + path_ + ": " + msg);
  }

 private:
  void need(std::uint64_t n, const char* what) const {
    if (n > remaining()) fail(std::string("corrupted length field for ") + what);
  }
  const std::vector<unsigned char>& buf_;
  std::string path_;
  std::size_t pos_ = 0;
};

std::size_t dtype_size(DType d) { return d == DType::kF32 ? 4 : 8; }

template <typename T>
std::vector<unsigned char> to_le_bytes(std::span<const T> values) {
  std::vector<unsigned char> out(values.size() * sizeof(T));
  std::memcpy(out.data(), values.data(), out.size());
  if constexpr (std::endian::native == std::endian::big) {
    for (std::size_t i = 0; i < values.size(); ++i)
      std::reverse(out.begin() + i * sizeof(T), out.begin() + (i + 1) * sizeof(T));
  }
  return out;
}

template <typename T>
void from_le_bytes(const std::vector<unsigned char>& bytes, std::span<T> values) {
  std::memcpy(values.data(), bytes.data(), bytes.size());
  if constexpr (std::endian::native == std::endian::big) {
    auto* raw = reinterpret_cast<unsigned char*>(values.data());
    for (std::size_t i = 0; i < values.size(); ++i)
      std::reverse(raw + i * sizeof(T), raw + (i + 1) * sizeof(T));
  }
}

}  // namespace

const CheckpointEntry* CheckpointFile::find(const std::string& name) const {
  for (const auto& e : entries)
    if (e.name == name) return &e;
  return nullptr;
}

void write_checkpoint_file(const std::string& path, const CheckpointFile& file) {
  std::vector<unsigned char> out(kCheckpointMagic, kCheckpointMagic + 7);
  put_string(out, file.metadata);
  put_u64(out, file.step);
  put_u64(out, file.entries.size());
  std::uint64_t offset = 0;
  for (const auto& e : file.entries) {
    put_string(out, e.name);
    put_u64(out, static_cast<std::uint64_t>(e.dtype));
    put_u64(out, e.shape.size());
    for (auto d : e.shape) put_u64(out, d);
    put_u64(out, offset);
    offset += e.bytes.size();
  }
  put_u64(out, offset);
  for (const auto& e : file.entries) out.insert(out.end(), e.bytes.begin(), e.bytes.end());

  // Write-then-rename so a crash never leaves a truncated checkpoint at `path`.
  const std::string tmp = path + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw LoadError("cannot open checkpoint for writing: " + path);
    f.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
    if (!f) throw LoadError("failed writing checkpoint: " + path);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) throw LoadError("cannot move checkpoint into place: " + path);
}

CheckpointFile read_checkpoint_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw LoadError("cannot open checkpoint: " + path);
  std::vector<unsigned char> buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  Reader rd(buf, path);
  if (rd.bytes(7, "magic") != std::string(kCheckpointMagic, 7)) rd.fail("bad magic, not a SEGSAT1 file");

  CheckpointFile file;
  file.metadata = rd.bytes(rd.u64("metadata"), "metadata");
  file.step = rd.u64("step");
  const std::uint64_t count = rd.u64("entry count");
  // Each entry header takes at least 40 bytes.
  if (count > rd.remaining() / 40) rd.fail("corrupted length field for entry count");
  struct Pending {
    CheckpointEntry entry;
    std::uint64_t offset;
    std::uint64_t size;
  };
  std::vector<Pending> pending;
  for (std::uint64_t i = 0; i < count; ++i) {
    Pending p;
    p.entry.name = rd.bytes(rd.u64("entry name"), "entry name");
    const std::uint64_t dt = rd.u64("dtype");
    if (dt > 1) rd.fail("entry '" + p.entry.name + "' has unknown dtype " + std::to_string(dt));
    p.entry.dtype = static_cast<DType>(dt);
    const std::uint64_t rank = rd.u64("rank");
    if (rank > 8) rd.fail("entry '" + p.entry.name + "' has implausible rank");
    std::uint64_t elems = 1;
    for (std::uint64_t r = 0; r < rank; ++r) {
      const std::uint64_t dim = rd.u64("dimension");
      if (dim != 0 && elems > (UINT64_MAX / 8) / dim) rd.fail("entry '" + p.entry.name + "' is too large");
      elems *= dim;
      p.entry.shape.push_back(static_cast<std::size_t>(dim));
    }
    p.offset = rd.u64("offset");
    p.size = elems * dtype_size(p.entry.dtype);
    pending.push_back(std::move(p));
  }
  const std::uint64_t data_len = rd.u64("data section");
  if (data_len != rd.remaining()) rd.fail("corrupted length field for data section");
  const std::size_t data_begin = rd.pos();
  std::unordered_map<std::string, bool> names;
  for (auto& p : pending) {
    if (p.offset > data_len || p.size > data_len - p.offset) {
      rd.fail("entry '" + p.entry.name + "' points outside the data section");
    }
    if (!names.emplace(p.entry.name, true).second) rd.fail("duplicate entry '" + p.entry.name + "'");
    const auto begin = buf.begin() + static_cast<std::ptrdiff_t>(data_begin + p.offset);
    p.entry.bytes.assign(begin, begin + static_cast<std::ptrdiff_t>(p.size));
    file.entries.push_back(std::move(p.entry));
  }
  return file;
}

template <typename T>
CheckpointFile make_checkpoint(std::string metadata, std::span<const ParameterPtr<T>> params,
                               const OptimizerState<T>* optimizer) {
  CheckpointFile file;
  file.metadata = std::move(metadata);
  file.step = optimizer ? optimizer->step : 0;
  auto add = [&](const std::string& name, const Tensor<T>& t) {
    file.entries.push_back({name, dtype_of<T>(), t.shape(), to_le_bytes<T>(t.values())});
  };
  for (const auto& p : params) add(p->name, p->var.value());
  if (optimizer) {
    for (std::size_t i = 0; i < params.size(); ++i) {
      add("adam.m/" + params[i]->name, optimizer->first_moment.at(i));
      add("adam.v/" + params[i]->name, optimizer->second_moment.at(i));
    }
  }
  return file;
}

template <typename T>
void restore_checkpoint(const CheckpointFile& file, std::span<const ParameterPtr<T>> params,
                        OptimizerState<T>* optimizer, const std::string& prefix) {
  auto fetch = [&](const std::string& name, const Shape& shape) {
    const CheckpointEntry* e = file.find(name);
    if (!e) throw LoadError("checkpoint is missing required entry '" + name + "'");
    if (e->dtype != dtype_of<T>()) throw LoadError("checkpoint entry '" + name + "' has the wrong dtype");
    if (e->shape != shape) {
      throw LoadError("checkpoint entry '" + name + "' has shape " + shape_string(e->shape) +
                      ", expected " + shape_string(shape));
    }
    Tensor<T> t(shape);
    from_le_bytes<T>(e->bytes, t.values());
    return t;
  };
  // Stage everything first so a failure leaves the model untouched.
  std::vector<std::pair<std::size_t, Tensor<T>>> staged;
  std::vector<Tensor<T>> m, v;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& p = params[i];
    if (p->name.rfind(prefix, 0) != 0) continue;
    staged.emplace_back(i, fetch(p->name, p->var.shape()));
    if (optimizer) {
      m.push_back(fetch("adam.m/" + p->name, p->var.shape()));
      v.push_back(fetch("adam.v/" + p->name, p->var.shape()));
    }
  }
  if (optimizer && staged.size() != params.size()) {
    throw LoadError("optimizer state can only be restored together with every parameter");
  }
  for (auto& [i, t] : staged) {
    params[i]->var.mutable_value() = std::move(t);
    params[i]->var.zero_grad();
  }
  if (optimizer) {
    optimizer->first_moment = std::move(m);
    optimizer->second_moment = std::move(v);
    optimizer->step = file.step;
  }
}

template CheckpointFile make_checkpoint<float>(std::string, std::span<const ParameterPtr<float>>,
                                               const OptimizerState<float>*);
template CheckpointFile make_checkpoint<double>(std::string, std::span<const ParameterPtr<double>>,
                                                const OptimizerState<double>*);
template void restore_checkpoint<float>(const CheckpointFile&, std::span<const ParameterPtr<float>>,
                                        OptimizerState<float>*, const std::string&);
template void restore_checkpoint<double>(const CheckpointFile&, std::span<const ParameterPtr<double>>,
                                         OptimizerState<double>*, const std::string&);

}  // namespace segsat
