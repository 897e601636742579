// Copyright 2026 The CopyForge Authors.
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

#include "copyforge/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <set>

#include <openssl/evp.h>

#include "copyforge/errors.hpp"

namespace copyforge {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

constexpr char kMagic[5] = {'C', 'P', 'F', 'G', '1'};

template <typename T>
void put(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

void put_tensor(std::string& out, const std::string& name, const std::vector<std::uint64_t>& dims,
                const std::vector<double>& data) {
  put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
  out += name;
  put<std::uint32_t>(out, static_cast<std::uint32_t>(dims.size()));
  for (auto d : dims) put<std::uint64_t>(out, d);
  out.append(reinterpret_cast<const char*>(data.data()), data.size() * sizeof(double));
}

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}

  template <typename T>
  T get() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::string str(std::size_t n) {
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::vector<double> doubles(std::uint64_t n) {
    if (n > (bytes_.size() - pos_) / sizeof(double)) throw FormatError("checkpoint truncated");
    std::vector<double> v(n);
    std::memcpy(v.data(), bytes_.data() + pos_, n * sizeof(double));
    pos_ += n * sizeof(double);
    return v;
  }
  bool at_end() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw FormatError("checkpoint truncated");
  }
  const std::string& bytes_;
  std::size_t pos_ = 0;
};

struct RawTensor {
  std::vector<std::uint64_t> dims;
  std::vector<double> data;
};

}  // namespace

OptimState OptimState::zeros_like(const ModelParameters& params) {
  OptimState s;
  for (const Parameter* p : params.list()) {
    s.m.emplace_back(p->value.size(), 0.0);
    s.v.emplace_back(p->value.size(), 0.0);
  }
  return s;
}

std::array<std::uint8_t, 32> config_digest(const ModelConfig& config) {
  const std::string text = config.canonical();
  std::array<std::uint8_t, 32> out{};
  unsigned int len = 0;
  if (EVP_Digest(text.data(), text.size(), out.data(), &len, EVP_sha256(), nullptr) != 1 || len != out.size()) {
    throw Error("sha256 failed");
  }
  return out;
}

void save_checkpoint(const std::string& path, const ModelParameters& params, const OptimState* optim,
                     const NamedVectors& extra) {
  auto list = params.list();
  std::uint64_t count = list.size() + extra.size() + (optim ? 2 * list.size() + 1 : 0);
  std::string out(kMagic, sizeof(kMagic));
  const auto digest = config_digest(params.config);
  out.append(reinterpret_cast<const char*>(digest.data()), digest.size());
  put<std::uint64_t>(out, count);
  for (std::size_t i = 0; i < list.size(); ++i) {
    const Parameter* p = list[i];
    const std::vector<std::uint64_t> dims{p->shape.rows, p->shape.cols};
    put_tensor(out, p->name, dims, p->value);
    if (optim) {
      put_tensor(out, p->name + ".m", dims, optim->m.at(i));
      put_tensor(out, p->name + ".v", dims, optim->v.at(i));
    }
  }
  if (optim) put_tensor(out, "adam.step", {1}, {static_cast<double>(optim->step)});
  for (const auto& [name, data] : extra) put_tensor(out, name, {data.size()}, data);

  // Write to a sibling and rename so readers never observe a partial file.
  const std::string tmp = path + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw Error("cannot write checkpoint " + path);
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw Error("cannot write checkpoint " + path);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) throw Error("cannot move checkpoint into place: " + path);
}

LoadedCheckpoint load_checkpoint(const std::string& path, ModelParameters& params, OptimState* optim) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw FormatError("cannot open checkpoint " + path);
  const std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  Reader r(bytes);
  if (r.str(sizeof(kMagic)) != std::string(kMagic, sizeof(kMagic))) throw FormatError("bad checkpoint magic");
  const std::string digest = r.str(32);
  const auto expected = config_digest(params.config);
  if (std::memcmp(digest.data(), expected.data(), expected.size()) != 0) {
    throw FormatError("checkpoint was written for a different model config");
  }
  const auto count = r.get<std::uint64_t>();
  std::map<std::string, RawTensor> tensors;
  for (std::uint64_t i = 0; i < count; ++i) {
    const auto name_len = r.get<std::uint32_t>();
    std::string name = r.str(name_len);
    const auto rank = r.get<std::uint32_t>();
    RawTensor t;
    std::uint64_t n = 1;
    for (std::uint32_t d = 0; d < rank; ++d) {
      t.dims.push_back(r.get<std::uint64_t>());
      n *= t.dims.back();
    }
    t.data = r.doubles(n);
    tensors[std::move(name)] = std::move(t);
  }
  if (!r.at_end()) throw FormatError("trailing bytes in checkpoint");

  auto list = params.list();
  auto lookup = [&](const std::string& name, const Parameter& p) -> const std::vector<double>& {
    auto it = tensors.find(name);
    if (it == tensors.end()) throw FormatError("checkpoint is missing tensor " + name);
    if (it->second.dims != std::vector<std::uint64_t>{p.shape.rows, p.shape.cols}) {
      throw FormatError("shape mismatch for tensor " + name);
    }
    return it->second.data;
  };
  LoadedCheckpoint out;
  out.has_optim = tensors.count("adam.step") > 0;
  if (optim && !out.has_optim) throw FormatError("checkpoint has no optimizer state");
  // Validate everything first.
  for (const Parameter* p : list) {
    lookup(p->name, *p);
    if (optim) {
      lookup(p->name + ".m", *p);
      lookup(p->name + ".v", *p);
    }
  }
  for (Parameter* p : list) p->value = lookup(p->name, *p);
  if (optim) {
    OptimState s = OptimState::zeros_like(params);
    for (std::size_t i = 0; i < list.size(); ++i) {
      s.m[i] = lookup(list[i]->name + ".m", *list[i]);
      s.v[i] = lookup(list[i]->name + ".v", *list[i]);
    }
    s.step = static_cast<std::uint64_t>(tensors.at("adam.step").data.at(0));
    *optim = std::move(s);
  }
  std::set<std::string> known;
  for (const Parameter* p : list) {
    known.insert(p->name);
    known.insert(p->name + ".m");
    known.insert(p->name + ".v");
  }
  known.insert("adam.step");
  for (auto& [name, t] : tensors) {
    if (!known.count(name)) out.extra[name] = std::move(t.data);
  }
  return out;
}

}  // namespace copyforge
