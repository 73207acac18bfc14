// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 the scatterformer authors
#include "sf/blob.hpp"

#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "json.hpp"

namespace sf::blob {

namespace {

using nlohmann::json;

template <typename T>
void save_impl(const std::string& path, const Tensor<T>& t, const char* dtype) {
  json header;
  header["shape"] = t.shape;
  header["dtype"] = dtype;
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open blob for writing: " + path);
  f << header.dump() << "\n";
  f.write(reinterpret_cast<const char*>(t.data.data()),
          static_cast<std::streamsize>(t.data.size() * sizeof(T)));
  if (!f) throw std::runtime_error("short write to blob: " + path);
}

json read_header(std::ifstream& f, const std::string& path) {
  std::string line;
  if (!std::getline(f, line)) throw std::runtime_error("missing blob header: " + path);
  return json::parse(line);
}

template <typename T>
Tensor<T> load_payload(std::ifstream& f, const json& header, const std::string& path) {
  std::vector<std::int64_t> shape = header.at("shape").get<std::vector<std::int64_t>>();
  Tensor<T> t(shape);
  f.read(reinterpret_cast<char*>(t.data.data()),
         static_cast<std::streamsize>(t.data.size() * sizeof(T)));
  if (f.gcount() != static_cast<std::streamsize>(t.data.size() * sizeof(T)))
    throw std::runtime_error("blob payload truncated: " + path);
  return t;
}

}  // namespace

void save(const std::string& path, const Tensor<float>& t) { save_impl(path, t, "f32"); }
void save(const std::string& path, const Tensor<double>& t) { save_impl(path, t, "f64"); }

Tensor<float> load_f32(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open blob: " + path);
  json h = read_header(f, path);
  if (h.at("dtype") != "f32") throw std::runtime_error("expected f32 blob: " + path);
  return load_payload<float>(f, h, path);
}

Tensor<double> load_f64(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open blob: " + path);
  json h = read_header(f, path);
  if (h.at("dtype") != "f64") throw std::runtime_error("expected f64 blob: " + path);
  return load_payload<double>(f, h, path);
}

std::string dtype_of(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open blob: " + path);
  return read_header(f, path).at("dtype").get<std::string>();
}

template <typename T>
Tensor<T> load(const std::string& path) {
  std::string dt = dtype_of(path);
  if (dt == "f32") return load_f32(path).template cast<T>();
  if (dt == "f64") return load_f64(path).template cast<T>();
  throw std::runtime_error("unknown blob dtype '" + dt + "' in " + path);
}

template Tensor<float> load<float>(const std::string&);
template Tensor<double> load<double>(const std::string&);

void write_file_atomic(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open for writing: " + tmp);
    f << content;
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0)
    throw std::runtime_error("atomic rename failed for " + path);
}

}  // namespace sf::blob
