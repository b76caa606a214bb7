#pragma once

// Named float32 tensors in one little-endian file:
//   "HQST" u32 version u32 count, then per tensor
//   u32 name_len, name, u32 ndim, i64 dims[ndim], f32 data (row-major).

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace hqs::io {

struct Tensor {
  std::string name;
  std::vector<std::int64_t> shape;
  std::vector<float> data;
};

Tensor from_matrix(std::string name, const Eigen::MatrixXf& m);
Eigen::MatrixXf to_matrix(const Tensor& t);

// Written to a temporary sibling and renamed into place.
void write_tensors(const std::filesystem::path& path, const std::vector<Tensor>& tensors);
std::vector<Tensor> read_tensors(const std::filesystem::path& path);

const Tensor& find_tensor(const std::vector<Tensor>& tensors, const std::string& name);

}  // namespace hqs::io
