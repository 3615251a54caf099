#pragma once

// Binary tensor files for exchanging operands with external tools.
//
// Layout, little endian:
//   char[4]  magic "QVTN"
//   u32      version (1)
//   u32      dtype: 0 = f64, 1 = i64, 2 = i8
//   u32      rank
//   u64      dims[rank]
//   data     row-major, prod(dims) elements

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "qvit/engine.hpp"

namespace qvit {

enum class TensorDType : std::uint32_t { F64 = 0, I64 = 1, I8 = 2 };

struct TensorFile {
  TensorDType dtype = TensorDType::F64;
  std::vector<std::int64_t> dims;
  std::vector<double> f64;
  std::vector<std::int64_t> i64;
  std::vector<std::int8_t> i8;

  std::int64_t element_count() const;
  // Rank 1 becomes a single row. Integer data converts to double losslessly
  // up to 2^53; asking for integers from f64 data is a ShapeError.
  Eigen::MatrixXd to_matrix() const;
  CodeMatrix to_codes() const;
  SignMatrix to_signs() const;
};

void write_tensor(const std::string& path, const Eigen::MatrixXd& m);
void write_tensor(const std::string& path, const CodeMatrix& m);
void write_tensor(const std::string& path, const SignMatrix& m);

// Throws ShapeError on a malformed or truncated file.
TensorFile read_tensor(const std::string& path);

}  // namespace qvit
