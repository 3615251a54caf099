#include "qvit/tensor_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "qvit/error.hpp"

static_assert(std::endian::native == std::endian::little, "tensor files assume a little-endian host");

namespace qvit {

namespace {

constexpr char kMagic[4] = {'Q', 'V', 'T', 'N'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put(std::ofstream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::ifstream& in, const std::string& path) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(T))) {
    throw ShapeError("tensor file '" + path + "' is truncated");
  }
  return v;
}

template <typename Scalar>
void write_matrix(const std::string& path, TensorDType dtype, std::int64_t rows, std::int64_t cols,
                  const Scalar* data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot write tensor file '" + path + "'");
  out.write(kMagic, 4);
  put(out, kVersion);
  put(out, static_cast<std::uint32_t>(dtype));
  put(out, std::uint32_t{2});
  put(out, static_cast<std::uint64_t>(rows));
  put(out, static_cast<std::uint64_t>(cols));
  out.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(sizeof(Scalar) * rows * cols));
  if (!out) throw ConfigError("failed writing tensor file '" + path + "'");
}

template <typename Vec>
void read_values(std::ifstream& in, Vec& v, std::int64_t n, const std::string& path) {
  v.resize(static_cast<std::size_t>(n));
  const auto bytes = static_cast<std::streamsize>(sizeof(typename Vec::value_type) * v.size());
  if (!in.read(reinterpret_cast<char*>(v.data()), bytes)) {
    throw ShapeError("tensor file '" + path + "' is truncated");
  }
}

}  // namespace

std::int64_t TensorFile::element_count() const {
  std::int64_t n = 1;
  for (auto d : dims) n *= d;
  return n;
}

namespace {

std::pair<Eigen::Index, Eigen::Index> matrix_shape(const TensorFile& t) {
  if (t.dims.size() == 1) return {1, t.dims[0]};
  if (t.dims.size() == 2) return {t.dims[0], t.dims[1]};
  throw ShapeError("tensor of rank " + std::to_string(t.dims.size()) + " is not a matrix");
}

}  // namespace

Eigen::MatrixXd TensorFile::to_matrix() const {
  const auto [r, c] = matrix_shape(*this);
  Eigen::MatrixXd m(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < c; ++j) {
      const auto k = static_cast<std::size_t>(i * c + j);
      switch (dtype) {
        case TensorDType::F64: m(i, j) = f64[k]; break;
        case TensorDType::I64: m(i, j) = static_cast<double>(i64[k]); break;
        case TensorDType::I8: m(i, j) = i8[k]; break;
      }
    }
  return m;
}

CodeMatrix TensorFile::to_codes() const {
  const auto [r, c] = matrix_shape(*this);
  if (dtype == TensorDType::F64) throw ShapeError("expected integer codes, file holds f64 data");
  CodeMatrix m(r, c);
  for (Eigen::Index k = 0; k < r * c; ++k) {
    m.data()[k] = dtype == TensorDType::I64 ? i64[static_cast<std::size_t>(k)] : i8[static_cast<std::size_t>(k)];
  }
  return m;
}

SignMatrix TensorFile::to_signs() const {
  const CodeMatrix codes = to_codes();
  for (Eigen::Index k = 0; k < codes.size(); ++k) {
    const auto v = codes.data()[k];
    if (v != 1 && v != -1) throw ShapeError("sign tensor holds " + std::to_string(v) + ", expected +1 or -1");
  }
  return codes.cast<std::int8_t>();
}

void write_tensor(const std::string& path, const Eigen::MatrixXd& m) {
  const RowMatrix<double> rm = m;
  write_matrix(path, TensorDType::F64, rm.rows(), rm.cols(), rm.data());
}

void write_tensor(const std::string& path, const CodeMatrix& m) {
  write_matrix(path, TensorDType::I64, m.rows(), m.cols(), m.data());
}

void write_tensor(const std::string& path, const SignMatrix& m) {
  write_matrix(path, TensorDType::I8, m.rows(), m.cols(), m.data());
}

TensorFile read_tensor(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open tensor file '" + path + "'");
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) {
    throw ShapeError("'" + path + "' is not a tensor file (bad magic)");
  }
  const auto version = get<std::uint32_t>(in, path);
  if (version != kVersion) throw ShapeError("tensor file version " + std::to_string(version) + " is not supported");
  const auto dtype = get<std::uint32_t>(in, path);
  if (dtype > 2) throw ShapeError("tensor file has unknown dtype " + std::to_string(dtype));
  const auto rank = get<std::uint32_t>(in, path);
  if (rank == 0 || rank > 8) throw ShapeError("tensor file has unsupported rank " + std::to_string(rank));

  TensorFile t;
  t.dtype = static_cast<TensorDType>(dtype);
  for (std::uint32_t i = 0; i < rank; ++i) {
    const auto d = get<std::uint64_t>(in, path);
    if (d == 0 || d > (std::uint64_t{1} << 32)) throw ShapeError("tensor file has a bad dimension");
    t.dims.push_back(static_cast<std::int64_t>(d));
  }
  const std::int64_t n = t.element_count();
  switch (t.dtype) {
    case TensorDType::F64: read_values(in, t.f64, n, path); break;
    case TensorDType::I64: read_values(in, t.i64, n, path); break;
    case TensorDType::I8: read_values(in, t.i8, n, path); break;
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    throw ShapeError("tensor file '" + path + "' has trailing bytes");
  }
  return t;
}

}  // namespace qvit
